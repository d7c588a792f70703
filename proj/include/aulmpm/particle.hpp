#pragma once

#include <cstdint>

#include "aulmpm/types.hpp"

namespace aulmpm {

// Deformation split across the initial (0), reference (s) and current (n)
// configurations: F_0n = F_sn * F_0s.
template <int Dim>
struct DeformationState {
    Mat<Dim> F0s = Mat<Dim>::Identity();
    Mat<Dim> Fsn = Mat<Dim>::Identity();
    double J0s = 1.0;
    double Jsn = 1.0;

    Mat<Dim> total() const { return Fsn * F0s; }
};

template <int Dim>
struct Particle {
    double mass = 0.0;
    double volume0 = 0.0; // V_p^0
    Vec<Dim> position = Vec<Dim>::Zero();
    Vec<Dim> initial_position = Vec<Dim>::Zero();
    Vec<Dim> velocity = Vec<Dim>::Zero();
    // Velocity gradient with respect to the reference configuration; doubles
    // as the APIC affine state.
    Mat<Dim> velocity_gradient = Mat<Dim>::Zero();
    DeformationState<Dim> deformation;
    // Snow only: plastic part of the total deformation.
    Mat<Dim> F_plastic = Mat<Dim>::Identity();
    double J_plastic = 1.0;
    // Stress measured in the reference configuration, P_0 F_0s^T / J_0s.
    Mat<Dim> stress = Mat<Dim>::Zero();
    int material = 0;
    int object = 0;
    std::int64_t id = 0;
};

} // namespace aulmpm
