#pragma once

#include <string_view>

#include "aulmpm/errors.hpp"
#include "aulmpm/types.hpp"

namespace aulmpm {

enum class MaterialKind { fixed_corotated, snow, weakly_compressible_fluid };

MaterialKind parse_material_kind(std::string_view name);
std::string_view to_string(MaterialKind kind);

struct MaterialModel {
    MaterialKind kind = MaterialKind::fixed_corotated;
    double mu = 0.0;
    double lambda = 0.0;
    // Snow: singular values of F_e stay in [1 - theta_c, 1 + theta_s].
    double theta_c = 2.5e-2;
    double theta_s = 7.5e-3;
    double hardening = 10.0;
    // Tait equation of state p = k ((1/J)^gamma - 1).
    double bulk = 0.0;
    double gamma = 7.0;
    double rho0 = 1000.0;

    static MaterialModel from_young(MaterialKind kind, double youngs, double poisson, double density);

    void validate() const;

    // Lame parameters scaled by the snow hardening multiplier.
    double hardened_mu(double plastic_J) const;
    double hardened_lambda(double plastic_J) const;

    // Dilatational wave speed at volume ratio J.
    double wave_speed(double J = 1.0) const;
};

template <int Dim>
struct StressState {
    Mat<Dim> P = Mat<Dim>::Zero(); // first Piola-Kirchhoff stress, dPsi/dF
    double psi = 0.0;              // energy per reference volume
    bool clamped_J = false;        // fluid J was floored
};

inline constexpr double kFluidMinJ = 1e-6;

template <int Dim>
struct PolarDecomposition {
    Mat<Dim> R;
    Mat<Dim> S;
};

// Rotation R with det R = +1 and symmetric S = R^T F. Stays finite for det F <= 0.
template <int Dim>
PolarDecomposition<Dim> polar_decompose(const Mat<Dim>& F);

// J F^-T, defined for singular F.
template <int Dim>
Mat<Dim> cofactor(const Mat<Dim>& F);

template <int Dim>
StressState<Dim> energy_and_piola(const Mat<Dim>& F, const MaterialModel& model, double plastic_J = 1.0);

// P_s = P_0 F_0s^T / J_0s.
template <int Dim>
Mat<Dim> mapped_stress(const Mat<Dim>& P0, const Mat<Dim>& F0s, double J0s);

template <int Dim>
struct PlasticSplit {
    Mat<Dim> F_elastic;
    Mat<Dim> F_plastic;
};

template <int Dim>
PlasticSplit<Dim> plastic_project(const Mat<Dim>& F_elastic, const Mat<Dim>& F_plastic, const MaterialModel& model);

// (d^2 Psi / dF dF) : dF evaluated at F.
template <int Dim>
Mat<Dim> hessian_action(const Mat<Dim>& F, const Mat<Dim>& dF, const MaterialModel& model, double plastic_J = 1.0);

} // namespace aulmpm
