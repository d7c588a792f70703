#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aulmpm/mls_ops.hpp"
#include "aulmpm/particle.hpp"

namespace aulmpm {

struct UpdatePolicy {
    double epsilon = 0.5; // per-particle deformation threshold on |J_sn - 1|
    double eta = 0.1;     // fraction of marked particles that triggers an update

    void validate() const;
};

struct UpdateDecision {
    bool update = false;
    std::size_t marked = 0;
    double fraction = 0.0;
};

// Per-object reference state at the epoch's configuration t_s. Grid node
// reference positions are the lattice positions of `grid`.
template <int Dim>
struct ConfigurationMap {
    GridSpec<Dim> grid;
    KernelOrder order = KernelOrder::quadratic;
    std::uint64_t epoch = 0;
    std::vector<Vec<Dim>> reference_positions;
    std::vector<Stencil<Dim>> stencils;
    std::vector<MomentMatrix<Dim>> moments;

    ConfigurationMap() = default;
    ConfigurationMap(const GridSpec<Dim>& grid_spec, KernelOrder kernel) : grid(grid_spec), order(kernel) {}

    std::size_t size() const { return reference_positions.size(); }

    // Rebuilds stencils and moment matrices at the current epoch. Throws
    // DegenerateNeighborhoodError / OutOfDomainError naming the particle.
    void rebuild(std::span<const Vec<Dim>> positions);

    bool caches_current() const;
};

// grad_s v_p = sum_i (v_i - v_p) (x) r_pi W K. `node_velocities` is aligned
// with the particle's stencil entries.
template <int Dim>
Mat<Dim> velocity_gradient_s(const Vec<Dim>& particle_velocity, std::span<const Vec<Dim>> node_velocities,
                             const ConfigurationMap<Dim>& map, std::size_t particle);

// F_sn <- F_sn + dt grad_s v. A non-positive J_sn is returned as is; callers
// count it as an inverted element.
template <int Dim>
DeformationState<Dim> advance_F_sn(const DeformationState<Dim>& state, const Mat<Dim>& grad_v, double dt);

template <int Dim>
Mat<Dim> compose_total(const DeformationState<Dim>& state);

template <int Dim>
double deformation_delta(const DeformationState<Dim>& state);

UpdateDecision should_update(std::span<const double> deltas, const UpdatePolicy& policy);

// Moves the reference configuration of `particles` to their current
// positions: F_0s <- F_sn F_0s, F_sn <- I, the affine state is re-expressed
// in the new reference, caches are rebuilt and the epoch advances.
template <int Dim>
void apply_update(std::span<Particle<Dim>> particles, ConfigurationMap<Dim>& map);

// Builds the epoch-0 map from particle positions.
template <int Dim>
ConfigurationMap<Dim> initial_configuration(std::span<const Particle<Dim>> particles, const GridSpec<Dim>& grid,
                                            KernelOrder order);

} // namespace aulmpm
