#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aulmpm/collider.hpp"
#include "aulmpm/constitutive.hpp"
#include "aulmpm/kinematics.hpp"
#include "aulmpm/sparse_grid.hpp"

namespace aulmpm {

enum class Transfer { mls, kernel };

Transfer parse_transfer(std::string_view name);
std::string_view to_string(Transfer transfer);

struct ExecutionPolicy {
    // Reduce particle scatters in particle-index order regardless of worker count.
    bool strict_determinism = false;
    // Scatter chunks when not strict; 0 picks one per worker.
    std::size_t chunks = 0;

    std::size_t scatter_chunks(std::size_t particles) const;
};

inline constexpr double kMassEpsilonFactor = 1e-12;

// Activates exactly the union of the map's stencil supports and resolves each
// stencil entry's storage slot. Must run after every map rebuild.
template <int Dim>
void bind_grid(ConfigurationMap<Dim>& map, SparseGrid<Dim>& grid, double max_particle_mass);

// Per-entry vector g with f_i = -sum V0 P0 F0s^T g_i and grad_s v = sum v_i (x) g_i:
// K r W for MLS, grad W for the kernel variant.
template <int Dim>
inline Vec<Dim> force_weight(const StencilEntry<Dim>& e, const MomentMatrix<Dim>& m, Transfer transfer)
{
    return transfer == Transfer::mls ? Vec<Dim>(m.K * (e.w * e.r)) : e.grad_w;
}

// Mass, momentum (with the affine term for MLS) and rasterized positions.
template <int Dim>
void p2g(std::span<const Particle<Dim>> particles, const ConfigurationMap<Dim>& map, SparseGrid<Dim>& grid,
         Transfer transfer = Transfer::mls, const ExecutionPolicy& policy = {});

// Sets particle.stress = P_0 F_0s^T / J_0s from the elastic total deformation.
// Returns the number of fluid particles whose J was floored.
template <int Dim>
std::size_t compute_stresses(std::span<Particle<Dim>> particles, std::span<const MaterialModel> materials);

template <int Dim>
void grid_internal_forces(std::span<const Particle<Dim>> particles, const ConfigurationMap<Dim>& map,
                          SparseGrid<Dim>& grid, Transfer transfer = Transfer::mls,
                          const ExecutionPolicy& policy = {});

// v_i <- v_i + dt (f_i / m_i + g) on nodes above the mass threshold.
template <int Dim>
void explicit_update(SparseGrid<Dim>& grid, double dt, const Vec<Dim>& gravity);

// The symmetric operator (M + dt^2 H) over active nodes, matrix-free. Vectors
// are indexed by position in grid.active_slots(); light nodes act as identity.
template <int Dim>
class ImplicitOperator {
public:
    ImplicitOperator(std::span<const Particle<Dim>> particles, const ConfigurationMap<Dim>& map,
                     const SparseGrid<Dim>& grid, std::span<const MaterialModel> materials, double dt,
                     Transfer transfer = Transfer::mls);

    std::size_t size() const { return grid_.active_slots().size(); }

    // out = H u, the energy Hessian with respect to node positions.
    void hessian(std::span<const Vec<Dim>> u, std::span<Vec<Dim>> out) const;

    // out = (M + dt^2 H) u.
    void apply(std::span<const Vec<Dim>> u, std::span<Vec<Dim>> out) const;

    double mass(std::size_t k) const { return masses_[k]; }
    bool free(std::size_t k) const { return free_[k]; }

private:
    std::span<const Particle<Dim>> particles_;
    const ConfigurationMap<Dim>& map_;
    const SparseGrid<Dim>& grid_;
    std::span<const MaterialModel> materials_;
    double dt_;
    Transfer transfer_;
    std::vector<std::int64_t> dense_; // slot -> dense index
    std::vector<double> masses_;
    std::vector<bool> free_;
    std::vector<std::vector<Vec<Dim>>> weights_; // per particle, per stencil entry
};

struct ImplicitResult {
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    bool fell_back = false;
    std::string diagnostic;
};

inline constexpr double kImplicitTolerance = 1e-7;
inline constexpr int kImplicitMaxIterations = 200;

// Solves (M + dt^2 H) v = M v_hat by conjugate gradients, v_hat being the
// current (explicitly updated) grid velocity. On breakdown the explicit
// velocities are kept and the result records why.
template <int Dim>
ImplicitResult implicit_update(SparseGrid<Dim>& grid, std::span<const Particle<Dim>> particles,
                               const ConfigurationMap<Dim>& map, std::span<const MaterialModel> materials, double dt,
                               Transfer transfer = Transfer::mls, double tolerance = kImplicitTolerance,
                               int max_iterations = kImplicitMaxIterations);

// Projects node velocities against colliders at the candidate positions
// q_i + dt v_i. Returns the number of projected nodes.
template <int Dim>
std::size_t grid_collisions(SparseGrid<Dim>& grid, std::span<const Collider<Dim>> colliders, double dt);

// q_i <- q_i + dt v_i.
template <int Dim>
void advance_node_positions(SparseGrid<Dim>& grid, double dt);

// v_p = sum v_i W, q_p += dt v_p, grad_s v_p from the grid. The kernel variant
// blends FLIP and PIC by `flip_blend` and advects with the PIC velocity.
template <int Dim>
void g2p(const SparseGrid<Dim>& grid, std::span<Particle<Dim>> particles, const ConfigurationMap<Dim>& map, double dt,
         Transfer transfer = Transfer::mls, double flip_blend = 0.95);

struct DeformationUpdateStats {
    std::size_t inverted = 0;
};

// F_sn += dt grad_s v, then snow plasticity on the elastic total F_sn F_0s.
template <int Dim>
DeformationUpdateStats update_deformation(std::span<Particle<Dim>> particles, std::span<const MaterialModel> materials,
                                          double dt);

inline constexpr double kDefaultFlipBlend = 0.95;

// One full explicit step of the kernel (shape-function gradient) variant.
template <int Dim>
DeformationUpdateStats kernel_variant_step(std::span<Particle<Dim>> particles, const ConfigurationMap<Dim>& map,
                                           SparseGrid<Dim>& grid, std::span<const MaterialModel> materials, double dt,
                                           const Vec<Dim>& gravity, std::span<const Collider<Dim>> colliders,
                                           double flip_blend = kDefaultFlipBlend, const ExecutionPolicy& policy = {});

} // namespace aulmpm
