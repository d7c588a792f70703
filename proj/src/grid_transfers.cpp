#include "aulmpm/grid_transfers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

namespace aulmpm {

BoundaryType parse_boundary_type(std::string_view name)
{
    if (name == "sticky")
        return BoundaryType::sticky;
    if (name == "slip")
        return BoundaryType::slip;
    throw ConfigurationError("unknown boundary type '" + std::string(name) + "'");
}

Transfer parse_transfer(std::string_view name)
{
    if (name == "mls")
        return Transfer::mls;
    if (name == "kernel")
        return Transfer::kernel;
    throw ConfigurationError("unknown transfer scheme '" + std::string(name) + "'");
}

std::string_view to_string(Transfer transfer)
{
    return transfer == Transfer::mls ? "mls" : "kernel";
}

std::size_t ExecutionPolicy::scatter_chunks(std::size_t particles) const
{
    if (strict_determinism || particles == 0)
        return 1;
    std::size_t n = chunks ? chunks : static_cast<std::size_t>(tbb::this_task_arena::max_concurrency());
    return std::clamp<std::size_t>(n, 1, particles);
}

namespace {

constexpr int kMaxStencil = 64;

// Scatter-add from particles to `channels` doubles per grid slot. Chunks
// accumulate privately and merge in chunk order, so the result only depends
// on the chunk count.
template <class Fn>
std::vector<double> scatter(std::size_t n_particles, std::size_t n_slots, int channels, std::size_t chunks, Fn&& fn)
{
    const std::size_t width = n_slots * static_cast<std::size_t>(channels);
    if (chunks <= 1) {
        std::vector<double> out(width, 0.0);
        for (std::size_t p = 0; p < n_particles; ++p)
            fn(p, out.data());
        return out;
    }
    std::vector<std::vector<double>> local(chunks);
    tbb::parallel_for(std::size_t{0}, chunks, [&](std::size_t c) {
        local[c].assign(width, 0.0);
        const std::size_t begin = n_particles * c / chunks;
        const std::size_t end = n_particles * (c + 1) / chunks;
        for (std::size_t p = begin; p < end; ++p)
            fn(p, local[c].data());
    });
    std::vector<double> out = std::move(local[0]);
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, width, 4096), [&](const auto& r) {
        for (std::size_t c = 1; c < chunks; ++c)
            for (std::size_t k = r.begin(); k < r.end(); ++k)
                out[k] += local[c][k];
    });
    return out;
}

template <class Fn>
void for_each_index(std::size_t n, Fn&& fn)
{
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n, 1024), [&](const auto& r) {
        for (std::size_t k = r.begin(); k < r.end(); ++k)
            fn(k);
    });
}

template <int Dim>
void require_bound(const ConfigurationMap<Dim>& map, const SparseGrid<Dim>& grid, const char* who)
{
    if (grid.bound_epoch != map.epoch || !map.caches_current())
        throw ContractViolation(std::string(who) + ": grid or stencil caches are stale for epoch "
                                + std::to_string(map.epoch));
}

} // namespace

template <int Dim>
void bind_grid(ConfigurationMap<Dim>& map, SparseGrid<Dim>& grid, double max_particle_mass)
{
    grid = SparseGrid<Dim>(map.grid);
    for (auto& stencil : map.stencils)
        for (auto& e : stencil.entries)
            e.slot = grid.activate(e.node);
    grid.mass_epsilon = kMassEpsilonFactor * max_particle_mass;
    grid.bound_epoch = map.epoch;
}

template <int Dim>
void p2g(std::span<const Particle<Dim>> particles, const ConfigurationMap<Dim>& map, SparseGrid<Dim>& grid,
         Transfer transfer, const ExecutionPolicy& policy)
{
    require_bound(map, grid, "p2g");
    if (particles.size() != map.size())
        throw ContractViolation("p2g: particle count does not match the configuration map");
    constexpr int C = 2 + 2 * Dim; // mass, momentum, sum q W, sum W
    for (std::size_t p = 0; p < particles.size(); ++p)
        if (map.stencils[p].entries.empty() || !(map.stencils[p].weight_sum() > 0.0))
            throw OrphanParticleError("p2g: particle " + std::to_string(p) + " has no stencil coverage");

    const auto sums = scatter(particles.size(), grid.slot_count(), C, policy.scatter_chunks(particles.size()),
                              [&](std::size_t p, double* acc) {
                                  const auto& part = particles[p];
                                  const auto& stencil = map.stencils[p];
                                  for (const auto& e : stencil.entries) {
                                      double* row = acc + e.slot * C;
                                      const double mw = part.mass * e.w;
                                      Vec<Dim> v = part.velocity;
                                      if (transfer == Transfer::mls)
                                          v += part.velocity_gradient * e.r;
                                      row[0] += mw;
                                      for (int d = 0; d < Dim; ++d) {
                                          row[1 + d] += mw * v[d];
                                          row[1 + Dim + d] += e.w * part.position[d];
                                      }
                                      row[1 + 2 * Dim] += e.w;
                                  }
                              });

    const auto& slots = grid.active_slots();
    for_each_index(slots.size(), [&](std::size_t k) {
        auto& node = grid.at(slots[k]);
        const double* row = sums.data() + slots[k] * C;
        node.clear_payload();
        node.mass = row[0];
        node.weight_sum = row[1 + 2 * Dim];
        for (int d = 0; d < Dim; ++d) {
            node.velocity[d] = row[1 + d];
            node.position[d] = row[1 + Dim + d];
        }
        if (node.weight_sum > 0.0)
            node.position /= node.weight_sum;
        else
            node.position = node.reference;
        if (node.mass > grid.mass_epsilon)
            node.velocity /= node.mass;
        else
            node.velocity.setZero();
        node.velocity_old = node.velocity;
    });
}

template <int Dim>
std::size_t compute_stresses(std::span<Particle<Dim>> particles, std::span<const MaterialModel> materials)
{
    std::vector<unsigned char> clamped(particles.size(), 0);
    for_each_index(particles.size(), [&](std::size_t p) {
        auto& part = particles[p];
        const auto& def = part.deformation;
        const auto& model = materials[static_cast<std::size_t>(part.material)];
        const auto state = energy_and_piola<Dim>(def.total(), model, part.J_plastic);
        clamped[p] = state.clamped_J;
        if (def.J0s > 0.0)
            part.stress = mapped_stress<Dim>(state.P, def.F0s, def.J0s);
        else if (def.J0s < 0.0)
            part.stress = state.P * def.F0s.transpose() / def.J0s; // inverted reference, same formula
        else
            part.stress.setZero();
    });
    return static_cast<std::size_t>(std::count(clamped.begin(), clamped.end(), 1));
}

template <int Dim>
void grid_internal_forces(std::span<const Particle<Dim>> particles, const ConfigurationMap<Dim>& map,
                          SparseGrid<Dim>& grid, Transfer transfer, const ExecutionPolicy& policy)
{
    require_bound(map, grid, "grid_internal_forces");
    const auto sums = scatter(particles.size(), grid.slot_count(), Dim, policy.scatter_chunks(particles.size()),
                              [&](std::size_t p, double* acc) {
                                  const auto& part = particles[p];
                                  // V0 P0 F0s^T = V0 J0s P_s
                                  const Mat<Dim> A = part.volume0 * part.deformation.J0s * part.stress;
                                  const auto& K = map.moments[p];
                                  for (const auto& e : map.stencils[p].entries) {
                                      const Vec<Dim> f = -A * force_weight(e, K, transfer);
                                      double* row = acc + e.slot * Dim;
                                      for (int d = 0; d < Dim; ++d)
                                          row[d] += f[d];
                                  }
                              });
    const auto& slots = grid.active_slots();
    for_each_index(slots.size(), [&](std::size_t k) {
        auto& node = grid.at(slots[k]);
        for (int d = 0; d < Dim; ++d)
            node.force[d] = sums[slots[k] * Dim + d];
    });
}

template <int Dim>
void explicit_update(SparseGrid<Dim>& grid, double dt, const Vec<Dim>& gravity)
{
    const auto& slots = grid.active_slots();
    for_each_index(slots.size(), [&](std::size_t k) {
        auto& node = grid.at(slots[k]);
        node.velocity_old = node.velocity;
        if (node.mass <= grid.mass_epsilon)
            return;
        node.velocity += dt * (node.force / node.mass + gravity);
    });
}

template <int Dim>
ImplicitOperator<Dim>::ImplicitOperator(std::span<const Particle<Dim>> particles, const ConfigurationMap<Dim>& map,
                                        const SparseGrid<Dim>& grid, std::span<const MaterialModel> materials,
                                        double dt, Transfer transfer)
    : particles_(particles), map_(map), grid_(grid), materials_(materials), dt_(dt), transfer_(transfer)
{
    require_bound(map, grid, "ImplicitOperator");
    const auto& slots = grid.active_slots();
    dense_.assign(grid.slot_count(), -1);
    masses_.resize(slots.size());
    free_.resize(slots.size());
    for (std::size_t k = 0; k < slots.size(); ++k) {
        dense_[static_cast<std::size_t>(slots[k])] = static_cast<std::int64_t>(k);
        masses_[k] = grid.at(slots[k]).mass;
        free_[k] = masses_[k] > grid.mass_epsilon;
    }
    weights_.resize(particles.size());
    for (std::size_t p = 0; p < particles.size(); ++p) {
        const auto& entries = map.stencils[p].entries;
        weights_[p].resize(entries.size());
        for (std::size_t j = 0; j < entries.size(); ++j)
            weights_[p][j] = force_weight(entries[j], map.moments[p], transfer);
    }
}

template <int Dim>
void ImplicitOperator<Dim>::hessian(std::span<const Vec<Dim>> u, std::span<Vec<Dim>> out) const
{
    if (u.size() != size() || out.size() != size())
        throw ContractViolation("ImplicitOperator: vector size mismatch");
    // Sequential scatter keeps the operator bitwise symmetric in its use of u.
    for (auto& o : out)
        o.setZero();
    for (std::size_t p = 0; p < particles_.size(); ++p) {
        const auto& part = particles_[p];
        const auto& entries = map_.stencils[p].entries;
        const auto& g = weights_[p];
        Mat<Dim> dFs = Mat<Dim>::Zero();
        for (std::size_t j = 0; j < entries.size(); ++j) {
            const auto k = static_cast<std::size_t>(dense_[static_cast<std::size_t>(entries[j].slot)]);
            if (free_[k])
                dFs += u[k] * g[j].transpose();
        }
        const auto& def = part.deformation;
        const auto& model = materials_[static_cast<std::size_t>(part.material)];
        const Mat<Dim> dP = hessian_action<Dim>(def.total(), dFs * def.F0s, model, part.J_plastic);
        const Mat<Dim> A = part.volume0 * dP * def.F0s.transpose();
        for (std::size_t j = 0; j < entries.size(); ++j) {
            const auto k = static_cast<std::size_t>(dense_[static_cast<std::size_t>(entries[j].slot)]);
            if (free_[k])
                out[k] += A * g[j];
        }
    }
}

template <int Dim>
void ImplicitOperator<Dim>::apply(std::span<const Vec<Dim>> u, std::span<Vec<Dim>> out) const
{
    hessian(u, out);
    const double dt2 = dt_ * dt_;
    for (std::size_t k = 0; k < size(); ++k)
        out[k] = free_[k] ? Vec<Dim>(masses_[k] * u[k] + dt2 * out[k]) : u[k];
}

template <int Dim>
ImplicitResult implicit_update(SparseGrid<Dim>& grid, std::span<const Particle<Dim>> particles,
                               const ConfigurationMap<Dim>& map, std::span<const MaterialModel> materials, double dt,
                               Transfer transfer, double tolerance, int max_iterations)
{
    ImplicitOperator<Dim> op(particles, map, grid, materials, dt, transfer);
    const auto& slots = grid.active_slots();
    const std::size_t n = op.size();
    std::vector<Vec<Dim>> x(n), b(n), r(n), p(n), Ap(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& v_hat = grid.at(slots[k]).velocity;
        x[k] = v_hat;
        b[k] = op.free(k) ? Vec<Dim>(op.mass(k) * v_hat) : v_hat;
    }
    auto dot = [&](const std::vector<Vec<Dim>>& a, const std::vector<Vec<Dim>>& c) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            s += a[k].dot(c[k]);
        return s;
    };

    ImplicitResult result;
    const double b_norm = std::sqrt(dot(b, b));
    op.apply(x, Ap);
    for (std::size_t k = 0; k < n; ++k)
        r[k] = b[k] - Ap[k];
    p = r;
    double rr = dot(r, r);
    result.residual = b_norm > 0.0 ? std::sqrt(rr) / b_norm : 0.0;
    if (result.residual <= tolerance) {
        result.converged = true;
        return result;
    }
    for (int it = 0; it < max_iterations; ++it) {
        op.apply(p, Ap);
        const double pAp = dot(p, Ap);
        if (!(pAp > 0.0) || !std::isfinite(pAp)) {
            result.fell_back = true;
            result.diagnostic = "conjugate gradient breakdown: non-positive curvature at iteration "
                                + std::to_string(it);
            return result; // grid still holds the explicit velocities
        }
        const double alpha = rr / pAp;
        for (std::size_t k = 0; k < n; ++k) {
            x[k] += alpha * p[k];
            r[k] -= alpha * Ap[k];
        }
        const double rr_new = dot(r, r);
        result.iterations = it + 1;
        result.residual = std::sqrt(rr_new) / b_norm;
        if (result.residual <= tolerance) {
            result.converged = true;
            break;
        }
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t k = 0; k < n; ++k)
            p[k] = r[k] + beta * p[k];
    }
    if (!result.converged)
        result.diagnostic = "conjugate gradient hit the iteration cap";
    for (std::size_t k = 0; k < n; ++k)
        grid.at(slots[k]).velocity = x[k];
    return result;
}

template <int Dim>
std::size_t grid_collisions(SparseGrid<Dim>& grid, std::span<const Collider<Dim>> colliders, double dt)
{
    if (colliders.empty())
        return 0;
    const auto& slots = grid.active_slots();
    std::vector<unsigned char> hit(slots.size(), 0);
    for_each_index(slots.size(), [&](std::size_t k) {
        auto& node = grid.at(slots[k]);
        if (node.mass <= grid.mass_epsilon)
            return;
        for (const auto& c : colliders) {
            bool touched = false;
            const Vec<Dim> candidate = node.position + dt * node.velocity;
            node.velocity = c.project(candidate, node.velocity, &touched);
            if (touched) {
                node.collided = true;
                hit[k] = 1;
            }
        }
    });
    return static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
}

template <int Dim>
void advance_node_positions(SparseGrid<Dim>& grid, double dt)
{
    const auto& slots = grid.active_slots();
    for_each_index(slots.size(), [&](std::size_t k) {
        auto& node = grid.at(slots[k]);
        node.position += dt * node.velocity;
    });
}

template <int Dim>
void g2p(const SparseGrid<Dim>& grid, std::span<Particle<Dim>> particles, const ConfigurationMap<Dim>& map, double dt,
         Transfer transfer, double flip_blend)
{
    require_bound(map, grid, "g2p");
    for_each_index(particles.size(), [&](std::size_t p) {
        auto& part = particles[p];
        const auto& stencil = map.stencils[p];
        const std::size_t n = stencil.entries.size();
        std::array<Vec<Dim>, kMaxStencil> node_v;
        Vec<Dim> v_pic = Vec<Dim>::Zero();
        Vec<Dim> dv = Vec<Dim>::Zero();
        for (std::size_t j = 0; j < n; ++j) {
            const auto& e = stencil.entries[j];
            const auto& node = grid.at(e.slot);
            node_v[j] = node.velocity;
            v_pic += e.w * node.velocity;
            dv += e.w * (node.velocity - node.velocity_old);
        }
        if (transfer == Transfer::mls) {
            part.velocity = v_pic;
            part.velocity_gradient =
                velocity_gradient_s<Dim>(v_pic, std::span<const Vec<Dim>>(node_v.data(), n), map, p);
        } else {
            part.velocity = flip_blend * (part.velocity + dv) + (1.0 - flip_blend) * v_pic;
            Mat<Dim> grad = Mat<Dim>::Zero();
            for (std::size_t j = 0; j < n; ++j)
                grad += node_v[j] * stencil.entries[j].grad_w.transpose();
            part.velocity_gradient = grad;
        }
        part.position += dt * v_pic;
    });
}

template <int Dim>
DeformationUpdateStats update_deformation(std::span<Particle<Dim>> particles, std::span<const MaterialModel> materials,
                                          double dt)
{
    std::vector<unsigned char> inverted(particles.size(), 0);
    for_each_index(particles.size(), [&](std::size_t p) {
        auto& part = particles[p];
        part.deformation = advance_F_sn<Dim>(part.deformation, part.velocity_gradient, dt);
        const auto& model = materials[static_cast<std::size_t>(part.material)];
        if (model.kind == MaterialKind::snow) {
            const auto split = plastic_project<Dim>(part.deformation.total(), part.F_plastic, model);
            // Keep F_0s fixed; the elastic correction lands in F_sn.
            part.deformation.Fsn = split.F_elastic * part.deformation.F0s.inverse();
            part.deformation.Jsn = part.deformation.Fsn.determinant();
            part.F_plastic = split.F_plastic;
            part.J_plastic = part.F_plastic.determinant();
        }
        inverted[p] = part.deformation.Jsn <= 0.0;
    });
    return {static_cast<std::size_t>(std::count(inverted.begin(), inverted.end(), 1))};
}

template <int Dim>
DeformationUpdateStats kernel_variant_step(std::span<Particle<Dim>> particles, const ConfigurationMap<Dim>& map,
                                           SparseGrid<Dim>& grid, std::span<const MaterialModel> materials, double dt,
                                           const Vec<Dim>& gravity, std::span<const Collider<Dim>> colliders,
                                           double flip_blend, const ExecutionPolicy& policy)
{
    p2g<Dim>(particles, map, grid, Transfer::kernel, policy);
    compute_stresses<Dim>(particles, materials);
    grid_internal_forces<Dim>(particles, map, grid, Transfer::kernel, policy);
    explicit_update<Dim>(grid, dt, gravity);
    grid_collisions<Dim>(grid, colliders, dt);
    advance_node_positions<Dim>(grid, dt);
    g2p<Dim>(grid, particles, map, dt, Transfer::kernel, flip_blend);
    return update_deformation<Dim>(particles, materials, dt);
}

#define AULMPM_INSTANTIATE(D)                                                                                         \
    template void bind_grid<D>(ConfigurationMap<D>&, SparseGrid<D>&, double);                                         \
    template void p2g<D>(std::span<const Particle<D>>, const ConfigurationMap<D>&, SparseGrid<D>&, Transfer,          \
                         const ExecutionPolicy&);                                                                     \
    template std::size_t compute_stresses<D>(std::span<Particle<D>>, std::span<const MaterialModel>);                 \
    template void grid_internal_forces<D>(std::span<const Particle<D>>, const ConfigurationMap<D>&, SparseGrid<D>&,   \
                                          Transfer, const ExecutionPolicy&);                                          \
    template void explicit_update<D>(SparseGrid<D>&, double, const Vec<D>&);                                          \
    template class ImplicitOperator<D>;                                                                               \
    template ImplicitResult implicit_update<D>(SparseGrid<D>&, std::span<const Particle<D>>,                          \
                                               const ConfigurationMap<D>&, std::span<const MaterialModel>, double,    \
                                               Transfer, double, int);                                                \
    template std::size_t grid_collisions<D>(SparseGrid<D>&, std::span<const Collider<D>>, double);                    \
    template void advance_node_positions<D>(SparseGrid<D>&, double);                                                  \
    template void g2p<D>(const SparseGrid<D>&, std::span<Particle<D>>, const ConfigurationMap<D>&, double, Transfer,  \
                         double);                                                                                     \
    template DeformationUpdateStats update_deformation<D>(std::span<Particle<D>>, std::span<const MaterialModel>,     \
                                                          double);                                                    \
    template DeformationUpdateStats kernel_variant_step<D>(std::span<Particle<D>>, const ConfigurationMap<D>&,        \
                                                           SparseGrid<D>&, std::span<const MaterialModel>, double,    \
                                                           const Vec<D>&, std::span<const Collider<D>>, double,       \
                                                           const ExecutionPolicy&);

AULMPM_INSTANTIATE(2)
AULMPM_INSTANTIATE(3)

#undef AULMPM_INSTANTIATE

} // namespace aulmpm
