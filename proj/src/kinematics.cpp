#include "aulmpm/kinematics.hpp"

#include <cmath>
#include <string>

namespace aulmpm {

void UpdatePolicy::validate() const
{
    if (!(epsilon >= 0.0))
        throw ConfigurationError("update policy: epsilon must be >= 0");
    if (!(eta >= 0.0 && eta <= 1.0))
        throw ConfigurationError("update policy: eta must lie in [0, 1]");
}

template <int Dim>
void ConfigurationMap<Dim>::rebuild(std::span<const Vec<Dim>> positions)
{
    reference_positions.assign(positions.begin(), positions.end());
    stencils.resize(positions.size());
    moments.resize(positions.size());
    for (std::size_t p = 0; p < positions.size(); ++p) {
        try {
            build_stencil_into(positions[p], grid, order, stencils[p]);
            stencils[p].epoch = epoch;
            moments[p] = moment_matrix(stencils[p]);
        } catch (const DegenerateNeighborhoodError& e) {
            throw DegenerateNeighborhoodError("particle " + std::to_string(p) + ": " + e.what(),
                                              static_cast<std::ptrdiff_t>(p));
        } catch (const OutOfDomainError& e) {
            throw OutOfDomainError("particle " + std::to_string(p) + ": " + e.what());
        }
    }
}

template <int Dim>
bool ConfigurationMap<Dim>::caches_current() const
{
    if (stencils.size() != reference_positions.size() || moments.size() != reference_positions.size())
        return false;
    for (const auto& s : stencils)
        if (s.epoch != epoch)
            return false;
    return true;
}

template <int Dim>
Mat<Dim> velocity_gradient_s(const Vec<Dim>& particle_velocity, std::span<const Vec<Dim>> node_velocities,
                             const ConfigurationMap<Dim>& map, std::size_t particle)
{
    if (particle >= map.stencils.size())
        throw ContractViolation("velocity_gradient_s: particle index outside the configuration map");
    const auto& stencil = map.stencils[particle];
    if (stencil.epoch != map.epoch)
        throw ContractViolation("velocity_gradient_s: stencil cache is stale for epoch " + std::to_string(map.epoch));
    return mls_gradient<Dim, Dim>(particle_velocity, node_velocities, stencil, map.moments[particle]);
}

template <int Dim>
DeformationState<Dim> advance_F_sn(const DeformationState<Dim>& state, const Mat<Dim>& grad_v, double dt)
{
    if (!(dt > 0.0))
        throw ContractViolation("advance_F_sn: dt must be positive");
    DeformationState<Dim> out = state;
    out.Fsn += dt * grad_v;
    out.Jsn = out.Fsn.determinant();
    return out;
}

template <int Dim>
Mat<Dim> compose_total(const DeformationState<Dim>& state)
{
    return state.Fsn * state.F0s;
}

template <int Dim>
double deformation_delta(const DeformationState<Dim>& state)
{
    // J_ss = 1 by definition of the reference configuration.
    return std::abs(state.Fsn.determinant() - 1.0);
}

UpdateDecision should_update(std::span<const double> deltas, const UpdatePolicy& policy)
{
    if (deltas.empty())
        throw ContractViolation("should_update: no particles");
    UpdateDecision out;
    for (double d : deltas)
        if (d >= policy.epsilon)
            ++out.marked;
    out.fraction = static_cast<double>(out.marked) / static_cast<double>(deltas.size());
    out.update = out.fraction >= policy.eta;
    return out;
}

template <int Dim>
void apply_update(std::span<Particle<Dim>> particles, ConfigurationMap<Dim>& map)
{
    if (particles.size() != map.size())
        throw ContractViolation("apply_update: particle count does not match the configuration map");
    std::vector<Vec<Dim>> positions(particles.size());
    for (std::size_t p = 0; p < particles.size(); ++p) {
        auto& part = particles[p];
        auto& def = part.deformation;
        // grad_s' v = grad_s v * dq_s/dq_n with q_s' = q_n.
        if (std::abs(def.Jsn) > 1e-12)
            part.velocity_gradient = (part.velocity_gradient * def.Fsn.inverse()).eval();
        def.F0s = def.Fsn * def.F0s;
        def.J0s = def.F0s.determinant();
        def.Fsn.setIdentity();
        def.Jsn = 1.0;
        positions[p] = part.position;
    }
    ++map.epoch;
    map.rebuild(positions);
}

template <int Dim>
ConfigurationMap<Dim> initial_configuration(std::span<const Particle<Dim>> particles, const GridSpec<Dim>& grid,
                                            KernelOrder order)
{
    ConfigurationMap<Dim> map(grid, order);
    std::vector<Vec<Dim>> positions(particles.size());
    for (std::size_t p = 0; p < particles.size(); ++p)
        positions[p] = particles[p].position;
    map.rebuild(positions);
    return map;
}

#define AULMPM_INSTANTIATE(D)                                                                                         \
    template struct ConfigurationMap<D>;                                                                              \
    template Mat<D> velocity_gradient_s<D>(const Vec<D>&, std::span<const Vec<D>>, const ConfigurationMap<D>&,        \
                                           std::size_t);                                                              \
    template DeformationState<D> advance_F_sn<D>(const DeformationState<D>&, const Mat<D>&, double);                  \
    template Mat<D> compose_total<D>(const DeformationState<D>&);                                                     \
    template double deformation_delta<D>(const DeformationState<D>&);                                                 \
    template void apply_update<D>(std::span<Particle<D>>, ConfigurationMap<D>&);                                      \
    template ConfigurationMap<D> initial_configuration<D>(std::span<const Particle<D>>, const GridSpec<D>&,           \
                                                          KernelOrder);

AULMPM_INSTANTIATE(2)
AULMPM_INSTANTIATE(3)

#undef AULMPM_INSTANTIATE

} // namespace aulmpm
