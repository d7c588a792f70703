#include "aulmpm/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace aulmpm {

template <int Dim>
double cfl_dt(std::span<const Particle<Dim>> particles, std::span<const MaterialModel> materials, double dx,
              double cfl, double frame_dt)
{
    if (!(cfl > 0.0 && cfl <= 1.0))
        throw ContractViolation("cfl_dt: cfl must lie in (0, 1]");
    double speed = 0.0;
    for (const auto& p : particles) {
        const auto& m = materials[static_cast<std::size_t>(p.material)];
        speed = std::max(speed, p.velocity.norm() + m.wave_speed(p.deformation.total().determinant()));
    }
    if (!(speed > 0.0))
        return frame_dt;
    return std::min(frame_dt, cfl * dx / speed);
}

template <int Dim>
AngularMomentum<Dim> angular_momentum(std::span<const Particle<Dim>> particles,
                                      std::span<const MomentMatrix<Dim>> moments, const Vec<Dim>& center)
{
    AngularMomentum<Dim> L{};
    if constexpr (Dim == 3)
        L.setZero();
    for (std::size_t k = 0; k < particles.size(); ++k) {
        const auto& p = particles[k];
        const Vec<Dim> x = p.position - center;
        // sum_i W (F_sn r)(C r)^T = F_sn K^-1 C^T
        const Mat<Dim> A = p.deformation.Fsn * moments[k].K.inverse() * p.velocity_gradient.transpose();
        if constexpr (Dim == 2) {
            L += p.mass * (x.x() * p.velocity.y() - x.y() * p.velocity.x() + A(0, 1) - A(1, 0));
        } else {
            const Vec<3> affine(A(1, 2) - A(2, 1), A(2, 0) - A(0, 2), A(0, 1) - A(1, 0));
            L += p.mass * (x.cross(p.velocity) + affine);
        }
    }
    return L;
}

template <int Dim>
Simulation<Dim>::Simulation(Scene<Dim> scene) : scene_(std::move(scene))
{
    scene_.solver.validate();
    for (std::size_t i = 0; i < scene_.objects.size(); ++i) {
        const auto& range = scene_.objects[i];
        Body<Dim> body;
        body.begin = range.begin;
        body.end = range.end;
        body.material = i;
        auto parts = body_particles(body);
        for (const auto& p : parts)
            body.max_mass = std::max(body.max_mass, p.mass);
        body.map = initial_configuration<Dim>(parts, scene_.grid, scene_.kernel);
        bind_grid(body.map, body.grid, body.max_mass);
        bodies_.push_back(std::move(body));
    }
    measure(stats_);
}

template <int Dim>
std::span<Particle<Dim>> Simulation<Dim>::body_particles(const Body<Dim>& body)
{
    return std::span<Particle<Dim>>(scene_.particles).subspan(body.begin, body.end - body.begin);
}

template <int Dim>
ExecutionPolicy Simulation<Dim>::execution_policy() const
{
    ExecutionPolicy policy;
    policy.strict_determinism = scene_.solver.strict_determinism;
    return policy;
}

template <int Dim>
double Simulation<Dim>::next_dt() const
{
    const auto& s = scene_.solver;
    if (s.cfl <= 0.0)
        return std::min(s.dt, s.frame_dt);
    return cfl_dt<Dim>(scene_.particles, scene_.materials, scene_.grid.dx, s.cfl, s.frame_dt);
}

template <int Dim>
void Simulation<Dim>::force_update()
{
    for (auto& body : bodies_) {
        apply_update<Dim>(body_particles(body), body.map);
        bind_grid(body.map, body.grid, body.max_mass);
        ++body.updates;
    }
    stats_.updates = 0;
    for (const auto& body : bodies_)
        stats_.updates += body.updates;
}

template <int Dim>
const FrameStats<Dim>& Simulation<Dim>::step(double dt)
{
    if (!(dt > 0.0))
        throw ContractViolation("step: dt must be positive");
    const auto started = std::chrono::steady_clock::now();
    const auto& solver = scene_.solver;
    const auto policy = execution_policy();
    const std::span<const MaterialModel> materials(scene_.materials);
    const std::span<const Collider<Dim>> colliders(scene_.colliders);

    FrameStats<Dim> s;
    s.step = stats_.step + 1;
    s.time = stats_.time + dt;
    s.dt = dt;
    std::size_t marked = 0;

    for (auto& body : bodies_) {
        auto parts = body_particles(body);
        std::span<const Particle<Dim>> cparts(parts);

        // 1. P2G
        p2g<Dim>(cparts, body.map, body.grid, solver.transfer, policy);

        // 2. grid momentum
        compute_stresses<Dim>(parts, materials);
        grid_internal_forces<Dim>(cparts, body.map, body.grid, solver.transfer, policy);
        explicit_update<Dim>(body.grid, dt, scene_.gravity);
        if (solver.integrator == Integrator::semi_implicit) {
            const auto r = implicit_update<Dim>(body.grid, cparts, body.map, materials, dt, solver.transfer);
            s.solver_iterations += r.iterations;
            s.solver_fell_back = s.solver_fell_back || r.fell_back;
        }
        grid_collisions<Dim>(body.grid, colliders, dt);
        advance_node_positions<Dim>(body.grid, dt);

        // 3-4. G2P and particle advection
        g2p<Dim>(body.grid, parts, body.map, dt, solver.transfer, solver.flip_blend);

        // 5. deformation gradient and plasticity
        s.inverted += update_deformation<Dim>(parts, materials, dt).inverted;

        // 6. configuration update
        std::vector<double> deltas(parts.size());
        for (std::size_t p = 0; p < parts.size(); ++p)
            deltas[p] = deformation_delta<Dim>(parts[p].deformation);
        auto decision = should_update(deltas, solver.policy);
        if (solver.mode == SolverMode::total_lagrangian)
            decision.update = false;
        else if (solver.mode == SolverMode::eulerian)
            decision.update = true;
        marked += decision.marked;
        if (decision.update) {
            apply_update<Dim>(parts, body.map);
            bind_grid(body.map, body.grid, body.max_mass);
            ++body.updates;
        }
    }

    s.marked_fraction = scene_.particles.empty()
                            ? 0.0
                            : static_cast<double>(marked) / static_cast<double>(scene_.particles.size());
    measure(s);
    s.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    stats_ = s;
    return stats_;
}

template <int Dim>
void Simulation<Dim>::measure(FrameStats<Dim>& s) const
{
    s.total_mass = 0.0;
    s.momentum.setZero();
    s.kinetic_energy = 0.0;
    s.min_J = std::numeric_limits<double>::infinity();
    s.max_J = -std::numeric_limits<double>::infinity();
    for (const auto& p : scene_.particles) {
        s.total_mass += p.mass;
        s.momentum += p.mass * p.velocity;
        s.kinetic_energy += 0.5 * p.mass * p.velocity.squaredNorm();
        const double J = p.deformation.Jsn * p.deformation.J0s;
        s.min_J = std::min(s.min_J, J);
        s.max_J = std::max(s.max_J, J);
    }
    const Vec<Dim> center = scene_.grid.origin + 0.5 * (scene_.grid.upper() - scene_.grid.origin);
    if constexpr (Dim == 3)
        s.angular_momentum.setZero();
    else
        s.angular_momentum = 0.0;
    s.updates = 0;
    for (const auto& body : bodies_) {
        const auto parts = std::span<const Particle<Dim>>(scene_.particles).subspan(body.begin, body.end - body.begin);
        s.angular_momentum += angular_momentum<Dim>(parts, body.map.moments, center);
        s.updates += body.updates;
    }
}

template class Simulation<2>;
template class Simulation<3>;
template double cfl_dt<2>(std::span<const Particle<2>>, std::span<const MaterialModel>, double, double, double);
template double cfl_dt<3>(std::span<const Particle<3>>, std::span<const MaterialModel>, double, double, double);
template AngularMomentum<2> angular_momentum<2>(std::span<const Particle<2>>, std::span<const MomentMatrix<2>>,
                                                const Vec<2>&);
template AngularMomentum<3> angular_momentum<3>(std::span<const Particle<3>>, std::span<const MomentMatrix<3>>,
                                                const Vec<3>&);

} // namespace aulmpm
