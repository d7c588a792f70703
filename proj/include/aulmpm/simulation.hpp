#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "aulmpm/grid_transfers.hpp"
#include "aulmpm/scene.hpp"

namespace aulmpm {

template <int Dim>
struct FrameStats {
    std::uint64_t step = 0;
    double time = 0.0;
    double dt = 0.0;
    double total_mass = 0.0;
    Vec<Dim> momentum = Vec<Dim>::Zero();
    AngularMomentum<Dim> angular_momentum{};
    double kinetic_energy = 0.0;
    std::uint64_t updates = 0; // cumulative over all objects
    double marked_fraction = 0.0;
    double min_J = 1.0;
    double max_J = 1.0;
    std::size_t inverted = 0;
    int solver_iterations = 0;
    bool solver_fell_back = false;
    double wall_time = 0.0; // seconds spent in step()
};

// One object: its particles share a reference configuration and a grid.
template <int Dim>
struct Body {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t material = 0;
    ConfigurationMap<Dim> map;
    SparseGrid<Dim> grid;
    double max_mass = 0.0;
    std::uint64_t updates = 0;
};

template <int Dim>
class Simulation {
public:
    explicit Simulation(Scene<Dim> scene);

    // Runs the six phases once with step size dt.
    const FrameStats<Dim>& step(double dt);

    // Fixed dt, or the CFL estimate when solver.cfl > 0; never above frame_dt.
    double next_dt() const;

    // Moves every object's reference configuration to the current one.
    void force_update();

    const Scene<Dim>& scene() const { return scene_; }
    std::span<const Particle<Dim>> particles() const { return scene_.particles; }
    std::span<Particle<Dim>> particles() { return scene_.particles; }
    const std::vector<Body<Dim>>& bodies() const { return bodies_; }
    const FrameStats<Dim>& stats() const { return stats_; }
    double time() const { return stats_.time; }
    ExecutionPolicy execution_policy() const;

private:
    void measure(FrameStats<Dim>& s) const;
    std::span<Particle<Dim>> body_particles(const Body<Dim>& body);

    Scene<Dim> scene_;
    std::vector<Body<Dim>> bodies_;
    FrameStats<Dim> stats_;
};

// cfl * dx / (max |v_p| + c_max), capped by frame_dt.
template <int Dim>
double cfl_dt(std::span<const Particle<Dim>> particles, std::span<const MaterialModel> materials, double dx,
              double cfl, double frame_dt);

// Angular momentum about `center`, including the affine (APIC) contribution.
template <int Dim>
AngularMomentum<Dim> angular_momentum(std::span<const Particle<Dim>> particles,
                                      std::span<const MomentMatrix<Dim>> moments, const Vec<Dim>& center);

} // namespace aulmpm
