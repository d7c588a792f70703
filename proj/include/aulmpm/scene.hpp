#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aulmpm/collider.hpp"
#include "aulmpm/constitutive.hpp"
#include "aulmpm/grid_transfers.hpp"
#include "aulmpm/kinematics.hpp"
#include "aulmpm/mls_ops.hpp"
#include "aulmpm/particle.hpp"

namespace aulmpm {

enum class SolverMode { total_lagrangian, eulerian, adaptive };
enum class Integrator { explicit_euler, semi_implicit };

// Accepts the long names and the CLI short forms (tl, euler, implicit).
SolverMode parse_solver_mode(std::string_view name);
std::string_view to_string(SolverMode mode);
Integrator parse_integrator(std::string_view name);
std::string_view to_string(Integrator integrator);

struct SolverConfig {
    SolverMode mode = SolverMode::adaptive;
    UpdatePolicy policy;
    Integrator integrator = Integrator::explicit_euler;
    Transfer transfer = Transfer::mls;
    double dt = 1e-4;
    double cfl = 0.0; // > 0 switches to the CFL time-step policy
    double frame_dt = 1e-3;
    double end_time = 0.0; // run length for convergence studies
    double flip_blend = kDefaultFlipBlend;
    bool strict_determinism = false;

    void validate() const;
};

// Sampled particles of one object occupy [begin, end) of the scene's particle array.
struct ObjectRange {
    std::string name;
    std::size_t begin = 0;
    std::size_t end = 0;
    double spacing = 0.0;
};

template <int Dim>
struct Scene {
    GridSpec<Dim> grid;
    KernelOrder kernel = KernelOrder::quadratic;
    double domain_size = 1.0;
    int resolution = 0;
    std::vector<MaterialModel> materials; // one per object
    std::vector<ObjectRange> objects;
    std::vector<Particle<Dim>> particles;
    std::vector<Collider<Dim>> colliders;
    Vec<Dim> gravity = Vec<Dim>::Zero();
    SolverConfig solver;
};

struct SceneOverrides {
    std::optional<int> resolution;
    std::optional<SolverMode> mode;
    std::optional<Integrator> integrator;
    std::optional<Transfer> transfer;
    std::optional<bool> strict_determinism;
};

// Spatial dimension of a scene document, from the length of grid.origin.
int scene_dimension(const nlohmann::json& doc);

// Schema violations raise ParseError naming the JSON path; physically
// inconsistent scenes raise ValidationError.
template <int Dim>
Scene<Dim> load_scene(const nlohmann::json& doc, const SceneOverrides& overrides = {});

nlohmann::json read_scene_document(const std::filesystem::path& path);

} // namespace aulmpm
