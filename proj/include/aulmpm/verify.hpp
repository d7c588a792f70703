#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "aulmpm/scene.hpp"

namespace aulmpm {

// sqrt(sum |a_p - b_p|^2 / n_p).
template <int Dim>
double error_norm(std::span<const Vec<Dim>> field, std::span<const Vec<Dim>> bench);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    bool degenerate = false;
};

// Least-squares line through (log2 dx, log2 error).
SlopeFit fit_slope(std::span<const double> dx, std::span<const double> errors);

struct ConvergenceLevel {
    int level = 0;
    int resolution = 0;
    double dx = 0.0;
    double e_displacement = 0.0;
    double e_velocity = 0.0;
    bool completed = false;
    std::string message;
};

struct ConvergenceReport {
    std::vector<ConvergenceLevel> levels; // coarse to fine, bench excluded
    int bench_level = 0;
    SlopeFit displacement;
    SlopeFit velocity;
    bool partial = false;
};

struct ConvergenceOptions {
    int first_level = 4;
    int last_level = 7;
    int bench_level = 8;
    SceneOverrides overrides; // resolution is set per level
    std::optional<double> end_time;
    // Called after each finished run with (level, wall seconds).
    std::function<void(int, double)> progress;
};

// Runs the 2D scene at resolutions 2^level with the same particle set and
// compares final displacements and velocities against the bench level.
ConvergenceReport convergence_study(const nlohmann::json& scene, const ConvergenceOptions& options);

void write_convergence_csv(const ConvergenceReport& report, const std::filesystem::path& path);

struct UpdateStats {
    std::uint64_t steps = 0;
    std::uint64_t updates = 0;
    double tau = 0.0;         // updates per 104 steps
    double update_cost = 0.0; // mean extra wall time of update-bearing steps
};

inline constexpr double kTauWindow = 104.0;

UpdateStats update_stats(std::istream& stats_csv);
UpdateStats update_stats(const std::filesystem::path& stats_csv);

} // namespace aulmpm
