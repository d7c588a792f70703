#include <cstdio>
#include <iostream>
#include <regex>

#include <CLI11.hpp>

#include "aulmpm/output.hpp"
#include "aulmpm/property_suite.hpp"
#include "aulmpm/verify.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct SimArgs {
    std::string scene;
    std::string out;
    int frames = 0;
    std::string mode;
    std::string integrator;
    std::string transfer;
    bool strict = false;
};

struct ConvergeArgs {
    std::string scene;
    std::string levels;
    int bench = 0;
    std::string out;
    std::string mode;
    double end_time = 0.0;
};

aulmpm::SceneOverrides overrides(const std::string& mode, const std::string& integrator, const std::string& transfer,
                                 bool strict)
{
    aulmpm::SceneOverrides o;
    try {
        if (!mode.empty())
            o.mode = aulmpm::parse_solver_mode(mode);
        if (!integrator.empty())
            o.integrator = aulmpm::parse_integrator(integrator);
        if (!transfer.empty())
            o.transfer = aulmpm::parse_transfer(transfer);
    } catch (const aulmpm::ConfigurationError& e) {
        throw aulmpm::ValidationError(e.what());
    }
    if (strict)
        o.strict_determinism = true;
    return o;
}

template <int Dim>
int simulate(const nlohmann::json& doc, const SimArgs& args)
{
    auto scene = aulmpm::load_scene<Dim>(doc, overrides(args.mode, args.integrator, args.transfer, args.strict));
    std::printf("scene: %zu particles, %d^%d grid, mode %s\n", scene.particles.size(), scene.resolution, Dim,
                std::string(aulmpm::to_string(scene.solver.mode)).c_str());
    aulmpm::Simulation<Dim> sim(std::move(scene));
    const auto summary = aulmpm::run(sim, args.frames, args.out);
    std::printf("steps %llu, time %.6g s, configuration updates %llu\n",
                static_cast<unsigned long long>(summary.steps), summary.time,
                static_cast<unsigned long long>(summary.updates));
    return 0;
}

int run_sim(const SimArgs& args)
{
    const auto doc = aulmpm::read_scene_document(args.scene);
    return aulmpm::scene_dimension(doc) == 2 ? simulate<2>(doc, args) : simulate<3>(doc, args);
}

int run_converge(const ConvergeArgs& args)
{
    static const std::regex range(R"((\d+)\.\.(\d+))");
    std::smatch m;
    if (!std::regex_match(args.levels, m, range))
        throw aulmpm::ValidationError("--levels expects i..j, got '" + args.levels + "'");
    aulmpm::ConvergenceOptions options;
    options.first_level = std::stoi(m[1]);
    options.last_level = std::stoi(m[2]);
    options.bench_level = args.bench;
    options.overrides = overrides(args.mode, "", "", false);
    if (args.end_time > 0.0)
        options.end_time = args.end_time;
    options.progress = [](int level, double seconds) {
        std::printf("level %d (%d^2) finished in %.2f s\n", level, 1 << level, seconds);
        std::fflush(stdout);
    };
    const auto doc = aulmpm::read_scene_document(args.scene);
    const auto report = aulmpm::convergence_study(doc, options);
    aulmpm::write_convergence_csv(report, args.out);
    for (const auto& row : report.levels) {
        if (row.completed)
            std::printf("%4d^2  dx %.6g  E_disp %.6e  E_vel %.6e\n", row.resolution, row.dx, row.e_displacement,
                        row.e_velocity);
        else
            std::printf("%4d^2  failed: %s\n", row.resolution, row.message.c_str());
    }
    auto slope = [](const char* name, const aulmpm::SlopeFit& fit) {
        if (fit.degenerate)
            std::printf("%s slope: degenerate (errors at roundoff)\n", name);
        else
            std::printf("%s slope: %.4f\n", name, fit.slope);
    };
    slope("displacement", report.displacement);
    slope("velocity", report.velocity);
    return report.partial ? kExitRuntime : 0;
}

int run_verify(std::uint64_t seed)
{
    bool ok = true;
    for (const auto& r : aulmpm::run_property_suite(seed)) {
        std::printf("%s  %-28s %s (%.2f s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(),
                    r.seconds);
        ok = ok && r.passed;
    }
    return ok ? 0 : kExitRuntime;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Arbitrary updated Lagrangian MPM"};
    app.require_subcommand(1);

    SimArgs sim;
    auto* sim_cmd = app.add_subcommand("sim", "Run a scene and write per-frame particle snapshots");
    sim_cmd->add_option("scene", sim.scene, "Scene file (JSON)")->required();
    sim_cmd->add_option("--out", sim.out, "Output directory")->required();
    sim_cmd->add_option("--frames", sim.frames, "Number of frames")->required();
    sim_cmd->add_option("--mode", sim.mode, "tl | euler | adaptive");
    sim_cmd->add_option("--integrator", sim.integrator, "explicit | implicit");
    sim_cmd->add_option("--transfer", sim.transfer, "mls | kernel");
    sim_cmd->add_flag("--strict-determinism", sim.strict, "Order-independent reductions, 17-digit output");

    ConvergeArgs conv;
    auto* conv_cmd = app.add_subcommand("converge", "Grid convergence study against a fine benchmark level");
    conv_cmd->add_option("scene", conv.scene, "Scene file (JSON, 2D)")->required();
    conv_cmd->add_option("--levels", conv.levels, "Resolution exponents i..j")->required();
    conv_cmd->add_option("--bench-level", conv.bench, "Benchmark resolution exponent")->required();
    conv_cmd->add_option("--out", conv.out, "CSV table")->required();
    conv_cmd->add_option("--mode", conv.mode, "tl | euler | adaptive");
    conv_cmd->add_option("--time", conv.end_time, "Run length in seconds (defaults to solver.end_time)");

    std::uint64_t seed = 1;
    auto* verify_cmd = app.add_subcommand("verify", "Run the property suite");
    verify_cmd->add_option("--seed", seed, "Random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*sim_cmd)
            return run_sim(sim);
        if (*conv_cmd)
            return run_converge(conv);
        return run_verify(seed);
    } catch (const aulmpm::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const aulmpm::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const aulmpm::ConfigurationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return kExitRuntime;
    }
}
