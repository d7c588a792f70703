#include "aulmpm/output.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace aulmpm {

namespace {

constexpr int kStrictDigits = 17;
constexpr int kDefaultDigits = 9;

void put(std::string& line, double value, int digits)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, value);
    line += buf;
}

const char* axis_name(int d)
{
    static const char* names[] = {"x", "y", "z"};
    return names[d];
}

} // namespace

std::filesystem::path frame_path(const std::filesystem::path& out_dir, int frame)
{
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d.csv", frame);
    return out_dir / name;
}

template <int Dim>
void write_frame(const std::filesystem::path& path, const Simulation<Dim>& sim, bool strict)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write frame file " + path.string());
    const int digits = strict ? kStrictDigits : kDefaultDigits;
    std::string line = "id";
    for (int d = 0; d < Dim; ++d)
        line += std::string(",") + axis_name(d);
    for (int d = 0; d < Dim; ++d)
        line += std::string(",v") + axis_name(d);
    line += ",J_total,epoch\n";
    out << line;
    for (const auto& body : sim.bodies()) {
        for (std::size_t k = body.begin; k < body.end; ++k) {
            const auto& p = sim.particles()[k];
            line = std::to_string(p.id);
            for (int d = 0; d < Dim; ++d) {
                line += ',';
                put(line, p.position[d], digits);
            }
            for (int d = 0; d < Dim; ++d) {
                line += ',';
                put(line, p.velocity[d], digits);
            }
            line += ',';
            put(line, p.deformation.J0s * p.deformation.Jsn, digits);
            line += ',' + std::to_string(body.map.epoch) + '\n';
            out << line;
        }
    }
    if (!out)
        throw IoError("failed while writing " + path.string());
}

template <int Dim>
StatsWriter<Dim>::StatsWriter(const std::filesystem::path& path, bool strict)
    : path_(path), out_(path), digits_(strict ? kStrictDigits : kDefaultDigits)
{
    if (!out_)
        throw IoError("cannot write stats file " + path.string());
    std::string header = "step,time,dt,total_mass";
    for (int d = 0; d < Dim; ++d)
        header += std::string(",p") + axis_name(d);
    if constexpr (Dim == 2)
        header += ",angular_momentum";
    else
        header += ",Lx,Ly,Lz";
    header += ",kinetic_energy,updates,marked_fraction,min_J,max_J,inverted,solver_iterations,wall_time\n";
    out_ << header;
}

template <int Dim>
void StatsWriter<Dim>::append(const FrameStats<Dim>& s)
{
    std::string line = std::to_string(s.step);
    auto add = [&](double v) {
        line += ',';
        put(line, v, digits_);
    };
    add(s.time);
    add(s.dt);
    add(s.total_mass);
    for (int d = 0; d < Dim; ++d)
        add(s.momentum[d]);
    if constexpr (Dim == 2)
        add(s.angular_momentum);
    else
        for (int d = 0; d < 3; ++d)
            add(s.angular_momentum[d]);
    add(s.kinetic_energy);
    line += ',' + std::to_string(s.updates);
    add(s.marked_fraction);
    add(s.min_J);
    add(s.max_J);
    line += ',' + std::to_string(s.inverted) + ',' + std::to_string(s.solver_iterations);
    add(s.wall_time);
    line += '\n';
    out_ << line;
    if (!out_)
        throw IoError("failed while writing " + path_.string());
}

template <int Dim>
RunSummary run(Simulation<Dim>& sim, int frames, const std::filesystem::path& out_dir)
{
    if (frames < 0)
        throw ValidationError("frames must be non-negative");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
    const auto& solver = sim.scene().solver;
    const bool strict = solver.strict_determinism;
    StatsWriter<Dim> stats(out_dir / "stats.csv", strict);
    write_frame(frame_path(out_dir, 0), sim, strict);

    RunSummary summary;
    const bool fixed = solver.cfl <= 0.0;
    const auto steps_per_frame = std::max<long long>(1, std::llround(solver.frame_dt / std::min(solver.dt, solver.frame_dt)));
    for (int f = 1; f <= frames; ++f) {
        if (fixed) {
            for (long long k = 0; k < steps_per_frame; ++k) {
                stats.append(sim.step(sim.next_dt()));
                ++summary.steps;
            }
        } else {
            const double target = solver.frame_dt * f;
            while (sim.time() < target * (1.0 - 1e-12)) {
                const double dt = std::min(sim.next_dt(), target - sim.time());
                stats.append(sim.step(dt));
                ++summary.steps;
            }
        }
        write_frame(frame_path(out_dir, f), sim, strict);
    }
    summary.updates = sim.stats().updates;
    summary.time = sim.time();
    return summary;
}

template void write_frame<2>(const std::filesystem::path&, const Simulation<2>&, bool);
template void write_frame<3>(const std::filesystem::path&, const Simulation<3>&, bool);
template class StatsWriter<2>;
template class StatsWriter<3>;
template RunSummary run<2>(Simulation<2>&, int, const std::filesystem::path&);
template RunSummary run<3>(Simulation<3>&, int, const std::filesystem::path&);

} // namespace aulmpm
