#include "aulmpm/verify.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aulmpm/simulation.hpp"

namespace aulmpm {

template <int Dim>
double error_norm(std::span<const Vec<Dim>> field, std::span<const Vec<Dim>> bench)
{
    if (field.size() != bench.size())
        throw ContractViolation("error_norm: field sizes differ (" + std::to_string(field.size()) + " vs "
                                + std::to_string(bench.size()) + ")");
    if (field.empty())
        throw ContractViolation("error_norm: empty fields");
    double sum = 0.0;
    for (std::size_t p = 0; p < field.size(); ++p)
        sum += (field[p] - bench[p]).squaredNorm();
    return std::sqrt(sum / static_cast<double>(field.size()));
}

SlopeFit fit_slope(std::span<const double> dx, std::span<const double> errors)
{
    if (dx.size() != errors.size() || dx.size() < 2)
        throw ContractViolation("fit_slope: need at least two (dx, error) pairs");
    SlopeFit fit;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(dx.size());
    for (std::size_t k = 0; k < dx.size(); ++k) {
        if (!(errors[k] > 0.0) || !(dx[k] > 0.0)) {
            fit.degenerate = true;
            return fit;
        }
        const double x = std::log2(dx[k]);
        const double y = std::log2(errors[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0) {
        fit.degenerate = true;
        return fit;
    }
    fit.slope = (n * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

namespace {

struct Snapshot {
    std::vector<Vec<2>> displacement;
    std::vector<Vec<2>> velocity;
};

Snapshot run_level(const nlohmann::json& doc, int level, const ConvergenceOptions& options)
{
    SceneOverrides o = options.overrides;
    o.resolution = 1 << level;
    auto scene = load_scene<2>(doc, o);
    const double end_time = options.end_time.value_or(scene.solver.end_time);
    if (!(end_time > 0.0))
        throw ValidationError("solver.end_time: a positive run length is required for convergence studies");
    const double dt = scene.solver.dt;
    const auto steps = std::llround(end_time / dt);
    Simulation<2> sim(std::move(scene));
    for (long long k = 0; k < steps; ++k)
        sim.step(dt);
    Snapshot snap;
    for (const auto& p : sim.particles()) {
        snap.displacement.push_back(p.position - p.initial_position);
        snap.velocity.push_back(p.velocity);
    }
    return snap;
}

double rms(const std::vector<Vec<2>>& field)
{
    double s = 0.0;
    for (const auto& v : field)
        s += v.squaredNorm();
    return std::sqrt(s / static_cast<double>(field.size()));
}

} // namespace

ConvergenceReport convergence_study(const nlohmann::json& doc, const ConvergenceOptions& options)
{
    if (scene_dimension(doc) != 2)
        throw ValidationError("convergence studies are 2D only");
    if (options.first_level > options.last_level || options.last_level >= options.bench_level
        || options.first_level < 2)
        throw ValidationError("levels must satisfy 2 <= first <= last < bench");

    ConvergenceReport report;
    report.bench_level = options.bench_level;
    auto timed = [&](int level) {
        const auto t0 = std::chrono::steady_clock::now();
        auto snap = run_level(doc, level, options);
        if (options.progress)
            options.progress(level, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        return snap;
    };
    const Snapshot bench = timed(options.bench_level);

    std::vector<double> dxs, ed, ev;
    const double domain = doc.at("grid").at("size").get<double>();
    for (int level = options.first_level; level <= options.last_level; ++level) {
        ConvergenceLevel row;
        row.level = level;
        row.resolution = 1 << level;
        row.dx = domain / row.resolution;
        try {
            const Snapshot snap = timed(level);
            row.e_displacement = error_norm<2>(snap.displacement, bench.displacement);
            row.e_velocity = error_norm<2>(snap.velocity, bench.velocity);
            row.completed = true;
            dxs.push_back(row.dx);
            ed.push_back(row.e_displacement);
            ev.push_back(row.e_velocity);
        } catch (const Error& e) {
            row.message = e.what();
            report.partial = true;
        }
        report.levels.push_back(row);
    }
    if (dxs.size() >= 2) {
        report.displacement = fit_slope(dxs, ed);
        report.velocity = fit_slope(dxs, ev);
    } else {
        report.displacement.degenerate = report.velocity.degenerate = true;
    }
    // Errors at roundoff level carry no order information.
    const double floor_d = 1e-12 * rms(bench.displacement);
    const double floor_v = 1e-12 * rms(bench.velocity);
    auto below = [](const std::vector<double>& e, double floor) {
        for (double x : e)
            if (x > floor)
                return false;
        return true;
    };
    if (below(ed, floor_d))
        report.displacement.degenerate = true;
    if (below(ev, floor_v))
        report.velocity.degenerate = true;
    return report;
}

void write_convergence_csv(const ConvergenceReport& report, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.precision(17);
    out << "level,resolution,dx,e_displacement,e_velocity,completed\n";
    for (const auto& r : report.levels)
        out << r.level << ',' << r.resolution << ',' << r.dx << ',' << r.e_displacement << ',' << r.e_velocity << ','
            << (r.completed ? 1 : 0) << '\n';
    if (!out)
        throw IoError("failed while writing " + path.string());
}

UpdateStats update_stats(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("stats: missing header");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ','))
            header.push_back(col);
    }
    auto column = [&](const std::string& name) {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name)
                return k;
        throw ParseError("stats: column '" + name + "' missing");
    };
    const auto c_updates = column("updates");
    const auto c_wall = column("wall_time");

    UpdateStats out;
    std::uint64_t previous = 0;
    double update_time = 0.0, plain_time = 0.0;
    std::uint64_t update_steps = 0, plain_steps = 0;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != header.size())
            throw ParseError("stats: row " + std::to_string(row) + " has " + std::to_string(cells.size())
                             + " columns, expected " + std::to_string(header.size()));
        std::uint64_t updates = 0;
        double wall = 0.0;
        try {
            updates = std::stoull(cells[c_updates]);
            wall = std::stod(cells[c_wall]);
        } catch (const std::exception&) {
            throw ParseError("stats: row " + std::to_string(row) + " is not numeric");
        }
        if (updates < previous)
            throw ParseError("stats: row " + std::to_string(row) + " decreases the cumulative update count");
        if (updates > previous) {
            update_time += wall;
            ++update_steps;
        } else {
            plain_time += wall;
            ++plain_steps;
        }
        previous = updates;
        ++out.steps;
    }
    out.updates = previous;
    out.tau = out.steps ? static_cast<double>(out.updates) * kTauWindow / static_cast<double>(out.steps) : 0.0;
    if (update_steps) {
        const double baseline = plain_steps ? plain_time / static_cast<double>(plain_steps) : 0.0;
        out.update_cost = update_time / static_cast<double>(update_steps) - baseline;
    }
    return out;
}

UpdateStats update_stats(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open stats file " + path.string());
    return update_stats(in);
}

template double error_norm<2>(std::span<const Vec<2>>, std::span<const Vec<2>>);
template double error_norm<3>(std::span<const Vec<3>>, std::span<const Vec<3>>);

} // namespace aulmpm
