// Acceptance suite: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "aulmpm/simulation.hpp"
#include "aulmpm/verify.hpp"

using namespace aulmpm;

namespace {

const std::filesystem::path kScenes = AULMPM_SCENE_DIR;

struct Outcome {
    bool passed = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double budget; // seconds
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double frob_norm(const std::vector<Vec<2>>& v)
{
    double s = 0.0;
    for (const auto& x : v)
        s += x.squaredNorm();
    return std::sqrt(s);
}

// Small 2D patch on a 10x10-cell lattice with its own map and grid.
struct Patch {
    std::vector<Particle<2>> particles;
    std::vector<MaterialModel> materials;
    ConfigurationMap<2> map;
    SparseGrid<2> grid;

    double max_mass() const
    {
        double m = 0.0;
        for (const auto& p : particles)
            m = std::max(m, p.mass);
        return m;
    }
};

Patch make_patch(std::mt19937_64& rng, int count, double lo, double hi)
{
    Patch patch;
    GridSpec<2> spec;
    spec.dx = 0.1;
    spec.cells.setConstant(10);
    patch.materials.push_back(MaterialModel::from_young(MaterialKind::fixed_corotated, 2e3, 0.35, 1.0));
    std::uniform_real_distribution<double> u(lo, hi);
    for (int k = 0; k < count; ++k) {
        Particle<2> p;
        p.position = p.initial_position = Vec<2>(u(rng), u(rng));
        p.mass = 2e-3 + 1e-4 * k;
        p.volume0 = 2e-3;
        p.id = k;
        patch.particles.push_back(p);
    }
    patch.map = initial_configuration<2>(patch.particles, spec, KernelOrder::quadratic);
    bind_grid(patch.map, patch.grid, patch.max_mass());
    return patch;
}

std::vector<std::size_t> dense_index(const SparseGrid<2>& grid)
{
    std::vector<std::size_t> dense(grid.slot_count());
    const auto& slots = grid.active_slots();
    for (std::size_t k = 0; k < slots.size(); ++k)
        dense[static_cast<std::size_t>(slots[k])] = k;
    return dense;
}

// F_sn(q) = sum_i q_i (x) K r_i W_i; exact identity at q = reference.
void deform_to(Patch& patch, const std::vector<Vec<2>>& q)
{
    const auto dense = dense_index(patch.grid);
    for (std::size_t p = 0; p < patch.particles.size(); ++p) {
        Mat<2> F = Mat<2>::Zero();
        const Mat<2>& K = patch.map.moments[p].K;
        for (const auto& e : patch.map.stencils[p].entries)
            F += q[dense[static_cast<std::size_t>(e.slot)]] * (K * (e.w * e.r)).transpose();
        patch.particles[p].deformation.Fsn = F;
        patch.particles[p].deformation.Jsn = F.determinant();
    }
}

double energy(Patch& patch, const std::vector<Vec<2>>& q)
{
    deform_to(patch, q);
    double U = 0.0;
    for (const auto& p : patch.particles)
        U += p.volume0 * energy_and_piola<2>(p.deformation.total(), patch.materials[0]).psi;
    return U;
}

std::vector<Vec<2>> forces(Patch& patch, const std::vector<Vec<2>>& q)
{
    deform_to(patch, q);
    p2g<2>(patch.particles, patch.map, patch.grid);
    compute_stresses<2>(patch.particles, patch.materials);
    grid_internal_forces<2>(patch.particles, patch.map, patch.grid);
    std::vector<Vec<2>> f;
    for (auto slot : patch.grid.active_slots())
        f.push_back(patch.grid.at(slot).force);
    return f;
}

std::vector<Vec<2>> reference_nodes(const Patch& patch)
{
    std::vector<Vec<2>> q;
    for (auto slot : patch.grid.active_slots())
        q.push_back(patch.grid.at(slot).reference);
    return q;
}

std::vector<Vec<2>> jitter(std::vector<Vec<2>> q, std::mt19937_64& rng, double scale)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& x : q)
        x += Vec<2>(u(rng), u(rng));
    return q;
}

// Moves the patch by x -> A x + b and makes that the reference configuration.
void advance_epoch(Patch& patch, const Mat<2>& A, const Vec<2>& b)
{
    for (auto& p : patch.particles) {
        p.position = A * p.position + b;
        p.deformation.Fsn = A;
        p.deformation.Jsn = A.determinant();
    }
    apply_update<2>(patch.particles, patch.map);
    bind_grid(patch.map, patch.grid, patch.max_mass());
}

nlohmann::json scene_doc(const char* name)
{
    return read_scene_document(kScenes / name);
}

// ---------------------------------------------------------------------------

Outcome mode_recovery()
{
    auto run = [](double eps, double eta, SolverMode mode) {
        auto doc = scene_doc("falling_ball.json");
        doc["solver"]["epsilon"] = eps;
        doc["solver"]["eta"] = eta;
        SceneOverrides o;
        o.mode = mode;
        Simulation<2> sim(load_scene<2>(doc, o));
        std::vector<std::vector<Vec<2>>> traj;
        for (int k = 0; k < 200; ++k) {
            sim.step(1e-4);
            std::vector<Vec<2>> x;
            for (const auto& p : sim.particles())
                x.push_back(p.position);
            traj.push_back(std::move(x));
        }
        return std::make_pair(traj, sim.stats().updates);
    };
    auto gap = [](const auto& a, const auto& b) {
        double g = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k)
            for (std::size_t p = 0; p < a[k].size(); ++p)
                g = std::max(g, (a[k][p] - b[k][p]).cwiseAbs().maxCoeff());
        return g;
    };
    const auto tl = run(0.5, 0.1, SolverMode::total_lagrangian);
    const auto big = run(1e9, 0.1, SolverMode::adaptive);
    const auto eu = run(0.5, 0.1, SolverMode::eulerian);
    const auto zero = run(0.0, 0.0, SolverMode::adaptive);
    const double g_tl = gap(big.first, tl.first);
    const double g_eu = gap(zero.first, eu.first);
    const std::size_t n = tl.first.front().size();
    return {g_tl <= 1e-12 && g_eu <= 1e-12 && n >= 1500 && n <= 2500 && zero.second == 200 && big.second == 0,
            fmt("%.0f particles; |adaptive(eps=1e9) - TL| = %.2e, |adaptive(0,0) - Eulerian| = %.2e, updates %.0f",
                static_cast<double>(n), g_tl, g_eu, static_cast<double>(zero.second))};
}

Outcome convergence()
{
    const auto doc = scene_doc("rotating_plate.json");
    ConvergenceOptions options;
    options.first_level = 4;
    options.last_level = 7;
    options.bench_level = 8;
    options.end_time = 0.025;
    options.overrides.mode = SolverMode::adaptive;
    const auto report = convergence_study(doc, options);
    const double sd = report.displacement.slope, sv = report.velocity.slope;
    const bool ok = !report.partial && !report.displacement.degenerate && !report.velocity.degenerate && sd >= 1.7
                    && sd <= 2.4 && sv >= 1.5 && sv <= 2.3;
    return {ok, fmt("displacement slope %.3f in [1.7, 2.4], velocity slope %.3f in [1.5, 2.3]", sd, sv)};
}

Outcome mls_consistency()
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> pos(0.3, 0.7), coef(-3.0, 3.0), h(0.01, 0.1);
    double grad_err = 0.0, k_err = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        GridSpec<2> grid;
        grid.dx = h(rng);
        grid.origin = Vec<2>(-0.2, -0.1);
        grid.cells.setConstant(static_cast<int>(std::ceil(1.4 / grid.dx)));
        const Vec<2> c(pos(rng), pos(rng));
        const auto stencil = build_stencil<2>(c, grid, KernelOrder::quadratic);
        const auto mm = moment_matrix(stencil);
        Mat<2> A;
        A << coef(rng), coef(rng), coef(rng), coef(rng);
        const Vec<2> b(coef(rng), coef(rng));
        std::vector<Vec<2>> values;
        for (const auto& e : stencil.entries)
            values.push_back(A * (c + e.r) + b);
        const Mat<2> G = mls_gradient<2, 2>(A * c + b, values, stencil, mm);
        grad_err = std::max(grad_err, (G - A).norm() / A.norm());
        const Mat<2> expected = 4.0 / (grid.dx * grid.dx) * Mat<2>::Identity();
        k_err = std::max(k_err, (mm.K - expected).norm() / expected.norm());
    }
    return {grad_err <= 1e-10 && k_err <= 1e-10,
            fmt("1000 stencils: affine gradient err %.2e, K vs 4/dx^2 I err %.2e", grad_err, k_err)};
}

double force_vs_energy(Patch& patch, std::mt19937_64& rng)
{
    const auto q = jitter(reference_nodes(patch), rng, 0.008);
    const auto f = forces(patch, q);
    const double h = 1e-6;
    std::vector<Vec<2>> diff(q.size()), fd(q.size());
    for (std::size_t k = 0; k < q.size(); ++k) {
        for (int d = 0; d < 2; ++d) {
            auto qp = q, qm = q;
            qp[k][d] += h;
            qm[k][d] -= h;
            fd[k][d] = -(energy(patch, qp) - energy(patch, qm)) / (2.0 * h);
        }
        diff[k] = f[k] - fd[k];
    }
    return frob_norm(diff) / frob_norm(fd);
}

Outcome variational_force()
{
    std::mt19937_64 rng(4);
    Patch initial = make_patch(rng, 5, 0.42, 0.58);
    const double e0 = force_vs_energy(initial, rng);
    Patch later = make_patch(rng, 5, 0.42, 0.58);
    Mat<2> A;
    A << 1.15, 0.2, -0.1, 0.9;
    advance_epoch(later, A, Vec<2>(-0.03, 0.02));
    const double es = force_vs_energy(later, rng);
    return {e0 <= 1e-5 && es <= 1e-5 && later.map.epoch == 1,
            fmt("relative err s=0: %.2e, s=1 epoch: %.2e", e0, es)};
}

Outcome hessian_checks()
{
    std::mt19937_64 rng(5);
    Patch patch = make_patch(rng, 5, 0.42, 0.58);
    Mat<2> A;
    A << 0.95, -0.15, 0.1, 1.1;
    advance_epoch(patch, A, Vec<2>(0.01, 0.0));
    const auto q = jitter(reference_nodes(patch), rng, 0.008);
    forces(patch, q);
    ImplicitOperator<2> op(patch.particles, patch.map, patch.grid, patch.materials, 1e-3);
    std::normal_distribution<double> n01;
    const std::size_t n = op.size();
    std::vector<Vec<2>> u(n), w(n), Au(n), Aw(n), Hu(n);
    for (std::size_t k = 0; k < n; ++k) {
        u[k] = Vec<2>(n01(rng), n01(rng));
        w[k] = Vec<2>(n01(rng), n01(rng));
    }
    op.apply(u, Au);
    op.apply(w, Aw);
    double wAu = 0.0, uAw = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        wAu += w[k].dot(Au[k]);
        uAw += u[k].dot(Aw[k]);
    }
    const double asym = std::abs(wAu - uAw) / std::max(std::abs(wAu), std::abs(uAw));

    for (std::size_t k = 0; k < n; ++k)
        if (!op.free(k))
            u[k].setZero();
    op.hessian(u, Hu);
    const double h = 1e-6;
    auto qp = q, qm = q;
    for (std::size_t k = 0; k < n; ++k) {
        qp[k] += h * u[k];
        qm[k] -= h * u[k];
    }
    const auto fp = forces(patch, qp);
    const auto fm = forces(patch, qm);
    std::vector<Vec<2>> fd(n), diff(n);
    for (std::size_t k = 0; k < n; ++k) {
        fd[k] = -(fp[k] - fm[k]) / (2.0 * h);
        diff[k] = op.free(k) ? Vec<2>(Hu[k] - fd[k]) : Vec<2>::Zero();
    }
    const double err = frob_norm(diff) / frob_norm(fd);
    return {asym <= 1e-9 && err <= 1e-5, fmt("asymmetry %.2e, directional FD err %.2e", asym, err)};
}

Outcome conservation()
{
    std::mt19937_64 rng(6);
    Patch patch = make_patch(rng, 300, 0.3, 0.7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& p : patch.particles) {
        p.velocity = Vec<2>(u(rng), u(rng));
        p.velocity_gradient << u(rng), u(rng), u(rng), u(rng);
    }
    auto momentum = [&] {
        Vec<2> m = Vec<2>::Zero();
        for (const auto& p : patch.particles)
            m += p.mass * p.velocity;
        return m;
    };
    double mass = 0.0;
    for (const auto& p : patch.particles)
        mass += p.mass;
    const Vec<2> m0 = momentum();
    const double scale = std::max(m0.norm(), [&] {
        double s = 0.0;
        for (const auto& p : patch.particles)
            s += p.mass * p.velocity.norm();
        return s;
    }());
    double mass_err = 0.0, per_step = 0.0, grid_err = 0.0;
    Vec<2> before = m0;
    for (int step = 0; step < 1000; ++step) {
        p2g<2>(patch.particles, patch.map, patch.grid);
        double gm = 0.0;
        Vec<2> gp = Vec<2>::Zero();
        for (auto slot : patch.grid.active_slots()) {
            const auto& node = patch.grid.at(slot);
            gm += node.mass;
            gp += node.mass * node.velocity;
        }
        mass_err = std::max(mass_err, std::abs(gm - mass) / mass);
        grid_err = std::max(grid_err, (gp - before).norm() / scale);
        explicit_update<2>(patch.grid, 1e-4, Vec<2>::Zero());
        g2p<2>(patch.grid, patch.particles, patch.map, 1e-4);
        const Vec<2> after = momentum();
        per_step = std::max(per_step, (after - before).norm() / scale);
        before = after;
    }
    const double drift = (before - m0).norm() / scale;
    return {mass_err <= 1e-14 && grid_err <= 1e-12 && per_step <= 1e-12 && drift <= 1e-10,
            fmt("mass err %.2e, P2G momentum err %.2e, per-step drift %.2e, 1000-step drift %.2e", mass_err,
                grid_err, per_step, drift)};
}

Outcome rigid_motion()
{
    std::mt19937_64 rng(7);
    Patch patch = make_patch(rng, 60, 0.35, 0.65);
    std::vector<Vec<2>> stretched;
    for (const auto& x : reference_nodes(patch))
        stretched.push_back(1.01 * x);
    const double scale = frob_norm(forces(patch, stretched));

    double worst = 0.0, max_delta = 0.0;
    std::size_t marked = 0;
    auto probe = [&](const Mat<2>& R, const Vec<2>& t) {
        std::vector<Vec<2>> q;
        for (const auto& x : reference_nodes(patch))
            q.push_back(R * x + t);
        worst = std::max(worst, frob_norm(forces(patch, q)) / scale);
        std::vector<double> deltas;
        for (const auto& p : patch.particles) {
            deltas.push_back(deformation_delta<2>(p.deformation));
            max_delta = std::max(max_delta, deltas.back());
        }
        marked += should_update(deltas, UpdatePolicy{1e-12, 1e-12}).marked;
    };
    const Vec<2> t(0.021, -0.013);
    const Mat<2> R = Eigen::Rotation2D<double>(1.1).toRotationMatrix();
    probe(Mat<2>::Identity(), t);
    probe(R, t);
    // Same motions on top of a rigidly rotated reference epoch.
    const Mat<2> R0 = Eigen::Rotation2D<double>(-0.4).toRotationMatrix();
    advance_epoch(patch, R0, Vec<2>(0.5, 0.5) - R0 * Vec<2>(0.5, 0.5));
    probe(Mat<2>::Identity(), t);
    probe(R, t);
    return {worst <= 1e-10 && marked == 0,
            fmt("relative force %.2e, max dJ %.2e, marked %.0f", worst, max_delta, static_cast<double>(marked))};
}

Outcome droplet_economy()
{
    auto updates = [](SolverMode mode) {
        SceneOverrides o;
        o.mode = mode;
        Simulation<2> sim(load_scene<2>(scene_doc("droplet.json"), o));
        for (int k = 0; k < 104; ++k)
            sim.step(sim.next_dt());
        return std::make_pair(sim.stats().updates, sim.particles().size());
    };
    const auto adaptive = updates(SolverMode::adaptive);
    const auto euler = updates(SolverMode::eulerian);
    return {adaptive.first <= 50 && euler.first == 104,
            fmt("%.0f particles; tau adaptive %.0f, Eulerian %.0f", static_cast<double>(adaptive.second),
                static_cast<double>(adaptive.first), static_cast<double>(euler.first))};
}

struct PlateRun {
    double min_J = 1.0;
    double max_J = 1.0;
    double drift = 0.0;
    bool threw = false;
    std::uint64_t updates = 0;

    bool within() const { return !threw && min_J >= 0.5 && max_J <= 2.0 && drift <= 0.05; }
};

PlateRun spin_plate(SolverMode mode)
{
    SceneOverrides o;
    o.mode = mode;
    PlateRun r;
    try {
        Simulation<2> sim(load_scene<2>(scene_doc("spinning_plate_box.json"), o));
        const double L0 = sim.step(1e-4).angular_momentum;
        for (int k = 1; k < 3000; ++k) {
            const auto& s = sim.step(1e-4);
            r.min_J = std::min(r.min_J, s.min_J);
            r.max_J = std::max(r.max_J, s.max_J);
            r.drift = std::max(r.drift, std::abs(s.angular_momentum - L0) / std::abs(L0));
        }
        r.updates = sim.stats().updates;
    } catch (const Error&) {
        r.threw = true;
    }
    return r;
}

Outcome fracture_proxy()
{
    const auto a = spin_plate(SolverMode::adaptive);
    const auto e = spin_plate(SolverMode::eulerian);
    return {a.within() && !e.within(),
            fmt("adaptive J [%.3f, %.3f] L drift %.3f; ", a.min_J, a.max_J, a.drift)
                + (e.threw ? std::string("Eulerian run failed")
                           : fmt("Eulerian J [%.3f, %.3f] L drift %.3f", e.min_J, e.max_J, e.drift))};
}

Outcome apic_equivalence()
{
    std::mt19937_64 rng(10);
    Patch patch = make_patch(rng, 150, 0.25, 0.75);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    p2g<2>(patch.particles, patch.map, patch.grid);
    for (auto slot : patch.grid.active_slots())
        patch.grid.at(slot).velocity = Vec<2>(u(rng), u(rng));
    const double dx = patch.map.grid.dx;
    const Mat<2> Dinv = 4.0 / (dx * dx) * Mat<2>::Identity();
    double worst = 0.0;
    for (std::size_t p = 0; p < patch.particles.size(); ++p) {
        std::vector<Vec<2>> nv;
        Vec<2> vp = Vec<2>::Zero();
        Mat<2> B = Mat<2>::Zero();
        for (const auto& e : patch.map.stencils[p].entries) {
            const Vec<2> v = patch.grid.at(e.slot).velocity;
            nv.push_back(v);
            vp += e.w * v;
            B += e.w * v * e.r.transpose();
        }
        const Mat<2> mls = velocity_gradient_s<2>(vp, nv, patch.map, p);
        worst = std::max(worst, (mls - B * Dinv).norm() / (B * Dinv).norm());
    }
    return {worst <= 1e-12, fmt("150 particles, worst relative gap %.2e", worst)};
}

Outcome composition_invariance()
{
    Mat<2> L;
    L << 0.6, -0.9, 0.4, -0.3;
    const double dt = 1e-3;
    auto drive = [&](bool updating) {
        std::mt19937_64 rng(11);
        Patch patch = make_patch(rng, 40, 0.44, 0.56);
        Mat<2> G = Mat<2>::Identity(); // node motion since the current reference
        for (int step = 1; step <= 100; ++step) {
            p2g<2>(patch.particles, patch.map, patch.grid);
            for (auto slot : patch.grid.active_slots()) {
                auto& node = patch.grid.at(slot);
                node.velocity = L * (G * node.reference);
            }
            g2p<2>(patch.grid, patch.particles, patch.map, dt);
            update_deformation<2>(patch.particles, patch.materials, dt);
            G = (Mat<2>::Identity() + dt * L) * G;
            if (updating && (step == 17 || step == 50 || step == 83)) {
                apply_update<2>(patch.particles, patch.map);
                bind_grid(patch.map, patch.grid, patch.max_mass());
                G.setIdentity();
            }
        }
        std::vector<Mat<2>> F;
        for (const auto& p : patch.particles)
            F.push_back(p.deformation.total());
        return std::make_pair(F, patch.map.epoch);
    };
    const auto fixed = drive(false);
    const auto moved = drive(true);
    double worst = 0.0;
    for (std::size_t p = 0; p < fixed.first.size(); ++p)
        worst = std::max(worst, (fixed.first[p] - moved.first[p]).norm() / fixed.first[p].norm());
    return {worst <= 1e-10 && moved.second == 3 && fixed.second == 0,
            fmt("3 forced updates, worst relative F gap %.2e", worst)};
}

} // namespace

int main()
{
    const std::vector<Criterion> criteria = {
        {1, "mode recovery", 30, mode_recovery},
        {2, "convergence slopes", 600, convergence},
        {3, "MLS consistency", 5, mls_consistency},
        {4, "variational force", 5, variational_force},
        {5, "Hessian checks", 5, hessian_checks},
        {6, "conservation", 30, conservation},
        {7, "rigid-motion silence", 5, rigid_motion},
        {8, "update economy", 120, droplet_economy},
        {9, "fracture-resistance proxy", 120, fracture_proxy},
        {10, "APIC/MLS equivalence", 5, apic_equivalence},
        {11, "composition invariance", 30, composition_invariance},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool ok = o.passed && seconds < c.budget;
        failed += ok ? 0 : 1;
        std::printf("%s  %2d %-26s %s [%.2f s / %.0f s]\n", ok ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    seconds, c.budget);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
