#include "aulmpm/property_suite.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "aulmpm/simulation.hpp"

namespace aulmpm {

namespace {

using Clock = std::chrono::steady_clock;

std::string format(const char* fmt, double a, double b = 0.0)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, fmt, a, b);
    return buf;
}

struct Patch {
    std::vector<Particle<2>> particles;
    std::vector<MaterialModel> materials;
    ConfigurationMap<2> map;
    SparseGrid<2> grid;

    void bind()
    {
        double max_mass = 0.0;
        for (const auto& p : particles)
            max_mass = std::max(max_mass, p.mass);
        map = initial_configuration<2>(particles, map.grid, map.order);
        bind_grid(map, grid, max_mass);
    }
};

Patch make_patch(std::mt19937_64& rng, int count, double lo, double hi)
{
    Patch patch;
    patch.map.grid.dx = 0.1;
    patch.map.grid.cells.setConstant(10);
    patch.materials.push_back(MaterialModel::from_young(MaterialKind::fixed_corotated, 1e3, 0.3, 1.0));
    std::uniform_real_distribution<double> pos(lo, hi);
    for (int k = 0; k < count; ++k) {
        Particle<2> p;
        p.position = p.initial_position = Vec<2>(pos(rng), pos(rng));
        p.mass = 1e-3 * (1.0 + 0.1 * k);
        p.volume0 = 1e-3;
        p.id = k;
        patch.particles.push_back(p);
    }
    patch.bind();
    return patch;
}

Mat<2> random_near_identity(std::mt19937_64& rng, double scale)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    Mat<2> m;
    m << 1.0 + u(rng), u(rng), u(rng), 1.0 + u(rng);
    return m;
}

// Sets F_sn = sum_i q_i (x) g_i for node positions q (dense, active-slot order).
void deform_to(Patch& patch, const std::vector<Vec<2>>& q)
{
    const auto& slots = patch.grid.active_slots();
    std::vector<std::size_t> dense(patch.grid.slot_count());
    for (std::size_t k = 0; k < slots.size(); ++k)
        dense[static_cast<std::size_t>(slots[k])] = k;
    for (std::size_t p = 0; p < patch.particles.size(); ++p) {
        Mat<2> F = Mat<2>::Zero();
        for (const auto& e : patch.map.stencils[p].entries)
            F += q[dense[static_cast<std::size_t>(e.slot)]] * force_weight(e, patch.map.moments[p], Transfer::mls).transpose();
        auto& d = patch.particles[p].deformation;
        d.Fsn = F;
        d.Jsn = F.determinant();
    }
}

double total_energy(Patch& patch, const std::vector<Vec<2>>& q)
{
    deform_to(patch, q);
    double U = 0.0;
    for (const auto& p : patch.particles)
        U += p.volume0 * energy_and_piola<2>(p.deformation.total(), patch.materials[0]).psi;
    return U;
}

std::vector<Vec<2>> forces_at(Patch& patch, const std::vector<Vec<2>>& q)
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

std::vector<Vec<2>> perturbed_nodes(Patch& patch, std::mt19937_64& rng, double scale)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<Vec<2>> q;
    for (auto slot : patch.grid.active_slots())
        q.push_back(patch.grid.at(slot).reference + Vec<2>(u(rng), u(rng)));
    return q;
}

void set_reference_deformation(Patch& patch, std::mt19937_64& rng)
{
    for (auto& p : patch.particles) {
        p.deformation.F0s = random_near_identity(rng, 0.2);
        p.deformation.J0s = p.deformation.F0s.determinant();
    }
}

double norm(const std::vector<Vec<2>>& v)
{
    double s = 0.0;
    for (const auto& x : v)
        s += x.squaredNorm();
    return std::sqrt(s);
}

PropertyResult mls_consistency(std::mt19937_64& rng)
{
    GridSpec<2> grid;
    grid.dx = 0.05;
    grid.cells.setConstant(20);
    std::uniform_real_distribution<double> pos(0.2, 0.8), coef(-2.0, 2.0);
    double worst = 0.0, worst_K = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
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
        worst = std::max(worst, (G - A).norm() / A.norm());
        worst_K = std::max(worst_K, (mm.K * grid.dx * grid.dx / 4.0 - Mat<2>::Identity()).norm());
    }
    return {"mls_consistency", worst <= 1e-10 && worst_K <= 1e-10,
            format("gradient err %.2e, K err %.2e", worst, worst_K)};
}

PropertyResult variational_force(std::mt19937_64& rng)
{
    double worst = 0.0;
    for (int s = 0; s < 2; ++s) {
        Patch patch = make_patch(rng, 5, 0.4, 0.6);
        if (s == 1)
            set_reference_deformation(patch, rng);
        const auto q = perturbed_nodes(patch, rng, 0.01);
        const auto f = forces_at(patch, q);
        std::vector<Vec<2>> fd(q.size());
        const double h = 1e-6;
        for (std::size_t k = 0; k < q.size(); ++k)
            for (int d = 0; d < 2; ++d) {
                auto qp = q, qm = q;
                qp[k][d] += h;
                qm[k][d] -= h;
                fd[k][d] = -(total_energy(patch, qp) - total_energy(patch, qm)) / (2 * h);
            }
        std::vector<Vec<2>> diff(q.size());
        for (std::size_t k = 0; k < q.size(); ++k)
            diff[k] = f[k] - fd[k];
        worst = std::max(worst, norm(diff) / norm(fd));
    }
    return {"variational_force", worst <= 1e-5, format("relative err %.2e", worst)};
}

PropertyResult hessian(std::mt19937_64& rng)
{
    Patch patch = make_patch(rng, 5, 0.4, 0.6);
    set_reference_deformation(patch, rng);
    const auto q = perturbed_nodes(patch, rng, 0.01);
    forces_at(patch, q);
    const double dt = 1e-3;
    ImplicitOperator<2> op(patch.particles, patch.map, patch.grid, patch.materials, dt);
    std::normal_distribution<double> n01;
    std::vector<Vec<2>> u(op.size()), v(op.size()), Hu(op.size()), Hv(op.size());
    for (std::size_t k = 0; k < op.size(); ++k) {
        u[k] = op.free(k) ? Vec<2>(n01(rng), n01(rng)) : Vec<2>::Zero();
        v[k] = op.free(k) ? Vec<2>(n01(rng), n01(rng)) : Vec<2>::Zero();
    }
    op.hessian(u, Hu);
    op.hessian(v, Hv);
    double vHu = 0.0, uHv = 0.0;
    for (std::size_t k = 0; k < op.size(); ++k) {
        vHu += v[k].dot(Hu[k]);
        uHv += u[k].dot(Hv[k]);
    }
    const double asym = std::abs(vHu - uHv) / std::max(std::abs(vHu), std::abs(uHv));

    const double h = 1e-6;
    auto qp = q, qm = q;
    for (std::size_t k = 0; k < q.size(); ++k) {
        qp[k] += h * u[k];
        qm[k] -= h * u[k];
    }
    const auto fp = forces_at(patch, qp);
    const auto fm = forces_at(patch, qm);
    std::vector<Vec<2>> diff(q.size()), fd(q.size());
    for (std::size_t k = 0; k < q.size(); ++k) {
        fd[k] = -(fp[k] - fm[k]) / (2 * h);
        diff[k] = op.free(k) ? Vec<2>(Hu[k] - fd[k]) : Vec<2>::Zero();
    }
    const double err = norm(diff) / norm(fd);
    return {"hessian", asym <= 1e-9 && err <= 1e-5, format("asymmetry %.2e, directional err %.2e", asym, err)};
}

PropertyResult conservation(std::mt19937_64& rng)
{
    Patch patch = make_patch(rng, 200, 0.3, 0.7);
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
    double mass_err = 0.0, step_err = 0.0;
    Vec<2> before = m0;
    for (int step = 0; step < 100; ++step) {
        p2g<2>(patch.particles, patch.map, patch.grid);
        double gm = 0.0;
        for (auto slot : patch.grid.active_slots())
            gm += patch.grid.at(slot).mass;
        mass_err = std::max(mass_err, std::abs(gm - mass) / mass);
        explicit_update<2>(patch.grid, 1e-4, Vec<2>::Zero());
        g2p<2>(patch.grid, patch.particles, patch.map, 1e-4);
        const Vec<2> after = momentum();
        step_err = std::max(step_err, (after - before).norm() / m0.norm());
        before = after;
    }
    const double drift = (before - m0).norm() / m0.norm();
    return {"conservation", mass_err <= 1e-14 && step_err <= 1e-12 && drift <= 1e-10,
            format("mass err %.2e, momentum drift %.2e", mass_err, drift)};
}

PropertyResult rigid_motion(std::mt19937_64& rng)
{
    Patch patch = make_patch(rng, 50, 0.35, 0.65);
    set_reference_deformation(patch, rng);
    // Reference stress scale from a 1% stretch.
    std::vector<Vec<2>> stretched;
    for (auto slot : patch.grid.active_slots())
        stretched.push_back(1.01 * patch.grid.at(slot).reference);
    const double scale = norm(forces_at(patch, stretched));
    for (auto& p : patch.particles) {
        p.deformation.F0s = Mat<2>::Identity();
        p.deformation.J0s = 1.0;
    }
    double worst = 0.0;
    std::size_t marked = 0;
    const double theta = 0.7;
    const Mat<2> R = Eigen::Rotation2D<double>(theta).toRotationMatrix();
    const Vec<2> shift(0.013, -0.02);
    for (int motion = 0; motion < 2; ++motion) {
        std::vector<Vec<2>> q;
        for (auto slot : patch.grid.active_slots()) {
            const Vec<2>& x = patch.grid.at(slot).reference;
            q.push_back(motion == 0 ? Vec<2>(x + shift) : Vec<2>(R * x + shift));
        }
        worst = std::max(worst, norm(forces_at(patch, q)) / scale);
        std::vector<double> deltas;
        for (const auto& p : patch.particles)
            deltas.push_back(deformation_delta<2>(p.deformation));
        UpdatePolicy policy{1e-9, 1e-9};
        marked += should_update(deltas, policy).marked;
    }
    return {"rigid_motion", worst <= 1e-10 && marked == 0,
            format("relative force %.2e, marked %.0f", worst, static_cast<double>(marked))};
}

PropertyResult apic_equivalence(std::mt19937_64& rng)
{
    Patch patch = make_patch(rng, 100, 0.3, 0.7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    p2g<2>(patch.particles, patch.map, patch.grid);
    for (auto slot : patch.grid.active_slots())
        patch.grid.at(slot).velocity = Vec<2>(u(rng), u(rng));
    double worst = 0.0;
    for (std::size_t p = 0; p < patch.particles.size(); ++p) {
        const auto& stencil = patch.map.stencils[p];
        std::vector<Vec<2>> nv;
        Vec<2> vp = Vec<2>::Zero();
        Mat<2> B = Mat<2>::Zero(), D = Mat<2>::Zero();
        for (const auto& e : stencil.entries) {
            const Vec<2> v = patch.grid.at(e.slot).velocity;
            nv.push_back(v);
            vp += e.w * v;
            B += e.w * v * e.r.transpose();
            D += e.w * e.r * e.r.transpose();
        }
        const Mat<2> mls = velocity_gradient_s<2>(vp, nv, patch.map, p);
        const Mat<2> apic = B * D.inverse();
        worst = std::max(worst, (mls - apic).norm() / apic.norm());
    }
    return {"apic_equivalence", worst <= 1e-12, format("relative err %.2e", worst)};
}

nlohmann::json ball_scene(const std::string& mode, double epsilon, double eta)
{
    return {
        {"grid", {{"origin", {0.0, 0.0}}, {"size", 1.0}, {"resolution", 16}}},
        {"objects",
         {{{"shape", {{"type", "sphere"}, {"center", {0.5, 0.5}}, {"radius", 0.2}}},
           {"material", {{"kind", "fixed_corotated"}, {"youngs", 1e4}, {"poisson", 0.3}, {"density", 1000.0}}},
           {"spacing", 0.03},
           {"jitter", 0.5},
           {"seed", 3},
           {"velocity", {0.0, -1.0}}}}},
        {"colliders", nlohmann::json::array()},
        {"gravity", {0.0, -9.8}},
        {"solver", {{"mode", mode}, {"epsilon", epsilon}, {"eta", eta}, {"dt", 1e-4}}},
    };
}

double max_position_gap(const std::string& mode_a, double eps_a, double eta_a, const std::string& mode_b,
                        double eps_b, double eta_b, int steps)
{
    Simulation<2> a(load_scene<2>(ball_scene(mode_a, eps_a, eta_a)));
    Simulation<2> b(load_scene<2>(ball_scene(mode_b, eps_b, eta_b)));
    double gap = 0.0;
    for (int k = 0; k < steps; ++k) {
        a.step(1e-4);
        b.step(1e-4);
        for (std::size_t p = 0; p < a.particles().size(); ++p)
            gap = std::max(gap, (a.particles()[p].position - b.particles()[p].position).cwiseAbs().maxCoeff());
    }
    return gap;
}

PropertyResult mode_recovery(std::mt19937_64&)
{
    const double tl = max_position_gap("adaptive", 1e9, 0.1, "total_lagrangian", 0.5, 0.1, 50);
    const double eu = max_position_gap("adaptive", 0.0, 0.0, "eulerian", 0.5, 0.1, 50);
    return {"mode_recovery", tl <= 1e-12 && eu <= 1e-12, format("TL gap %.2e, Eulerian gap %.2e", tl, eu)};
}

PropertyResult composition(std::mt19937_64& rng)
{
    Mat<2> L;
    L << 0.8, 0.3, -0.2, 0.5;
    const double dt = 1e-3;
    auto drive = [&](bool updating) {
        rng.seed(99); // same particles for both twins
        Patch patch = make_patch(rng, 30, 0.45, 0.55);
        Mat<2> G = Mat<2>::Identity(); // exact motion since the last update
        for (int step = 1; step <= 100; ++step) {
            p2g<2>(patch.particles, patch.map, patch.grid);
            for (auto slot : patch.grid.active_slots()) {
                auto& node = patch.grid.at(slot);
                node.velocity = L * (G * node.reference);
            }
            g2p<2>(patch.grid, patch.particles, patch.map, dt);
            update_deformation<2>(patch.particles, patch.materials, dt);
            G = (Mat<2>::Identity() + dt * L) * G;
            if (updating && step % 30 == 0) {
                apply_update<2>(patch.particles, patch.map);
                double max_mass = 0.0;
                for (const auto& p : patch.particles)
                    max_mass = std::max(max_mass, p.mass);
                bind_grid(patch.map, patch.grid, max_mass);
                G.setIdentity();
            }
        }
        std::vector<Mat<2>> F;
        for (const auto& p : patch.particles)
            F.push_back(p.deformation.total());
        return F;
    };
    const auto a = drive(false);
    const auto b = drive(true);
    double worst = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p)
        worst = std::max(worst, (a[p] - b[p]).norm() / a[p].norm());
    return {"composition_invariance", worst <= 1e-10, format("relative F gap %.2e", worst)};
}

} // namespace

std::vector<PropertyResult> run_property_suite(std::uint64_t seed)
{
    using Check = std::function<PropertyResult(std::mt19937_64&)>;
    const std::vector<Check> checks = {mls_consistency, variational_force, hessian,      conservation,
                                       rigid_motion,    apic_equivalence,  mode_recovery, composition};
    std::vector<PropertyResult> results;
    for (const auto& check : checks) {
        std::mt19937_64 rng(seed);
        const auto t0 = Clock::now();
        PropertyResult r;
        try {
            r = check(rng);
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("threw: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        results.push_back(r);
    }
    return results;
}

} // namespace aulmpm
