#include <cmath>
#include <random>

#include <doctest.h>

#include "aulmpm/constitutive.hpp"

using namespace aulmpm;

namespace {

MaterialModel corotated(double mu, double lambda)
{
    MaterialModel m;
    m.mu = mu;
    m.lambda = lambda;
    return m;
}

MaterialModel fluid()
{
    MaterialModel m;
    m.kind = MaterialKind::weakly_compressible_fluid;
    m.bulk = 50.0;
    m.gamma = 7.0;
    return m;
}

MaterialModel snow()
{
    auto m = MaterialModel::from_young(MaterialKind::snow, 140.0, 0.2, 400.0);
    m.theta_c = 0.025;
    m.theta_s = 0.0075;
    m.hardening = 10.0;
    return m;
}

template <int Dim>
Mat<Dim> fd_piola(const Mat<Dim>& F, const MaterialModel& m, double plastic_J = 1.0)
{
    const double h = 1e-6 * (1.0 + F.norm());
    Mat<Dim> P;
    for (int i = 0; i < Dim; ++i)
        for (int j = 0; j < Dim; ++j) {
            Mat<Dim> Fp = F, Fm = F;
            Fp(i, j) += h;
            Fm(i, j) -= h;
            P(i, j) = (energy_and_piola<Dim>(Fp, m, plastic_J).psi - energy_and_piola<Dim>(Fm, m, plastic_J).psi)
                      / (2 * h);
        }
    return P;
}

template <int Dim>
Mat<Dim> random_F(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (;;) {
        Mat<Dim> F = Mat<Dim>::Identity();
        for (int i = 0; i < Dim; ++i)
            for (int j = 0; j < Dim; ++j)
                F(i, j) += u(rng);
        const double J = F.determinant();
        if (J >= 0.3 && J <= 3.0)
            return F;
    }
}

template <int Dim>
Mat<Dim> random_matrix(std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    Mat<Dim> M;
    for (int i = 0; i < Dim; ++i)
        for (int j = 0; j < Dim; ++j)
            M(i, j) = n(rng);
    return M;
}

double inner(const Mat<2>& a, const Mat<2>& b) { return a.cwiseProduct(b).sum(); }

} // namespace

TEST_SUITE("constitutive")
{
    TEST_CASE("rest state carries no stress")
    {
        for (const auto& m : {corotated(1.0, 1.0), fluid(), snow()}) {
            const auto s = energy_and_piola<2>(Mat<2>::Identity(), m);
            CHECK(s.psi == doctest::Approx(0.0).scale(1.0));
            CHECK(s.P.norm() < 1e-12);
        }
    }

    TEST_CASE("fixed corotated stress at diag(2,1)")
    {
        const auto m = corotated(1.0, 1.0);
        const Mat<2> F = Vec<2>(2.0, 1.0).asDiagonal();
        const auto s = energy_and_piola<2>(F, m);
        // R = I, J = 2: psi = mu + lambda/2, P = 2 mu diag(1,0) + lambda cof(F)
        CHECK(s.psi == doctest::Approx(1.5));
        CHECK((s.P - fd_piola<2>(F, m)).norm() <= 1e-6 * s.P.norm());
    }

    TEST_CASE("gradient consistency over random deformations")
    {
        std::mt19937_64 rng(11);
        for (int k = 0; k < 100; ++k) {
            const Mat<2> F2 = random_F<2>(rng);
            const Mat<3> F3 = random_F<3>(rng);
            for (const auto& m : {corotated(3.0, 7.0), fluid()}) {
                const Mat<2> P2 = energy_and_piola<2>(F2, m).P;
                const Mat<3> P3 = energy_and_piola<3>(F3, m).P;
                CHECK((P2 - fd_piola<2>(F2, m)).norm() <= 1e-5 * std::max(1.0, P2.norm()));
                CHECK((P3 - fd_piola<3>(F3, m)).norm() <= 1e-5 * std::max(1.0, P3.norm()));
            }
            const auto s = snow();
            const Mat<2> Ps = energy_and_piola<2>(F2, s, 0.97).P;
            CHECK((Ps - fd_piola<2>(F2, s, 0.97)).norm() <= 1e-5 * std::max(1.0, Ps.norm()));
        }
    }

    TEST_CASE("fluid pressure by hand")
    {
        const auto m = fluid();
        const double J = 0.9;
        const Mat<2> F = Vec<2>(0.9, 1.0).asDiagonal();
        const double p = m.bulk * (std::pow(1.0 / J, m.gamma) - 1.0);
        const Mat<2> expected = -p * J * F.inverse().transpose();
        const auto s = energy_and_piola<2>(F, m);
        CHECK((s.P - expected).norm() < 1e-12 * expected.norm());
        // compressed fluid pushes outward: Cauchy stress is -p I
        const Mat<2> sigma = s.P * F.transpose() / J;
        CHECK((sigma + p * Mat<2>::Identity()).norm() < 1e-10 * p);
        CHECK_FALSE(s.clamped_J);
    }

    TEST_CASE("inverted fluid J is floored")
    {
        const Mat<2> F = Vec<2>(-0.5, 1.0).asDiagonal();
        const auto s = energy_and_piola<2>(F, fluid());
        CHECK(s.clamped_J);
        CHECK(s.P.allFinite());
    }

    TEST_CASE("non-finite input is a contract violation")
    {
        Mat<2> F = Mat<2>::Identity();
        F(0, 1) = std::nan("");
        CHECK_THROWS_AS(energy_and_piola<2>(F, corotated(1, 1)), ContractViolation);
    }

    TEST_CASE("rotation invariance")
    {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> angle(-M_PI, M_PI);
        const auto m = corotated(2.0, 5.0);
        for (int k = 0; k < 50; ++k) {
            const Mat<2> F = random_F<2>(rng);
            const Mat<2> R = Eigen::Rotation2D<double>(angle(rng)).toRotationMatrix();
            CHECK(energy_and_piola<2>(R * F, m).psi
                  == doctest::Approx(energy_and_piola<2>(F, m).psi).epsilon(1e-10));
            const Mat<3> F3 = random_F<3>(rng);
            const Mat<3> R3 = Eigen::AngleAxisd(angle(rng), Vec<3>(1, 2, -1).normalized()).toRotationMatrix();
            CHECK(energy_and_piola<3>(R3 * F3, m).psi
                  == doctest::Approx(energy_and_piola<3>(F3, m).psi).epsilon(1e-10));
        }
    }

    TEST_CASE("polar decomposition")
    {
        std::mt19937_64 rng(13);
        for (int k = 0; k < 50; ++k) {
            const Mat<3> F = random_F<3>(rng);
            const auto pd = polar_decompose<3>(F);
            CHECK((pd.R * pd.S - F).norm() < 1e-12);
            CHECK(pd.R.determinant() == doctest::Approx(1.0));
            CHECK((pd.S - pd.S.transpose()).norm() < 1e-12);
        }
        Mat<2> reflect = Vec<2>(-1.0, 1.0).asDiagonal();
        const auto pd = polar_decompose<2>(reflect);
        CHECK(pd.R.determinant() == doctest::Approx(1.0));
        CHECK((pd.R * pd.S - reflect).norm() < 1e-12);
    }

    TEST_CASE("mapped_stress")
    {
        std::mt19937_64 rng(14);
        const auto m = corotated(2.0, 3.0);
        const Mat<2> F = random_F<2>(rng);
        const Mat<2> P = energy_and_piola<2>(F, m).P;
        CHECK(mapped_stress<2>(P, Mat<2>::Identity(), 1.0) == P);
        CHECK(mapped_stress<2>(Mat<2>::Zero(), F, F.determinant()).norm() == 0.0);
        // s = n gives the symmetric Cauchy stress
        const Mat<2> sigma = mapped_stress<2>(P, F, F.determinant());
        CHECK((sigma - sigma.transpose()).norm() < 1e-10 * sigma.norm());
        // chain: map at s, then push through the residual F_sn
        const Mat<2> F0s = random_F<2>(rng);
        const Mat<2> Fsn = F * F0s.inverse();
        const Mat<2> Ps = mapped_stress<2>(P, F0s, F0s.determinant());
        const Mat<2> chained = Ps * Fsn.transpose() / Fsn.determinant();
        CHECK((chained - sigma).norm() < 1e-10 * sigma.norm());
        CHECK_THROWS_AS(mapped_stress<2>(P, F, 0.0), InvalidConfigurationError);
        CHECK_THROWS_AS(mapped_stress<2>(P, F, -0.5), InvalidConfigurationError);
    }

    TEST_CASE("plastic projection")
    {
        const auto m = snow();
        const Mat<2> inside = Vec<2>(1.001, 0.99).asDiagonal();
        const auto same = plastic_project<2>(inside, Mat<2>::Identity(), m);
        CHECK(same.F_elastic == inside);
        CHECK(same.F_plastic == Mat<2>::Identity());

        const auto split = plastic_project<2>(Vec<2>(1.1, 1.0).asDiagonal(), Mat<2>::Identity(), m);
        CHECK((split.F_elastic - Mat<2>(Vec<2>(1.0075, 1.0).asDiagonal())).norm() < 1e-12);
        CHECK(split.F_plastic(0, 0) == doctest::Approx(1.1 / 1.0075));

        std::mt19937_64 rng(15);
        for (int k = 0; k < 100; ++k) {
            const Mat<2> Fe = random_F<2>(rng);
            const Mat<2> Fp = random_F<2>(rng);
            const auto out = plastic_project<2>(Fe, Fp, m);
            CHECK((out.F_elastic * out.F_plastic - Fe * Fp).norm() <= 1e-10 * (Fe * Fp).norm());
            Eigen::JacobiSVD<Mat<2>> svd(out.F_elastic);
            for (int d = 0; d < 2; ++d) {
                CHECK(svd.singularValues()[d] >= 1.0 - m.theta_c - 1e-12);
                CHECK(svd.singularValues()[d] <= 1.0 + m.theta_s + 1e-12);
            }
        }
        CHECK_THROWS_AS(plastic_project<2>(inside, Mat<2>::Identity(), corotated(1, 1)), ContractViolation);
    }

    TEST_CASE("hardening multiplier")
    {
        const auto m = snow();
        CHECK(m.hardened_mu(0.9) == doctest::Approx(m.mu * std::exp(1.0)));
        CHECK(m.hardened_lambda(1.0) == doctest::Approx(m.lambda));
        CHECK(corotated(2, 3).hardened_mu(0.5) == 2.0);
    }

    TEST_CASE("hessian action: zero, linear, finite differences, symmetric")
    {
        std::mt19937_64 rng(16);
        for (const auto& m : {corotated(3.0, 7.0), fluid(), snow()}) {
            for (int k = 0; k < 30; ++k) {
                const Mat<2> F = random_F<2>(rng);
                const Mat<2> A = random_matrix<2>(rng), B = random_matrix<2>(rng);
                CHECK(hessian_action<2>(F, Mat<2>::Zero(), m).norm() == 0.0);
                const Mat<2> HA = hessian_action<2>(F, A, m);
                CHECK((hessian_action<2>(F, 2.5 * A, m) - 2.5 * HA).norm() <= 1e-12 * std::max(1.0, HA.norm()));
                const double h = 1e-5;
                const Mat<2> fd
                    = (energy_and_piola<2>(F + h * A, m).P - energy_and_piola<2>(F - h * A, m).P) / (2 * h);
                CHECK((HA - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
                const Mat<2> HB = hessian_action<2>(F, B, m);
                const double ab = inner(A, HB), ba = inner(B, HA);
                CHECK(std::abs(ab - ba) <= 1e-8 * std::max({1.0, std::abs(ab), std::abs(ba)}));
            }
        }
        const Mat<3> F3 = random_F<3>(rng), A3 = random_matrix<3>(rng);
        const auto m = corotated(3.0, 7.0);
        const double h = 1e-5;
        const Mat<3> fd = (energy_and_piola<3>(F3 + h * A3, m).P - energy_and_piola<3>(F3 - h * A3, m).P) / (2 * h);
        CHECK((hessian_action<3>(F3, A3, m) - fd).norm() <= 1e-5 * fd.norm());
    }

    TEST_CASE("from_young and validation")
    {
        const auto m = MaterialModel::from_young(MaterialKind::fixed_corotated, 1e5, 0.3, 1000.0);
        CHECK(m.mu == doctest::Approx(1e5 / 2.6));
        CHECK(m.lambda == doctest::Approx(1e5 * 0.3 / (1.3 * 0.4)));
        CHECK(m.wave_speed() == doctest::Approx(std::sqrt((m.lambda + 2 * m.mu) / 1000.0)));
        auto bad = fluid();
        bad.gamma = 0.5;
        CHECK_THROWS_AS(bad.validate(), ConfigurationError);
        auto s = snow();
        s.theta_c = 1.2;
        CHECK_THROWS_AS(s.validate(), ConfigurationError);
        CHECK_THROWS_AS(parse_material_kind("jelly"), ConfigurationError);
        CHECK(parse_material_kind("snow") == MaterialKind::snow);
    }
}
