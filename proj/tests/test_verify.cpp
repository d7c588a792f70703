#include <cmath>
#include <sstream>

#include <doctest.h>

#include "aulmpm/verify.hpp"

using namespace aulmpm;

TEST_SUITE("verify")
{
    TEST_CASE("error_norm examples")
    {
        std::vector<Vec<2>> a{{0.1, 0.2}, {0.3, 0.4}};
        CHECK(error_norm<2>(a, a) == 0.0);
        std::vector<Vec<2>> one{{0.1, 0.0}}, zero{{0.0, 0.0}};
        CHECK(error_norm<2>(one, zero) == doctest::Approx(0.1).epsilon(1e-15));
        std::vector<Vec<2>> two{{0.3, 0.4}, {0.0, 0.0}}, base{{0.0, 0.0}, {0.0, 0.0}};
        CHECK(error_norm<2>(two, base) == doctest::Approx(std::sqrt(0.125)).epsilon(1e-15));
        CHECK(error_norm<2>(two, base) == doctest::Approx(0.35355).epsilon(1e-5));
        CHECK_THROWS_AS(error_norm<2>(two, one), ContractViolation);
    }

    TEST_CASE("fit_slope")
    {
        std::vector<double> dx{0.1, 0.05, 0.025, 0.0125};
        std::vector<double> e, scaled;
        for (double h : dx) {
            e.push_back(3.0 * h * h);
            scaled.push_back(700.0 * h * h);
        }
        CHECK(fit_slope(dx, e).slope == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fit_slope(dx, scaled).slope == doctest::Approx(2.0).epsilon(1e-12));
        e[2] = 0.0;
        CHECK(fit_slope(dx, e).degenerate);
        std::vector<double> same{0.1, 0.1}, err{1.0, 2.0};
        CHECK(fit_slope(same, err).degenerate);
    }

    TEST_CASE("update_stats examples")
    {
        auto table = [](int steps, int updates) {
            std::stringstream ss;
            ss << "step,time,updates,wall_time\n";
            for (int k = 1; k <= steps; ++k) {
                const int u = static_cast<int>(static_cast<long long>(k) * updates / steps);
                ss << k << ',' << k * 1e-4 << ',' << u << ',' << 0.001 << '\n';
            }
            return ss.str();
        };
        std::stringstream none(table(104, 0));
        const auto s0 = update_stats(none);
        CHECK(s0.tau == 0.0);
        CHECK(s0.steps == 104);
        std::stringstream some(table(208, 52));
        const auto s1 = update_stats(some);
        CHECK(s1.updates == 52);
        CHECK(s1.tau == doctest::Approx(26.0));

        std::stringstream costed("updates,wall_time\n0,1.0\n1,3.0\n1,1.0\n2,5.0\n");
        CHECK(update_stats(costed).update_cost == doctest::Approx(3.0));
    }

    TEST_CASE("malformed stats are parse errors")
    {
        std::stringstream empty("");
        CHECK_THROWS_AS(update_stats(empty), ParseError);
        std::stringstream missing("step,time\n1,0.1\n");
        CHECK_THROWS_AS(update_stats(missing), ParseError);
        std::stringstream ragged("updates,wall_time\n1\n");
        CHECK_THROWS_AS(update_stats(ragged), ParseError);
        std::stringstream text("updates,wall_time\nmany,0.1\n");
        CHECK_THROWS_AS(update_stats(text), ParseError);
        std::stringstream backwards("updates,wall_time\n3,0.1\n2,0.1\n");
        CHECK_THROWS_AS(update_stats(backwards), ParseError);
    }

    TEST_CASE("free fall converges at roundoff and is flagged degenerate")
    {
        const auto doc = nlohmann::json::parse(R"({
          "grid": {"origin": [0, 0], "size": 1.0, "resolution": 8},
          "objects": [{
            "shape": {"type": "box", "min": [0.4, 0.5], "max": [0.6, 0.7]},
            "material": {"kind": "fixed_corotated", "youngs": 1e4, "poisson": 0.3, "density": 1000},
            "spacing": 0.025
          }],
          "colliders": [],
          "gravity": [0, -9.81],
          "solver": {"mode": "adaptive", "dt": 1e-4, "end_time": 0.01}
        })");
        ConvergenceOptions o;
        o.first_level = 3;
        o.last_level = 4;
        o.bench_level = 5;
        const auto report = convergence_study(doc, o);
        CHECK_FALSE(report.partial);
        CHECK(report.levels.size() == 2);
        CHECK(report.displacement.degenerate);
        CHECK(report.velocity.degenerate);
    }

    TEST_CASE("convergence study validates its levels")
    {
        const auto doc = nlohmann::json::parse(R"({"grid": {"origin": [0, 0], "size": 1.0, "resolution": 8}})");
        ConvergenceOptions o;
        o.first_level = 5;
        o.last_level = 4;
        CHECK_THROWS_AS(convergence_study(doc, o), ValidationError);
    }
}
