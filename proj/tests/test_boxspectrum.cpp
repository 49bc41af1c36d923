#include <doctest.h>

#include <cmath>
#include <sstream>

#include "latsp/boxspectrum.hpp"
#include "latsp/common.hpp"

using namespace latsp;
using namespace latsp::box;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("phi basics") {
    BoxSpec spec;
    CHECK(phi(1.0, 0.5, spec) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(phi(4.0, 0.0, spec) == doctest::Approx(0.0));
    CHECK(phi(2.0, 0.25, spec) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    // boundary condition at the far wall for integer modes
    CHECK(std::abs(phi(3.0, 1.0, spec)) < 1e-12);
}

TEST_CASE("e0 scaling") {
    BoxSpec spec;
    CHECK(e0(1.0, spec) == doctest::Approx(kPi * kPi).epsilon(1e-14));
    CHECK(e0(2.0, spec) == doctest::Approx(4.0 * e0(1.0, spec)).epsilon(1e-14));
    BoxSpec wide = spec;
    wide.length = 2.0;
    CHECK(e0(1.0, wide) == doctest::Approx(e0(1.0, spec) / 4.0).epsilon(1e-14));
    // exactly quadratic over a range of n
    for (double n = 0.5; n < 8.0; n += 0.7)
        CHECK(e0(2.0 * n, spec) == doctest::Approx(4.0 * e0(n, spec)).epsilon(1e-15));
}

TEST_CASE("potential peaks and minima count") {
    BoxSpec spec;
    spec.frequency = 1;
    CHECK(potential(0.25, spec) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(potential(0.0, spec) == doctest::Approx(0.0));

    // count local minima of V on (0, L) by sign changes of the derivative
    spec.frequency = 3;
    const int grid = 20000;
    int minima = 0;
    double prev_slope = 0.0;
    for (int i = 1; i < grid; ++i) {
        const double z0 = static_cast<double>(i - 1) / grid;
        const double z1 = static_cast<double>(i) / grid;
        const double slope = potential(z1, spec) - potential(z0, spec);
        if (i > 1 && prev_slope < 0.0 && slope > 0.0) ++minima;
        prev_slope = slope;
    }
    CHECK(minima == 3);
}

TEST_CASE("e1 closed form vs quadrature oracle") {
    BoxSpec spec;
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const double n = rng.uniform(1e-3, 10.0);
        const double diff = std::abs(e1_closed(n, spec) - e1_quad(n, spec, 100000));
        CHECK(diff < 1e-9);
    }
}

TEST_CASE("e1 vanishes for integer modes with integer frequency") {
    for (int t = 1; t <= 4; ++t) {
        BoxSpec spec;
        spec.frequency = t;
        for (int n = 1; n <= 12; ++n) {
            CHECK(std::abs(e1_closed(n, spec)) < 1e-12);
            CHECK(std::abs(e1_quad(n, spec, 100000)) < 1e-9);
        }
    }
}

TEST_CASE("e1 specific value n=1.5 t=2") {
    BoxSpec spec;
    spec.frequency = 2;
    const double quad = e1_quad(1.5, spec, 100000);
    CHECK(std::abs(e1_closed(1.5, spec) - quad) < 1e-9);
    // independent closed form -(t/pi) sin^2(pi n)/(t^2 - n^2) away from n=t
    const double simple = -(2.0 / kPi) * std::pow(std::sin(kPi * 1.5), 2) / (4.0 - 2.25);
    CHECK(e1_closed(1.5, spec) == doctest::Approx(simple).epsilon(1e-12));
}

TEST_CASE("e1 limit n -> 0") {
    BoxSpec spec;
    CHECK(std::abs(e1_closed(1e-4, spec)) < 1e-3);
}

TEST_CASE("e1 continuous across n = t") {
    BoxSpec spec;
    const double t = spec.frequency;
    const double at_t = e1_closed(t, spec);
    CHECK(std::abs(e1_closed(t - 1e-6, spec) - at_t) < 1e-4);
    CHECK(std::abs(e1_closed(t + 1e-6, spec) - at_t) < 1e-4);
}

TEST_CASE("e1_prime matches finite differences") {
    BoxSpec spec;
    Rng rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        const double n = rng.uniform(0.05, 9.5);
        const double h = 1e-6;
        const double fd = (e1_closed(n + h, spec) - e1_closed(n - h, spec)) / (2.0 * h);
        CHECK(e1_prime(n, spec) == doctest::Approx(fd).epsilon(1e-6));
    }
    // derivative is finite and matches at the removable point n = t
    const double t = spec.frequency;
    const double h = 1e-6;
    const double fd = (e1_closed(t + h, spec) - e1_closed(t - h, spec)) / (2.0 * h);
    CHECK(e1_prime(t, spec) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("coupling symmetry and diagonal") {
    BoxSpec spec;
    Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const int m = 1 + static_cast<int>(rng.integer(10));
        const int n = 1 + static_cast<int>(rng.integer(10));
        CHECK(std::abs(coupling(m, n, spec) - coupling(n, m, spec)) < 1e-12);
    }
    for (int n = 1; n <= 10; ++n)
        CHECK(std::abs(coupling(n, n, spec) - e1_closed(n, spec)) < 1e-12);
}

TEST_CASE("coupling vs quadrature oracle") {
    BoxSpec spec;
    spec.frequency = 1;
    CHECK(std::abs(coupling(1, 2, spec) - coupling_quad(1, 2, spec, 100000)) < 1e-9);
    spec.frequency = 3;
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 1 + static_cast<int>(rng.integer(10));
        const int n = 1 + static_cast<int>(rng.integer(10));
        CHECK(std::abs(coupling(m, n, spec) - coupling_quad(m, n, spec, 100000)) < 1e-9);
    }
}

TEST_CASE("basis orthonormality by quadrature") {
    BoxSpec spec;
    for (int m = 1; m <= 10; ++m)
        for (int n = 1; n <= 10; ++n) {
            const double expected = m == n ? 1.0 : 0.0;
            CHECK(std::abs(overlap_quad(m, n, spec, 20000) - expected) < 1e-9);
        }
}

TEST_CASE("build_table invariants") {
    BoxSpec spec;
    const SpectrumTable table = build_table(spec);
    REQUIRE(table.modes() == spec.mode_cutoff);
    for (int i = 1; i < table.modes(); ++i) CHECK(table.e0[i] > table.e0[i - 1]);
    for (int i = 0; i < table.modes(); ++i) {
        CHECK(table.c(i, i) == 0.0);
        for (int j = 0; j < table.modes(); ++j) CHECK(table.c(i, j) == table.c(j, i));
    }
    // every closed-form entry matches its quadrature oracle
    for (int i = 0; i < table.modes(); ++i) {
        CHECK(std::abs(table.e1[i] - e1_quad(i + 1, spec, 100000)) < 1e-9);
        for (int j = 0; j < table.modes(); ++j) {
            if (i == j) continue;
            CHECK(std::abs(table.c(i, j) - coupling_quad(i + 1, j + 1, spec, 100000)) < 1e-9);
        }
    }
}

TEST_CASE("perturbed_psi expansion") {
    BoxSpec spec;
    const SpectrumTable table = build_table(spec);
    const double z = 0.37;
    double expected = phi(2, z, spec);
    for (int m = 1; m <= table.modes(); ++m) {
        if (m == 2) continue;
        expected += coupling(m, 2, spec) * phi(m, z, spec);
    }
    CHECK(perturbed_psi(2, z, spec, table) == doctest::Approx(expected).epsilon(1e-12));

    // textbook mode divides by the energy denominator
    double textbook = phi(2, z, spec);
    for (int m = 1; m <= table.modes(); ++m) {
        if (m == 2) continue;
        textbook += coupling(m, 2, spec) / (e0(2, spec) - e0(m, spec)) * phi(m, z, spec);
    }
    CHECK(perturbed_psi(2, z, spec, table, CouplingMode::Textbook) ==
          doctest::Approx(textbook).epsilon(1e-12));

    CHECK_THROWS_AS(perturbed_psi(0, z, spec, table), ContractViolation);
    CHECK_THROWS_AS(perturbed_psi(table.modes() + 1, z, spec, table), ContractViolation);
}

TEST_CASE("table csv round-trip") {
    BoxSpec spec;
    spec.mode_cutoff = 5;
    const SpectrumTable table = build_table(spec);
    std::ostringstream spec_out, coup_out;
    write_table_csv(table, spec_out, coup_out);
    std::istringstream spec_in(spec_out.str()), coup_in(coup_out.str());
    const SpectrumTable loaded = read_table_csv(spec_in, coup_in);
    REQUIRE(loaded.modes() == table.modes());
    for (int i = 0; i < table.modes(); ++i) {
        CHECK(loaded.e0[i] == table.e0[i]);
        CHECK(loaded.e1[i] == table.e1[i]);
    }
    CHECK((loaded.c - table.c).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("map_to_box") {
    BoxSpec spec;
    Eigen::VectorXd v(2);
    v << 0.0, 1.0;
    const Eigen::VectorXd mapped = map_to_box(v, spec, 0.01);
    CHECK(mapped(0) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(mapped(1) == doctest::Approx(0.99).epsilon(1e-14));

    Eigen::VectorXd constant = Eigen::VectorXd::Constant(5, 3.7);
    const Eigen::VectorXd mid = map_to_box(constant, spec, 0.01);
    for (int i = 0; i < 5; ++i) CHECK(mid(i) == doctest::Approx(0.5));

    Eigen::VectorXd sym(3);
    sym << -2.0, 0.0, 2.0;
    const Eigen::VectorXd s = map_to_box(sym, spec, 0.01);
    CHECK(s(0) == doctest::Approx(0.01));
    CHECK(s(1) == doctest::Approx(0.5));
    CHECK(s(2) == doctest::Approx(0.99));

    Eigen::VectorXd empty(0);
    CHECK_THROWS_AS(map_to_box(empty, spec), ContractViolation);
}

TEST_CASE("gauss-legendre rule sanity") {
    const QuadRule& rule = gauss_legendre_64();
    REQUIRE(rule.nodes.size() == 64);
    double wsum = 0.0;
    for (double w : rule.weights) wsum += w;
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-13));
    // integrates odd powers to zero, even powers exactly
    double acc = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        acc += rule.weights[i] * rule.nodes[i] * rule.nodes[i];
    CHECK(acc == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("spec validation") {
    BoxSpec bad;
    bad.length = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = BoxSpec{};
    bad.frequency = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = BoxSpec{};
    bad.mode_cutoff = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
