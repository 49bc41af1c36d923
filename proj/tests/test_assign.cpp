#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "latsp/assign.hpp"
#include "latsp/boxspectrum.hpp"
#include "latsp/common.hpp"

using namespace latsp;
using namespace latsp::assign;

namespace {

constexpr double kPi = 3.14159265358979323846;

vae::LatentEmbedding embedding_from(const Eigen::MatrixXd& mu) {
    vae::LatentEmbedding emb;
    emb.mu = mu;
    emb.logvar = Eigen::MatrixXd::Zero(mu.rows(), mu.cols());
    emb.samples = mu;
    emb.noise = Eigen::MatrixXd::Zero(mu.rows(), mu.cols());
    emb.labels.assign(mu.rows(), 0);
    return emb;
}

}  // namespace

TEST_CASE("project_latent identity in one dimension") {
    Rng rng(2);
    const Eigen::MatrixXd mu = rng.normal_matrix(50, 1);
    AssignConfig cfg;
    const Eigen::VectorXd p = project_latent(embedding_from(mu), cfg);
    CHECK((p - mu.col(0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("project_latent recovers a line up to sign and scale") {
    Rng rng(3);
    const Eigen::VectorXd positions = rng.normal_matrix(200, 1);
    Eigen::RowVectorXd direction(3);
    direction << 0.5, -1.0, 2.0;
    const Eigen::MatrixXd mu = positions * direction;
    AssignConfig cfg;
    const Eigen::VectorXd p = project_latent(embedding_from(mu), cfg);
    // correlation with the generating positions is +-1
    const double pc = (p.array() - p.mean()).matrix().normalized().dot(
        (positions.array() - positions.mean()).matrix().normalized());
    CHECK(std::abs(std::abs(pc) - 1.0) < 1e-9);
}

TEST_CASE("projected variance equals the top covariance eigenvalue") {
    Rng rng(4);
    Eigen::MatrixXd mu = rng.normal_matrix(2000, 3);
    mu.col(0) *= 3.0;  // stretch one direction
    AssignConfig cfg;
    const Eigen::VectorXd p = project_latent(embedding_from(mu), cfg);
    const double pvar = (p.array() - p.mean()).square().sum() / (p.size() - 1);
    // oracle: eigen-decomposition of the sample covariance
    const Eigen::MatrixXd centered = mu.rowwise() - mu.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        centered.transpose() * centered / (mu.rows() - 1.0));
    CHECK(pvar == doctest::Approx(solver.eigenvalues().maxCoeff()).epsilon(1e-9));
}

TEST_CASE("per-dimension-mean projection mode") {
    Eigen::MatrixXd mu(2, 3);
    mu << 1.0, 2.0, 3.0, -1.0, 0.0, 1.0;
    AssignConfig cfg;
    cfg.projection = ProjectionMode::PerDimensionMean;
    const Eigen::VectorXd p = project_latent(embedding_from(mu), cfg);
    CHECK(p(0) == doctest::Approx(2.0));
    CHECK(p(1) == doctest::Approx(0.0));
}

TEST_CASE("quantum_number corrected mode inverts phi exactly") {
    box::BoxSpec spec;
    for (double z : {0.3, 0.11, 0.49}) {
        const double psi = box::phi(1.0, z, spec);
        const double n = quantum_number(psi, z, spec, InversionMode::Corrected);
        CHECK(n == doctest::Approx(1.0).epsilon(1e-9));
    }
    // negative psi maps through |psi|
    const double n_neg =
        quantum_number(-box::phi(1.0, 0.3, spec), 0.3, spec, InversionMode::Corrected);
    CHECK(n_neg == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("quantum_number roundtrip property on the principal branch") {
    box::BoxSpec spec;
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const double z = rng.uniform(0.02, 0.98);
        const double nmax = 0.5 / z;  // keep n z / L within (0, 1/2]
        const double n_true = rng.uniform(0.01, nmax);
        if (n_true <= box::kQuantumNumberFloor) continue;
        const double psi = box::phi(n_true, z, spec);
        const double n = quantum_number(psi, z, spec, InversionMode::Corrected);
        CHECK(std::abs(n - n_true) < 1e-9);
    }
}

TEST_CASE("quantum_number floors and clamps") {
    box::BoxSpec spec;
    CHECK(quantum_number(0.0, 0.5, spec, InversionMode::Corrected) ==
          doctest::Approx(box::kQuantumNumberFloor));
    CHECK(quantum_number(0.0, 0.5, spec, InversionMode::PaperLiteral) ==
          doctest::Approx(box::kQuantumNumberFloor));

    // paper-literal: arg = L psi^2 / 2 = 1 at psi = sqrt(2), z = L/2 -> n = 1
    const double n = quantum_number(std::sqrt(2.0), 0.5, spec, InversionMode::PaperLiteral);
    CHECK(n == doctest::Approx(1.0).epsilon(1e-12));

    // a wall violation is a contract violation
    CHECK_THROWS_AS(quantum_number(0.5, 0.001, spec, InversionMode::Corrected),
                    ContractViolation);

    // clamped argument has zero gradient
    const QuantumNumberGrad big =
        quantum_number_grad(5.0, 0.5, spec, InversionMode::Corrected);
    CHECK(big.clamped);
    CHECK(big.dn_dpsi == 0.0);
}

TEST_CASE("energy_loss collapse value at psi = 0 with no penalty") {
    AssignConfig cfg;
    cfg.norm_weight = 0.0;
    const Eigen::VectorXd psi = Eigen::VectorXd::Zero(10);
    const Eigen::VectorXd zb = Eigen::VectorXd::Constant(10, 0.5);
    const EnergyLossResult res = energy_loss(psi, zb, cfg);
    const double nf = box::kQuantumNumberFloor;
    const double expected =
        cfg.spec.alpha * nf * nf + box::e1_closed(nf, cfg.spec);
    CHECK(res.loss == doctest::Approx(expected).epsilon(1e-12));
    for (int i = 0; i < 10; ++i) CHECK(res.n(i) == doctest::Approx(nf));
}

TEST_CASE("penalty vanishes when psi matches phi_1 on a refining grid") {
    AssignConfig cfg;
    cfg.norm_weight = 1.0;
    const double lo = box::kBoxMargin * cfg.spec.length;
    const double hi = cfg.spec.length - lo;
    double previous = 1e9;
    for (int grid : {50, 200, 1000, 5000}) {
        Eigen::VectorXd psi(grid), zb(grid);
        for (int i = 0; i < grid; ++i) {
            // psi sampled on the full-box uniform grid; the box coordinate
            // (which only feeds the energy term) stays inside the walls
            const double z = static_cast<double>(i) / (grid - 1);
            zb(i) = std::clamp(z, lo, hi);
            psi(i) = box::phi(1.0, z, cfg.spec);
        }
        const EnergyLossResult res = energy_loss(psi, zb, cfg);
        CHECK(res.penalty <= previous + 1e-12);
        previous = res.penalty;
    }
    CHECK(previous < 1e-5);  // L mean(phi_1^2) -> 1, Riemann sum of the norm
}

TEST_CASE("energy_loss gradient matches finite differences") {
    AssignConfig cfg;
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const int b = 6;
        Eigen::VectorXd psi(b), zb(b);
        for (int i = 0; i < b; ++i) {
            zb(i) = rng.uniform(0.05, 0.95);
            // keep away from the clamp boundary and the floor
            psi(i) = rng.uniform(0.1, 0.9) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        }
        const EnergyLossResult base = energy_loss(psi, zb, cfg);
        for (int i = 0; i < b; ++i) {
            const double h = 1e-6;
            Eigen::VectorXd up = psi, down = psi;
            up(i) += h;
            down(i) -= h;
            const double fd =
                (energy_loss(up, zb, cfg).loss - energy_loss(down, zb, cfg).loss) / (2 * h);
            const double denom = std::max({std::abs(fd), std::abs(base.dloss_dpsi(i)), 1e-4});
            CHECK(std::abs(fd - base.dloss_dpsi(i)) / denom < 1e-4);
        }
    }
}

TEST_CASE("collapse guard: penalty is active at psi = 0") {
    AssignConfig cfg;
    cfg.norm_weight = 1.0;
    // analytic directional derivative along u = mean(psi^2)
    const double analytic = collapse_gradient_at_zero(cfg);
    CHECK(analytic == doctest::Approx(-2.0).epsilon(1e-14));
    CHECK(std::abs(analytic) > 0.0);

    // finite differences along the uniform-norm direction: all psi = eta
    const int b = 16;
    const Eigen::VectorXd zb = Eigen::VectorXd::Constant(b, 0.5);
    const double at_zero = energy_loss(Eigen::VectorXd::Zero(b), zb, cfg).loss;
    const double eta = 1e-5;
    const double at_eta =
        energy_loss(Eigen::VectorXd::Constant(b, eta), zb, cfg).loss;
    const double fd = (at_eta - at_zero) / (eta * eta);  // d loss / d(eta^2)
    CHECK(fd == doctest::Approx(analytic).epsilon(1e-3));

    // the pointwise psi gradient is zero at psi == 0 (evenness);
    // escape happens along the norm coordinate
    const EnergyLossResult res = energy_loss(Eigen::VectorXd::Zero(b), zb, cfg);
    CHECK(res.dloss_dpsi.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("train_assigner separates two line clusters") {
    // two tight clusters along a latent line
    Rng rng(31);
    const int per = 150;
    Eigen::MatrixXd mu(2 * per, 2);
    std::vector<int> labels(2 * per);
    for (int i = 0; i < per; ++i) {
        mu(i, 0) = -2.0 + 0.1 * rng.normal();
        mu(i, 1) = 0.05 * rng.normal();
        labels[i] = 0;
        mu(per + i, 0) = 2.0 + 0.1 * rng.normal();
        mu(per + i, 1) = 0.05 * rng.normal();
        labels[per + i] = 1;
    }
    vae::LatentEmbedding emb = embedding_from(mu);
    emb.labels = labels;

    AssignConfig cfg;
    cfg.epochs = 120;
    cfg.seed = 3;
    const AssignTrainResult trained = train_assigner(emb, cfg);
    CHECK(trained.trace.back().loss <= trained.trace.front().loss);

    const EnergyAssignment assignment = assign_energies(trained.network, emb, cfg);
    REQUIRE(assignment.class_stats.size() == 2);
    const std::vector<double> gaps = spectrum_gap(assignment);
    REQUIRE(gaps.size() == 1);
    CHECK(gaps[0] > 0.0);

    // all quantum numbers positive and finite, z_box within walls
    for (int i = 0; i < assignment.n_samples(); ++i) {
        CHECK(assignment.n(i) > 0.0);
        CHECK(std::isfinite(assignment.energy(i)));
        CHECK(assignment.z_box(i) >= box::kBoxMargin * cfg.spec.length);
        CHECK(assignment.z_box(i) <= cfg.spec.length * (1.0 - box::kBoxMargin));
    }
}

TEST_CASE("train_assigner rejects a degenerate projection") {
    vae::LatentEmbedding emb = embedding_from(Eigen::MatrixXd::Constant(40, 2, 1.0));
    AssignConfig cfg;
    CHECK_THROWS_AS(train_assigner(emb, cfg), ContractViolation);
}

TEST_CASE("assign_energies is deterministic and label-blind in per-sample energies") {
    Rng rng(44);
    Eigen::MatrixXd mu = rng.normal_matrix(100, 2);
    vae::LatentEmbedding emb = embedding_from(mu);
    std::iota(emb.labels.begin(), emb.labels.end(), 0);
    for (auto& l : emb.labels) l %= 3;

    AssignConfig cfg;
    cfg.epochs = 10;
    const AssignTrainResult trained = train_assigner(emb, cfg);
    const EnergyAssignment a = assign_energies(trained.network, emb, cfg);
    const EnergyAssignment b = assign_energies(trained.network, emb, cfg);
    CHECK((a.energy - b.energy).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.psi - b.psi).cwiseAbs().maxCoeff() == 0.0);

    // relabeling permutes aggregates but leaves per-sample energies alone
    vae::LatentEmbedding relabeled = emb;
    for (auto& l : relabeled.labels) l = (l + 1) % 3;
    const EnergyAssignment c = assign_energies(trained.network, relabeled, cfg);
    CHECK((a.energy - c.energy).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spectrum_gap on trivial cases") {
    EnergyAssignment a;
    a.psi = Eigen::VectorXd::Zero(4);
    a.z_box = Eigen::VectorXd::Constant(4, 0.5);
    a.n = Eigen::VectorXd::Ones(4);
    a.energy.resize(4);
    a.energy << 1.0, 1.0, 3.0, 3.0;
    a.labels = {0, 0, 1, 1};
    a.class_stats = {{0, 2, 1.0, 0.0, 1.0, 0.0}, {1, 2, 3.0, 0.0, 1.0, 0.0}};
    const std::vector<double> gaps = spectrum_gap(a);
    REQUIRE(gaps.size() == 1);
    CHECK(gaps[0] == doctest::Approx(2.0));

    // identical energies for all classes -> zero gaps
    a.class_stats = {{0, 2, 2.0, 0.0, 1.0, 0.0}, {1, 2, 2.0, 0.0, 1.0, 0.0}};
    CHECK(spectrum_gap(a)[0] == doctest::Approx(0.0));
}

TEST_CASE("trace csv round-trip") {
    std::vector<AssignEpochStats> trace{{1, 0.9, 0.4, 0.3, 0.0}, {2, 0.5, 0.45, 0.25, 0.01}};
    std::stringstream buffer;
    write_trace_csv(trace, buffer);
    const std::vector<AssignEpochStats> loaded = read_trace_csv(buffer);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[1].epoch == 2);
    CHECK(loaded[1].loss == 0.5);
    CHECK(loaded[1].clamp_rate == 0.01);
}

TEST_CASE("assignment csv round-trip") {
    EnergyAssignment a;
    a.psi.resize(3);
    a.psi << 0.5, -0.25, 1.5;
    a.z_box.resize(3);
    a.z_box << 0.1, 0.5, 0.9;
    a.n.resize(3);
    a.n << 1.0, 0.5, 2.0;
    a.energy.resize(3);
    a.energy << 9.87, 2.47, 39.5;
    a.labels = {0, 1, 0};
    std::stringstream buffer;
    write_assignment_csv(a, buffer);
    const EnergyAssignment loaded = read_assignment_csv(buffer);
    REQUIRE(loaded.n_samples() == 3);
    CHECK((loaded.psi - a.psi).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((loaded.energy - a.energy).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(loaded.labels == a.labels);
    REQUIRE(loaded.class_stats.size() == 2);
}
