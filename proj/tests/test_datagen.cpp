#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "latsp/common.hpp"
#include "latsp/datagen.hpp"

using namespace latsp;
using namespace latsp::datagen;

TEST_CASE("balanced label allocation") {
    DatasetSpec spec;
    spec.n_samples = 100;
    spec.k_classes = 2;
    spec.clusters_per_class = 1;
    const Dataset ds = generate(spec);
    int counts[2] = {0, 0};
    for (int label : ds.labels) ++counts[label];
    CHECK(std::abs(counts[0] - counts[1]) <= 1);
    CHECK(counts[0] + counts[1] == 100);
}

TEST_CASE("every class appears") {
    DatasetSpec spec;
    spec.n_samples = 50;
    spec.k_classes = 5;
    const Dataset ds = generate(spec);
    std::set<int> seen(ds.labels.begin(), ds.labels.end());
    CHECK(seen.size() == 5);
    for (int label : ds.labels) {
        CHECK(label >= 0);
        CHECK(label < 5);
    }
}

TEST_CASE("per-cluster std concentrates around cluster_std") {
    // Oracle: direct resampling. The sample standard deviation of
    // n >= 2000/k points from N(c, sigma) stays within 15% of sigma;
    // verify that the generator's informative columns do the same,
    // cluster by cluster.
    DatasetSpec spec;
    spec.n_samples = 4000;
    spec.k_classes = 2;
    spec.cluster_std = 1.7;
    spec.n_redundant = 0;
    const Dataset ds = generate(spec);
    for (int label = 0; label < 2; ++label) {
        for (int j = 0; j < spec.n_informative; ++j) {
            std::vector<double> col;
            for (int i = 0; i < ds.n_samples(); ++i)
                if (ds.labels[i] == label) col.push_back(ds.features(i, j));
            double mean = 0.0;
            for (double v : col) mean += v;
            mean /= col.size();
            double var = 0.0;
            for (double v : col) var += (v - mean) * (v - mean);
            const double sd = std::sqrt(var / (col.size() - 1));
            CHECK(sd > 0.85 * spec.cluster_std);
            CHECK(sd < 1.15 * spec.cluster_std);
        }
    }
}

TEST_CASE("deterministic in seed, distinct across seeds") {
    DatasetSpec spec;
    spec.n_samples = 200;
    const Dataset a = generate(spec);
    const Dataset b = generate(spec);
    CHECK((a.features - b.features).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.labels == b.labels);

    spec.seed = 1;
    const Dataset c = generate(spec);
    CHECK((a.features - c.features).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("single-cluster covariance is approximately isotropic") {
    DatasetSpec spec;
    spec.n_samples = 4000;
    spec.k_classes = 2;
    spec.n_features = 5;
    spec.n_informative = 5;
    spec.n_redundant = 0;
    spec.cluster_std = 1.0;
    const Dataset ds = generate(spec);
    std::vector<int> members;
    for (int i = 0; i < ds.n_samples(); ++i)
        if (ds.labels[i] == 0) members.push_back(i);
    Eigen::MatrixXd cluster(members.size(), 5);
    for (std::size_t i = 0; i < members.size(); ++i) cluster.row(i) = ds.features.row(members[i]);
    const Eigen::MatrixXd centered = cluster.rowwise() - cluster.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / (double(members.size()) - 1);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const double expected = i == j ? 1.0 : 0.0;
            CHECK(std::abs(cov(i, j) - expected) < 0.15);
        }
}

TEST_CASE("redundant features are linear combinations of informative ones") {
    DatasetSpec spec;
    spec.n_samples = 300;
    spec.n_features = 10;
    spec.n_informative = 4;
    spec.n_redundant = 3;
    const Dataset ds = generate(spec);
    // solve for the mixing matrix from four rows, verify on all others
    const Eigen::MatrixXd info = ds.features.block(0, 0, 300, 4);
    const Eigen::MatrixXd red = ds.features.block(0, 4, 300, 3);
    const Eigen::MatrixXd mix = info.topRows(4).fullPivLu().solve(red.topRows(4));
    CHECK((info * mix - red).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("standardize centers and scales") {
    DatasetSpec spec;
    spec.n_samples = 500;
    const Dataset ds = standardize(generate(spec));
    const double n = ds.n_samples();
    for (int j = 0; j < ds.n_features(); ++j) {
        const double mean = ds.features.col(j).mean();
        const double sd =
            std::sqrt((ds.features.col(j).array() - mean).square().sum() / n);
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(sd - 1.0) < 1e-9);
    }
}

TEST_CASE("standardize zeroes constant columns") {
    Dataset ds;
    ds.features = Eigen::MatrixXd::Constant(10, 2, 3.5);
    ds.features.col(1).setLinSpaced(10, 0.0, 9.0);
    ds.labels.assign(10, 0);
    const Dataset out = standardize(ds);
    CHECK(out.features.col(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(out.features.col(1).mean()) < 1e-12);
}

TEST_CASE("infeasible specs rejected") {
    DatasetSpec spec;
    spec.n_informative = 2;
    spec.k_classes = 3;
    spec.clusters_per_class = 2;  // 6 centers > 2^2 vertices
    CHECK_THROWS_AS(generate(spec), ConfigError);

    spec = DatasetSpec{};
    spec.n_informative = 15;
    spec.n_redundant = 10;
    spec.n_features = 20;
    CHECK_THROWS_AS(generate(spec), ConfigError);

    spec = DatasetSpec{};
    spec.n_samples = 2;
    spec.k_classes = 3;
    CHECK_THROWS_AS(generate(spec), ConfigError);
}

TEST_CASE("csv round-trip") {
    DatasetSpec spec;
    spec.n_samples = 40;
    spec.n_features = 6;
    spec.n_informative = 3;
    spec.n_redundant = 1;
    const Dataset ds = generate(spec);
    std::stringstream buffer;
    write_csv(ds, buffer);
    const Dataset loaded = read_csv(buffer);
    REQUIRE(loaded.n_samples() == ds.n_samples());
    REQUIRE(loaded.n_features() == ds.n_features());
    CHECK((loaded.features - ds.features).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.labels == ds.labels);
}
