#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "latsp/common.hpp"

namespace latsp::datagen {

/// Parameters of the synthetic multi-class generator: per-class Gaussian
/// clusters in an informative subspace plus redundant (correlated) and
/// uninformative noise features.
struct DatasetSpec {
    int n_samples = 2000;
    int n_features = 20;
    int n_informative = 5;
    int n_redundant = 2;
    int k_classes = 3;
    int clusters_per_class = 1;
    double cluster_std = 1.0;
    double class_separation = 2.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Dataset {
    Eigen::MatrixXd features;  // [N x D]
    std::vector<int> labels;   // values in [0, k)
    DatasetSpec spec;

    int n_samples() const { return static_cast<int>(features.rows()); }
    int n_features() const { return static_cast<int>(features.cols()); }
};

/// Generate a dataset. Cluster centers sit on hypercube vertices of the
/// informative subspace, scaled by class_separation and chosen greedily to
/// maximize the minimum pairwise Hamming distance (seeded start vertex).
/// Redundant features are random linear combinations of the informative
/// ones; remaining features are standard normal noise. Rows are shuffled.
/// Deterministic for a fixed seed.
Dataset generate(const DatasetSpec& spec);

/// Column-wise standardization to zero mean, unit standard deviation
/// (population convention). Constant columns are left at zero.
Dataset standardize(const Dataset& ds);

void write_csv(const Dataset& ds, std::ostream& out);
Dataset read_csv(std::istream& in);

}  // namespace latsp::datagen
