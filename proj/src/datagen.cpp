#include "latsp/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace latsp::datagen {

namespace {

int hamming(std::uint32_t a, std::uint32_t b) { return std::popcount(a ^ b); }

// Greedy max-min Hamming selection of `count` distinct vertices of the
// n-dimensional hypercube, starting from a seeded random vertex. Above 16
// dimensions the exhaustive scan is skipped: random distinct vertices are
// already far apart there.
std::vector<std::uint32_t> pick_vertices(int dims, int count, Rng& rng) {
    const std::uint32_t total = 1u << dims;
    std::vector<std::uint32_t> chosen;
    chosen.reserve(count);
    chosen.push_back(static_cast<std::uint32_t>(rng.integer(total)));
    if (dims > 16) {
        while (static_cast<int>(chosen.size()) < count) {
            const auto v = static_cast<std::uint32_t>(rng.integer(total));
            if (std::find(chosen.begin(), chosen.end(), v) == chosen.end()) chosen.push_back(v);
        }
        return chosen;
    }
    while (static_cast<int>(chosen.size()) < count) {
        std::uint32_t best = 0;
        int best_dist = -1;
        for (std::uint32_t v = 0; v < total; ++v) {
            if (std::find(chosen.begin(), chosen.end(), v) != chosen.end()) continue;
            int d = dims + 1;
            for (std::uint32_t c : chosen) d = std::min(d, hamming(v, c));
            if (d > best_dist) {
                best_dist = d;
                best = v;
            }
        }
        chosen.push_back(best);
    }
    return chosen;
}

}  // namespace

void DatasetSpec::validate() const {
    if (n_samples <= 0) throw ConfigError("dataset: n_samples must be positive");
    if (n_features <= 0) throw ConfigError("dataset: n_features must be positive");
    if (n_informative <= 0 || n_informative > n_features)
        throw ConfigError("dataset: n_informative must be in [1, n_features]");
    if (n_redundant < 0) throw ConfigError("dataset: n_redundant must be >= 0");
    if (n_informative + n_redundant > n_features)
        throw ConfigError("dataset: n_informative + n_redundant exceeds n_features");
    if (k_classes < 2) throw ConfigError("dataset: k_classes must be >= 2");
    if (clusters_per_class < 1) throw ConfigError("dataset: clusters_per_class must be >= 1");
    if (!(cluster_std > 0.0)) throw ConfigError("dataset: cluster_std must be positive");
    if (!(class_separation > 0.0))
        throw ConfigError("dataset: class_separation must be positive");
    const long centers = static_cast<long>(k_classes) * clusters_per_class;
    if (n_informative >= 31 || centers > (1L << n_informative))
        throw ConfigError("dataset: cannot place " + std::to_string(centers) +
                          " centers on a " + std::to_string(n_informative) +
                          "-dimensional hypercube");
    if (n_samples < centers)
        throw ConfigError("dataset: fewer samples than cluster centers");
}

Dataset generate(const DatasetSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int N = spec.n_samples;
    const int D = spec.n_features;
    const int ni = spec.n_informative;
    const int nr = spec.n_redundant;
    const int centers = spec.k_classes * spec.clusters_per_class;

    const std::vector<std::uint32_t> vertices = pick_vertices(ni, centers, rng);

    Dataset ds;
    ds.spec = spec;
    ds.features = Eigen::MatrixXd::Zero(N, D);
    ds.labels.assign(N, 0);

    // Balanced allocation: the first N % centers clusters get one extra row.
    int row = 0;
    for (int c = 0; c < centers; ++c) {
        const int count = N / centers + (c < N % centers ? 1 : 0);
        Eigen::RowVectorXd center(ni);
        for (int j = 0; j < ni; ++j)
            center(j) = ((vertices[c] >> j) & 1u ? 1.0 : -1.0) * spec.class_separation;
        for (int s = 0; s < count; ++s, ++row) {
            for (int j = 0; j < ni; ++j)
                ds.features(row, j) = center(j) + spec.cluster_std * rng.normal();
            ds.labels[row] = c % spec.k_classes;
        }
    }

    if (nr > 0) {
        const Eigen::MatrixXd mix = rng.normal_matrix(ni, nr);
        ds.features.block(0, ni, N, nr) = ds.features.block(0, 0, N, ni) * mix;
    }
    for (int j = ni + nr; j < D; ++j)
        for (int i = 0; i < N; ++i) ds.features(i, j) = rng.normal();

    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    Eigen::MatrixXd shuffled(N, D);
    std::vector<int> labels(N);
    for (int i = 0; i < N; ++i) {
        shuffled.row(i) = ds.features.row(order[i]);
        labels[i] = ds.labels[order[i]];
    }
    ds.features = std::move(shuffled);
    ds.labels = std::move(labels);
    return ds;
}

Dataset standardize(const Dataset& ds) {
    Dataset out = ds;
    const double n = static_cast<double>(ds.features.rows());
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
        const double mean = ds.features.col(j).mean();
        const double var = (ds.features.col(j).array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        if (sd < 1e-12)
            out.features.col(j).setZero();
        else
            out.features.col(j) = (ds.features.col(j).array() - mean) / sd;
    }
    return out;
}

void write_csv(const Dataset& ds, std::ostream& out) {
    for (int j = 0; j < ds.n_features(); ++j) out << 'f' << j << ',';
    out << "label\n";
    for (int i = 0; i < ds.n_samples(); ++i) {
        for (int j = 0; j < ds.n_features(); ++j) out << fmt_double(ds.features(i, j)) << ',';
        out << ds.labels[i] << '\n';
    }
}

Dataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("dataset csv: empty file");
    int cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
    const int d = cols - 1;
    if (d < 1) throw IoError("dataset csv: no feature columns");
    std::vector<double> values;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        for (int j = 0; j < d; ++j) {
            if (!std::getline(ls, cell, ',')) throw IoError("dataset csv: short row");
            values.push_back(std::stod(cell));
        }
        if (!std::getline(ls, cell)) throw IoError("dataset csv: missing label");
        labels.push_back(std::stoi(cell));
    }
    const int n = static_cast<int>(labels.size());
    Dataset ds;
    ds.features.resize(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) ds.features(i, j) = values[static_cast<std::size_t>(i) * d + j];
    ds.labels = std::move(labels);
    ds.spec.n_samples = n;
    ds.spec.n_features = d;
    ds.spec.k_classes =
        ds.labels.empty() ? 2 : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    return ds;
}

}  // namespace latsp::datagen
