#include "latsp/degeneracy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <map>
#include <numeric>
#include <ostream>

namespace latsp::degeneracy {

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::vector<double> minmax_normalize(const std::vector<double>& v) {
    std::vector<double> out(v.size(), 0.0);
    if (v.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it, hi = *hi_it;
    if (hi - lo < 1e-300) return out;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
    return out;
}

ReplicaOutcome run_one(const datagen::Dataset& ds, vae::VaeConfig vae_cfg,
                       assign::AssignConfig assign_cfg, std::uint64_t seed) {
    ReplicaOutcome out;
    out.seed = seed;
    try {
        vae_cfg.seed = Rng::mix(seed, 11);
        assign_cfg.seed = Rng::mix(seed, 13);
        const vae::VaeTrainResult trained = vae::train_vae(ds, vae_cfg);
        out.vae_digest = vae_cfg.digest();
        out.embedding = vae::encode_dataset(trained.model, ds, Rng::mix(seed, 12));
        out.covariance_rank = vae::covariance_rank(out.embedding, 1e-8).first;
        out.collapsed = vae::collapsed_dims(out.embedding, 1e-3, 1e-2);
        const assign::AssignTrainResult assigner =
            assign::train_assigner(out.embedding, assign_cfg);
        out.assignment = assign::assign_energies(assigner.network, out.embedding, assign_cfg);
        out.spectrum = assign::sorted_class_means(out.assignment);
        out.control_spectrum =
            shuffled_control_spectrum(out.assignment, Rng::mix(seed, 14));
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

}  // namespace

std::vector<ReplicaOutcome> run_replicas(const datagen::Dataset& ds,
                                         const vae::VaeConfig& vae_cfg,
                                         const assign::AssignConfig& assign_cfg,
                                         const std::vector<std::uint64_t>& seeds,
                                         int threads) {
    std::vector<ReplicaOutcome> outcomes(seeds.size());
    if (threads <= 1 || seeds.size() <= 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i)
            outcomes[i] = run_one(ds, vae_cfg, assign_cfg, seeds[i]);
        return outcomes;
    }
    std::vector<std::future<void>> workers;
    std::atomic<std::size_t> next{0};
    const int pool = std::min<int>(threads, static_cast<int>(seeds.size()));
    for (int w = 0; w < pool; ++w)
        workers.push_back(std::async(std::launch::async, [&] {
            for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1))
                outcomes[i] = run_one(ds, vae_cfg, assign_cfg, seeds[i]);
        }));
    for (auto& w : workers) w.get();
    return outcomes;
}

double embedding_alignment(const vae::LatentEmbedding& a, const vae::LatentEmbedding& b) {
    if (a.mu.rows() != b.mu.rows())
        throw ContractViolation("embedding_alignment: sample counts differ");
    if (a.mu.rows() < 2) throw ContractViolation("embedding_alignment: need >= 2 samples");
    Eigen::MatrixXd ca = a.mu.rowwise() - a.mu.colwise().mean();
    Eigen::MatrixXd cb = b.mu.rowwise() - b.mu.colwise().mean();
    const double na = ca.norm();
    const double nb = cb.norm();
    if (na < 1e-300 || nb < 1e-300)
        throw ContractViolation("embedding_alignment: degenerate (constant) cloud");
    ca /= na;
    cb /= nb;
    const Eigen::MatrixXd cross = ca.transpose() * cb;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
    const double score = svd.singularValues().sum();
    return std::clamp(score, 0.0, 1.0);
}

double spectrum_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw ContractViolation("spectrum_distance: vectors must have equal length");
    if (a.empty()) return 0.0;
    const std::vector<double> na = minmax_normalize(a);
    const std::vector<double> nb = minmax_normalize(b);
    double acc = 0.0;
    for (std::size_t i = 0; i < na.size(); ++i) acc += std::abs(na[i] - nb[i]);
    return acc / static_cast<double>(na.size());
}

std::vector<double> shuffled_control_spectrum(const assign::EnergyAssignment& assignment,
                                              std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> shuffled = assignment.labels;
    rng.shuffle(shuffled);
    std::map<int, std::pair<double, int>> acc;
    for (int i = 0; i < assignment.n_samples(); ++i) {
        auto& slot = acc[shuffled[i]];
        slot.first += assignment.energy(i);
        slot.second += 1;
    }
    std::vector<double> means;
    means.reserve(acc.size());
    for (const auto& [label, sum_count] : acc)
        means.push_back(sum_count.first / sum_count.second);
    std::sort(means.begin(), means.end());
    return means;
}

ReplicaReport report(std::vector<ReplicaOutcome> outcomes) {
    ReplicaReport rep;
    for (auto& o : outcomes) {
        if (o.ok)
            rep.replicas.push_back(std::move(o));
        else
            rep.failures.push_back(std::to_string(o.seed) + ": " + o.error);
    }
    const int r = static_cast<int>(rep.replicas.size());
    rep.alignment = Eigen::MatrixXd::Ones(r, r);
    rep.distance = Eigen::MatrixXd::Zero(r, r);
    std::vector<double> alignments, distances, control_distances;
    for (int i = 0; i < r; ++i) {
        for (int j = i + 1; j < r; ++j) {
            const double al =
                embedding_alignment(rep.replicas[i].embedding, rep.replicas[j].embedding);
            const double d =
                spectrum_distance(rep.replicas[i].spectrum, rep.replicas[j].spectrum);
            rep.alignment(i, j) = rep.alignment(j, i) = al;
            rep.distance(i, j) = rep.distance(j, i) = d;
            alignments.push_back(al);
            distances.push_back(d);
        }
        for (int j = 0; j < r; ++j)
            control_distances.push_back(
                spectrum_distance(rep.replicas[i].spectrum, rep.replicas[j].control_spectrum));
    }
    rep.median_alignment = median(alignments);
    rep.median_distance = median(distances);
    rep.median_control_distance = median(control_distances);
    return rep;
}

void write_report_text(const ReplicaReport& rep, std::ostream& out) {
    out << "[replicas]\n";
    out << "count = " << rep.replicas.size() << '\n';
    out << "failures = " << rep.failures.size() << '\n';
    for (const auto& f : rep.failures) out << "failure = " << f << '\n';
    out << "\n[per_replica]\n";
    for (const auto& r : rep.replicas) {
        out << "seed = " << r.seed << ", vae_digest = " << to_hex(r.vae_digest)
            << ", cov_rank = " << r.covariance_rank << ", collapsed_dims =";
        if (r.collapsed.empty()) out << " none";
        for (int d : r.collapsed) out << ' ' << d;
        out << ", spectrum =";
        for (double e : r.spectrum) out << ' ' << fmt_double(e);
        out << '\n';
    }
    out << "\n[summary]\n";
    out << "median_alignment = " << fmt_double(rep.median_alignment) << '\n';
    out << "median_spectrum_distance = " << fmt_double(rep.median_distance) << '\n';
    out << "median_control_distance = " << fmt_double(rep.median_control_distance) << '\n';
    out << "# alignment and distance scores are constructions of this artifact;\n";
    out << "# they quantify replica divergence and spectrum stability.\n";
}

void write_replica_spectra_csv(const ReplicaReport& rep, std::ostream& out) {
    out << "seed,class_rank,mean_E,std_E\n";
    for (const auto& r : rep.replicas) {
        // class_stats sorted by mean energy to match the spectrum order
        std::vector<assign::EnergyAssignment::ClassStats> stats = r.assignment.class_stats;
        std::sort(stats.begin(), stats.end(),
                  [](const auto& a, const auto& b) { return a.mean_energy < b.mean_energy; });
        int rank = 0;
        for (const auto& cs : stats)
            out << r.seed << ',' << rank++ << ',' << fmt_double(cs.mean_energy) << ','
                << fmt_double(cs.std_energy) << '\n';
    }
}

void write_pairwise_csv(const ReplicaReport& rep, std::ostream& out) {
    out << "seedA,seedB,alignment,spectrum_distance\n";
    const int r = static_cast<int>(rep.replicas.size());
    for (int i = 0; i < r; ++i)
        for (int j = i + 1; j < r; ++j)
            out << rep.replicas[i].seed << ',' << rep.replicas[j].seed << ','
                << fmt_double(rep.alignment(i, j)) << ',' << fmt_double(rep.distance(i, j))
                << '\n';
}

}  // namespace latsp::degeneracy
