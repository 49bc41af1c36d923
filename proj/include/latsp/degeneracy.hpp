#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latsp/assign.hpp"
#include "latsp/common.hpp"
#include "latsp/datagen.hpp"
#include "latsp/vae.hpp"

namespace latsp::degeneracy {

/// One replica of the full pipeline: VAE train + encode + assigner train +
/// assignment, all derived from a single replica seed.
struct ReplicaOutcome {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    vae::LatentEmbedding embedding;
    assign::EnergyAssignment assignment;
    std::uint64_t vae_digest = 0;
    int covariance_rank = 0;
    std::vector<int> collapsed;
    std::vector<double> spectrum;          ///< sorted class-mean energies
    std::vector<double> control_spectrum;  ///< same energies, labels shuffled
};

/// Run one full pass per seed. Failures are isolated per replica; the
/// surviving replicas are reported. Replicas are independent and may be
/// fanned out across threads.
std::vector<ReplicaOutcome> run_replicas(const datagen::Dataset& ds,
                                         const vae::VaeConfig& vae_cfg,
                                         const assign::AssignConfig& assign_cfg,
                                         const std::vector<std::uint64_t>& seeds,
                                         int threads = 1);

/// Best-fit orthogonal alignment of two latent clouds over the same rows.
/// Both clouds are centered and Frobenius-normalized; the score is the sum
/// of singular values of the cross-covariance, clamped to [0, 1]. 1 means
/// one cloud is an exact rotation/reflection of the other.
double embedding_alignment(const vae::LatentEmbedding& a, const vae::LatentEmbedding& b);

/// Mean absolute difference of sorted class-mean energy vectors after
/// min-max normalizing each to [0, 1]. A metric on the normalized vectors.
double spectrum_distance(const std::vector<double>& a, const std::vector<double>& b);

/// Class-mean spectrum of the same per-sample energies under a seeded
/// label shuffle; the null model for spectrum stability.
std::vector<double> shuffled_control_spectrum(const assign::EnergyAssignment& assignment,
                                              std::uint64_t seed);

struct ReplicaReport {
    std::vector<ReplicaOutcome> replicas;   ///< surviving replicas only
    std::vector<std::string> failures;      ///< "seed: error" lines
    Eigen::MatrixXd alignment;              ///< pairwise, symmetric, unit diagonal
    Eigen::MatrixXd distance;               ///< pairwise spectrum distances
    double median_alignment = 0.0;
    double median_distance = 0.0;
    double median_control_distance = 0.0;   ///< replicas vs shuffled controls
};

ReplicaReport report(std::vector<ReplicaOutcome> outcomes);

void write_report_text(const ReplicaReport& rep, std::ostream& out);
void write_replica_spectra_csv(const ReplicaReport& rep, std::ostream& out);
void write_pairwise_csv(const ReplicaReport& rep, std::ostream& out);

}  // namespace latsp::degeneracy
