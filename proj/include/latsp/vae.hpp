#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "latsp/common.hpp"
#include "latsp/datagen.hpp"
#include "latsp/nn.hpp"

namespace latsp::vae {

struct VaeConfig {
    int input_dim = 20;
    std::vector<int> encoder_hidden{64, 64};
    int latent_dim = 2;
    std::vector<int> decoder_hidden{64, 64};
    int epochs = 80;
    int batch_size = 64;
    double learning_rate = 3e-3;
    double beta = 1.0;  ///< KL weight; 1 is the plain VAE
    std::uint64_t seed = 0;

    void validate() const;
    std::string to_text() const;
    std::uint64_t digest() const;
};

/// Encoder/decoder pair. The encoder emits [mu | logvar]; the decoder maps
/// a latent draw back to feature space with unit-variance Gaussian output,
/// so reconstruction is squared error.
struct VaeModel {
    nn::DenseNetwork encoder;
    nn::DenseNetwork decoder;
    VaeConfig config;
};

/// Per-sample posterior means, log-variances, one reparametrized draw per
/// row, and the noise that produced it. Labels ride along for evaluation
/// only; no training path reads them.
struct LatentEmbedding {
    Eigen::MatrixXd mu;       // [N x d_z]
    Eigen::MatrixXd logvar;   // [N x d_z]
    Eigen::MatrixXd samples;  // [N x d_z], mu + exp(logvar/2) .* noise
    Eigen::MatrixXd noise;    // [N x d_z]
    std::vector<int> labels;

    int n_samples() const { return static_cast<int>(mu.rows()); }
    int latent_dim() const { return static_cast<int>(mu.cols()); }
};

struct ElboTerms {
    double total = 0.0;
    double recon = 0.0;
    double kl = 0.0;
};

struct EpochStats {
    int epoch = 0;
    double recon = 0.0;
    double kl = 0.0;
    double total = 0.0;
};

struct VaeTrainResult {
    VaeModel model;
    std::vector<EpochStats> trace;
};

/// z* = mu + exp(logvar / 2) .* noise, elementwise.
Eigen::MatrixXd reparametrize(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar,
                              const Eigen::MatrixXd& noise);

/// Reconstruction term: squared error summed over features, averaged over
/// the batch. KL term: batch mean of 0.5 * sum_j(exp(lv) + mu^2 - 1 - lv).
/// total = recon + beta * kl.
ElboTerms elbo_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& recon,
                    const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar, double beta);

/// Train on a standardized dataset. Throws TrainingError naming the epoch
/// if the loss goes non-finite.
VaeTrainResult train_vae(const datagen::Dataset& ds, const VaeConfig& cfg);

/// One deterministic noise draw per sample from `seed`.
LatentEmbedding encode_dataset(const VaeModel& model, const datagen::Dataset& ds,
                               std::uint64_t seed);

/// Numerical rank of the empirical covariance of the posterior means:
/// eigenvalues above tol * largest, returned sorted descending.
std::pair<int, Eigen::VectorXd> covariance_rank(const LatentEmbedding& emb, double tol);

/// Latent dimensions whose posterior matches the prior across the dataset:
/// std of mu below mu_tol and mean variance within var_tol of 1.
std::vector<int> collapsed_dims(const LatentEmbedding& emb, double mu_tol, double var_tol);

void save_model(const VaeModel& model, std::ostream& out);
VaeModel load_model(std::istream& in);

void write_embedding_csv(const LatentEmbedding& emb, std::ostream& out);
LatentEmbedding read_embedding_csv(std::istream& in);

}  // namespace latsp::vae
