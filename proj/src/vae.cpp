#include "latsp/vae.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace latsp::vae {

namespace {

std::vector<int> encoder_sizes(const VaeConfig& cfg) {
    std::vector<int> sizes{cfg.input_dim};
    sizes.insert(sizes.end(), cfg.encoder_hidden.begin(), cfg.encoder_hidden.end());
    sizes.push_back(2 * cfg.latent_dim);
    return sizes;
}

std::vector<int> decoder_sizes(const VaeConfig& cfg) {
    std::vector<int> sizes{cfg.latent_dim};
    sizes.insert(sizes.end(), cfg.decoder_hidden.begin(), cfg.decoder_hidden.end());
    sizes.push_back(cfg.input_dim);
    return sizes;
}

std::vector<nn::Activation> tanh_stack(std::size_t hidden) {
    std::vector<nn::Activation> acts(hidden, nn::Activation::Tanh);
    acts.push_back(nn::Activation::Identity);
    return acts;
}

}  // namespace

void VaeConfig::validate() const {
    if (input_dim < 1) throw ConfigError("vae: input_dim must be positive");
    if (latent_dim < 1) throw ConfigError("vae: latent_dim must be >= 1");
    if (epochs < 1) throw ConfigError("vae: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("vae: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("vae: learning_rate must be positive");
    if (!(beta > 0.0)) throw ConfigError("vae: beta must be positive");
    for (int h : encoder_hidden)
        if (h < 1) throw ConfigError("vae: encoder hidden sizes must be positive");
    for (int h : decoder_hidden)
        if (h < 1) throw ConfigError("vae: decoder hidden sizes must be positive");
}

std::string VaeConfig::to_text() const {
    std::ostringstream out;
    out << "input_dim " << input_dim << '\n';
    out << "encoder_hidden";
    for (int h : encoder_hidden) out << ' ' << h;
    out << '\n';
    out << "latent_dim " << latent_dim << '\n';
    out << "decoder_hidden";
    for (int h : decoder_hidden) out << ' ' << h;
    out << '\n';
    out << "epochs " << epochs << '\n';
    out << "batch_size " << batch_size << '\n';
    out << "learning_rate " << fmt_double(learning_rate) << '\n';
    out << "beta " << fmt_double(beta) << '\n';
    out << "seed " << seed << '\n';
    return out.str();
}

std::uint64_t VaeConfig::digest() const { return fnv1a64(to_text()); }

Eigen::MatrixXd reparametrize(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar,
                              const Eigen::MatrixXd& noise) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() ||
        mu.rows() != noise.rows() || mu.cols() != noise.cols())
        throw ContractViolation("reparametrize: shape mismatch");
    return mu.array() + (logvar.array() / 2.0).exp() * noise.array();
}

ElboTerms elbo_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& recon,
                    const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar, double beta) {
    if (x.rows() != recon.rows() || x.cols() != recon.cols())
        throw ContractViolation("elbo_loss: reconstruction shape mismatch");
    if (mu.rows() != x.rows() || logvar.rows() != x.rows() || mu.cols() != logvar.cols())
        throw ContractViolation("elbo_loss: posterior shape mismatch");
    if (!x.allFinite() || !recon.allFinite() || !mu.allFinite() || !logvar.allFinite())
        throw TrainingError("elbo_loss: non-finite inputs");
    const double batch = static_cast<double>(x.rows());
    ElboTerms terms;
    terms.recon = (recon - x).array().square().sum() / batch;
    terms.kl =
        0.5 * (logvar.array().exp() + mu.array().square() - 1.0 - logvar.array()).sum() / batch;
    terms.total = terms.recon + beta * terms.kl;
    return terms;
}

VaeTrainResult train_vae(const datagen::Dataset& ds, const VaeConfig& cfg) {
    cfg.validate();
    if (ds.n_features() != cfg.input_dim)
        throw ContractViolation("train_vae: dataset width does not match input_dim");
    const int N = ds.n_samples();
    const int dz = cfg.latent_dim;

    Rng init_rng(Rng::mix(cfg.seed, 1));
    Rng data_rng(Rng::mix(cfg.seed, 2));

    VaeTrainResult result;
    result.model.config = cfg;
    result.model.encoder =
        nn::DenseNetwork(encoder_sizes(cfg), tanh_stack(cfg.encoder_hidden.size()), init_rng);
    result.model.decoder =
        nn::DenseNetwork(decoder_sizes(cfg), tanh_stack(cfg.decoder_hidden.size()), init_rng);
    nn::DenseNetwork& enc = result.model.encoder;
    nn::DenseNetwork& dec = result.model.decoder;

    nn::OptimizerState enc_opt = nn::OptimizerState::adaptive_moment(cfg.learning_rate);
    nn::OptimizerState dec_opt = nn::OptimizerState::adaptive_moment(cfg.learning_rate);
    enc_opt.init_for(enc);
    dec_opt.init_for(dec);

    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        data_rng.shuffle(order);
        double recon_sum = 0.0, kl_sum = 0.0;
        for (int start = 0; start < N; start += cfg.batch_size) {
            const int b = std::min(cfg.batch_size, N - start);
            Eigen::MatrixXd xb(b, cfg.input_dim);
            for (int i = 0; i < b; ++i) xb.row(i) = ds.features.row(order[start + i]);

            nn::ForwardCache enc_cache = enc.forward_cached(xb);
            const Eigen::MatrixXd mu = enc_cache.output.leftCols(dz);
            const Eigen::MatrixXd logvar = enc_cache.output.rightCols(dz);
            const Eigen::MatrixXd eps = data_rng.normal_matrix(b, dz);
            const Eigen::MatrixXd sigma = (logvar.array() / 2.0).exp();
            const Eigen::MatrixXd z = mu.array() + sigma.array() * eps.array();

            nn::ForwardCache dec_cache = dec.forward_cached(z);
            const ElboTerms terms = elbo_loss(xb, dec_cache.output, mu, logvar, cfg.beta);
            if (!std::isfinite(terms.total))
                throw TrainingError("vae training diverged at epoch " + std::to_string(epoch));
            recon_sum += terms.recon * b;
            kl_sum += terms.kl * b;

            const double bd = static_cast<double>(b);
            const Eigen::MatrixXd d_recon = 2.0 * (dec_cache.output - xb) / bd;
            nn::Gradients dec_grads = dec.backward(dec_cache, d_recon);

            // KL gradients: d/dmu = mu / b, d/dlogvar = (exp(lv) - 1) / (2 b).
            Eigen::MatrixXd d_mu = dec_grads.dinput + cfg.beta * mu / bd;
            Eigen::MatrixXd d_logvar =
                (dec_grads.dinput.array() * 0.5 * sigma.array() * eps.array()).matrix() +
                cfg.beta * 0.5 * (logvar.array().exp() - 1.0).matrix() / bd;
            Eigen::MatrixXd upstream(b, 2 * dz);
            upstream << d_mu, d_logvar;
            nn::Gradients enc_grads = enc.backward(enc_cache, upstream);

            nn::step(dec, dec_grads, dec_opt);
            nn::step(enc, enc_grads, enc_opt);
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.recon = recon_sum / N;
        stats.kl = kl_sum / N;
        stats.total = stats.recon + cfg.beta * stats.kl;
        if (!std::isfinite(stats.total))
            throw TrainingError("vae training diverged at epoch " + std::to_string(epoch));
        result.trace.push_back(stats);
    }
    return result;
}

LatentEmbedding encode_dataset(const VaeModel& model, const datagen::Dataset& ds,
                               std::uint64_t seed) {
    const int dz = model.config.latent_dim;
    const Eigen::MatrixXd out = model.encoder.forward(ds.features);
    LatentEmbedding emb;
    emb.mu = out.leftCols(dz);
    emb.logvar = out.rightCols(dz);
    Rng rng(seed);
    emb.noise = rng.normal_matrix(out.rows(), dz);
    emb.samples = reparametrize(emb.mu, emb.logvar, emb.noise);
    emb.labels = ds.labels;
    return emb;
}

std::pair<int, Eigen::VectorXd> covariance_rank(const LatentEmbedding& emb, double tol) {
    const Eigen::Index n = emb.mu.rows();
    if (n < 2) throw ContractViolation("covariance_rank: need at least two samples");
    const Eigen::MatrixXd centered = emb.mu.rowwise() - emb.mu.colwise().mean();
    const Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    Eigen::VectorXd eigs = solver.eigenvalues().reverse();
    const double largest = std::max(eigs(0), 0.0);
    int rank = 0;
    if (largest > 0.0)
        for (Eigen::Index i = 0; i < eigs.size(); ++i)
            if (eigs(i) > tol * largest) ++rank;
    return {rank, eigs};
}

std::vector<int> collapsed_dims(const LatentEmbedding& emb, double mu_tol, double var_tol) {
    std::vector<int> dims;
    const double n = static_cast<double>(emb.mu.rows());
    for (Eigen::Index j = 0; j < emb.mu.cols(); ++j) {
        const double mean = emb.mu.col(j).mean();
        const double sd = std::sqrt((emb.mu.col(j).array() - mean).square().sum() / n);
        const double mean_var = emb.logvar.col(j).array().exp().mean();
        if (sd < mu_tol && std::abs(mean_var - 1.0) < var_tol)
            dims.push_back(static_cast<int>(j));
    }
    return dims;
}

void save_model(const VaeModel& model, std::ostream& out) {
    out << "vae_config:\n" << model.config.to_text() << "end_config\n";
    nn::save_network(model.encoder, out);
    nn::save_network(model.decoder, out);
}

VaeModel load_model(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "vae_config:")
        throw IoError("vae model file: missing config header");
    VaeModel model;
    VaeConfig& cfg = model.config;
    while (std::getline(in, line) && line != "end_config") {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "input_dim") ls >> cfg.input_dim;
        else if (key == "latent_dim") ls >> cfg.latent_dim;
        else if (key == "epochs") ls >> cfg.epochs;
        else if (key == "batch_size") ls >> cfg.batch_size;
        else if (key == "learning_rate") ls >> cfg.learning_rate;
        else if (key == "beta") ls >> cfg.beta;
        else if (key == "seed") ls >> cfg.seed;
        else if (key == "encoder_hidden") {
            cfg.encoder_hidden.clear();
            for (int h; ls >> h;) cfg.encoder_hidden.push_back(h);
        } else if (key == "decoder_hidden") {
            cfg.decoder_hidden.clear();
            for (int h; ls >> h;) cfg.decoder_hidden.push_back(h);
        } else
            throw IoError("vae model file: unknown config key " + key);
    }
    model.encoder = nn::load_network(in);
    model.decoder = nn::load_network(in);
    return model;
}

void write_embedding_csv(const LatentEmbedding& emb, std::ostream& out) {
    const int dz = emb.latent_dim();
    out << "id";
    for (int j = 0; j < dz; ++j) out << ",mu" << j;
    for (int j = 0; j < dz; ++j) out << ",logvar" << j;
    for (int j = 0; j < dz; ++j) out << ",z" << j;
    out << ",label\n";
    for (int i = 0; i < emb.n_samples(); ++i) {
        out << i;
        for (int j = 0; j < dz; ++j) out << ',' << fmt_double(emb.mu(i, j));
        for (int j = 0; j < dz; ++j) out << ',' << fmt_double(emb.logvar(i, j));
        for (int j = 0; j < dz; ++j) out << ',' << fmt_double(emb.samples(i, j));
        out << ',' << emb.labels[i] << '\n';
    }
}

LatentEmbedding read_embedding_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("embedding csv: empty file");
    const int cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
    if ((cols - 2) % 3 != 0 || cols < 5) throw IoError("embedding csv: malformed header");
    const int dz = (cols - 2) / 3;
    std::vector<double> mu, lv, z;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');  // id
        for (int j = 0; j < dz; ++j) {
            std::getline(ls, cell, ',');
            mu.push_back(std::stod(cell));
        }
        for (int j = 0; j < dz; ++j) {
            std::getline(ls, cell, ',');
            lv.push_back(std::stod(cell));
        }
        for (int j = 0; j < dz; ++j) {
            std::getline(ls, cell, ',');
            z.push_back(std::stod(cell));
        }
        if (!std::getline(ls, cell)) throw IoError("embedding csv: missing label");
        labels.push_back(std::stoi(cell));
    }
    const int n = static_cast<int>(labels.size());
    LatentEmbedding emb;
    emb.mu.resize(n, dz);
    emb.logvar.resize(n, dz);
    emb.samples.resize(n, dz);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dz; ++j) {
            emb.mu(i, j) = mu[static_cast<std::size_t>(i) * dz + j];
            emb.logvar(i, j) = lv[static_cast<std::size_t>(i) * dz + j];
            emb.samples(i, j) = z[static_cast<std::size_t>(i) * dz + j];
        }
    // Reconstruct the noise that produced the stored draws.
    emb.noise =
        ((emb.samples - emb.mu).array() / (emb.logvar.array() / 2.0).exp()).matrix();
    emb.labels = std::move(labels);
    return emb;
}

}  // namespace latsp::vae
