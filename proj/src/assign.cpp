#include "latsp/assign.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace latsp::assign {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

InversionMode inversion_from_name(const std::string& name) {
    if (name == "paper-literal") return InversionMode::PaperLiteral;
    if (name == "corrected") return InversionMode::Corrected;
    throw ConfigError("unknown inversion mode: " + name);
}

std::string inversion_name(InversionMode m) {
    return m == InversionMode::PaperLiteral ? "paper-literal" : "corrected";
}

ProjectionMode projection_from_name(const std::string& name) {
    if (name == "first-principal-component") return ProjectionMode::FirstPrincipalComponent;
    if (name == "per-dimension-mean") return ProjectionMode::PerDimensionMean;
    throw ConfigError("unknown projection mode: " + name);
}

std::string projection_name(ProjectionMode m) {
    return m == ProjectionMode::FirstPrincipalComponent ? "first-principal-component"
                                                        : "per-dimension-mean";
}

void AssignConfig::validate() const {
    spec.validate();
    if (epochs < 1) throw ConfigError("assign: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("assign: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("assign: learning_rate must be positive");
    if (norm_weight < 0.0) throw ConfigError("assign: norm_weight must be >= 0");
    for (int h : hidden)
        if (h < 1) throw ConfigError("assign: hidden sizes must be positive");
}

std::string AssignConfig::to_text() const {
    std::ostringstream out;
    out << "hidden";
    for (int h : hidden) out << ' ' << h;
    out << '\n';
    out << "epochs " << epochs << '\n';
    out << "batch_size " << batch_size << '\n';
    out << "learning_rate " << fmt_double(learning_rate) << '\n';
    out << "length " << fmt_double(spec.length) << '\n';
    out << "kinetic " << fmt_double(spec.kinetic) << '\n';
    out << "frequency " << spec.frequency << '\n';
    out << "alpha " << fmt_double(spec.alpha) << '\n';
    out << "mode_cutoff " << spec.mode_cutoff << '\n';
    out << "norm_weight " << fmt_double(norm_weight) << '\n';
    out << "inversion " << inversion_name(inversion) << '\n';
    out << "projection " << projection_name(projection) << '\n';
    out << "seed " << seed << '\n';
    return out.str();
}

std::uint64_t AssignConfig::digest() const { return fnv1a64(to_text()); }

Eigen::VectorXd project_latent(const vae::LatentEmbedding& emb, const AssignConfig& cfg) {
    const Eigen::Index n = emb.mu.rows();
    if (n == 0) throw ContractViolation("project_latent: empty embedding");
    if (emb.mu.cols() == 1 || cfg.projection == ProjectionMode::PerDimensionMean)
        return emb.mu.rowwise().mean();
    const Eigen::MatrixXd centered = emb.mu.rowwise() - emb.mu.colwise().mean();
    const Eigen::MatrixXd cov =
        centered.transpose() * centered / std::max<double>(1.0, static_cast<double>(n - 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const Eigen::VectorXd axis = solver.eigenvectors().col(emb.mu.cols() - 1);
    return emb.mu * axis;
}

double quantum_number(double psi, double z_box, const box::BoxSpec& spec, InversionMode mode) {
    return quantum_number_grad(psi, z_box, spec, mode).n;
}

QuantumNumberGrad quantum_number_grad(double psi, double z_box, const box::BoxSpec& spec,
                                      InversionMode mode) {
    const double L = spec.length;
    if (z_box < box::kBoxMargin * L)
        throw ContractViolation("quantum_number: z_box below the wall margin");
    QuantumNumberGrad out;
    const double prefactor = L / (kPi * z_box);
    double arg = 0.0, darg_dpsi = 0.0;
    if (mode == InversionMode::PaperLiteral) {
        arg = L * psi * psi / 2.0;
        darg_dpsi = L * psi;
    } else {
        arg = std::sqrt(L / 2.0) * std::abs(psi);
        darg_dpsi = psi == 0.0 ? 0.0 : std::sqrt(L / 2.0) * (psi > 0.0 ? 1.0 : -1.0);
    }
    if (arg >= 1.0) {
        out.clamped = true;
        arg = 1.0;
    } else if (arg < 0.0) {
        arg = 0.0;
    }
    const double raw = prefactor * std::asin(arg);
    if (raw <= box::kQuantumNumberFloor) {
        out.floored = true;
        out.n = box::kQuantumNumberFloor;
        out.dn_dpsi = 0.0;
        return out;
    }
    out.n = raw;
    out.dn_dpsi =
        out.clamped ? 0.0 : prefactor * darg_dpsi / std::sqrt(1.0 - arg * arg);
    return out;
}

EnergyLossResult energy_loss(const Eigen::VectorXd& psi, const Eigen::VectorXd& z_box,
                             const AssignConfig& cfg) {
    const Eigen::Index b = psi.size();
    if (b == 0) throw ContractViolation("energy_loss: empty batch");
    if (z_box.size() != b) throw ContractViolation("energy_loss: z_box size mismatch");
    if (!psi.allFinite()) throw TrainingError("energy_loss: non-finite psi");

    const double L = cfg.spec.length;
    const double alpha = cfg.spec.alpha;
    const double bd = static_cast<double>(b);

    EnergyLossResult result;
    result.energy.resize(b);
    result.n.resize(b);
    result.dloss_dpsi.resize(b);

    double energy_sum = 0.0;
    long clamped = 0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const QuantumNumberGrad q =
            quantum_number_grad(psi(i), z_box(i), cfg.spec, cfg.inversion);
        const double e1 = box::e1_closed(q.n, cfg.spec);
        result.n(i) = q.n;
        result.energy(i) = alpha * q.n * q.n + e1;
        energy_sum += result.energy(i);
        const double de_dn = 2.0 * alpha * q.n + box::e1_prime(q.n, cfg.spec);
        result.dloss_dpsi(i) = de_dn * q.dn_dpsi / bd;
        if (q.clamped) ++clamped;
    }

    const double mean_sq = psi.array().square().mean();
    const double deviation = L * mean_sq - 1.0;
    result.penalty = cfg.norm_weight * deviation * deviation;
    for (Eigen::Index i = 0; i < b; ++i)
        result.dloss_dpsi(i) += cfg.norm_weight * 2.0 * deviation * L * 2.0 * psi(i) / bd;

    result.loss = energy_sum / bd + result.penalty;
    result.clamp_rate = static_cast<double>(clamped) / bd;
    return result;
}

double collapse_gradient_at_zero(const AssignConfig& cfg) {
    return -2.0 * cfg.norm_weight * cfg.spec.length;
}

AssignTrainResult train_assigner(const vae::LatentEmbedding& emb, const AssignConfig& cfg) {
    cfg.validate();
    const int N = emb.n_samples();
    if (N == 0) throw ContractViolation("train_assigner: empty embedding");

    const Eigen::VectorXd projected = project_latent(emb, cfg);
    if ((projected.maxCoeff() - projected.minCoeff()) < 1e-300)
        throw ContractViolation("train_assigner: projection degenerate, all values equal");
    const Eigen::VectorXd z_box = box::map_to_box(projected, cfg.spec);

    Rng rng(Rng::mix(cfg.seed, 1));
    std::vector<int> sizes{emb.latent_dim()};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(1);
    std::vector<nn::Activation> acts(cfg.hidden.size(), nn::Activation::Tanh);
    acts.push_back(nn::Activation::Identity);

    AssignTrainResult result;
    result.network = nn::DenseNetwork(sizes, acts, rng);
    // Start psi near zero: samples that begin beyond the arcsin boundary
    // would sit in the zero-gradient clamp region from the first step.
    result.network.layers().back().weight *= 0.05;
    nn::OptimizerState opt = nn::OptimizerState::adaptive_moment(cfg.learning_rate);
    opt.init_for(result.network);

    Rng shuffle_rng(Rng::mix(cfg.seed, 2));
    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);

    // The trainer anneals: the norm penalty ramps in over the first half of
    // training so samples track their interior optima instead of being
    // inflated across the arcsin boundary (the clamp has zero gradient
    // outside, so overshooting samples would freeze there), and the
    // learning rate decays so late steps cannot jump the boundary either.
    // The recorded trace always reports the configured objective.
    AssignConfig scheduled = cfg;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        const double progress = static_cast<double>(epoch - 1) / std::max(1, cfg.epochs - 1);
        scheduled.norm_weight = cfg.norm_weight * std::min(1.0, 2.0 * progress + 0.02);
        opt.learning_rate = cfg.learning_rate * (1.0 - 0.9 * progress);
        double loss_sum = 0.0, n_sum = 0.0, e_sum = 0.0, clamp_sum = 0.0;
        for (int start = 0; start < N; start += cfg.batch_size) {
            const int b = std::min(cfg.batch_size, N - start);
            Eigen::MatrixXd xb(b, emb.latent_dim());
            Eigen::VectorXd zb(b);
            for (int i = 0; i < b; ++i) {
                xb.row(i) = emb.mu.row(order[start + i]);
                zb(i) = z_box(order[start + i]);
            }
            nn::ForwardCache cache = result.network.forward_cached(xb);
            const Eigen::VectorXd psi = cache.output.col(0);
            const EnergyLossResult el = energy_loss(psi, zb, scheduled);
            if (!std::isfinite(el.loss))
                throw TrainingError("assigner diverged at epoch " + std::to_string(epoch));
            // trace the configured objective, not the annealed one
            const double dev = cfg.spec.length * psi.squaredNorm() / b - 1.0;
            loss_sum += ((el.loss - el.penalty) + cfg.norm_weight * dev * dev) * b;
            n_sum += el.n.sum();
            e_sum += el.energy.sum();
            clamp_sum += el.clamp_rate * b;
            nn::Gradients grads = result.network.backward(cache, el.dloss_dpsi);
            nn::step(result.network, grads, opt);
        }
        AssignEpochStats stats;
        stats.epoch = epoch;
        stats.loss = loss_sum / N;
        stats.mean_n = n_sum / N;
        stats.mean_energy = e_sum / N;
        stats.clamp_rate = clamp_sum / N;
        result.trace.push_back(stats);
    }
    return result;
}

namespace {

void fill_class_stats(EnergyAssignment& out) {
    out.class_stats.clear();
    if (out.labels.size() != static_cast<std::size_t>(out.n_samples())) return;
    std::map<int, std::vector<int>> members;
    for (int i = 0; i < out.n_samples(); ++i) members[out.labels[i]].push_back(i);
    for (const auto& [label, idx] : members) {
        EnergyAssignment::ClassStats cs;
        cs.label = label;
        cs.count = static_cast<int>(idx.size());
        double es = 0.0, ns = 0.0;
        for (int i : idx) {
            es += out.energy(i);
            ns += out.n(i);
        }
        cs.mean_energy = es / cs.count;
        cs.mean_n = ns / cs.count;
        double ev = 0.0, nv = 0.0;
        for (int i : idx) {
            ev += (out.energy(i) - cs.mean_energy) * (out.energy(i) - cs.mean_energy);
            nv += (out.n(i) - cs.mean_n) * (out.n(i) - cs.mean_n);
        }
        cs.std_energy = std::sqrt(ev / cs.count);
        cs.std_n = std::sqrt(nv / cs.count);
        out.class_stats.push_back(cs);
    }
}

}  // namespace

EnergyAssignment assign_energies(const nn::DenseNetwork& network,
                                 const vae::LatentEmbedding& emb, const AssignConfig& cfg) {
    const int N = emb.n_samples();
    if (N == 0) throw ContractViolation("assign_energies: empty embedding");
    EnergyAssignment out;
    out.z_box = box::map_to_box(project_latent(emb, cfg), cfg.spec);
    out.psi = network.forward(emb.mu).col(0);
    out.n.resize(N);
    out.energy.resize(N);
    for (int i = 0; i < N; ++i) {
        out.n(i) = quantum_number(out.psi(i), out.z_box(i), cfg.spec, cfg.inversion);
        out.energy(i) = cfg.spec.alpha * out.n(i) * out.n(i) + box::e1_closed(out.n(i), cfg.spec);
    }
    out.labels = emb.labels;
    fill_class_stats(out);
    return out;
}

std::vector<double> sorted_class_means(const EnergyAssignment& assignment) {
    std::vector<double> means;
    means.reserve(assignment.class_stats.size());
    for (const auto& cs : assignment.class_stats) means.push_back(cs.mean_energy);
    std::sort(means.begin(), means.end());
    return means;
}

std::vector<double> spectrum_gap(const EnergyAssignment& assignment) {
    const std::vector<double> means = sorted_class_means(assignment);
    std::vector<double> gaps;
    for (std::size_t i = 1; i < means.size(); ++i) gaps.push_back(means[i] - means[i - 1]);
    return gaps;
}

void write_assignment_csv(const EnergyAssignment& a, std::ostream& out) {
    out << "id,psi,z_box,n,E,label\n";
    for (int i = 0; i < a.n_samples(); ++i)
        out << i << ',' << fmt_double(a.psi(i)) << ',' << fmt_double(a.z_box(i)) << ','
            << fmt_double(a.n(i)) << ',' << fmt_double(a.energy(i)) << ',' << a.labels[i]
            << '\n';
}

EnergyAssignment read_assignment_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("assignment csv: empty file");
    std::vector<double> psi, zb, n, e;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        std::getline(ls, cell, ',');
        psi.push_back(std::stod(cell));
        std::getline(ls, cell, ',');
        zb.push_back(std::stod(cell));
        std::getline(ls, cell, ',');
        n.push_back(std::stod(cell));
        std::getline(ls, cell, ',');
        e.push_back(std::stod(cell));
        if (!std::getline(ls, cell)) throw IoError("assignment csv: missing label");
        labels.push_back(std::stoi(cell));
    }
    EnergyAssignment a;
    const int count = static_cast<int>(labels.size());
    a.psi.resize(count);
    a.z_box.resize(count);
    a.n.resize(count);
    a.energy.resize(count);
    for (int i = 0; i < count; ++i) {
        a.psi(i) = psi[i];
        a.z_box(i) = zb[i];
        a.n(i) = n[i];
        a.energy(i) = e[i];
    }
    a.labels = std::move(labels);
    fill_class_stats(a);
    return a;
}

void write_trace_csv(const std::vector<AssignEpochStats>& trace, std::ostream& out) {
    out << "epoch,loss,mean_n,mean_E,clamp_rate\n";
    for (const auto& s : trace)
        out << s.epoch << ',' << fmt_double(s.loss) << ',' << fmt_double(s.mean_n) << ','
            << fmt_double(s.mean_energy) << ',' << fmt_double(s.clamp_rate) << '\n';
}

std::vector<AssignEpochStats> read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "epoch,loss,mean_n,mean_E,clamp_rate")
        throw IoError("assign trace csv: bad header");
    std::vector<AssignEpochStats> trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        AssignEpochStats s;
        std::getline(ls, cell, ',');
        s.epoch = std::stoi(cell);
        std::getline(ls, cell, ',');
        s.loss = std::stod(cell);
        std::getline(ls, cell, ',');
        s.mean_n = std::stod(cell);
        std::getline(ls, cell, ',');
        s.mean_energy = std::stod(cell);
        if (!std::getline(ls, cell)) throw IoError("assign trace csv: short row");
        s.clamp_rate = std::stod(cell);
        trace.push_back(s);
    }
    return trace;
}

}  // namespace latsp::assign
