#include "latsp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

namespace latsp::pipeline {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

// Lists accept commas or whitespace as separators.
std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::string current;
    for (char c : value) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!current.empty()) {
                items.push_back(current);
                current.clear();
            }
        } else {
            current += c;
        }
    }
    if (!current.empty()) items.push_back(current);
    return items;
}

std::vector<int> parse_int_list(const std::string& value, const std::string& field) {
    std::vector<int> items;
    for (const auto& s : split_list(value)) {
        try {
            items.push_back(std::stoi(s));
        } catch (const std::exception&) {
            throw ConfigError(field + ": expected integer list, got '" + value + "'");
        }
    }
    return items;
}

long to_long(const std::string& value, const std::string& field) {
    try {
        return std::stol(value);
    } catch (const std::exception&) {
        throw ConfigError(field + ": expected integer, got '" + value + "'");
    }
}

double to_double(const std::string& value, const std::string& field) {
    try {
        return std::stod(value);
    } catch (const std::exception&) {
        throw ConfigError(field + ": expected number, got '" + value + "'");
    }
}

std::uint64_t to_u64(const std::string& value, const std::string& field) {
    try {
        return std::stoull(value);
    } catch (const std::exception&) {
        throw ConfigError(field + ": expected unsigned integer, got '" + value + "'");
    }
}

void apply_key(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value) {
    const std::string field = "[" + section + "] " + key;
    if (section == "dataset") {
        auto& d = cfg.dataset;
        if (key == "n_samples") d.n_samples = static_cast<int>(to_long(value, field));
        else if (key == "n_features") d.n_features = static_cast<int>(to_long(value, field));
        else if (key == "n_informative") d.n_informative = static_cast<int>(to_long(value, field));
        else if (key == "n_redundant") d.n_redundant = static_cast<int>(to_long(value, field));
        else if (key == "k_classes") d.k_classes = static_cast<int>(to_long(value, field));
        else if (key == "clusters_per_class")
            d.clusters_per_class = static_cast<int>(to_long(value, field));
        else if (key == "cluster_std") d.cluster_std = to_double(value, field);
        else if (key == "class_separation") d.class_separation = to_double(value, field);
        else if (key == "seed") d.seed = to_u64(value, field);
        else throw ConfigError(field + ": unknown key");
    } else if (section == "vae") {
        auto& v = cfg.vae;
        if (key == "encoder_hidden") v.encoder_hidden = parse_int_list(value, field);
        else if (key == "decoder_hidden") v.decoder_hidden = parse_int_list(value, field);
        else if (key == "latent_dim") v.latent_dim = static_cast<int>(to_long(value, field));
        else if (key == "epochs") v.epochs = static_cast<int>(to_long(value, field));
        else if (key == "batch_size") v.batch_size = static_cast<int>(to_long(value, field));
        else if (key == "learning_rate") v.learning_rate = to_double(value, field);
        else if (key == "beta") v.beta = to_double(value, field);
        else if (key == "seed") v.seed = to_u64(value, field);
        else throw ConfigError(field + ": unknown key");
    } else if (section == "box") {
        auto& b = cfg.box;
        if (key == "length") b.length = to_double(value, field);
        else if (key == "kinetic") b.kinetic = to_double(value, field);
        else if (key == "frequency") b.frequency = static_cast<int>(to_long(value, field));
        else if (key == "alpha") b.alpha = to_double(value, field);
        else if (key == "mode_cutoff") b.mode_cutoff = static_cast<int>(to_long(value, field));
        else throw ConfigError(field + ": unknown key");
    } else if (section == "assign") {
        auto& a = cfg.assign;
        if (key == "hidden") a.hidden = parse_int_list(value, field);
        else if (key == "epochs") a.epochs = static_cast<int>(to_long(value, field));
        else if (key == "batch_size") a.batch_size = static_cast<int>(to_long(value, field));
        else if (key == "learning_rate") a.learning_rate = to_double(value, field);
        else if (key == "norm_weight") a.norm_weight = to_double(value, field);
        else if (key == "inversion") a.inversion = assign::inversion_from_name(value);
        else if (key == "projection") a.projection = assign::projection_from_name(value);
        else if (key == "seed") a.seed = to_u64(value, field);
        else throw ConfigError(field + ": unknown key");
    } else if (section == "replicas") {
        if (key == "seeds") {
            cfg.replica_seeds.clear();
            for (const auto& s : split_list(value)) cfg.replica_seeds.push_back(to_u64(s, field));
        } else if (key == "threads")
            cfg.replica_threads = static_cast<int>(to_long(value, field));
        else throw ConfigError(field + ": unknown key");
    } else if (section == "run") {
        if (key == "out_dir") cfg.out_dir = value;
        else if (key == "stages") cfg.stages = split_list(value);
        else throw ConfigError(field + ": unknown key");
    } else {
        throw ConfigError("unknown config section [" + section + "]");
    }
}

void write_file(const fs::path& path, const std::string& body, bool overwrite) {
    if (!overwrite && fs::exists(path))
        throw IoError("output exists: " + path.string() + " (pass --overwrite to replace)");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << body;
}

std::string read_file(const fs::path& path, const std::string& stage) {
    if (!fs::exists(path))
        throw IoError("missing upstream stage (" + stage + "): " + path.string());
    std::ifstream in(path);
    std::ostringstream body;
    body << in.rdbuf();
    return body.str();
}

void append_manifest(const CommandContext& ctx, const std::string& command,
                     std::uint64_t seed, double duration_ms) {
    std::ofstream out(ctx.out_dir / "manifest.txt", std::ios::app);
    out << "command=" << command << " digest=" << to_hex(ctx.config.digest())
        << " seed=" << seed << " duration_ms=" << fmt_double(duration_ms) << '\n';
}

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        const auto now = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(now - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

datagen::Dataset load_dataset(const CommandContext& ctx) {
    std::istringstream in(read_file(ctx.out_dir / "dataset.csv", "generate"));
    return datagen::read_csv(in);
}

vae::VaeModel load_vae_model(const CommandContext& ctx) {
    std::istringstream in(read_file(ctx.out_dir / "vae_model.txt", "train-vae"));
    return vae::load_model(in);
}

vae::LatentEmbedding load_embedding(const CommandContext& ctx) {
    std::istringstream in(read_file(ctx.out_dir / "embedding.csv", "embed"));
    return vae::read_embedding_csv(in);
}

}  // namespace

void RunConfig::validate() const {
    dataset.validate();
    vae::VaeConfig vae_check = vae;
    vae_check.input_dim = dataset.n_features;
    vae_check.validate();
    box.validate();
    assign::AssignConfig assign_check = assign;
    assign_check.spec = box;
    assign_check.validate();
    if (replica_seeds.empty()) throw ConfigError("[replicas] seeds: must not be empty");
    if (replica_threads < 1) throw ConfigError("[replicas] threads: must be >= 1");
    for (const auto& s : stages)
        if (s != "generate" && s != "train-vae" && s != "embed" && s != "spectrum" &&
            s != "assign" && s != "replicas" && s != "plotdata")
            throw ConfigError("[run] stages: unknown stage '" + s + "'");
}

std::string RunConfig::normalized_text() const {
    std::ostringstream out;
    const auto& d = dataset;
    out << "[dataset]\n";
    out << "n_samples = " << d.n_samples << '\n';
    out << "n_features = " << d.n_features << '\n';
    out << "n_informative = " << d.n_informative << '\n';
    out << "n_redundant = " << d.n_redundant << '\n';
    out << "k_classes = " << d.k_classes << '\n';
    out << "clusters_per_class = " << d.clusters_per_class << '\n';
    out << "cluster_std = " << fmt_double(d.cluster_std) << '\n';
    out << "class_separation = " << fmt_double(d.class_separation) << '\n';
    out << "seed = " << d.seed << '\n';
    out << "[vae]\n";
    out << "encoder_hidden =";
    for (int h : vae.encoder_hidden) out << ' ' << h;
    out << "\nlatent_dim = " << vae.latent_dim << '\n';
    out << "decoder_hidden =";
    for (int h : vae.decoder_hidden) out << ' ' << h;
    out << "\nepochs = " << vae.epochs << '\n';
    out << "batch_size = " << vae.batch_size << '\n';
    out << "learning_rate = " << fmt_double(vae.learning_rate) << '\n';
    out << "beta = " << fmt_double(vae.beta) << '\n';
    out << "seed = " << vae.seed << '\n';
    out << "[box]\n";
    out << "length = " << fmt_double(box.length) << '\n';
    out << "kinetic = " << fmt_double(box.kinetic) << '\n';
    out << "frequency = " << box.frequency << '\n';
    out << "alpha = " << fmt_double(box.alpha) << '\n';
    out << "mode_cutoff = " << box.mode_cutoff << '\n';
    out << "[assign]\n";
    out << "hidden =";
    for (int h : assign.hidden) out << ' ' << h;
    out << "\nepochs = " << assign.epochs << '\n';
    out << "batch_size = " << assign.batch_size << '\n';
    out << "learning_rate = " << fmt_double(assign.learning_rate) << '\n';
    out << "norm_weight = " << fmt_double(assign.norm_weight) << '\n';
    out << "inversion = " << assign::inversion_name(assign.inversion) << '\n';
    out << "projection = " << assign::projection_name(assign.projection) << '\n';
    out << "seed = " << assign.seed << '\n';
    out << "[replicas]\n";
    out << "seeds =";
    for (auto s : replica_seeds) out << ' ' << s;
    out << "\nthreads = " << replica_threads << '\n';
    out << "[run]\n";
    out << "out_dir = " << out_dir << '\n';
    out << "stages =";
    for (const auto& s : stages) out << ' ' << s;
    out << '\n';
    return out.str();
}

std::uint64_t RunConfig::digest() const { return fnv1a64(normalized_text()); }

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
        apply_key(cfg, section, key, value);
    }
    return cfg;
}

RunConfig load_config(const fs::path& file) {
    if (!fs::exists(file)) throw IoError("config file not found: " + file.string());
    std::ifstream in(file);
    std::ostringstream body;
    body << in.rdbuf();
    return parse_config(body.str());
}

void override_seed(RunConfig& cfg, std::uint64_t base_seed) {
    cfg.dataset.seed = Rng::mix(base_seed, 1);
    cfg.vae.seed = Rng::mix(base_seed, 2);
    cfg.assign.seed = Rng::mix(base_seed, 3);
    for (std::size_t i = 0; i < cfg.replica_seeds.size(); ++i)
        cfg.replica_seeds[i] = Rng::mix(base_seed, 100 + i);
}

void cmd_generate(const CommandContext& ctx) {
    StageTimer timer;
    ctx.config.dataset.validate();
    const datagen::Dataset ds = datagen::generate(ctx.config.dataset);
    std::ostringstream body;
    datagen::write_csv(ds, body);
    write_file(ctx.out_dir / "dataset.csv", body.str(), ctx.overwrite);
    append_manifest(ctx, "generate", ctx.config.dataset.seed, timer.elapsed_ms());
}

void cmd_train_vae(const CommandContext& ctx) {
    StageTimer timer;
    datagen::Dataset ds = datagen::standardize(load_dataset(ctx));
    vae::VaeConfig cfg = ctx.config.vae;
    cfg.input_dim = ds.n_features();
    const vae::VaeTrainResult trained = vae::train_vae(ds, cfg);
    std::ostringstream model_body;
    vae::save_model(trained.model, model_body);
    write_file(ctx.out_dir / "vae_model.txt", model_body.str(), ctx.overwrite);
    std::ostringstream trace;
    trace << "epoch,recon,kl,total\n";
    for (const auto& s : trained.trace)
        trace << s.epoch << ',' << fmt_double(s.recon) << ',' << fmt_double(s.kl) << ','
              << fmt_double(s.total) << '\n';
    write_file(ctx.out_dir / "vae_trace.csv", trace.str(), ctx.overwrite);
    append_manifest(ctx, "train-vae", cfg.seed, timer.elapsed_ms());
}

void cmd_embed(const CommandContext& ctx) {
    StageTimer timer;
    const datagen::Dataset ds = datagen::standardize(load_dataset(ctx));
    const vae::VaeModel model = load_vae_model(ctx);
    const std::uint64_t noise_seed = Rng::mix(ctx.config.vae.seed, 3);
    const vae::LatentEmbedding emb = vae::encode_dataset(model, ds, noise_seed);
    std::ostringstream body;
    vae::write_embedding_csv(emb, body);
    write_file(ctx.out_dir / "embedding.csv", body.str(), ctx.overwrite);
    append_manifest(ctx, "embed", noise_seed, timer.elapsed_ms());
}

void cmd_spectrum(const CommandContext& ctx) {
    StageTimer timer;
    ctx.config.box.validate();
    const box::SpectrumTable table = box::build_table(ctx.config.box);
    std::ostringstream spec_body, coup_body;
    box::write_table_csv(table, spec_body, coup_body);
    write_file(ctx.out_dir / "spectrum.csv", spec_body.str(), ctx.overwrite);
    write_file(ctx.out_dir / "coupling.csv", coup_body.str(), ctx.overwrite);
    append_manifest(ctx, "spectrum", 0, timer.elapsed_ms());
}

void cmd_assign(const CommandContext& ctx) {
    StageTimer timer;
    const vae::LatentEmbedding emb = load_embedding(ctx);
    assign::AssignConfig cfg = ctx.config.assign;
    cfg.spec = ctx.config.box;
    const assign::AssignTrainResult trained = assign::train_assigner(emb, cfg);
    const assign::EnergyAssignment assignment =
        assign::assign_energies(trained.network, emb, cfg);
    std::ostringstream body;
    assign::write_assignment_csv(assignment, body);
    write_file(ctx.out_dir / "assignment.csv", body.str(), ctx.overwrite);
    std::ostringstream trace;
    assign::write_trace_csv(trained.trace, trace);
    write_file(ctx.out_dir / "assign_trace.csv", trace.str(), ctx.overwrite);
    std::ostringstream net_body;
    nn::save_network(trained.network, net_body);
    write_file(ctx.out_dir / "assign_model.txt", net_body.str(), ctx.overwrite);
    append_manifest(ctx, "assign", cfg.seed, timer.elapsed_ms());
}

void cmd_replicas(const CommandContext& ctx) {
    StageTimer timer;
    const datagen::Dataset ds = datagen::standardize(load_dataset(ctx));
    vae::VaeConfig vae_cfg = ctx.config.vae;
    vae_cfg.input_dim = ds.n_features();
    assign::AssignConfig assign_cfg = ctx.config.assign;
    assign_cfg.spec = ctx.config.box;
    const auto outcomes = degeneracy::run_replicas(ds, vae_cfg, assign_cfg,
                                                   ctx.config.replica_seeds,
                                                   ctx.config.replica_threads);
    const degeneracy::ReplicaReport rep = degeneracy::report(outcomes);
    std::ostringstream spectra, pairwise, text;
    degeneracy::write_replica_spectra_csv(rep, spectra);
    degeneracy::write_pairwise_csv(rep, pairwise);
    degeneracy::write_report_text(rep, text);
    write_file(ctx.out_dir / "replica_spectra.csv", spectra.str(), ctx.overwrite);
    write_file(ctx.out_dir / "pairwise.csv", pairwise.str(), ctx.overwrite);
    write_file(ctx.out_dir / "replica_report.txt", text.str(), ctx.overwrite);
    append_manifest(ctx, "replicas",
                    ctx.config.replica_seeds.empty() ? 0 : ctx.config.replica_seeds.front(),
                    timer.elapsed_ms());
}

void emit_plotdata(const CommandContext& ctx) {
    StageTimer timer;
    const vae::LatentEmbedding emb = load_embedding(ctx);
    std::istringstream net_in(read_file(ctx.out_dir / "assign_model.txt", "assign"));
    const nn::DenseNetwork network = nn::load_network(net_in);
    assign::AssignConfig cfg = ctx.config.assign;
    cfg.spec = ctx.config.box;
    const assign::EnergyAssignment assignment = assign::assign_energies(network, emb, cfg);

    // psi_curve: walk each class along the global projection axis and
    // evaluate the trained network on the class-conditional latent grid.
    const Eigen::VectorXd projected = assign::project_latent(emb, cfg);
    const Eigen::VectorXd z_box = box::map_to_box(projected, cfg.spec);
    const int dz = emb.latent_dim();
    Eigen::VectorXd axis;
    if (dz == 1 || cfg.projection == assign::ProjectionMode::PerDimensionMean) {
        axis = Eigen::VectorXd::Constant(dz, 1.0 / dz);
    } else {
        const Eigen::MatrixXd centered = emb.mu.rowwise() - emb.mu.colwise().mean();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
            centered.transpose() * centered / std::max<double>(1.0, emb.mu.rows() - 1.0));
        axis = solver.eigenvectors().col(dz - 1);
    }
    const double pmin = projected.minCoeff();
    const double pmax = projected.maxCoeff();
    const double span = std::max(pmax - pmin, 1e-300);
    const double L = cfg.spec.length;
    const double lo = box::kBoxMargin * L;
    const double hi = L - box::kBoxMargin * L;

    std::map<int, std::vector<int>> members;
    for (int i = 0; i < emb.n_samples(); ++i) members[emb.labels[i]].push_back(i);
    std::ostringstream curve;
    curve << "label,z_box,psi\n";
    const int grid = 100;
    for (const auto& [label, idx] : members) {
        double lo_p = projected(idx.front()), hi_p = lo_p;
        Eigen::RowVectorXd mean_mu = Eigen::RowVectorXd::Zero(dz);
        for (int i : idx) {
            lo_p = std::min(lo_p, projected(i));
            hi_p = std::max(hi_p, projected(i));
            mean_mu += emb.mu.row(i);
        }
        mean_mu /= static_cast<double>(idx.size());
        const double mean_proj = (mean_mu * axis).value();
        for (int gi = 0; gi < grid; ++gi) {
            const double p = lo_p + (hi_p - lo_p) * gi / (grid - 1);
            const Eigen::RowVectorXd point = mean_mu + (p - mean_proj) * axis.transpose();
            const double psi = network.forward(point)(0, 0);
            const double zb = lo + (p - pmin) / span * (hi - lo);
            curve << label << ',' << fmt_double(zb) << ',' << fmt_double(psi) << '\n';
        }
    }
    write_file(ctx.out_dir / "psi_curve.csv", curve.str(), ctx.overwrite);

    // latent2d: top-2 principal components of mu with labels and energies.
    const Eigen::MatrixXd centered = emb.mu.rowwise() - emb.mu.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        centered.transpose() * centered / std::max<double>(1.0, emb.mu.rows() - 1.0));
    std::ostringstream flat;
    flat << "id,pc1,pc2,label,E\n";
    const Eigen::VectorXd pc1 = centered * solver.eigenvectors().col(dz - 1);
    const Eigen::VectorXd pc2 = dz >= 2
                                    ? Eigen::VectorXd(centered * solver.eigenvectors().col(dz - 2))
                                    : Eigen::VectorXd(Eigen::VectorXd::Zero(emb.mu.rows()));
    for (int i = 0; i < emb.n_samples(); ++i)
        flat << i << ',' << fmt_double(pc1(i)) << ',' << fmt_double(pc2(i)) << ','
             << emb.labels[i] << ',' << fmt_double(assignment.energy(i)) << '\n';
    write_file(ctx.out_dir / "latent2d.csv", flat.str(), ctx.overwrite);
    append_manifest(ctx, "plotdata", 0, timer.elapsed_ms());
}

void cmd_pipeline(const CommandContext& ctx) {
    static const std::vector<std::string> order{"generate", "train-vae", "embed", "spectrum",
                                                "assign",   "replicas",  "plotdata"};
    for (const auto& stage : order) {
        if (std::find(ctx.config.stages.begin(), ctx.config.stages.end(), stage) ==
            ctx.config.stages.end())
            continue;
        run_command(stage, ctx);
    }
}

void run_command(const std::string& name, const CommandContext& ctx) {
    ctx.config.validate();
    std::filesystem::create_directories(ctx.out_dir);
    if (name == "generate") cmd_generate(ctx);
    else if (name == "train-vae") cmd_train_vae(ctx);
    else if (name == "embed") cmd_embed(ctx);
    else if (name == "spectrum") cmd_spectrum(ctx);
    else if (name == "assign") cmd_assign(ctx);
    else if (name == "replicas") cmd_replicas(ctx);
    else if (name == "plotdata") emit_plotdata(ctx);
    else if (name == "pipeline") cmd_pipeline(ctx);
    else throw ConfigError("unknown command: " + name);
}

}  // namespace latsp::pipeline
