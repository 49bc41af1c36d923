#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "latsp/assign.hpp"
#include "latsp/common.hpp"
#include "latsp/datagen.hpp"
#include "latsp/degeneracy.hpp"
#include "latsp/vae.hpp"

namespace latsp::pipeline {

/// Full run configuration: one block per module plus run-level settings.
/// Parsed from a flat sectioned key-value file:
///
///   [dataset]
///   n_samples = 2000
///   ...
struct RunConfig {
    datagen::DatasetSpec dataset;
    vae::VaeConfig vae;
    box::BoxSpec box;
    assign::AssignConfig assign;
    std::vector<std::uint64_t> replica_seeds{1, 2, 3, 4, 5};
    int replica_threads = 2;
    std::string out_dir = "run";
    std::vector<std::string> stages{"generate", "train-vae", "embed",
                                    "spectrum", "assign",    "plotdata"};

    void validate() const;
    /// Canonical serialization; the digest covers every field.
    std::string normalized_text() const;
    std::uint64_t digest() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& file);

/// Applies `--seed`: replaces the dataset, VAE, and assigner seeds with
/// streams derived from the base seed, and reseeds the replica list.
void override_seed(RunConfig& cfg, std::uint64_t base_seed);

struct CommandContext {
    RunConfig config;
    std::filesystem::path out_dir;
    bool overwrite = false;
};

void cmd_generate(const CommandContext& ctx);
void cmd_train_vae(const CommandContext& ctx);
void cmd_embed(const CommandContext& ctx);
void cmd_spectrum(const CommandContext& ctx);
void cmd_assign(const CommandContext& ctx);
void cmd_replicas(const CommandContext& ctx);
void emit_plotdata(const CommandContext& ctx);

/// Chains the configured stages in pipeline order.
void cmd_pipeline(const CommandContext& ctx);

/// Dispatch by command name ("generate", ..., "pipeline").
void run_command(const std::string& name, const CommandContext& ctx);

}  // namespace latsp::pipeline
