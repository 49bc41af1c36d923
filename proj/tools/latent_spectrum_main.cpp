#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "latsp/pipeline.hpp"

namespace {

// One machine-readable line on stderr, nonzero exit.
int fail(const std::string& code, const std::string& message) {
    std::cerr << "error: " << code << ": " << message << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-spectrum: VAE latent degeneracy via a perturbed particle in a box"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool overwrite = false;

    const std::vector<std::string> commands{"generate", "train-vae", "embed",    "spectrum",
                                            "assign",   "replicas",  "plotdata", "pipeline"};
    for (const auto& name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides [run] out_dir)");
        sub->add_option("--seed", seed, "base seed overriding all configured seeds")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_flag("--overwrite", overwrite, "replace existing artifacts");
    }

    CLI11_PARSE(app, argc, argv);
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        latsp::pipeline::CommandContext ctx;
        ctx.config = latsp::pipeline::load_config(config_path);
        if (seed_set) latsp::pipeline::override_seed(ctx.config, seed);
        ctx.out_dir = out_dir.empty() ? ctx.config.out_dir : out_dir;
        ctx.overwrite = overwrite;
        latsp::pipeline::run_command(command, ctx);
        return 0;
    } catch (const latsp::ConfigError& e) {
        return fail("config_error", e.what());
    } catch (const latsp::IoError& e) {
        const std::string what = e.what();
        if (what.rfind("missing upstream stage", 0) == 0) return fail("missing_upstream", what);
        return fail("io_error", what);
    } catch (const latsp::TrainingError& e) {
        return fail("training_error", e.what());
    } catch (const latsp::ContractViolation& e) {
        return fail("contract_violation", e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
}
