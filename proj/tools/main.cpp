#include "apg/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_common_overrides(CLI::App* cmd, apg::ExperimentConfig& config,
                          std::vector<std::string>& solver_flags) {
    cmd->add_option("--seed", config.seed, "random seed for generators/presets");
    cmd->add_option("--max-iters", config.max_iters, "iteration cap per solver");
    cmd->add_option(
        "--gap-tol",
        [&config](const std::vector<std::string>& vals) {
            config.gap_tol = std::stod(vals.back());
            return true;
        },
        "stop when f(y_k) - f* <= tol");
    cmd->add_option("--out-dir", config.out_dir, "output directory for CSV traces");
    cmd->add_option("--gamma", config.gamma, "restart decay parameter");
    cmd->add_option("--solver", solver_flags, "solver to run (repeatable)");
    cmd->add_flag("--synthetic-fallback", config.synthetic_fallback,
                  "generate a synthetic stand-in when a dataset file is missing");
    cmd->add_option("--data-dir", config.data_dir, "directory with LIBSVM dataset files");
    cmd->add_option("--record-every", config.record_every, "CSV row thinning stride");
    cmd->add_flag("--timing", config.timing,
                  "write wall_ns values (makes CSVs non-reproducible)");
    cmd->add_option("--reference-tol", config.reference_tol,
                    "reduced-gradient tolerance for the f* reference run");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Accelerated proximal gradient benchmark with online "
                 "strong-convexity adaptation"};
    app.require_subcommand(1);

    // run
    auto* run_cmd = app.add_subcommand("run", "run an experiment described by a config file");
    std::string config_path;
    run_cmd->add_option("config", config_path, "flat key=value config file");
    apg::ExperimentConfig run_config;
    std::vector<std::string> solver_flags;
    std::string preset_flag;
    run_cmd->add_option("--preset", preset_flag, "preset name (overrides config file)");
    add_common_overrides(run_cmd, run_config, solver_flags);

    // reference
    auto* ref_cmd = app.add_subcommand("reference", "compute and cache f* for a preset");
    std::string ref_preset;
    double ref_tol = 1e-9;
    ref_cmd->add_option("preset", ref_preset, "preset name")->required();
    ref_cmd->add_option("--tol", ref_tol, "reduced-gradient certificate tolerance");
    apg::ExperimentConfig ref_config;
    std::vector<std::string> ref_solver_flags;
    add_common_overrides(ref_cmd, ref_config, ref_solver_flags);

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "machine-check the convergence bounds");
    bool battery = true;
    verify_cmd->add_flag("--battery", battery, "run the full spectral battery (default)");
    std::string verify_out;
    verify_cmd->add_option("--out-dir", verify_out, "directory for checker CSV reports");

    // presets
    auto* presets_cmd = app.add_subcommand("presets", "list available presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            apg::ExperimentConfig config;
            if (!config_path.empty()) config = apg::load_experiment_config(config_path);
            // Flag overrides beat the file.
            if (!preset_flag.empty()) config.preset_name = preset_flag;
            if (!solver_flags.empty()) config.solvers = solver_flags;
            if (run_cmd->count("--seed")) config.seed = run_config.seed;
            if (run_cmd->count("--max-iters")) config.max_iters = run_config.max_iters;
            if (run_cmd->count("--gap-tol")) config.gap_tol = run_config.gap_tol;
            if (run_cmd->count("--out-dir")) config.out_dir = run_config.out_dir;
            if (run_cmd->count("--gamma")) config.gamma = run_config.gamma;
            if (run_cmd->count("--synthetic-fallback"))
                config.synthetic_fallback = run_config.synthetic_fallback;
            if (run_cmd->count("--data-dir")) config.data_dir = run_config.data_dir;
            if (run_cmd->count("--record-every"))
                config.record_every = run_config.record_every;
            if (run_cmd->count("--timing")) config.timing = run_config.timing;
            if (run_cmd->count("--reference-tol"))
                config.reference_tol = run_config.reference_tol;

            const apg::ExperimentResult result = apg::run_experiment(config);
            if (result.reference)
                std::cout << "reference: f* = " << result.reference->f_star
                          << " (cert " << result.reference->cert << ", "
                          << (result.reference->from_cache ? "cached" : "computed")
                          << ")\n";
            std::cout << result.summary_csv;
            return 0;
        }
        if (ref_cmd->parsed()) {
            apg::PresetOptions opts;
            opts.data_dir = ref_config.data_dir;
            opts.synthetic_fallback = ref_config.synthetic_fallback;
            opts.seed = ref_config.seed;
            const apg::CompositeProblem problem = apg::preset(ref_preset, opts);
            const std::string cache =
                ref_config.out_dir.empty() ? "out/refs" : ref_config.out_dir + "/refs";
            const apg::ReferenceRecord rec = apg::compute_reference(problem, ref_tol, cache);
            std::cout << rec.to_line() << (rec.from_cache ? " (cached)" : "") << "\n";
            return 0;
        }
        if (verify_cmd->parsed()) {
            (void)battery;
            const apg::VerifyResult result = apg::run_verify_battery(verify_out);
            std::cout << result.summary_text;
            return result.all_passed ? 0 : 1;
        }
        if (presets_cmd->parsed()) {
            for (const auto& name : apg::preset_names()) std::cout << name << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
