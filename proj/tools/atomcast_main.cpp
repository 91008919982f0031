// atomcast command-line pipeline: reference-data generation, Morse fitting,
// physics-informed training, guarded rollout and evaluation.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atomcast/errors.hpp"
#include "cli/commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "pipeline config file (JSON)");
    cmd->add_option("--set", args.overrides,
                    "override a config key, e.g. --set train.lambda=0.001 (repeatable; "
                    "flags win over the file)");
}

int dispatch(const std::string& name, const CommonArgs& args,
             const std::function<int(atomcast::cli::CommandEnv&)>& body) {
    try {
        atomcast::cli::CommandEnv env =
            atomcast::cli::prepare_env(name, args.config_path, args.overrides, std::cout);
        return body(env);
    } catch (const atomcast::InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const atomcast::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const atomcast::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntimeError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntimeError;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"displacement-based forecasting pipeline for atomic trajectories"};
    app.require_subcommand(1);

    int exit_code = kExitOk;

    // gen-data
    CommonArgs gen_args;
    auto* gen = app.add_subcommand(
        "gen-data",
        "Generate a reference MD trajectory and write train/valid/test splits plus the "
        "ground-truth Morse table and synthetic energy samples.\n"
        "Config keys: seed, out_dir, run_id, simgen.* (n_atoms, species_counts, box_side, "
        "temperature_K, n_steps, dt_fs, thermostat.{kind,gamma_per_fs,rescale_interval}, cutoff, "
        "reflective_walls, mass_amu, split.{train_frac,valid_frac}, format, emit_energy_samples, "
        "energy_sample_count, energy_sample_noise_ev, params), window.{H,L} (split length guard)");
    add_common(gen, gen_args);
    gen->callback([&] {
        exit_code = dispatch("gen-data", gen_args,
                             [](atomcast::cli::CommandEnv& env) { return cmd_gen_data(env); });
    });

    // fit-morse
    CommonArgs fit_args;
    std::string samples_file;
    auto* fit = app.add_subcommand(
        "fit-morse",
        "Fit Morse parameters per species pair from a (distance, energy) sample CSV with header "
        "species_i,species_j,d,energy. Writes morse_fitted.csv and fit_report.csv; exits 3 if any "
        "pair fails.\nConfig keys: seed, out_dir, run_id");
    add_common(fit, fit_args);
    fit->add_option("samples", samples_file, "energy samples CSV")->required();
    fit->callback([&] {
        exit_code = dispatch("fit-morse", fit_args, [&](atomcast::cli::CommandEnv& env) {
            return cmd_fit_morse(env, samples_file);
        });
    });

    // thresholds
    CommonArgs tau_args;
    std::string tau_traj;
    auto* tau = app.add_subcommand(
        "thresholds",
        "Compute max-observed-energy thresholds for every pair of a trajectory.\n"
        "Config keys: seed, out_dir, run_id, morse.{params_file,thresholds_granularity}, "
        "simgen.params (fallback parameters)");
    add_common(tau, tau_args);
    tau->add_option("trajectory", tau_traj, "reference trajectory (.xyz/.csv)")->required();
    tau->callback([&] {
        exit_code = dispatch("thresholds", tau_args, [&](atomcast::cli::CommandEnv& env) {
            return cmd_thresholds(env, tau_traj);
        });
    });

    // train
    CommonArgs train_args;
    auto* train = app.add_subcommand(
        "train",
        "Train a forecasting backbone with the energy-penalty loss; writes checkpoint.json and "
        "training_log.csv.\nConfig keys: seed, out_dir, run_id, window.{H,L,stride,normalize}, "
        "train.{backbone,hidden,blocks,lambda,pairs_per_step,batch_size,learning_rate,clip_norm,"
        "max_epochs,patience,physics_chain,lr_plateau_decay,train_file,valid_file,thresholds_file},"
        " morse.{params_file,thresholds_granularity}, simgen.params (fallback parameters)");
    add_common(train, train_args);
    train->callback([&] {
        exit_code = dispatch("train", train_args,
                             [](atomcast::cli::CommandEnv& env) { return cmd_train(env); });
    });

    // rollout
    CommonArgs roll_args;
    std::string roll_ckpt;
    auto* roll = app.add_subcommand(
        "rollout",
        "Autoregressively roll a trained model from the first H frames of rollout.seed_file; "
        "writes the predicted trajectory and rollout_log.csv.\nConfig keys: seed, out_dir, run_id, "
        "rollout.{total_steps,pii_enabled,pairs_per_step,freeze_policy,seed_file,checkpoint,"
        "thresholds_file}, morse.{params_file}, simgen.{params,format}");
    add_common(roll, roll_args);
    roll->add_option("checkpoint", roll_ckpt, "model checkpoint (overrides rollout.checkpoint)");
    roll->callback([&] {
        exit_code = dispatch("rollout", roll_args, [&](atomcast::cli::CommandEnv& env) {
            return cmd_rollout(env, roll_ckpt);
        });
    });

    // evaluate
    CommonArgs eval_args;
    std::string eval_pred, eval_truth;
    auto* eval = app.add_subcommand(
        "evaluate",
        "Forecast-error and violation metrics between a predicted and a ground-truth trajectory "
        "(aligned after eval.skip_frames).\nConfig keys: seed, out_dir, run_id, "
        "eval.{pairs_per_step,threshold_table,train_file,skip_frames,pred_file,truth_file}, "
        "morse.{params_file,thresholds_granularity}, simgen.params (fallback parameters)");
    add_common(eval, eval_args);
    eval->add_option("prediction", eval_pred, "predicted trajectory");
    eval->add_option("truth", eval_truth, "ground-truth trajectory");
    eval->callback([&] {
        exit_code = dispatch("evaluate", eval_args, [&](atomcast::cli::CommandEnv& env) {
            return cmd_evaluate(env, eval_pred, eval_truth);
        });
    });

    // ablate
    CommonArgs ablate_args;
    auto* ablate = app.add_subcommand(
        "ablate",
        "2x2 grid over physics-informed training (lambda on/off) and guarded inference "
        "(on/off), averaged over ablate.n_seeds replicates; writes ablation.csv, "
        "ablation_reps.csv and summary.txt.\nConfig keys: seed, out_dir, run_id, simgen.*, "
        "window.*, train.* (lambda = the PIT cell weight), rollout.{total_steps,pairs_per_step,"
        "freeze_policy}, eval.pairs_per_step, ablate.n_seeds, morse.*");
    add_common(ablate, ablate_args);
    ablate->callback([&] {
        exit_code = dispatch("ablate", ablate_args,
                             [](atomcast::cli::CommandEnv& env) { return cmd_ablate(env); });
    });

    // sweep-lambda
    CommonArgs sweep_args;
    auto* sweep = app.add_subcommand(
        "sweep-lambda",
        "Train one model per physics-loss weight (train.lambda list; defaults to "
        "[0, 1e-4, 5e-4, 1e-3]) and report rollout MAE_delta and V_r per lambda, averaged over "
        "sweep.n_seeds replicates; writes sweep.csv, sweep_reps.csv and summary.txt.\n"
        "Config keys: seed, out_dir, run_id, simgen.*, window.*, train.*, "
        "rollout.{total_steps,pii_enabled,pairs_per_step,freeze_policy}, eval.pairs_per_step, "
        "sweep.n_seeds, morse.*");
    add_common(sweep, sweep_args);
    sweep->callback([&] {
        exit_code = dispatch("sweep-lambda", sweep_args,
                             [](atomcast::cli::CommandEnv& env) { return cmd_sweep_lambda(env); });
    });

    // diffusivity
    CommonArgs diff_args;
    std::string diff_traj;
    auto* diff = app.add_subcommand(
        "diffusivity",
        "Mean-squared-displacement curves and Einstein-relation diffusion coefficients per "
        "species; writes diffusivity.csv and msd_<species>.csv.\nConfig keys: seed, out_dir, "
        "run_id, eval.{species,msd_fit_begin,msd_fit_end,msd_multi_origin}");
    add_common(diff, diff_args);
    diff->add_option("trajectory", diff_traj, "trajectory to analyze")->required();
    diff->callback([&] {
        exit_code = dispatch("diffusivity", diff_args, [&](atomcast::cli::CommandEnv& env) {
            return cmd_diffusivity(env, diff_traj);
        });
    });

    CLI11_PARSE(app, argc, argv);
    return exit_code;
}
