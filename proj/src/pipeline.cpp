/*
 Copyright 2026 The gtddp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "gtddp/pipeline.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace gtddp
{

namespace
{
void ensure_dir(const fs::path &dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir))
        throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

constexpr std::uint64_t kCollectStream = 0xC0113C7;

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }
} // namespace

TrainingData collect_training(const ExperimentConfig &cfg)
{
    const PlantSetup plant = make_plant(cfg);
    const auto &c = cfg.collect;

    std::vector<VectorXd> starts = c.starts;
    if (starts.empty())
        starts.assign(c.rollouts, plant.x0);
    ExcitationConfig ex;
    ex.amplitude = c.amplitude;
    ex.hold_steps = c.hold_steps;
    ex.steps = c.steps;
    ex.substeps = c.substeps;
    ex.max_samples = c.max_samples;
    SdeConfig sde;
    sde.dt = cfg.solver.dt;
    // A stream of its own, apart from the Monte-Carlo runs seeded by cfg.seed.
    sde.seed = split_seed(cfg.seed, kCollectStream);
    const auto q = plant.channel.cols();
    sde.noise_cov = c.noise_std * c.noise_std * MatrixXd::Identity(q, q);
    return generate_training_rollouts(starts, ex, plant.plant, plant.nominal, plant.channel, sde);
}

CollectOutput cmd_collect(const ExperimentConfig &cfg, const fs::path &out_dir, std::ostream &log)
{
    ensure_dir(out_dir);
    const TrainingData td = collect_training(cfg);
    if (td.data.size() == 0)
        throw DivergenceError("collect: every training rollout failed before producing samples", -1, -1);

    CollectOutput out;
    out.dataset = out_dir / "dataset.csv";
    out.samples = td.data.size();
    out.failed_rollouts = td.failed_rollouts;
    write_dataset(out.dataset, td.data);
    const std::size_t rollouts = cfg.collect.starts.empty() ? cfg.collect.rollouts : cfg.collect.starts.size();
    fmt::print(log, "collect: {} samples from {} rollouts ({} failed) -> {}\n", out.samples, rollouts,
               out.failed_rollouts, out.dataset.string());
    return out;
}

std::vector<HyperOptTrace> train_hyperparams(const ExperimentConfig &cfg, const GpDataset &data)
{
    std::vector<std::vector<GpHyperparams>> starts;
    if (cfg.gp.initial)
        starts.push_back({*cfg.gp.initial});
    else
        starts.push_back(default_hyperparams(data));
    if (cfg.gp.multistart)
        starts.push_back(noise_dominated_hyperparams(data));
    return optimize_hyperparams_multistart(data, starts, cfg.gp.optimizer);
}

TrainOutput cmd_train(const ExperimentConfig &cfg, const fs::path &dataset, const fs::path &out_dir,
                      std::ostream &log)
{
    ensure_dir(out_dir);
    const GpDataset data = read_dataset(dataset);
    const PlantSetup plant = make_plant(cfg);
    if (data.output_dim() != plant.n || data.input_dim() != plant.n + plant.m)
        throw InputError(fmt::format("train: dataset has {} states and {} controls, the plant has {} and {}",
                                     data.output_dim(), data.input_dim() - data.output_dim(), plant.n, plant.m));

    TrainOutput out;
    out.traces = train_hyperparams(cfg, data);
    ModelFile model;
    for (std::size_t d = 0; d < out.traces.size(); ++d)
    {
        const auto &t = out.traces[d];
        model.hyper.push_back(t.hyper);
        model.log_likelihood.push_back(t.final_value);
        fmt::print(log, "train: dim {:2d} log marginal likelihood {:.6g} (initial {:.6g}), sigma_s {:.4g}, sigma_w {:.4g}\n",
                   d, t.final_value, t.initial_value, t.hyper.sigma_s, t.hyper.sigma_w);
    }
    out.model = out_dir / "model.json";
    const fs::path data_abs = fs::absolute(dataset).lexically_normal();
    const fs::path model_dir = fs::absolute(out_dir).lexically_normal();
    fs::path rel = data_abs.lexically_relative(model_dir);
    model.dataset = rel.empty() ? data_abs : rel;
    write_model(out.model, model);
    fmt::print(log, "train: model -> {}\n", out.model.string());
    return out;
}

SolveOutput cmd_solve(const ExperimentConfig &cfg, const std::optional<fs::path> &model, const fs::path &out_dir,
                      std::ostream &log)
{
    ensure_dir(out_dir);
    const PlantSetup plant = make_plant(cfg);
    std::shared_ptr<const GpModel> gp;
    if (model)
    {
        gp = load_gp(*model);
        if (gp->output_dim() != plant.n || gp->input_dim() != plant.n + plant.m)
            throw InputError("solve: model dimensions do not match the plant");
    }
    const GameDynamics dyn = make_game(cfg, plant, gp);
    const QuadraticGameCost cost = make_cost(cfg);

    SolveOutput out;
    out.policy = out_dir / "policy.json";
    out.iterations = out_dir / "iterations.csv";
    auto write = [&](const SolveResult &r) {
        write_json(out.policy, policy_to_json(r));
        write_file_atomic(out.iterations, iteration_log_csv(r.log));
    };
    try
    {
        out.result = solve(plant.x0, dyn, cost, cfg.solver);
    }
    catch (const StalledError &e)
    {
        write(e.best());
        fmt::print(log, "solve: stalled, best iterate written to {}\n", out.policy.string());
        throw;
    }
    write(out.result);
    const auto &r = out.result;
    fmt::print(log, "solve: {} after {} accepted iterations, J_gamma {:.9g} (initial {:.9g}), J {:.9g}\n",
               r.converged ? "converged" : "stopped at max_iters", r.accepted_iterations, r.trajectory.cost,
               r.log.front().cost, r.trajectory.cost_nominal);
    const VectorXd err = (r.trajectory.x.back() - cost.x_f).segment(plant.error_begin, plant.error_count);
    fmt::print(log, "solve: terminal error norm {:.6g} over states {}..{}; policy -> {}\n", err.norm(),
               plant.error_begin, plant.error_begin + plant.error_count - 1, out.policy.string());
    return out;
}

SimulateOutput cmd_simulate(const ExperimentConfig &cfg, const fs::path &policy, const fs::path &out_dir,
                            std::ostream &log)
{
    ensure_dir(out_dir);
    const PlantSetup plant = make_plant(cfg);
    const SolveResult stored = policy_from_json(read_json(policy));
    const auto &traj = stored.trajectory;
    if (traj.x.front().size() != static_cast<Eigen::Index>(plant.n) ||
        traj.u.front().size() != static_cast<Eigen::Index>(plant.m))
        throw InputError("simulate: policy dimensions do not match the plant");
    const FeedbackPolicy pol = feedback_policy(stored);
    const QuadraticGameCost cost = make_cost(cfg);

    SdeConfig sde;
    sde.dt = traj.dt;
    sde.seed = cfg.seed;
    sde.n_runs = cfg.sim.n_runs;
    sde.noise_cov = sim_noise_cov(cfg, static_cast<std::size_t>(plant.channel.cols()));
    const ControlLaw law = [&pol](const VectorXd &x, std::size_t k) { return pol(x, k); };

    SimulateOutput out;
    out.summary = out_dir / "summary.csv";
    out.manifest = out_dir / "manifest.json";
    bool all_failed = false;
    std::string failure;
    try
    {
        out.ensemble = monte_carlo(traj.x.front(), law, traj.steps(), plant.plant, plant.channel, sde);
    }
    catch (const EnsembleFailure &e)
    {
        out.ensemble = e.ensemble();
        all_failed = true;
        failure = e.what();
    }
    const RolloutEnsemble &ens = out.ensemble;
    const VectorXd goal = cost.x_f.segment(plant.error_begin, plant.error_count);

    const fs::path runs_dir = out_dir / "runs";
    ensure_dir(runs_dir);
    Json runs = Json::array();
    for (std::size_t r = 0; r < ens.runs.size(); ++r)
    {
        const std::string name = fmt::format("run_{:03d}.csv", r);
        Json entry{{"run", r}, {"seed", ens.seeds[r]}, {"failed", static_cast<bool>(ens.failed[r])}, {"file", "runs/" + name}};
        if (!ens.runs[r].x.empty())
        {
            TrajectoryIterate run = ens.runs[r];
            run.t0 = traj.t0;
            write_file_atomic(runs_dir / name, run_csv(run));
        }
        if (ens.failed[r])
            entry["message"] = ens.failure_messages[r];
        else
            entry["terminal_error"] =
                (ens.runs[r].x.back().segment(plant.error_begin, plant.error_count) - goal).norm();
        runs.push_back(std::move(entry));
    }

    Json stats = Json::object();
    if (!all_failed)
    {
        out.terminal_errors = ens.terminal_errors(goal, plant.error_begin, plant.error_count);
        const auto &e = out.terminal_errors;
        const double mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
        double var = 0.0;
        for (double v : e)
            var += (v - mean) * (v - mean);
        stats = Json{{"mean", mean},
                     {"std", std::sqrt(var / static_cast<double>(e.size()))},
                     {"min", *std::min_element(e.begin(), e.end())},
                     {"max", *std::max_element(e.begin(), e.end())},
                     {"state_begin", plant.error_begin},
                     {"state_count", plant.error_count}};
        write_file_atomic(out.summary, summary_csv(ens, cost.x_f, traj.dt, traj.t0));
    }

    Json manifest{{"seed", cfg.seed},
                  {"config_hash", hex(cfg.hash())},
                  {"policy", policy.generic_string()},
                  {"n_runs", ens.runs.size()},
                  {"failed_runs", ens.runs.size() - ens.successes()},
                  {"all_failed", all_failed},
                  {"runs", std::move(runs)},
                  {"terminal_error", std::move(stats)}};
    if (all_failed)
        manifest["failure"] = failure;
    write_json(out.manifest, manifest);

    if (all_failed)
    {
        fmt::print(log, "simulate: all {} runs failed; manifest -> {}\n", ens.runs.size(), out.manifest.string());
        throw EnsembleFailure(failure, ens);
    }
    const auto &st = manifest["terminal_error"];
    fmt::print(log, "simulate: {} of {} runs succeeded; terminal error mean {:.6g}, std {:.6g}, max {:.6g}\n",
               ens.successes(), ens.runs.size(), st["mean"].get<double>(), st["std"].get<double>(),
               st["max"].get<double>());
    fmt::print(log, "simulate: summary -> {}, manifest -> {}\n", out.summary.string(), out.manifest.string());
    return out;
}

} // namespace gtddp
