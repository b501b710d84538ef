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
// gtddp command line: collect, train, solve, simulate and verify.
#include "acceptance.hpp"
#include "gtddp/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitVerify = 3;

struct CommonArgs
{
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App *cmd, CommonArgs &a)
{
    cmd->add_option("--config", a.config, "Experiment config (JSON); defaults apply when omitted");
    cmd->add_option("--out", a.out, "Output directory; overrides output_dir of the config");
    cmd->add_option("--seed", a.seed, "Master seed; overrides seed of the config");
}

gtddp::ExperimentConfig load_config(const CommonArgs &a)
{
    gtddp::ExperimentConfig cfg = a.config.empty() ? gtddp::ExperimentConfig{} : gtddp::ExperimentConfig::load(a.config);
    if (a.seed)
        cfg.seed = *a.seed;
    if (!a.out.empty())
        cfg.output_dir = a.out;
    return cfg;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Game-theoretic DDP with Gaussian-process learned dynamics"};
    app.require_subcommand(1);

    CommonArgs collect_args, train_args, solve_args, sim_args;
    std::string data_path, model_path, policy_path;

    auto *collect = app.add_subcommand("collect", "Log excitation rollouts on the plant into dataset.csv");
    add_common(collect, collect_args);

    auto *train = app.add_subcommand("train", "Fit GP hyperparameters and write model.json");
    add_common(train, train_args);
    train->add_option("--data", data_path, "Dataset CSV (default <out>/dataset.csv)");

    auto *solve = app.add_subcommand("solve", "Solve the game and write policy.json and iterations.csv");
    add_common(solve, solve_args);
    solve->add_option("--model", model_path, "model.json from train; omitted means the nominal model alone");

    auto *simulate = app.add_subcommand("simulate", "Monte-Carlo rollouts of the plant under a policy");
    add_common(simulate, sim_args);
    simulate->add_option("--policy", policy_path, "policy.json from solve (default <out>/policy.json)");

    auto *verify = app.add_subcommand("verify", "Run the acceptance criteria");
    std::vector<int> criteria;
    std::optional<std::uint64_t> verify_seed;
    std::string verify_config;
    bool inject_sign_error = false;
    verify->add_option("--config", verify_config, "Accepted for symmetry; the criteria use their own fixtures");
    verify->add_option("--seed", verify_seed, "Seed of the randomized criteria");
    verify->add_option("--criteria", criteria, "Criteria to run (default all)")->delimiter(',');
    verify->add_flag("--inject-gain-sign-error", inject_sign_error)->group("");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try
    {
        if (*collect)
        {
            const auto cfg = load_config(collect_args);
            gtddp::cmd_collect(cfg, cfg.output_dir, std::cout);
        }
        else if (*train)
        {
            const auto cfg = load_config(train_args);
            const gtddp::fs::path data =
                data_path.empty() ? gtddp::fs::path(cfg.output_dir) / "dataset.csv" : gtddp::fs::path(data_path);
            gtddp::cmd_train(cfg, data, cfg.output_dir, std::cout);
        }
        else if (*solve)
        {
            const auto cfg = load_config(solve_args);
            std::optional<gtddp::fs::path> model;
            if (!model_path.empty())
                model = model_path;
            gtddp::cmd_solve(cfg, model, cfg.output_dir, std::cout);
        }
        else if (*simulate)
        {
            const auto cfg = load_config(sim_args);
            const gtddp::fs::path policy =
                policy_path.empty() ? gtddp::fs::path(cfg.output_dir) / "policy.json" : gtddp::fs::path(policy_path);
            gtddp::cmd_simulate(cfg, policy, cfg.output_dir, std::cout);
        }
        else if (*verify)
        {
            if (!verify_config.empty())
                gtddp::ExperimentConfig::load(verify_config);
            gtddp::acceptance::Options opt;
            opt.criteria = criteria;
            if (verify_seed)
                opt.seed = *verify_seed;
            if (inject_sign_error)
                opt.gain_sign = -1.0;
            const auto results = gtddp::acceptance::run(opt, std::cout);
            std::size_t passed = 0;
            for (const auto &r : results)
                passed += r.pass ? 1 : 0;
            fmt::print("verify: {} of {} criteria passed\n", passed, results.size());
            return passed == results.size() ? kExitOk : kExitVerify;
        }
    }
    catch (const gtddp::InputError &e)
    {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitInput;
    }
    catch (const gtddp::NumericError &e)
    {
        fmt::print(stderr, "numeric failure: {}\n", e.what());
        return kExitNumeric;
    }
    catch (const std::exception &e)
    {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitInput;
    }
    return kExitOk;
}
