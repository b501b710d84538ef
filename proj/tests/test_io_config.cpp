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
#include "gtddp/config.hpp"
#include "gtddp/io.hpp"
#include "acceptance.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace gtddp
{
namespace
{

class TempDir
{
public:
    TempDir()
    {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("gtddp_io_" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path &path() const { return path_; }

private:
    fs::path path_;
};

ExperimentConfig lq_config()
{
    const auto f = acceptance::lq_fixture(0.5);
    ExperimentConfig cfg;
    cfg.seed = 11;
    cfg.plant.name = "linear_fixture";
    cfg.plant.A = f.A;
    cfg.plant.B = f.B;
    cfg.plant.D = f.C;
    cfg.plant.scale = f.scale;
    cfg.plant.initial_state = f.x0;
    cfg.cost.preset = "none";
    cfg.cost.Q = f.Q;
    cfg.cost.R = f.R;
    cfg.cost.Qf = f.Q_f;
    cfg.cost.x_f = VectorXd::Zero(2);
    cfg.cost.gamma = 1e6;
    cfg.solver.dt = 0.01;
    cfg.solver.horizon = 100;
    return cfg;
}

TEST(Config, DefaultRoundTripIsIdempotent)
{
    const ExperimentConfig cfg;
    const Json once = cfg.to_json();
    const Json twice = ExperimentConfig::from_json(once).to_json();
    EXPECT_EQ(once.dump(), twice.dump());
    EXPECT_EQ(cfg.hash(), ExperimentConfig::from_json(once).hash());
}

TEST(Config, HashIgnoresOutputDirOnly)
{
    ExperimentConfig a, b;
    b.output_dir = "elsewhere";
    EXPECT_EQ(a.hash(), b.hash());
    b.seed = a.seed + 1;
    EXPECT_NE(a.hash(), b.hash());
}

TEST(Config, LinearRoundTripIsIdempotent)
{
    const Json once = lq_config().to_json();
    const ExperimentConfig back = ExperimentConfig::from_json(once);
    EXPECT_EQ(once.dump(), back.to_json().dump());
    EXPECT_EQ(back.plant.A, lq_config().plant.A);
    ASSERT_TRUE(back.cost.gamma.has_value());
    EXPECT_EQ(*back.cost.gamma, 1e6);
}

TEST(Config, MissingKeysKeepDefaults)
{
    const ExperimentConfig cfg = ExperimentConfig::from_json(Json{{"seed", 3}});
    EXPECT_EQ(cfg.seed, 3u);
    EXPECT_EQ(cfg.plant.name, "quadcopter");
    EXPECT_EQ(cfg.sim.n_runs, 100u);
}

void expect_input_error(const Json &j, const std::string &fragment)
{
    try
    {
        ExperimentConfig::from_json(j);
        FAIL() << "expected InputError mentioning " << fragment;
    }
    catch (const InputError &e)
    {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

TEST(Config, UnknownKeysRejectedWithPath)
{
    expect_input_error(Json{{"sed", 3}}, "sed: unknown key");
    expect_input_error(Json{{"solver", {{"horizon", 10}, {"dtt", 0.1}}}}, "solver.dtt: unknown key");
    expect_input_error(Json{{"plant", {{"quadcopter", {{"massx", 1.0}}}}}}, "plant.quadcopter.massx");
}

TEST(Config, InvalidValuesRejected)
{
    expect_input_error(Json{{"sim", {{"n_runs", 0}}}}, "sim.n_runs");
    expect_input_error(Json{{"seed", -1}}, "seed: expected a nonnegative integer");
    expect_input_error(Json{{"seed", 1.5}}, "seed: expected a nonnegative integer");
    expect_input_error(Json{{"plant", {{"name", "boat"}}}}, "plant.name");
    expect_input_error(Json{{"collect", {{"amplitude", "big"}}}}, "collect.amplitude");
    Json bad = lq_config().to_json();
    bad["plant"]["linear"]["B"] = Json::array({Json::array({1.0})});
    expect_input_error(bad, "plant.linear.B");
}

TEST(Config, LoadFromFile)
{
    TempDir dir;
    const fs::path p = dir.path() / "cfg.json";
    write_json(p, lq_config().to_json());
    EXPECT_EQ(ExperimentConfig::load(p).hash(), lq_config().hash());
    EXPECT_THROW(ExperimentConfig::load(dir.path() / "missing.json"), IoError);
    write_file_atomic(dir.path() / "broken.json", "{\"seed\": ");
    EXPECT_THROW(ExperimentConfig::load(dir.path() / "broken.json"), InputError);
}

TEST(Format, SeventeenDigitsRoundTrip)
{
    std::mt19937_64 eng(5);
    std::uniform_real_distribution<double> dist(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i)
    {
        const double v = dist(eng) * std::pow(10.0, static_cast<double>(i % 40) - 20.0);
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
    EXPECT_EQ(std::stod(format_double(0.1)), 0.1);
}

GpDataset small_dataset()
{
    GpDataset d;
    d.inputs = (MatrixXd(3, 3) << 0.1, 0.2, 1.0 / 3.0, -1.5, 2.25, 1e-17, 3.0, -4.0, 5.0).finished();
    d.targets = (MatrixXd(3, 2) << 1.0, -2.0, M_PI, std::exp(1.0), 0.0, -1e300).finished();
    d.times = (VectorXd(3) << 0.0, 0.01, 0.02).finished();
    return d;
}

TEST(Dataset, CsvRoundTripIsExact)
{
    const GpDataset d = small_dataset();
    const std::string csv = dataset_to_csv(d);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,x0,x1,u0,dx0,dx1");
    const GpDataset back = dataset_from_csv(csv);
    EXPECT_EQ(back.inputs, d.inputs);
    EXPECT_EQ(back.targets, d.targets);
    EXPECT_EQ(back.times, d.times);
    EXPECT_EQ(dataset_to_csv(back), csv);
}

void expect_io_error(const std::string &csv, const std::string &fragment)
{
    try
    {
        dataset_from_csv(csv, "data.csv");
        FAIL() << "expected IoError mentioning " << fragment;
    }
    catch (const IoError &e)
    {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

TEST(Dataset, MalformedRowsNameTheLine)
{
    const std::string header = "t,x0,u0,dx0\n";
    expect_io_error(header + "0,1,2,3\n0,1,2\n", "data.csv: line 3: expected 4 fields, found 3");
    expect_io_error(header + "0,1,2,3\n0,1,2,3\n0,1,abc,3\n", "line 4");
    expect_io_error(header + "0,1,nan,3\n", "line 2");
    expect_io_error(header, "no data rows");
    expect_io_error("", "empty file");
    expect_io_error("t,a,b\n0,1,2\n", "line 1");
}

TEST(AtomicWrite, FailureLeavesNoFile)
{
    TempDir dir;
    const fs::path missing = dir.path() / "no_such_dir" / "out.csv";
    EXPECT_THROW(write_file_atomic(missing, "x"), IoError);
    EXPECT_FALSE(fs::exists(missing));

    const fs::path target = dir.path() / "a.txt";
    write_file_atomic(target, "first");
    write_file_atomic(target, "second");
    EXPECT_EQ(read_file(target), "second");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto &e : fs::directory_iterator(dir.path()))
        ++entries;
    EXPECT_EQ(entries, 1u);
}

TEST(Model, RoundTripAndRefit)
{
    TempDir dir;
    GpDataset d = small_dataset();
    write_dataset(dir.path() / "dataset.csv", d);
    ModelFile m;
    m.dataset = "dataset.csv";
    for (int k = 0; k < 2; ++k)
    {
        GpHyperparams h;
        h.sigma_s = 1.5 + k;
        h.sigma_w = 0.1 / 3.0;
        h.m_diag = (VectorXd(3) << 0.5, 1.0 / 7.0, 2.0).finished();
        m.hyper.push_back(h);
        m.log_likelihood.push_back(-3.25 * k);
    }
    write_model(dir.path() / "model.json", m);
    const ModelFile back = read_model(dir.path() / "model.json");
    ASSERT_EQ(back.hyper.size(), 2u);
    for (int k = 0; k < 2; ++k)
    {
        EXPECT_EQ(back.hyper[k].sigma_s, m.hyper[k].sigma_s);
        EXPECT_EQ(back.hyper[k].sigma_w, m.hyper[k].sigma_w);
        EXPECT_EQ(back.hyper[k].m_diag, m.hyper[k].m_diag);
        EXPECT_EQ(back.log_likelihood[k], m.log_likelihood[k]);
    }
    const auto gp = load_gp(dir.path() / "model.json");
    const GpModel direct = GpModel::fit(d, m.hyper);
    const VectorXd z = (VectorXd(3) << 0.3, -0.1, 0.7).finished();
    EXPECT_EQ(gp->predict_mean(z), direct.predict_mean(z));

    fs::remove(dir.path() / "dataset.csv");
    EXPECT_THROW(load_gp(dir.path() / "model.json"), IoError);
}

TEST(Policy, JsonRoundTripIsExact)
{
    const auto f = acceptance::lq_fixture(0.5);
    SolverConfig cfg;
    cfg.dt = 0.05;
    cfg.horizon = 20;
    const SolveResult r = solve(f.x0, acceptance::lq_dynamics(f), acceptance::lq_cost(f, 2.0), cfg);
    const Json j = policy_to_json(r);
    const SolveResult back = policy_from_json(Json::parse(j.dump()));
    ASSERT_EQ(back.trajectory.x.size(), r.trajectory.x.size());
    for (std::size_t k = 0; k < r.trajectory.x.size(); ++k)
        EXPECT_EQ(back.trajectory.x[k], r.trajectory.x[k]);
    for (std::size_t k = 0; k < r.trajectory.u.size(); ++k)
    {
        EXPECT_EQ(back.trajectory.u[k], r.trajectory.u[k]);
        EXPECT_EQ(back.gains.K_u[k], r.gains.K_u[k]);
        EXPECT_EQ(back.gains.K_w[k], r.gains.K_w[k]);
    }
    EXPECT_EQ(back.trajectory.dt, r.trajectory.dt);
    EXPECT_EQ(policy_to_json(back).dump(), j.dump());
}

TEST(Logs, IterationAndRunCsvShapes)
{
    std::vector<IterationLog> log(2);
    log[0].cost = 2.0;
    log[1] = {1, 1.0, 1.5, 0.5, 0.0, 0.01};
    const std::string csv = iteration_log_csv(log);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,cost,alpha,lambda,grad_norm,cost_nominal");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);

    TrajectoryIterate run;
    run.dt = 0.5;
    run.x = {VectorXd::Zero(2), VectorXd::Ones(2)};
    run.u = {VectorXd::Constant(1, 3.0)};
    const std::string rc = run_csv(run);
    EXPECT_EQ(rc, "t,x0,x1,u0\n0,0,0,3\n0.5,1,1,\n");
}

TEST(Summary, SingleRunEqualsTheRun)
{
    RolloutEnsemble e;
    TrajectoryIterate run;
    run.dt = 0.1;
    run.x = {(VectorXd(2) << 1, 2).finished(), (VectorXd(2) << 3, 4).finished()};
    run.u = {VectorXd::Zero(1)};
    e.runs = {run};
    e.failed = {false};
    e.failure_messages = {""};
    e.seeds = {1};
    e.recompute_statistics();
    const std::string s = summary_csv(e, (VectorXd(2) << 9, 8).finished(), 0.1);
    EXPECT_EQ(s, "t,mean_x0,mean_x1,std_x0,std_x1,goal_x0,goal_x1\n0,1,2,0,0,9,8\n0.10000000000000001,3,4,0,0,9,8\n");
}

} // namespace
} // namespace gtddp
