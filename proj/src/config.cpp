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

#include <set>

namespace gtddp
{

namespace
{

// Walks one JSON object, remembering which keys were read so that leftovers
// can be reported with their full path.
class Section
{
public:
    Section(const Json &j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw InputError(where() + ": expected an object");
    }

    std::string key_path(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

    const Json *find(const std::string &key)
    {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const std::string &key, double &out)
    {
        if (const Json *v = find(key))
        {
            if (!v->is_number())
                throw InputError(key_path(key) + ": expected a number");
            out = v->get<double>();
        }
    }

    template <typename T>
    void count(const std::string &key, T &out)
    {
        if (const Json *v = find(key))
        {
            if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0))
                throw InputError(key_path(key) + ": expected a nonnegative integer");
            out = v->get<T>();
        }
    }

    void boolean(const std::string &key, bool &out)
    {
        if (const Json *v = find(key))
        {
            if (!v->is_boolean())
                throw InputError(key_path(key) + ": expected true or false");
            out = v->get<bool>();
        }
    }

    void string(const std::string &key, std::string &out)
    {
        if (const Json *v = find(key))
        {
            if (!v->is_string())
                throw InputError(key_path(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }

    void vector(const std::string &key, VectorXd &out)
    {
        if (const Json *v = find(key))
            out = vector_from_json(*v, key_path(key));
    }

    void matrix(const std::string &key, MatrixXd &out)
    {
        if (const Json *v = find(key))
            out = matrix_from_json(*v, key_path(key));
    }

    std::optional<Section> child(const std::string &key)
    {
        if (const Json *v = find(key))
            return Section(*v, key_path(key));
        return std::nullopt;
    }

    void finish() const
    {
        for (const auto &[key, value] : j_.items())
            if (!seen_.count(key))
                throw InputError(key_path(key) + ": unknown key");
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const Json &j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string &what)
{
    if (!ok)
        throw InputError(what);
}

void read_plant(Section s, PlantConfig &p)
{
    s.string("name", p.name);
    if (auto q = s.child("quadcopter"))
    {
        auto &qp = p.quadcopter;
        q->number("mass", qp.mass);
        q->number("gravity", qp.gravity);
        q->number("arm_length", qp.arm_length);
        VectorXd inertia = qp.inertia;
        q->vector("inertia", inertia);
        require(inertia.size() == 3, "plant.quadcopter.inertia: expected 3 entries");
        qp.inertia = inertia;
        q->number("k_m", qp.k_m);
        q->number("k_F", qp.k_F);
        q->number("k_M", qp.k_M);
        q->finish();
    }
    if (auto q = s.child("planar"))
    {
        q->number("mass", p.planar.mass);
        q->number("gravity", p.planar.gravity);
        q->number("arm_length", p.planar.arm_length);
        q->number("inertia", p.planar.inertia);
        q->finish();
    }
    if (auto q = s.child("perturbation"))
    {
        q->number("inertia_scale", p.inertia_scale);
        q->number("arm_scale", p.arm_scale);
        q->finish();
    }
    if (auto q = s.child("linear"))
    {
        q->matrix("A", p.A);
        q->matrix("B", p.B);
        q->matrix("D", p.D);
        q->vector("scale", p.scale);
        q->finish();
    }
    s.vector("initial_state", p.initial_state);
    s.finish();
}

void read_collect(Section s, CollectConfig &c)
{
    s.count("rollouts", c.rollouts);
    s.count("steps", c.steps);
    s.count("hold_steps", c.hold_steps);
    s.count("substeps", c.substeps);
    s.number("amplitude", c.amplitude);
    s.number("noise_std", c.noise_std);
    s.count("max_samples", c.max_samples);
    if (const Json *v = s.find("starts"))
    {
        if (!v->is_array())
            throw InputError(s.key_path("starts") + ": expected an array of states");
        c.starts.clear();
        for (std::size_t i = 0; i < v->size(); ++i)
            c.starts.push_back(vector_from_json((*v)[i], s.key_path("starts") + "[" + std::to_string(i) + "]"));
    }
    s.finish();
}

void read_gp(Section s, GpTrainConfig &g)
{
    s.boolean("multistart", g.multistart);
    if (const Json *v = s.find("initial"))
        g.initial = hyperparams_from_json(*v, s.key_path("initial"));
    if (auto o = s.child("optimizer"))
    {
        auto &h = g.optimizer;
        o->count("max_iters", h.max_iters);
        o->number("grad_tol", h.grad_tol);
        o->number("initial_step", h.initial_step);
        o->number("backtrack", h.backtrack);
        o->count("max_backtracks", h.max_backtracks);
        o->number("armijo", h.armijo);
        o->number("log_bound", h.log_bound);
        o->finish();
    }
    s.finish();
}

void read_cost(Section s, CostConfig &c)
{
    s.string("preset", c.preset);
    s.vector("Q_diag", c.Q_diag);
    s.vector("R_diag", c.R_diag);
    s.vector("Qf_diag", c.Qf_diag);
    s.matrix("Q", c.Q);
    s.matrix("R", c.R);
    s.matrix("Qf", c.Qf);
    s.vector("x_f", c.x_f);
    if (const Json *v = s.find("gamma"))
    {
        if (!v->is_number())
            throw InputError(s.key_path("gamma") + ": expected a number");
        c.gamma = v->get<double>();
    }
    s.finish();
}

void read_solver(Section s, SolverConfig &c)
{
    s.number("dt", c.dt);
    s.count("horizon", c.horizon);
    s.count("max_iters", c.max_iters);
    s.number("cost_tol", c.cost_tol);
    s.number("reg_init", c.reg_init);
    s.number("reg_scale", c.reg_scale);
    s.number("reg_max", c.reg_max);
    if (const Json *v = s.find("line_search_alphas"))
    {
        const VectorXd a = vector_from_json(*v, s.key_path("line_search_alphas"));
        c.line_search_alphas.assign(a.data(), a.data() + a.size());
    }
    s.number("accept_ratio", c.accept_ratio);
    s.boolean("discrete_correction", c.discrete_correction);
    s.finish();
}

void read_sim(Section s, SimConfig &c)
{
    s.number("noise_std", c.noise_std);
    s.matrix("noise_cov", c.noise_cov);
    s.count("n_runs", c.n_runs);
    s.finish();
}

Json optional_vector(const VectorXd &v) { return v.size() ? to_json(v) : Json(); }

} // namespace

ExperimentConfig ExperimentConfig::from_json(const Json &j)
{
    ExperimentConfig c;
    Section s(j, "");
    s.count("seed", c.seed);
    s.string("output_dir", c.output_dir);
    if (auto p = s.child("plant"))
        read_plant(*p, c.plant);
    if (auto p = s.child("collect"))
        read_collect(*p, c.collect);
    if (auto p = s.child("gp"))
        read_gp(*p, c.gp);
    if (auto p = s.child("cost"))
        read_cost(*p, c.cost);
    if (auto p = s.child("solver"))
        read_solver(*p, c.solver);
    if (auto p = s.child("sim"))
        read_sim(*p, c.sim);
    s.finish();
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path &path)
{
    const Json j = read_json(path);
    try
    {
        return from_json(j);
    }
    catch (const IoError &)
    {
        throw;
    }
    catch (const InputError &e)
    {
        throw InputError(path.string() + ": " + e.what());
    }
}

Json ExperimentConfig::to_json() const
{
    Json plant_j{{"name", plant.name},
                 {"quadcopter",
                  {{"mass", plant.quadcopter.mass},
                   {"gravity", plant.quadcopter.gravity},
                   {"arm_length", plant.quadcopter.arm_length},
                   {"inertia", gtddp::to_json(VectorXd(plant.quadcopter.inertia))},
                   {"k_m", plant.quadcopter.k_m},
                   {"k_F", plant.quadcopter.k_F},
                   {"k_M", plant.quadcopter.k_M}}},
                 {"planar",
                  {{"mass", plant.planar.mass},
                   {"gravity", plant.planar.gravity},
                   {"arm_length", plant.planar.arm_length},
                   {"inertia", plant.planar.inertia}}},
                 {"perturbation", {{"inertia_scale", plant.inertia_scale}, {"arm_scale", plant.arm_scale}}}};
    if (plant.A.size() || plant.B.size() || plant.D.size() || plant.scale.size())
    {
        Json lin = Json::object();
        if (plant.A.size())
            lin["A"] = gtddp::to_json(plant.A);
        if (plant.B.size())
            lin["B"] = gtddp::to_json(plant.B);
        if (plant.D.size())
            lin["D"] = gtddp::to_json(plant.D);
        if (plant.scale.size())
            lin["scale"] = gtddp::to_json(plant.scale);
        plant_j["linear"] = std::move(lin);
    }
    if (plant.initial_state.size())
        plant_j["initial_state"] = gtddp::to_json(plant.initial_state);

    Json collect_j{{"rollouts", collect.rollouts},       {"steps", collect.steps},
                   {"hold_steps", collect.hold_steps},   {"substeps", collect.substeps},
                   {"amplitude", collect.amplitude},     {"noise_std", collect.noise_std},
                   {"max_samples", collect.max_samples}};
    if (!collect.starts.empty())
    {
        Json starts = Json::array();
        for (const auto &x : collect.starts)
            starts.push_back(gtddp::to_json(x));
        collect_j["starts"] = std::move(starts);
    }

    const auto &o = gp.optimizer;
    Json gp_j{{"multistart", gp.multistart},
              {"optimizer",
               {{"max_iters", o.max_iters},
                {"grad_tol", o.grad_tol},
                {"initial_step", o.initial_step},
                {"backtrack", o.backtrack},
                {"max_backtracks", o.max_backtracks},
                {"armijo", o.armijo},
                {"log_bound", o.log_bound}}}};
    if (gp.initial)
        gp_j["initial"] = hyperparams_to_json(*gp.initial);

    Json cost_j{{"preset", cost.preset}};
    for (const auto &[key, v] : {std::pair<const char *, const VectorXd *>{"Q_diag", &cost.Q_diag},
                                 {"R_diag", &cost.R_diag},
                                 {"Qf_diag", &cost.Qf_diag},
                                 {"x_f", &cost.x_f}})
        if (v->size())
            cost_j[key] = optional_vector(*v);
    for (const auto &[key, a] : {std::pair<const char *, const MatrixXd *>{"Q", &cost.Q}, {"R", &cost.R}, {"Qf", &cost.Qf}})
        if (a->size())
            cost_j[key] = gtddp::to_json(*a);
    if (cost.gamma)
        cost_j["gamma"] = *cost.gamma;

    Json solver_j{{"dt", solver.dt},
                  {"horizon", solver.horizon},
                  {"max_iters", solver.max_iters},
                  {"cost_tol", solver.cost_tol},
                  {"reg_init", solver.reg_init},
                  {"reg_scale", solver.reg_scale},
                  {"reg_max", solver.reg_max},
                  {"line_search_alphas", solver.line_search_alphas},
                  {"accept_ratio", solver.accept_ratio},
                  {"discrete_correction", solver.discrete_correction}};

    Json sim_j{{"noise_std", sim.noise_std}, {"n_runs", sim.n_runs}};
    if (sim.noise_cov.size())
        sim_j["noise_cov"] = gtddp::to_json(sim.noise_cov);

    return Json{{"seed", seed},       {"output_dir", output_dir}, {"plant", std::move(plant_j)},
                {"collect", std::move(collect_j)}, {"gp", std::move(gp_j)},   {"cost", std::move(cost_j)},
                {"solver", std::move(solver_j)},   {"sim", std::move(sim_j)}};
}

std::uint64_t ExperimentConfig::hash() const
{
    Json j = to_json();
    j.erase("output_dir");
    return fnv1a(j.dump());
}

void ExperimentConfig::validate() const
{
    require(plant.name == "quadcopter" || plant.name == "planar_fixture" || plant.name == "linear_fixture",
            "plant.name: expected quadcopter, planar_fixture or linear_fixture");
    if (plant.name == "quadcopter")
    {
        try
        {
            plant.quadcopter.validate();
        }
        catch (const InputError &e)
        {
            throw InputError(std::string("plant.quadcopter: ") + e.what());
        }
    }
    if (plant.name == "planar_fixture")
        require(plant.planar.mass > 0 && plant.planar.gravity > 0 && plant.planar.arm_length > 0 &&
                    plant.planar.inertia > 0,
                "plant.planar: parameters must be positive");
    require(plant.inertia_scale > 0 && plant.arm_scale > 0, "plant.perturbation: scale factors must be positive");
    if (plant.name == "linear_fixture")
    {
        const auto n = plant.A.rows();
        require(n > 0 && plant.A.cols() == n, "plant.linear.A: must be a nonempty square matrix");
        require(plant.B.rows() == n && plant.B.cols() > 0, "plant.linear.B: must have one row per state");
        require(plant.D.rows() == n && plant.D.cols() > 0, "plant.linear.D: must have one row per state");
        require(plant.scale.size() == 0 || plant.scale.size() == n, "plant.linear.scale: one entry per state");
        require((plant.scale.array() >= 0.0).all(), "plant.linear.scale: entries must be nonnegative");
    }
    const PlantSetup setup = make_plant(*this);
    const auto n = static_cast<Eigen::Index>(setup.n);
    require(plant.initial_state.size() == 0 || plant.initial_state.size() == n,
            "plant.initial_state: expected " + std::to_string(n) + " entries");

    require(collect.rollouts > 0 || !collect.starts.empty(), "collect.rollouts: must be positive");
    require(collect.steps >= 2, "collect.steps: must be at least 2");
    require(collect.hold_steps > 0, "collect.hold_steps: must be positive");
    require(collect.substeps > 0, "collect.substeps: must be positive");
    require(collect.amplitude >= 0, "collect.amplitude: must be nonnegative");
    require(collect.noise_std >= 0, "collect.noise_std: must be nonnegative");
    require(collect.max_samples > 0, "collect.max_samples: must be positive");
    for (std::size_t i = 0; i < collect.starts.size(); ++i)
        require(collect.starts[i].size() == n, "collect.starts[" + std::to_string(i) + "]: wrong dimension");

    require(gp.optimizer.max_iters > 0 && gp.optimizer.grad_tol > 0 && gp.optimizer.initial_step > 0 &&
                gp.optimizer.backtrack > 0 && gp.optimizer.backtrack < 1 && gp.optimizer.armijo > 0 &&
                gp.optimizer.armijo < 1 && gp.optimizer.log_bound > 0,
            "gp.optimizer: tolerances must be positive and backtrack, armijo in (0, 1)");
    if (gp.initial)
        require(static_cast<Eigen::Index>(gp.initial->m_diag.size()) == n + static_cast<Eigen::Index>(setup.m),
                "gp.initial.m_diag: expected one entry per state and control");

    require(cost.preset == "quadcopter" || cost.preset == "none", "cost.preset: expected quadcopter or none");
    try
    {
        solver.validate();
    }
    catch (const InputError &e)
    {
        throw InputError(std::string("solver: ") + e.what());
    }
    try
    {
        make_cost(*this).validate();
    }
    catch (const InputError &e)
    {
        throw InputError(std::string("cost: ") + e.what());
    }

    require(sim.noise_std >= 0, "sim.noise_std: must be nonnegative");
    require(sim.n_runs > 0, "sim.n_runs: must be positive");
    SdeConfig sde;
    sde.dt = solver.dt;
    sde.n_runs = sim.n_runs;
    sde.noise_cov = sim_noise_cov(*this, static_cast<std::size_t>(setup.channel.cols()));
    try
    {
        sde.validate(static_cast<std::size_t>(setup.channel.cols()));
    }
    catch (const InputError &e)
    {
        throw InputError(std::string("sim: ") + e.what());
    }
}

PlantSetup make_plant(const ExperimentConfig &cfg)
{
    const PlantConfig &p = cfg.plant;
    PlantSetup s;
    if (p.name == "quadcopter")
    {
        s.nominal = quadcopter_model(p.quadcopter);
        s.plant = perturbed_plant(p.quadcopter, p.inertia_scale, p.arm_scale);
        s.channel = quad_input_matrix(p.quadcopter);
        s.n = quad::kStateDim;
        s.m = quad::kControlDim;
        s.x0 = quad_hover_state(p.quadcopter);
        s.error_begin = quad::kPos;
        s.error_count = 3;
    }
    else if (p.name == "planar_fixture")
    {
        PlanarParams perturbed = p.planar;
        perturbed.inertia *= p.inertia_scale;
        perturbed.arm_length *= p.arm_scale;
        s.nominal = planar_fixture(p.planar);
        s.plant = planar_fixture(perturbed);
        s.channel = planar_input_matrix(p.planar);
        s.n = 6;
        s.m = 2;
        s.x0 = VectorXd::Zero(6);
        s.error_begin = 0;
        s.error_count = 2;
    }
    else
    {
        s.nominal = linear_fixture(p.A, p.B);
        s.plant = s.nominal;
        s.channel = p.D;
        s.n = static_cast<std::size_t>(p.A.rows());
        s.m = static_cast<std::size_t>(p.B.cols());
        s.x0 = VectorXd::Zero(p.A.rows());
        s.error_begin = 0;
        s.error_count = p.A.rows();
    }
    if (p.initial_state.size())
        s.x0 = p.initial_state;
    return s;
}

QuadraticGameCost make_cost(const ExperimentConfig &cfg)
{
    const PlantSetup plant = make_plant(cfg);
    const auto n = static_cast<Eigen::Index>(plant.n);
    const auto m = static_cast<Eigen::Index>(plant.m);
    const CostConfig &cc = cfg.cost;
    QuadraticGameCost c;
    if (cc.preset == "quadcopter")
    {
        require(cfg.plant.name == "quadcopter", "cost.preset: the quadcopter preset needs the quadcopter plant");
        c = quadcopter_cost_preset(plant.n, plant.m);
    }
    else
    {
        c.Q = MatrixXd::Zero(n, n);
        c.Q_f = MatrixXd::Zero(n, n);
        c.R_u = MatrixXd::Identity(m, m);
        c.x_f = VectorXd::Zero(n);
        c.gamma = 1.0;
    }
    auto diag = [](const VectorXd &d, Eigen::Index size, const char *key) {
        require(d.size() == size, std::string("cost.") + key + ": expected " + std::to_string(size) + " entries");
        return MatrixXd(d.asDiagonal());
    };
    if (cc.Q_diag.size())
        c.Q = diag(cc.Q_diag, n, "Q_diag");
    if (cc.R_diag.size())
        c.R_u = diag(cc.R_diag, m, "R_diag");
    if (cc.Qf_diag.size())
        c.Q_f = diag(cc.Qf_diag, n, "Qf_diag");
    if (cc.Q.size())
        c.Q = cc.Q;
    if (cc.R.size())
        c.R_u = cc.R;
    if (cc.Qf.size())
        c.Q_f = cc.Qf;
    if (cc.x_f.size())
        c.x_f = cc.x_f;
    if (cc.gamma)
        c.gamma = *cc.gamma;
    c.disturbance_dim = static_cast<std::size_t>(plant.channel.cols());
    return c;
}

GameDynamics make_game(const ExperimentConfig &cfg, const PlantSetup &plant, std::shared_ptr<const GpModel> gp)
{
    if (cfg.plant.name == "linear_fixture" && cfg.plant.scale.size())
        return GameDynamics::with_constant_scale(plant.nominal, plant.n, plant.m, plant.channel, cfg.plant.scale);
    return GameDynamics::compose(plant.nominal, plant.n, plant.m, std::move(gp), plant.channel);
}

MatrixXd sim_noise_cov(const ExperimentConfig &cfg, std::size_t q)
{
    if (cfg.sim.noise_cov.size())
        return cfg.sim.noise_cov;
    const auto Q = static_cast<Eigen::Index>(q);
    return cfg.sim.noise_std * cfg.sim.noise_std * MatrixXd::Identity(Q, Q);
}

} // namespace gtddp
