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
#include "gtddp/io.hpp"

#include <fmt/format.h>

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <system_error>

namespace gtddp
{

void write_file_atomic(const fs::path &path, const std::string &contents)
{
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
        throw IoError("cannot write " + path.string() + ": directory " + dir.string() + " does not exist");
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write " + path.string() + ": unable to open a temporary file in " + dir.string());
        out << contents;
        out.flush();
        if (!out)
        {
            out.close();
            fs::remove(tmp, ec);
            throw IoError("cannot write " + path.string() + ": write failed");
        }
    }
    fs::rename(tmp, path, ec);
    if (ec)
    {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw IoError("cannot write " + path.string() + ": " + ec.message());
    }
}

std::string read_file(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json(const fs::path &path)
{
    const std::string text = read_file(path);
    try
    {
        return Json::parse(text);
    }
    catch (const Json::parse_error &e)
    {
        throw IoError(path.string() + ": invalid JSON: " + e.what());
    }
}

void write_json(const fs::path &path, const Json &doc) { write_file_atomic(path, doc.dump(2) + "\n"); }

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

std::uint64_t fnv1a(const std::string &bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes)
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Json to_json(const VectorXd &v)
{
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out.push_back(v[i]);
    return out;
}

Json to_json(const MatrixXd &a)
{
    Json out = Json::array();
    for (Eigen::Index r = 0; r < a.rows(); ++r)
        out.push_back(to_json(VectorXd(a.row(r).transpose())));
    return out;
}

VectorXd vector_from_json(const Json &j, const std::string &what)
{
    if (!j.is_array())
        throw InputError(what + ": expected an array of numbers");
    VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
    {
        if (!j[i].is_number())
            throw InputError(what + "[" + std::to_string(i) + "]: expected a number");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

MatrixXd matrix_from_json(const Json &j, const std::string &what)
{
    if (!j.is_array())
        throw InputError(what + ": expected an array of rows");
    if (j.empty())
        return MatrixXd(0, 0);
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    MatrixXd a(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r)
    {
        const VectorXd row = vector_from_json(j[r], what + "[" + std::to_string(r) + "]");
        if (static_cast<std::size_t>(row.size()) != cols)
            throw ShapeError(what + ": row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                             " entries, expected " + std::to_string(cols));
        a.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return a;
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

namespace
{
std::vector<std::string> split_csv(const std::string &line)
{
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
    {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',')
        cells.emplace_back();
    return cells;
}

bool parse_number(const std::string &s, double &out)
{
    if (s.empty())
        return false;
    errno = 0;
    char *end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

void append_row(std::string &out, const std::vector<double> &values)
{
    for (std::size_t i = 0; i < values.size(); ++i)
    {
        if (i)
            out += ',';
        out += format_double(values[i]);
    }
    out += '\n';
}
} // namespace

std::string dataset_to_csv(const GpDataset &data)
{
    data.validate();
    const auto n = data.targets.cols();
    const auto m = data.inputs.cols() - n;
    require_shape(m >= 0, "dataset: inputs must contain the state followed by the control");
    std::string out = "t";
    for (Eigen::Index i = 0; i < n; ++i)
        out += fmt::format(",x{}", i);
    for (Eigen::Index i = 0; i < m; ++i)
        out += fmt::format(",u{}", i);
    for (Eigen::Index i = 0; i < n; ++i)
        out += fmt::format(",dx{}", i);
    out += '\n';
    const bool has_t = data.times.size() == data.inputs.rows();
    for (Eigen::Index r = 0; r < data.inputs.rows(); ++r)
    {
        std::vector<double> row{has_t ? data.times[r] : static_cast<double>(r)};
        for (Eigen::Index c = 0; c < data.inputs.cols(); ++c)
            row.push_back(data.inputs(r, c));
        for (Eigen::Index c = 0; c < n; ++c)
            row.push_back(data.targets(r, c));
        append_row(out, row);
    }
    return out;
}

GpDataset dataset_from_csv(const std::string &text, const std::string &source)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw IoError(source + ": empty file, expected a header row");
    const auto header = split_csv(line);
    Eigen::Index n = 0, m = 0, nd = 0;
    bool ok = !header.empty() && header[0] == "t";
    for (std::size_t i = 1; ok && i < header.size(); ++i)
    {
        const std::string &h = header[i];
        if (h == fmt::format("x{}", n) && m == 0 && nd == 0)
            ++n;
        else if (h == fmt::format("u{}", m) && nd == 0)
            ++m;
        else if (h == fmt::format("dx{}", nd))
            ++nd;
        else
            ok = false;
    }
    if (!ok || n == 0 || nd != n)
        throw IoError(source + ": line 1: header must be t,x0..x{n-1},u0..u{m-1},dx0..dx{n-1}");

    const std::size_t cols = header.size();
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line))
    {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        const auto cells = split_csv(line);
        if (cells.size() != cols)
            throw IoError(fmt::format("{}: line {}: expected {} fields, found {}", source, line_no, cols, cells.size()));
        std::vector<double> row(cols);
        for (std::size_t c = 0; c < cols; ++c)
            if (!parse_number(cells[c], row[c]))
                throw IoError(fmt::format("{}: line {}: field '{}' ({}) is not a finite number", source, line_no,
                                          header[c], cells[c]));
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw IoError(source + ": no data rows");

    GpDataset data;
    const auto N = static_cast<Eigen::Index>(rows.size());
    data.times.resize(N);
    data.inputs.resize(N, n + m);
    data.targets.resize(N, n);
    for (Eigen::Index r = 0; r < N; ++r)
    {
        const auto &row = rows[static_cast<std::size_t>(r)];
        data.times[r] = row[0];
        for (Eigen::Index c = 0; c < n + m; ++c)
            data.inputs(r, c) = row[static_cast<std::size_t>(1 + c)];
        for (Eigen::Index c = 0; c < n; ++c)
            data.targets(r, c) = row[static_cast<std::size_t>(1 + n + m + c)];
    }
    return data;
}

void write_dataset(const fs::path &path, const GpDataset &data) { write_file_atomic(path, dataset_to_csv(data)); }

GpDataset read_dataset(const fs::path &path) { return dataset_from_csv(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// Hyperparameters and trained models
// ---------------------------------------------------------------------------

Json hyperparams_to_json(const GpHyperparams &h)
{
    return Json{{"sigma_s", h.sigma_s}, {"sigma_w", h.sigma_w}, {"m_diag", to_json(h.m_diag)}};
}

GpHyperparams hyperparams_from_json(const Json &j, const std::string &what)
{
    if (!j.is_object())
        throw InputError(what + ": expected an object");
    for (const auto &[key, value] : j.items())
        if (key != "sigma_s" && key != "sigma_w" && key != "m_diag")
            throw InputError(what + "." + key + ": unknown key");
    GpHyperparams h;
    for (const char *key : {"sigma_s", "sigma_w", "m_diag"})
        if (!j.contains(key))
            throw InputError(what + "." + key + ": missing");
    if (!j["sigma_s"].is_number() || !j["sigma_w"].is_number())
        throw InputError(what + ": sigma_s and sigma_w must be numbers");
    h.sigma_s = j["sigma_s"].get<double>();
    h.sigma_w = j["sigma_w"].get<double>();
    h.m_diag = vector_from_json(j["m_diag"], what + ".m_diag");
    try
    {
        h.validate();
    }
    catch (const InputError &e)
    {
        throw InputError(what + ": " + e.what());
    }
    return h;
}

void write_model(const fs::path &path, const ModelFile &model)
{
    require_shape(model.hyper.size() == model.log_likelihood.size(),
                  "write_model: one likelihood per output dimension required");
    Json outputs = Json::array();
    for (std::size_t d = 0; d < model.hyper.size(); ++d)
    {
        Json o = hyperparams_to_json(model.hyper[d]);
        o["log_marginal_likelihood"] = model.log_likelihood[d];
        outputs.push_back(std::move(o));
    }
    write_json(path, Json{{"dataset", model.dataset.generic_string()}, {"outputs", std::move(outputs)}});
}

ModelFile read_model(const fs::path &path)
{
    const Json j = read_json(path);
    const std::string src = path.string();
    if (!j.is_object() || !j.contains("dataset") || !j["dataset"].is_string() || !j.contains("outputs") ||
        !j["outputs"].is_array())
        throw IoError(src + ": model file needs a 'dataset' path and an 'outputs' array");
    ModelFile m;
    m.dataset = j["dataset"].get<std::string>();
    for (std::size_t d = 0; d < j["outputs"].size(); ++d)
    {
        Json o = j["outputs"][d];
        const std::string what = src + ": outputs[" + std::to_string(d) + "]";
        double lml = 0.0;
        if (o.contains("log_marginal_likelihood"))
        {
            lml = o["log_marginal_likelihood"].get<double>();
            o.erase("log_marginal_likelihood");
        }
        m.hyper.push_back(hyperparams_from_json(o, what));
        m.log_likelihood.push_back(lml);
    }
    return m;
}

std::shared_ptr<const GpModel> load_gp(const fs::path &model_path)
{
    const ModelFile m = read_model(model_path);
    const fs::path data_path = m.dataset.is_absolute() ? m.dataset : model_path.parent_path() / m.dataset;
    GpDataset data = read_dataset(data_path);
    if (m.hyper.size() != data.output_dim())
        throw IoError(model_path.string() + ": model has " + std::to_string(m.hyper.size()) +
                      " outputs but the dataset has " + std::to_string(data.output_dim()));
    return std::make_shared<const GpModel>(GpModel::fit(std::move(data), m.hyper));
}

// ---------------------------------------------------------------------------
// Policies, logs and ensembles
// ---------------------------------------------------------------------------

namespace
{
Json stack(const std::vector<VectorXd> &v)
{
    Json out = Json::array();
    for (const auto &x : v)
        out.push_back(to_json(x));
    return out;
}

Json stack(const std::vector<MatrixXd> &v)
{
    Json out = Json::array();
    for (const auto &a : v)
        out.push_back(to_json(a));
    return out;
}

const Json &field(const Json &j, const char *key)
{
    if (!j.contains(key))
        throw IoError(std::string("policy file: missing '") + key + "'");
    return j[key];
}

std::vector<VectorXd> unstack_vectors(const Json &j, const char *key, std::size_t count, Eigen::Index dim)
{
    const Json &a = field(j, key);
    if (!a.is_array() || a.size() != count)
        throw IoError(fmt::format("policy file: '{}' must hold {} entries", key, count));
    std::vector<VectorXd> out;
    for (std::size_t k = 0; k < count; ++k)
    {
        out.push_back(vector_from_json(a[k], fmt::format("policy file: {}[{}]", key, k)));
        if (out.back().size() != dim)
            throw IoError(fmt::format("policy file: {}[{}] must have length {}", key, k, dim));
    }
    return out;
}

std::vector<MatrixXd> unstack_matrices(const Json &j, const char *key, std::size_t count, Eigen::Index rows,
                                       Eigen::Index cols)
{
    const Json &a = field(j, key);
    if (!a.is_array() || a.size() != count)
        throw IoError(fmt::format("policy file: '{}' must hold {} entries", key, count));
    std::vector<MatrixXd> out;
    for (std::size_t k = 0; k < count; ++k)
    {
        MatrixXd m = rows == 0 ? MatrixXd(0, cols) : matrix_from_json(a[k], fmt::format("policy file: {}[{}]", key, k));
        if (m.rows() != rows || m.cols() != cols)
            throw IoError(fmt::format("policy file: {}[{}] must be {} x {}", key, k, rows, cols));
        out.push_back(std::move(m));
    }
    return out;
}
} // namespace

Json policy_to_json(const SolveResult &r)
{
    const auto &t = r.trajectory;
    const auto &g = r.gains;
    const std::size_t K = t.steps();
    const auto n = t.x.empty() ? 0 : t.x.front().size();
    const auto m = t.u.empty() ? 0 : t.u.front().size();
    const auto q = t.w.empty() ? 0 : t.w.front().size();
    Json costs = Json::array();
    for (const auto &e : r.log)
        costs.push_back(e.cost);
    return Json{{"shape", {{"horizon", K}, {"state_dim", n}, {"control_dim", m}, {"disturbance_dim", q}}},
                {"dt", t.dt},
                {"t0", t.t0},
                {"cost", t.cost},
                {"cost_nominal", t.cost_nominal},
                {"costs", std::move(costs)},
                {"converged", r.converged},
                {"accepted_iterations", r.accepted_iterations},
                {"x", stack(t.x)},
                {"u", stack(t.u)},
                {"w", stack(t.w)},
                {"l_u", stack(g.l_u)},
                {"l_w", stack(g.l_w)},
                {"K_u", stack(g.K_u)},
                {"K_w", stack(g.K_w)}};
}

SolveResult policy_from_json(const Json &j)
{
    try
    {
        const Json &shape = field(j, "shape");
        const auto K = shape.at("horizon").get<std::size_t>();
        const auto n = shape.at("state_dim").get<Eigen::Index>();
        const auto m = shape.at("control_dim").get<Eigen::Index>();
        const auto q = shape.at("disturbance_dim").get<Eigen::Index>();
        SolveResult r;
        r.trajectory.dt = field(j, "dt").get<double>();
        r.trajectory.t0 = field(j, "t0").get<double>();
        if (!(r.trajectory.dt > 0.0) || K == 0)
            throw IoError("policy file: needs a positive dt and horizon");
        r.trajectory.cost = field(j, "cost").get<double>();
        r.trajectory.cost_nominal = field(j, "cost_nominal").get<double>();
        r.converged = field(j, "converged").get<bool>();
        r.accepted_iterations = field(j, "accepted_iterations").get<std::size_t>();
        r.trajectory.x = unstack_vectors(j, "x", K + 1, n);
        r.trajectory.u = unstack_vectors(j, "u", K, m);
        r.trajectory.w = unstack_vectors(j, "w", K, q);
        r.gains.l_u = unstack_vectors(j, "l_u", K, m);
        r.gains.l_w = unstack_vectors(j, "l_w", K, q);
        r.gains.K_u = unstack_matrices(j, "K_u", K, m, n);
        r.gains.K_w = unstack_matrices(j, "K_w", K, q, n);
        for (const auto &c : field(j, "costs"))
        {
            IterationLog e;
            e.iter = r.log.size();
            e.cost = c.get<double>();
            r.log.push_back(e);
        }
        return r;
    }
    catch (const Json::exception &e)
    {
        throw IoError(std::string("policy file: ") + e.what());
    }
}

std::string iteration_log_csv(const std::vector<IterationLog> &log)
{
    std::string out = "iter,cost,alpha,lambda,grad_norm,cost_nominal\n";
    for (const auto &e : log)
        out += fmt::format("{},{},{},{},{},{}\n", e.iter, format_double(e.cost), format_double(e.alpha),
                           format_double(e.lambda), format_double(e.grad_norm), format_double(e.cost_nominal));
    return out;
}

std::string run_csv(const TrajectoryIterate &run)
{
    require_shape(!run.x.empty(), "run_csv: empty run");
    const auto n = run.x.front().size();
    const auto m = run.u.empty() ? Eigen::Index(0) : run.u.front().size();
    std::string out = "t";
    for (Eigen::Index i = 0; i < n; ++i)
        out += fmt::format(",x{}", i);
    for (Eigen::Index i = 0; i < m; ++i)
        out += fmt::format(",u{}", i);
    out += '\n';
    for (std::size_t k = 0; k < run.x.size(); ++k)
    {
        out += format_double(run.time(k));
        for (Eigen::Index i = 0; i < n; ++i)
            out += "," + format_double(run.x[k][i]);
        for (Eigen::Index i = 0; i < m; ++i)
            out += k < run.u.size() ? "," + format_double(run.u[k][i]) : std::string(",");
        out += '\n';
    }
    return out;
}

std::string summary_csv(const RolloutEnsemble &ens, const VectorXd &goal, double dt, double t0)
{
    require_shape(ens.mean.rows() > 0 && ens.mean.cols() == goal.size(),
                  "summary_csv: needs statistics and a goal of the state dimension");
    const auto n = goal.size();
    std::string out = "t";
    for (const char *prefix : {"mean_x", "std_x", "goal_x"})
        for (Eigen::Index i = 0; i < n; ++i)
            out += fmt::format(",{}{}", prefix, i);
    out += '\n';
    for (Eigen::Index k = 0; k < ens.mean.rows(); ++k)
    {
        out += format_double(t0 + static_cast<double>(k) * dt);
        for (Eigen::Index i = 0; i < n; ++i)
            out += "," + format_double(ens.mean(k, i));
        for (Eigen::Index i = 0; i < n; ++i)
            out += "," + format_double(ens.std(k, i));
        for (Eigen::Index i = 0; i < n; ++i)
            out += "," + format_double(goal[i]);
        out += '\n';
    }
    return out;
}

} // namespace gtddp
