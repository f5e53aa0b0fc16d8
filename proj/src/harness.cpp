#include "raviucb/harness.hpp"

#include "raviucb/tabular_estimator.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace raviucb {

namespace fs = std::filesystem;

namespace {

std::string fmt_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

nlohmann::json json_from_matrix(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& doc) {
  const int rows = static_cast<int>(doc.size());
  if (rows == 0) throw std::invalid_argument("matrix json: empty");
  const int cols = static_cast<int>(doc.at(0).size());
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = doc.at(i).at(j).get<double>();
  }
  return m;
}

Vector vector_from_json(const nlohmann::json& doc) {
  Vector v(static_cast<long>(doc.size()));
  for (long i = 0; i < v.size(); ++i) v(i) = doc.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

nlohmann::json json_from_vector(const Vector& v) {
  auto row = nlohmann::json::array();
  for (long i = 0; i < v.size(); ++i) row.push_back(v(i));
  return row;
}

nlohmann::json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& err) {
    throw std::runtime_error(path.string() + ": " + err.what());
  }
  return doc;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

double require_positive(const nlohmann::json& doc, const char* key) {
  const double value = doc.at(key).get<double>();
  if (!(value > 0.0)) {
    throw std::invalid_argument(std::string("config.") + key + ": must be positive");
  }
  return value;
}

}  // namespace

ResolvedParams resolve_params(const ExperimentConfig& config, long T) {
  if (T < 1) throw std::invalid_argument("resolve_params: T must be positive");
  const TabularMdp& env = config.env();
  ResolvedParams params;
  params.H = env.horizon();
  params.delta = config.delta.value_or(std::min(0.5, 1.0 / static_cast<double>(T)));
  params.eta = config.eta.value_or(default_learning_rate(env.n_actions(), params.H, T));
  params.reg_lambda = config.reg_lambda.value_or(1.0);
  if (config.beta) {
    params.beta = *config.beta;
  } else if (config.backend == "tabular") {
    params.beta = tabular_beta(env.n_states(), env.n_actions(), T, params.delta, params.H);
  } else {
    params.beta = linmix_beta(config.mixture->dim(), T, config.mixture->bound_B(), params.H,
                              params.reg_lambda, params.delta);
  }
  return params;
}

ExperimentConfig config_from_json(const nlohmann::json& doc, const fs::path& base_dir) {
  ExperimentConfig config;
  if (!doc.contains("backend")) throw std::invalid_argument("config.backend: missing");
  config.backend = doc.at("backend").get<std::string>();
  if (config.backend != "tabular" && config.backend != "linmix") {
    throw std::invalid_argument("config.backend: must be \"tabular\" or \"linmix\"");
  }
  if (!doc.contains("T")) throw std::invalid_argument("config.T: missing");
  config.T = doc.at("T").get<long>();
  if (config.T < 1) throw std::invalid_argument("config.T: must be a positive integer");
  if (!doc.contains("seeds") || !doc.at("seeds").is_array() || doc.at("seeds").empty()) {
    throw std::invalid_argument("config.seeds: must be a nonempty array of integers");
  }
  for (const auto& entry : doc.at("seeds")) {
    config.seeds.push_back(entry.get<std::uint64_t>());
  }
  if (doc.contains("eta")) config.eta = require_positive(doc, "eta");
  if (doc.contains("beta")) {
    config.beta = doc.at("beta").get<double>();
    if (*config.beta < 0.0) throw std::invalid_argument("config.beta: must be nonnegative");
  }
  if (doc.contains("lambda")) config.reg_lambda = require_positive(doc, "lambda");
  if (doc.contains("delta")) {
    config.delta = doc.at("delta").get<double>();
    if (!(*config.delta > 0.0 && *config.delta < 1.0)) {
      throw std::invalid_argument("config.delta: must lie in (0,1)");
    }
  }
  if (doc.contains("out_dir")) config.out_dir = doc.at("out_dir").get<std::string>();

  if (!doc.contains("mdp")) throw std::invalid_argument("config.mdp: missing");
  nlohmann::json mdp_doc;
  if (doc.at("mdp").is_string()) {
    fs::path mdp_path = doc.at("mdp").get<std::string>();
    if (mdp_path.is_relative()) mdp_path = base_dir / mdp_path;
    mdp_doc = load_json_file(mdp_path);
  } else if (doc.at("mdp").is_object()) {
    mdp_doc = doc.at("mdp");
  } else {
    throw std::invalid_argument("config.mdp: must be a path or an inline object");
  }
  const bool is_mixture = mdp_doc.contains("psi");
  if (config.backend == "linmix" && !is_mixture) {
    throw std::invalid_argument("config.mdp: linmix backend requires a mixture instance (psi)");
  }
  if (config.backend == "tabular" && is_mixture) {
    throw std::invalid_argument("config.mdp: tabular backend given a mixture instance");
  }
  try {
    if (is_mixture) {
      config.mixture = LinearMixtureMdp::from_json(mdp_doc);
    } else {
      config.tabular = TabularMdp::from_json(mdp_doc);
    }
  } catch (const nlohmann::json::exception& err) {
    throw std::invalid_argument(std::string("config.mdp: ") + err.what());
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  const fs::path config_path(path);
  return config_from_json(load_json_file(config_path), config_path.parent_path());
}

RunLog execute_run(const ExperimentConfig& config, long T, std::uint64_t seed) {
  const ResolvedParams params = resolve_params(config, T);
  const TabularMdp& env = config.env();
  PlannerConfig planner;
  planner.horizon_T = T;
  planner.learning_rate_eta = params.eta;
  planner.truncation_H = params.H;
  planner.delta = params.delta;
  planner.seed = seed;
  RandomStream rng(seed);
  RunLog log;
  if (config.backend == "tabular") {
    TabularBackend backend(env.n_states(), env.n_actions(), params.beta, params.H);
    log = run_ravi_ucb(env, backend, planner, rng);
  } else {
    LinMixBackend backend(*config.mixture, params.beta, params.reg_lambda, params.H);
    log = run_ravi_ucb(env, backend, planner, rng);
    log.reg_lambda = params.reg_lambda;
  }
  log.backend = config.backend;
  log.beta = params.beta;
  return log;
}

void save_run_log(const fs::path& dir, const RunLog& log) {
  fs::create_directories(dir);
  std::ostringstream csv;
  csv << "t,epoch,state,action,reward,reset\n";
  for (const auto& step : log.steps) {
    csv << step.t << ',' << step.epoch << ',' << step.state << ',' << step.action << ','
        << fmt_double(step.reward) << ',' << (step.reset ? 1 : 0) << '\n';
  }
  write_text_file(dir / "steps.csv", csv.str());

  nlohmann::json doc;
  doc["backend"] = log.backend;
  doc["T"] = log.horizon_T;
  doc["seed"] = log.seed;
  doc["eta"] = log.eta;
  doc["gamma"] = log.gamma;
  doc["H"] = log.truncation_H;
  doc["delta"] = log.delta;
  doc["beta"] = log.beta;
  doc["lambda"] = log.reg_lambda;
  doc["pi0"] = json_from_matrix(log.initial_policy.probs);
  auto epochs = nlohmann::json::array();
  for (const auto& epoch : log.epochs) {
    epochs.push_back({{"k", epoch.k},
                      {"T_k", epoch.t_start},
                      {"V", json_from_vector(epoch.v.values)},
                      {"policy", json_from_matrix(epoch.policy.probs)},
                      {"CB", json_from_matrix(epoch.bonus)},
                      {"Q_next", json_from_matrix(epoch.q_next.values)},
                      {"backup", json_from_matrix(epoch.backup)},
                      {"estimator", epoch.estimator}});
  }
  doc["epochs"] = std::move(epochs);
  write_text_file(dir / "epochs.json", doc.dump());
}

RunLog load_run_log(const fs::path& dir) {
  const nlohmann::json doc = load_json_file(dir / "epochs.json");
  RunLog log;
  log.backend = doc.at("backend").get<std::string>();
  log.horizon_T = doc.at("T").get<long>();
  log.seed = doc.at("seed").get<std::uint64_t>();
  log.eta = doc.at("eta").get<double>();
  log.gamma = doc.at("gamma").get<double>();
  log.truncation_H = doc.at("H").get<double>();
  log.delta = doc.at("delta").get<double>();
  log.beta = doc.at("beta").get<double>();
  log.reg_lambda = doc.at("lambda").get<double>();
  log.initial_policy.probs = matrix_from_json(doc.at("pi0"));
  for (const auto& entry : doc.at("epochs")) {
    EpochRecord epoch;
    epoch.k = entry.at("k").get<int>();
    epoch.t_start = entry.at("T_k").get<long>();
    epoch.v.values = vector_from_json(entry.at("V"));
    epoch.policy.probs = matrix_from_json(entry.at("policy"));
    epoch.bonus = matrix_from_json(entry.at("CB"));
    epoch.q_next.values = matrix_from_json(entry.at("Q_next"));
    epoch.backup = matrix_from_json(entry.at("backup"));
    epoch.estimator = entry.at("estimator");
    log.epochs.push_back(std::move(epoch));
  }

  std::ifstream in(dir / "steps.csv");
  if (!in) throw std::runtime_error("cannot open " + (dir / "steps.csv").string());
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    StepRecord step;
    int reset = 0;
    if (std::sscanf(line.c_str(), "%ld,%d,%d,%d,%lf,%d", &step.t, &step.epoch, &step.state,
                    &step.action, &step.reward, &reset) != 6) {
      throw std::runtime_error("malformed steps.csv row: " + line);
    }
    step.reset = reset != 0;
    log.steps.push_back(step);
  }
  return log;
}

namespace {

nlohmann::json resolved_config_json(const ExperimentConfig& config, const ResolvedParams& params) {
  nlohmann::json doc;
  doc["backend"] = config.backend;
  doc["T"] = config.T;
  doc["seeds"] = config.seeds;
  doc["eta"] = params.eta;
  doc["beta"] = params.beta;
  doc["lambda"] = params.reg_lambda;
  doc["delta"] = params.delta;
  doc["out_dir"] = config.out_dir;
  doc["mdp"] = config.mixture ? config.mixture->to_json() : config.tabular->to_json();
  return doc;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "seed,T,regret,mean_epoch_len,K,validity_violations,seconds\n";
  for (const auto& row : rows) {
    out << row.seed << ',' << row.T << ',' << fmt_double(row.regret) << ','
        << fmt_double(row.mean_epoch_len) << ',' << row.K << ',' << row.validity_violations << ','
        << fmt_double(row.seconds) << '\n';
  }
  return out.str();
}

}  // namespace

std::vector<MetricsRow> run_experiment(const ExperimentConfig& config) {
  const ResolvedParams params = resolve_params(config, config.T);
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config.json", resolved_config_json(config, params).dump(2));
  const fs::path instance_path =
      out_dir / (config.backend == "linmix" ? "mixture.json" : "mdp.json");
  write_text_file(instance_path,
                  (config.mixture ? config.mixture->to_json() : config.tabular->to_json()).dump());

  std::vector<MetricsRow> rows;
  for (const std::uint64_t seed : config.seeds) {
    const auto start = std::chrono::steady_clock::now();
    const RunLog log = execute_run(config, config.T, seed);
    const RegretAccount account = compute_regret(config.env(), log);
    const CheckReport validity = check_validity(log, config.env());
    const auto stop = std::chrono::steady_clock::now();
    MetricsRow row;
    row.seed = seed;
    row.T = config.T;
    row.regret = account.cumulative_regret;
    row.K = log.n_epochs();
    row.mean_epoch_len = static_cast<double>(config.T) / static_cast<double>(row.K);
    row.validity_violations = validity.details.at("violations").get<long>();
    row.seconds = std::chrono::duration<double>(stop - start).count();
    rows.push_back(row);
    save_run_log(out_dir / ("seed_" + std::to_string(seed)), log);
  }
  write_text_file(out_dir / "metrics.csv", metrics_csv(rows));
  return rows;
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::vector<long>& T_values) {
  if (T_values.empty()) throw std::invalid_argument("sweep: need at least one horizon");
  std::vector<SweepRow> rows;
  std::vector<double> t_so_far;
  std::vector<double> mean_so_far;
  for (const long T : T_values) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const std::uint64_t seed : config.seeds) {
      const RunLog log = execute_run(config, T, seed);
      const double regret = compute_regret(config.env(), log).cumulative_regret;
      sum += regret;
      sum_sq += regret * regret;
    }
    const double n = static_cast<double>(config.seeds.size());
    SweepRow row;
    row.T = T;
    row.mean_regret = sum / n;
    const double var = std::max(0.0, sum_sq / n - row.mean_regret * row.mean_regret);
    row.stderr_regret = std::sqrt(var / n);
    t_so_far.push_back(static_cast<double>(T));
    mean_so_far.push_back(row.mean_regret);
    if (t_so_far.size() >= 2) row.slope = fit_loglog_slope(t_so_far, mean_so_far);
    rows.push_back(row);
  }
  const fs::path out_dir(config.out_dir);
  fs::create_directories(out_dir);
  std::ostringstream csv;
  csv << "T,mean_regret,stderr,slope\n";
  for (const auto& row : rows) {
    csv << row.T << ',' << fmt_double(row.mean_regret) << ',' << fmt_double(row.stderr_regret)
        << ',' << (row.slope ? fmt_double(*row.slope) : "") << '\n';
  }
  write_text_file(out_dir / "sweep.csv", csv.str());
  return rows;
}

std::vector<CheckReport> validate_run_dir(const fs::path& dir, int trials,
                                          std::uint64_t check_seed) {
  const ExperimentConfig config = config_from_json(load_json_file(dir / "config.json"), dir);
  std::vector<CheckReport> reports;
  for (const std::uint64_t seed : config.seeds) {
    const fs::path seed_dir = dir / ("seed_" + std::to_string(seed));
    const RunLog log = load_run_log(seed_dir);
    RandomStream rng(check_seed ^ seed);
    auto tag = [&](CheckReport report) {
      report.details["seed"] = seed;
      reports.push_back(std::move(report));
    };
    tag(check_validity(log, config.env()));
    tag(check_sandwich(log, config.env()));
    tag(check_md_identity(log, 10000, rng));
    tag(check_online_to_batch(config.env(), log, trials, rng));
    tag(check_kl_chain(config.env(), log.epochs.front().policy, log.epochs.back().policy));
    if (config.backend == "linmix") {
      tag(check_elliptical(log, *config.mixture));
      tag(check_bad_epochs(log, *config.mixture));
    }
  }
  write_text_file(dir / "checks.json", check_reports_to_json(reports).dump(2));
  return reports;
}

TabularMdp reference_tabular_mdp() {
  const int n = 5;
  const int m = 2;
  const Vector base = (Vector(n) << 0.05, 0.15, 0.3, 0.5, 1.0).finished();
  Matrix reward(n, m);
  reward.col(0) = base;
  reward.col(1) = base;
  RowMatrix transition = RowMatrix::Zero(n * m, n);
  for (int x = 0; x < n; ++x) {
    const int up = std::min(x + 1, n - 1);
    const int down = std::max(x - 1, 0);
    transition(x * m + 0, down) += 0.8;
    transition(x * m + 0, x) += 0.15;
    transition(x * m + 0, up) += 0.05;
    transition(x * m + 1, up) += 0.8;
    transition(x * m + 1, x) += 0.15;
    transition(x * m + 1, down) += 0.05;
  }
  const Vector nu0 = Vector::Constant(n, 0.2);
  return TabularMdp(reward, transition, 0.6, nu0);
}

LinearMixtureMdp reference_mixture_mdp() {
  const TabularMdp chain = reference_tabular_mdp();
  const int n = chain.n_states();
  const int m = chain.n_actions();
  std::vector<RowMatrix> kernels;
  kernels.push_back(chain.transition());  // action-responsive drift
  RowMatrix lazy = RowMatrix::Constant(n * m, n, 0.1 / n);
  for (int x = 0; x < n; ++x) {
    for (int a = 0; a < m; ++a) lazy(x * m + a, x) += 0.9;
  }
  kernels.push_back(lazy);
  kernels.push_back(RowMatrix::Constant(n * m, n, 1.0 / n));
  const Vector theta = (Vector(3) << 0.7, 0.2, 0.1).finished();
  return build_convex_mixture_env(std::move(kernels), theta, chain.reward(), chain.gamma(),
                                  chain.init_dist());
}

namespace {

int cmd_run(const std::string& config_path) {
  const ExperimentConfig config = load_config(config_path);
  const std::vector<MetricsRow> rows = run_experiment(config);
  for (const auto& row : rows) {
    std::cout << "seed " << row.seed << ": regret " << row.regret << ", epochs " << row.K
              << ", validity violations " << row.validity_violations << "\n";
  }
  std::cout << "wrote " << config.out_dir << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<long>& T_values) {
  const ExperimentConfig config = load_config(config_path);
  const std::vector<SweepRow> rows = sweep(config, T_values);
  for (const auto& row : rows) {
    std::cout << "T " << row.T << ": mean regret " << row.mean_regret << " +- "
              << row.stderr_regret;
    if (row.slope) std::cout << ", slope " << *row.slope;
    std::cout << "\n";
  }
  std::cout << "wrote " << (fs::path(config.out_dir) / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_validate(const std::string& run_dir, int trials, std::uint64_t seed) {
  const std::vector<CheckReport> reports = validate_run_dir(run_dir, trials, seed);
  bool all_pass = true;
  for (const auto& report : reports) {
    std::cout << (report.pass ? "PASS " : "FAIL ") << report.check << " (seed "
              << report.details.value("seed", std::uint64_t{0}) << ", worst slack "
              << report.worst_slack << ")\n";
    all_pass = all_pass && report.pass;
  }
  std::cout << "wrote " << (fs::path(run_dir) / "checks.json").string() << "\n";
  return all_pass ? 0 : 1;
}

int cmd_gen_mdp(const std::string& kind, const std::string& out) {
  fs::create_directories(out);
  if (kind == "tabular" || kind == "both") {
    write_text_file(fs::path(out) / "tabular.json", reference_tabular_mdp().to_json().dump(2));
    std::cout << "wrote " << (fs::path(out) / "tabular.json").string() << "\n";
  }
  if (kind == "mixture" || kind == "both") {
    write_text_file(fs::path(out) / "mixture.json", reference_mixture_mdp().to_json().dump(2));
    std::cout << "wrote " << (fs::path(out) / "mixture.json").string() << "\n";
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"RAVI-UCB: regularized approximate value iteration with optimism"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "execute a seeded experiment from a JSON config");
  run_cmd->add_option("config", config_path, "path to the experiment config")->required();

  std::string sweep_config;
  std::vector<long> sweep_T;
  auto* sweep_cmd = app.add_subcommand("sweep", "regret curve over a grid of horizons");
  sweep_cmd->add_option("config", sweep_config, "path to the experiment config")->required();
  sweep_cmd->add_option("--T", sweep_T, "comma-separated horizons")->required()->delimiter(',');

  std::string run_dir;
  int trials = 1000;
  std::uint64_t check_seed = 1729;
  auto* validate_cmd =
      app.add_subcommand("validate", "run the validation suite on recorded artifacts");
  validate_cmd->add_option("run_dir", run_dir, "directory written by `run`")->required();
  validate_cmd->add_option("--trials", trials, "Monte Carlo resamples for the batch check");
  validate_cmd->add_option("--seed", check_seed, "seed for the check-side randomness");

  std::string kind = "both";
  std::string out = ".";
  auto* gen_cmd = app.add_subcommand("gen-mdp", "emit the reference desk instances");
  gen_cmd->add_option("--kind", kind, "tabular | mixture | both")
      ->check(CLI::IsMember({"tabular", "mixture", "both"}));
  gen_cmd->add_option("--out", out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 2;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(config_path);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_config, sweep_T);
    if (validate_cmd->parsed()) return cmd_validate(run_dir, trials, check_seed);
    if (gen_cmd->parsed()) return cmd_gen_mdp(kind, out);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace raviucb
