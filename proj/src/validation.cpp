#include "raviucb/validation.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace raviucb {

namespace {

constexpr double kEntryTol = 1e-9;

/// Largest json detail payload per check; long runs keep only the worst rows.
constexpr std::size_t kMaxDetailRows = 2000;

void push_row(nlohmann::json& rows, nlohmann::json row) {
  if (rows.size() < kMaxDetailRows) rows.push_back(std::move(row));
}

/// Per-epoch worst excess of gamma*|<P, V_k> - backup| over CB.
std::vector<double> validity_slack_by_epoch(const RunLog& run, const TabularMdp& true_mdp,
                                            long* violations) {
  std::vector<double> slack;
  slack.reserve(run.epochs.size());
  long count = 0;
  for (const auto& epoch : run.epochs) {
    const ActionValueFunction pv = expected_next_value(true_mdp, epoch.v);
    const Matrix gap =
        (run.gamma * (pv.values - epoch.backup)).cwiseAbs() - epoch.bonus;
    slack.push_back(gap.maxCoeff());
    count += (gap.array() > kEntryTol).count();
  }
  if (violations != nullptr) *violations = count;
  return slack;
}

double kl_rows(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q) {
  double kl = 0.0;
  for (long i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    if (q(i) <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p(i) * std::log(p(i) / q(i));
  }
  return kl;
}

}  // namespace

nlohmann::json check_reports_to_json(const std::vector<CheckReport>& reports) {
  auto doc = nlohmann::json::array();
  for (const auto& report : reports) {
    doc.push_back({{"check", report.check},
                   {"pass", report.pass},
                   {"worst_slack", report.worst_slack},
                   {"tolerance", report.tolerance},
                   {"details", report.details}});
  }
  return doc;
}

Vector random_simplex(int n, RandomStream& rng) {
  Vector draws(n);
  for (int i = 0; i < n; ++i) {
    draws(i) = -std::log(1.0 - rng.uniform());
  }
  return draws / draws.sum();
}

RegretAccount compute_regret(const TabularMdp& mdp, const RunLog& run) {
  RegretAccount account;
  auto [v_star, q_star] = value_iteration(mdp, 1e-10);
  account.optimal_return = normalized_return(mdp, greedy_policy(q_star));
  account.epoch_return.reserve(run.epochs.size());
  account.epoch_bonus_mean.reserve(run.epochs.size());
  account.epoch_length.reserve(run.epochs.size());
  for (int k = 1; k <= run.n_epochs(); ++k) {
    const auto& epoch = run.epochs[static_cast<std::size_t>(k - 1)];
    const OccupancyMeasure mu = occupancy_measure(mdp, epoch.policy);
    account.epoch_return.push_back((mu.mass.array() * mdp.reward().array()).sum());
    account.epoch_bonus_mean.push_back((mu.mass.array() * epoch.bonus.array()).sum());
    account.epoch_length.push_back(run.epoch_length(k));
  }
  double total = 0.0;
  for (std::size_t k = 0; k < account.epoch_return.size(); ++k) {
    total += static_cast<double>(account.epoch_length[k]) *
             (account.optimal_return - account.epoch_return[k]);
  }
  account.cumulative_regret = total;
  return account;
}

double fit_loglog_slope(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 2) {
    throw std::invalid_argument("fit_loglog_slope: need at least two points");
  }
  const auto n = static_cast<double>(t.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t[i] > 0.0) || !(y[i] > 0.0)) {
      throw std::invalid_argument("fit_loglog_slope: inputs must be positive");
    }
    const double lx = std::log(t[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

CheckReport check_validity(const RunLog& run, const TabularMdp& true_mdp) {
  if (run.epochs.empty()) throw std::invalid_argument("check_validity: empty run");
  long violations = 0;
  const std::vector<double> slack = validity_slack_by_epoch(run, true_mdp, &violations);
  CheckReport report;
  report.check = "validity";
  report.tolerance = kEntryTol;
  report.worst_slack = *std::max_element(slack.begin(), slack.end());
  report.pass = report.worst_slack <= report.tolerance;
  auto rows = nlohmann::json::array();
  for (std::size_t k = 0; k < slack.size(); ++k) {
    if (slack[k] > kEntryTol) push_row(rows, {{"k", k + 1}, {"slack", slack[k]}});
  }
  report.details = {{"violations", violations}, {"violating_epochs", std::move(rows)}};
  return report;
}

CheckReport check_sandwich(const RunLog& run, const TabularMdp& true_mdp) {
  if (run.epochs.empty()) throw std::invalid_argument("check_sandwich: empty run");
  const std::vector<double> validity = validity_slack_by_epoch(run, true_mdp, nullptr);
  CheckReport report;
  report.check = "sandwich";
  report.tolerance = kEntryTol;
  double worst = -std::numeric_limits<double>::infinity();
  long checked = 0;
  auto rows = nlohmann::json::array();
  for (std::size_t k = 0; k < run.epochs.size(); ++k) {
    if (validity[k] > kEntryTol) continue;  // the bound is only claimed under validity
    ++checked;
    const auto& epoch = run.epochs[k];
    const ActionValueFunction pv = expected_next_value(true_mdp, epoch.v);
    const Matrix exact = true_mdp.reward() + run.gamma * pv.values;
    const double lower = (exact - epoch.q_next.values).maxCoeff();
    const double upper = (epoch.q_next.values - exact - 2.0 * epoch.bonus).maxCoeff();
    const double slack = std::max(lower, upper);
    worst = std::max(worst, slack);
    if (slack > kEntryTol) {
      push_row(rows, {{"k", k + 1}, {"lower", lower}, {"upper", upper}});
    }
  }
  report.worst_slack = checked > 0 ? worst : 0.0;
  report.pass = report.worst_slack <= report.tolerance;
  report.details = {{"epochs_checked", checked}, {"violating_epochs", std::move(rows)}};
  return report;
}

CheckReport check_md_identity(const RunLog& run, int n_candidates, RandomStream& rng) {
  if (run.epochs.empty()) throw std::invalid_argument("check_md_identity: empty run");
  if (n_candidates < 1) throw std::invalid_argument("check_md_identity: need candidates");
  const int n = static_cast<int>(run.initial_policy.probs.rows());
  const int m = static_cast<int>(run.initial_policy.probs.cols());
  const double eta = run.eta;

  Matrix sum_q = Matrix::Zero(n, m);
  Vector sum_v = Vector::Zero(n);
  Matrix log_pi0 = run.initial_policy.probs.array().log();
  Policy pi_prev = run.initial_policy;
  Matrix q_k = Matrix::Zero(n, m);  // Q_1 = E V_0

  double worst_attain = -std::numeric_limits<double>::infinity();
  double worst_equality = 0.0;
  double worst_telescope = 0.0;
  for (const auto& epoch : run.epochs) {
    for (int c = 0; c < n_candidates; ++c) {
      const Vector p = random_simplex(m, rng);
      for (int x = 0; x < n; ++x) {
        const double kl = kl_rows(p, pi_prev.probs.row(x).transpose());
        if (!std::isfinite(kl)) continue;
        const double value = p.dot(q_k.row(x)) - kl / eta;
        worst_attain = std::max(worst_attain, value - epoch.v.values(x));
      }
    }
    for (int x = 0; x < n; ++x) {
      const Vector pi_x = epoch.policy.probs.row(x).transpose();
      const double kl = kl_rows(pi_x, pi_prev.probs.row(x).transpose());
      const double value = pi_x.dot(q_k.row(x)) - kl / eta;
      worst_equality = std::max(worst_equality, std::abs(value - epoch.v.values(x)));
    }
    sum_q += q_k;
    sum_v += epoch.v.values;
    for (int x = 0; x < n; ++x) {
      double shift = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < m; ++a) shift = std::max(shift, log_pi0(x, a) + eta * sum_q(x, a));
      double mass = 0.0;
      for (int a = 0; a < m; ++a) mass += std::exp(log_pi0(x, a) + eta * sum_q(x, a) - shift);
      const double lse = (shift + std::log(mass)) / eta;
      worst_telescope = std::max(worst_telescope, std::abs(sum_v(x) - lse));
    }
    pi_prev = epoch.policy;
    q_k = epoch.q_next.values;
  }

  CheckReport report;
  report.check = "md_identity";
  report.tolerance = 0.0;
  const double attain_excess = worst_attain - kEntryTol;
  const double equality_excess = worst_equality - kEntryTol;
  const double telescope_excess = worst_telescope - 1e-6;
  report.worst_slack = std::max({attain_excess, equality_excess, telescope_excess});
  report.pass = report.worst_slack <= 0.0;
  report.details = {{"worst_attainment", worst_attain},
                    {"worst_equality", worst_equality},
                    {"worst_telescope", worst_telescope},
                    {"candidates", n_candidates}};
  return report;
}

CheckReport check_kl_chain(const TabularMdp& mdp, const Policy& pi, const Policy& pi_ref) {
  const double lhs = occupancy_kl(occupancy_measure(mdp, pi), occupancy_measure(mdp, pi_ref));
  const double rhs = mdp.horizon() * conditional_relative_entropy(mdp, pi, pi_ref);
  CheckReport report;
  report.check = "kl_chain";
  report.tolerance = kEntryTol;
  report.worst_slack = lhs - rhs;
  report.pass = report.worst_slack <= report.tolerance;
  report.details = {{"occupancy_kl", lhs}, {"horizon_times_centropy", rhs}};
  return report;
}

namespace {

/// Shared scan for the design-matrix checks: per epoch, the squared
/// Lambda_k^{-1} norms of the features realized inside the epoch.
struct FeatureTrace {
  std::vector<std::vector<double>> norm_sq_by_epoch;
  double cap = 0.0;  // d log(1 + B^2 H^2 T / (lambda d))
};

FeatureTrace scan_feature_trace(const RunLog& run, const LinearMixtureMdp& mdp) {
  if (run.reg_lambda <= 0.0) {
    throw std::invalid_argument("feature trace: run does not carry a ridge parameter");
  }
  const int d = mdp.dim();
  const int m = mdp.base().n_actions();
  FeatureTrace trace;
  trace.norm_sq_by_epoch.resize(run.epochs.size());
  std::vector<Eigen::LLT<Matrix>> llt(run.epochs.size());
  std::vector<FeatureTable> phi(run.epochs.size());
  for (std::size_t k = 0; k < run.epochs.size(); ++k) {
    const auto& snapshot = run.epochs[k].estimator;
    Matrix lambda(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) lambda(i, j) = snapshot.at("Lambda").at(i).at(j).get<double>();
    }
    llt[k].compute(lambda);
    if (llt[k].info() != Eigen::Success) {
      throw std::runtime_error("feature trace: recorded design matrix is not positive definite");
    }
    phi[k] = phi_of_value(mdp, run.epochs[k].v, run.truncation_H);
  }
  for (const auto& step : run.steps) {
    const std::size_t k = static_cast<std::size_t>(step.epoch - 1);
    const Vector feat =
        phi[k].phi.row(static_cast<long>(step.state) * m + step.action).transpose();
    const Vector half = llt[k].matrixL().solve(feat);
    trace.norm_sq_by_epoch[k].push_back(half.squaredNorm());
  }
  const double B = mdp.bound_B();
  const double H = run.truncation_H;
  trace.cap = d * std::log(1.0 + B * B * H * H * static_cast<double>(run.horizon_T) /
                                     (run.reg_lambda * d));
  return trace;
}

}  // namespace

CheckReport check_elliptical(const RunLog& run, const LinearMixtureMdp& mdp) {
  const FeatureTrace trace = scan_feature_trace(run, mdp);
  double lhs = 0.0;
  for (const auto& epoch_norms : trace.norm_sq_by_epoch) {
    if (epoch_norms.empty()) continue;
    const double len = static_cast<double>(epoch_norms.size());
    double epoch_sum = 0.0;
    for (const double w : epoch_norms) epoch_sum += std::log(1.0 + len * w);
    lhs += epoch_sum / len;
  }
  CheckReport report;
  report.check = "elliptical_potential";
  report.tolerance = 1e-6;
  report.worst_slack = lhs - trace.cap;
  report.pass = report.worst_slack <= report.tolerance;
  report.details = {{"lhs", lhs}, {"cap", trace.cap}, {"epochs", trace.norm_sq_by_epoch.size()}};
  return report;
}

CheckReport check_bad_epochs(const RunLog& run, const LinearMixtureMdp& mdp) {
  const FeatureTrace trace = scan_feature_trace(run, mdp);
  long bad = 0;
  for (const auto& epoch_norms : trace.norm_sq_by_epoch) {
    for (const double w : epoch_norms) {
      if (w >= 1.0) {
        ++bad;
        break;
      }
    }
  }
  const double cap = trace.cap / std::log(2.0);
  CheckReport report;
  report.check = "bad_epochs";
  report.tolerance = 0.0;
  report.worst_slack = static_cast<double>(bad) - cap;
  report.pass = report.worst_slack <= report.tolerance;
  report.details = {{"bad_epochs", bad}, {"cap", cap}};
  return report;
}

CheckReport check_self_normalized(int d, double sigma, long T, double delta, int trials,
                                  RandomStream& rng) {
  if (d < 1 || T < 1 || trials < 1 || sigma < 0.0) {
    throw std::invalid_argument("check_self_normalized: invalid harness sizes");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("check_self_normalized: delta must lie in (0,1)");
  }
  const double reg = 1.0;
  int covered = 0;
  for (int trial = 0; trial < trials; ++trial) {
    Matrix lambda = Matrix::Identity(d, d) * reg;
    Vector s = Vector::Zero(d);
    bool ok = true;
    for (long t = 0; t < T; ++t) {
      Vector phi(d);
      for (int i = 0; i < d; ++i) phi(i) = 2.0 * rng.uniform() - 1.0;
      // Noise bounded in [-sigma, sigma] with zero mean is sigma-subGaussian.
      const double noise = sigma * (2.0 * rng.uniform() - 1.0);
      lambda += phi * phi.transpose();
      s += phi * noise;
      if (!ok) continue;
      Eigen::LLT<Matrix> llt(lambda);
      const double lhs = llt.matrixL().solve(s).squaredNorm();
      const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      const double bound =
          2.0 * sigma * sigma * (0.5 * log_det - 0.5 * d * std::log(reg) + std::log(1.0 / delta));
      if (lhs > bound) ok = false;
    }
    if (ok) ++covered;
  }
  const double coverage = static_cast<double>(covered) / trials;
  const double threshold = 1.0 - delta - 3.0 * std::sqrt(delta * (1.0 - delta) / trials);
  CheckReport report;
  report.check = "self_normalized";
  report.tolerance = 0.0;
  report.worst_slack = threshold - coverage;
  report.pass = report.worst_slack <= report.tolerance;
  report.details = {{"coverage", coverage}, {"threshold", threshold}, {"trials", trials}};
  return report;
}

CheckReport check_online_to_batch(const TabularMdp& mdp, const RunLog& run, int trials,
                                  RandomStream& rng) {
  if (run.epochs.empty()) throw std::invalid_argument("check_online_to_batch: empty run");
  if (trials < 1) throw std::invalid_argument("check_online_to_batch: need trials");
  const RegretAccount account = compute_regret(mdp, run);
  const double realized_mean_gap = account.cumulative_regret / static_cast<double>(run.horizon_T);

  // Resample epochs proportionally to their recorded step counts so that the
  // expected gap is exactly cumulative regret over T.
  std::vector<long> boundary(account.epoch_length.size());
  long acc = 0;
  for (std::size_t k = 0; k < account.epoch_length.size(); ++k) {
    acc += account.epoch_length[k];
    boundary[k] = acc;
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const long step = static_cast<long>(rng.uniform() * static_cast<double>(run.horizon_T));
    const std::size_t k = static_cast<std::size_t>(
        std::lower_bound(boundary.begin(), boundary.end(), step + 1) - boundary.begin());
    const double gap = account.optimal_return - account.epoch_return[k];
    sum += gap;
    sum_sq += gap * gap;
  }
  const double mean = sum / trials;
  const double var = std::max(0.0, sum_sq / trials - mean * mean);
  const double stderr_mean = std::sqrt(var / trials);
  const double diff = std::abs(mean - realized_mean_gap);
  const double budget = stderr_mean > 0.0 ? 3.0 * stderr_mean : 1e-12;
  const double batch_slack = diff - budget;

  // Completed epochs start from nu0 with a geometric length, so the realized
  // bonus sum matches H * <mu^{pi_k}, CB_k> in expectation.
  std::vector<double> realized(run.epochs.size(), 0.0);
  for (const auto& step : run.steps) {
    const auto& epoch = run.epochs[static_cast<std::size_t>(step.epoch - 1)];
    realized[static_cast<std::size_t>(step.epoch - 1)] += epoch.bonus(step.state, step.action);
  }
  // The final epoch is cut off by the horizon rather than by a reset.
  const std::size_t completed = run.epochs.size() - 1;
  double mixing_slack = 0.0;
  double mixing_mean = 0.0;
  double mixing_budget = 0.0;
  const double H = 1.0 / (1.0 - run.gamma);
  if (completed >= 200) {
    double dsum = 0.0;
    double dsq = 0.0;
    for (std::size_t k = 0; k < completed; ++k) {
      const double d_k = realized[k] - H * account.epoch_bonus_mean[k];
      dsum += d_k;
      dsq += d_k * d_k;
    }
    mixing_mean = dsum / static_cast<double>(completed);
    const double dvar =
        std::max(0.0, dsq / static_cast<double>(completed) - mixing_mean * mixing_mean);
    mixing_budget = 3.0 * std::sqrt(dvar / static_cast<double>(completed));
    mixing_slack = std::abs(mixing_mean) - std::max(mixing_budget, 1e-12);
  }

  CheckReport report;
  report.check = "online_to_batch";
  report.tolerance = 0.0;
  report.worst_slack = std::max(batch_slack, mixing_slack);
  report.pass = report.worst_slack <= report.tolerance;
  report.details = {{"resampled_mean_gap", mean},
                    {"realized_mean_gap", realized_mean_gap},
                    {"stderr", stderr_mean},
                    {"trials", trials},
                    {"mixing_mean_diff", mixing_mean},
                    {"mixing_budget", mixing_budget},
                    {"completed_epochs", completed}};
  return report;
}

CheckReport check_regret_slope(const std::function<double(long, std::uint64_t)>& regret_of,
                               const std::vector<long>& T_values, int n_seeds, double max_slope) {
  if (T_values.size() < 2) throw std::invalid_argument("check_regret_slope: need >= 2 horizons");
  if (n_seeds < 1) throw std::invalid_argument("check_regret_slope: need >= 1 seed");
  std::vector<double> t;
  std::vector<double> mean_regret;
  auto rows = nlohmann::json::array();
  for (const long T : T_values) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int seed = 1; seed <= n_seeds; ++seed) {
      const double regret = regret_of(T, static_cast<std::uint64_t>(seed));
      sum += regret;
      sum_sq += regret * regret;
    }
    const double mean = sum / n_seeds;
    const double var = std::max(0.0, sum_sq / n_seeds - mean * mean);
    t.push_back(static_cast<double>(T));
    mean_regret.push_back(mean);
    rows.push_back({{"T", T}, {"mean_regret", mean}, {"stderr", std::sqrt(var / n_seeds)}});
  }
  CheckReport report;
  report.check = "regret_slope";
  report.tolerance = 0.0;
  double worst_mean = 0.0;
  for (const double mean : mean_regret) worst_mean = std::max(worst_mean, mean);
  if (worst_mean <= 1e-6) {
    // Regret indistinguishable from zero at every horizon; nothing to fit.
    report.worst_slack = 0.0;
    report.pass = true;
    report.details = {{"slope", nullptr}, {"max_slope", max_slope}, {"points", std::move(rows)}};
    return report;
  }
  const double slope = fit_loglog_slope(t, mean_regret);
  report.worst_slack = slope - max_slope;
  report.pass = report.worst_slack <= report.tolerance;
  report.details = {{"slope", slope}, {"max_slope", max_slope}, {"points", std::move(rows)}};
  return report;
}

}  // namespace raviucb
