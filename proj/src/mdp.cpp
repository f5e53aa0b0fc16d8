#include "raviucb/mdp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <sstream>

namespace raviucb {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kMeasureTol = 1e-10;

void check_distribution(const char* what, const Eigen::Ref<const Vector>& row, double tol) {
  if ((row.array() < 0.0).any()) {
    throw std::invalid_argument(std::string(what) + ": negative probability entry");
  }
  const double sum = row.sum();
  if (std::abs(sum - 1.0) > tol) {
    std::ostringstream msg;
    msg << what << ": probabilities sum to " << sum << ", expected 1";
    throw std::invalid_argument(msg.str());
  }
}

Matrix policy_transition(const TabularMdp& mdp, const Policy& pi) {
  const int n = mdp.n_states();
  const int m = mdp.n_actions();
  Matrix p_pi = Matrix::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    for (int a = 0; a < m; ++a) {
      const double w = pi.probs(x, a);
      if (w > 0.0) p_pi.row(x) += w * mdp.transition_row(x, a);
    }
  }
  return p_pi;
}

}  // namespace

TabularMdp::TabularMdp(Matrix reward, RowMatrix transition, double gamma, Vector init_dist)
    : n_states_(static_cast<int>(reward.rows())),
      n_actions_(static_cast<int>(reward.cols())),
      reward_(std::move(reward)),
      transition_(std::move(transition)),
      gamma_(gamma),
      init_dist_(std::move(init_dist)) {
  if (n_states_ <= 0 || n_actions_ <= 0) {
    throw std::invalid_argument("TabularMdp: empty state or action space");
  }
  if (transition_.rows() != static_cast<long>(n_states_) * n_actions_ ||
      transition_.cols() != n_states_) {
    throw std::invalid_argument("TabularMdp: transition shape must be (|X|*|A|) x |X|");
  }
  if (init_dist_.size() != n_states_) {
    throw std::invalid_argument("TabularMdp: init_dist length must be |X|");
  }
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) {
    throw std::invalid_argument("TabularMdp: gamma must lie in (0,1)");
  }
  if ((reward_.array() < 0.0).any() || (reward_.array() > 1.0).any()) {
    throw std::invalid_argument("TabularMdp: rewards must lie in [0,1]");
  }
  for (int i = 0; i < transition_.rows(); ++i) {
    check_distribution("TabularMdp transition row", transition_.row(i).transpose(), kRowSumTol);
  }
  check_distribution("TabularMdp init_dist", init_dist_, kRowSumTol);
}

nlohmann::json TabularMdp::to_json() const {
  nlohmann::json doc;
  doc["n_states"] = n_states_;
  doc["n_actions"] = n_actions_;
  doc["gamma"] = gamma_;
  doc["nu0"] = std::vector<double>(init_dist_.data(), init_dist_.data() + n_states_);
  auto reward_rows = nlohmann::json::array();
  for (int x = 0; x < n_states_; ++x) {
    auto row = nlohmann::json::array();
    for (int a = 0; a < n_actions_; ++a) row.push_back(reward_(x, a));
    reward_rows.push_back(std::move(row));
  }
  doc["reward"] = std::move(reward_rows);
  auto trans = nlohmann::json::array();
  for (int x = 0; x < n_states_; ++x) {
    auto per_action = nlohmann::json::array();
    for (int a = 0; a < n_actions_; ++a) {
      auto row = nlohmann::json::array();
      for (int y = 0; y < n_states_; ++y) row.push_back(transition_(row_index(x, a), y));
      per_action.push_back(std::move(row));
    }
    trans.push_back(std::move(per_action));
  }
  doc["transition"] = std::move(trans);
  return doc;
}

TabularMdp TabularMdp::from_json(const nlohmann::json& doc) {
  const int n = doc.at("n_states").get<int>();
  const int m = doc.at("n_actions").get<int>();
  if (n <= 0 || m <= 0) throw std::invalid_argument("mdp json: nonpositive dimensions");
  Matrix reward(n, m);
  const auto& rj = doc.at("reward");
  if (static_cast<int>(rj.size()) != n) throw std::invalid_argument("mdp json: reward row count");
  for (int x = 0; x < n; ++x) {
    if (static_cast<int>(rj[x].size()) != m) throw std::invalid_argument("mdp json: reward row length");
    for (int a = 0; a < m; ++a) reward(x, a) = rj[x][a].get<double>();
  }
  RowMatrix transition(static_cast<long>(n) * m, n);
  const auto& tj = doc.at("transition");
  if (static_cast<int>(tj.size()) != n) throw std::invalid_argument("mdp json: transition shape");
  for (int x = 0; x < n; ++x) {
    if (static_cast<int>(tj[x].size()) != m) throw std::invalid_argument("mdp json: transition shape");
    for (int a = 0; a < m; ++a) {
      if (static_cast<int>(tj[x][a].size()) != n) throw std::invalid_argument("mdp json: transition shape");
      for (int y = 0; y < n; ++y) transition(static_cast<long>(x) * m + a, y) = tj[x][a][y].get<double>();
    }
  }
  Vector nu0(n);
  const auto& nj = doc.at("nu0");
  if (static_cast<int>(nj.size()) != n) throw std::invalid_argument("mdp json: nu0 length");
  for (int x = 0; x < n; ++x) nu0(x) = nj[x].get<double>();
  return TabularMdp(std::move(reward), std::move(transition), doc.at("gamma").get<double>(), std::move(nu0));
}

void validate_policy(const Policy& pi, int n_states, int n_actions) {
  if (pi.probs.rows() != n_states || pi.probs.cols() != n_actions) {
    throw std::invalid_argument("policy shape does not match the MDP");
  }
  for (int x = 0; x < n_states; ++x) {
    check_distribution("policy row", pi.probs.row(x).transpose(), kRowSumTol);
  }
}

Policy uniform_policy(int n_states, int n_actions) {
  return Policy{Matrix::Constant(n_states, n_actions, 1.0 / n_actions)};
}

Policy greedy_policy(const ActionValueFunction& q) {
  Matrix probs = Matrix::Zero(q.values.rows(), q.values.cols());
  for (int x = 0; x < q.values.rows(); ++x) {
    int best = 0;
    q.values.row(x).maxCoeff(&best);
    probs(x, best) = 1.0;
  }
  return Policy{std::move(probs)};
}

ActionValueFunction expected_next_value(const TabularMdp& mdp, const ValueFunction& v) {
  if (v.values.size() != mdp.n_states()) {
    throw std::invalid_argument("expected_next_value: value length must be |X|");
  }
  const Vector flat = mdp.transition() * v.values;
  ActionValueFunction out;
  out.values = Eigen::Map<const RowMatrix>(flat.data(), mdp.n_states(), mdp.n_actions());
  return out;
}

ActionValueFunction bellman_backup(const TabularMdp& mdp, const ValueFunction& v) {
  ActionValueFunction out = expected_next_value(mdp, v);
  out.values = mdp.reward() + mdp.gamma() * out.values;
  return out;
}

std::pair<ValueFunction, ActionValueFunction> value_iteration(const TabularMdp& mdp, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
  const double target = tol * (1.0 - mdp.gamma());
  ValueFunction v{Vector::Zero(mdp.n_states())};
  constexpr long kMaxIters = 100'000'000;
  for (long iter = 0; iter < kMaxIters; ++iter) {
    const ActionValueFunction q = bellman_backup(mdp, v);
    Vector next = q.values.rowwise().maxCoeff();
    const double diff = (next - v.values).cwiseAbs().maxCoeff();
    v.values = std::move(next);
    if (diff <= target) {
      ActionValueFunction q_out = bellman_backup(mdp, v);
      ValueFunction v_out{q_out.values.rowwise().maxCoeff()};
      return {std::move(v_out), std::move(q_out)};
    }
  }
  throw std::runtime_error("value_iteration failed to converge");
}

ValueFunction policy_evaluation(const TabularMdp& mdp, const Policy& pi) {
  validate_policy(pi, mdp.n_states(), mdp.n_actions());
  const int n = mdp.n_states();
  const Matrix p_pi = policy_transition(mdp, pi);
  const Vector r_pi = (pi.probs.array() * mdp.reward().array()).rowwise().sum();
  const Matrix system = Matrix::Identity(n, n) - mdp.gamma() * p_pi;
  Vector v = system.partialPivLu().solve(r_pi);
  const double residual = (system * v - r_pi).cwiseAbs().maxCoeff();
  if (!(residual <= kMeasureTol)) {
    throw std::runtime_error("policy_evaluation: linear system did not solve to tolerance");
  }
  return ValueFunction{std::move(v)};
}

Vector state_occupancy(const TabularMdp& mdp, const Policy& pi) {
  validate_policy(pi, mdp.n_states(), mdp.n_actions());
  const int n = mdp.n_states();
  const Matrix p_pi = policy_transition(mdp, pi);
  const Matrix system = Matrix::Identity(n, n) - mdp.gamma() * p_pi.transpose();
  const Vector rhs = (1.0 - mdp.gamma()) * mdp.init_dist();
  Vector nu = system.partialPivLu().solve(rhs);
  const double residual = (system * nu - rhs).cwiseAbs().maxCoeff();
  if (!(residual <= kMeasureTol)) {
    throw std::runtime_error("state_occupancy: linear system did not solve to tolerance");
  }
  return nu;
}

OccupancyMeasure occupancy_measure(const TabularMdp& mdp, const Policy& pi) {
  const Vector nu = state_occupancy(mdp, pi);
  OccupancyMeasure mu{pi.probs.array().colwise() * nu.array()};
  const double residual = flow_residual(mdp, mu);
  if (!(residual <= kMeasureTol)) {
    throw std::runtime_error("occupancy_measure: flow residual above tolerance");
  }
  return mu;
}

double normalized_return(const TabularMdp& mdp, const Policy& pi) {
  const OccupancyMeasure mu = occupancy_measure(mdp, pi);
  return (mu.mass.array() * mdp.reward().array()).sum();
}

double flow_residual(const TabularMdp& mdp, const OccupancyMeasure& mu) {
  if (mu.mass.rows() != mdp.n_states() || mu.mass.cols() != mdp.n_actions()) {
    throw std::invalid_argument("flow_residual: measure shape does not match the MDP");
  }
  const Vector state_marginal = mu.mass.rowwise().sum();
  Vector pushforward = Vector::Zero(mdp.n_states());
  for (int x = 0; x < mdp.n_states(); ++x) {
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const double w = mu.mass(x, a);
      if (w != 0.0) pushforward += w * mdp.transition_row(x, a).transpose();
    }
  }
  const Vector residual =
      state_marginal - mdp.gamma() * pushforward - (1.0 - mdp.gamma()) * mdp.init_dist();
  return residual.cwiseAbs().maxCoeff();
}

double conditional_relative_entropy(const TabularMdp& mdp, const Policy& pi, const Policy& pi_ref) {
  validate_policy(pi, mdp.n_states(), mdp.n_actions());
  validate_policy(pi_ref, mdp.n_states(), mdp.n_actions());
  const Vector nu = state_occupancy(mdp, pi);
  double total = 0.0;
  for (int x = 0; x < mdp.n_states(); ++x) {
    double kl = 0.0;
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const double p = pi.probs(x, a);
      if (p <= 0.0) continue;
      const double q = pi_ref.probs(x, a);
      if (q <= 0.0) {
        throw std::domain_error("conditional_relative_entropy: absolute continuity violated");
      }
      kl += p * std::log(p / q);
    }
    total += nu(x) * kl;
  }
  return total;
}

double occupancy_kl(const OccupancyMeasure& mu, const OccupancyMeasure& mu_ref) {
  if (mu.mass.rows() != mu_ref.mass.rows() || mu.mass.cols() != mu_ref.mass.cols()) {
    throw std::invalid_argument("occupancy_kl: shape mismatch");
  }
  double total = 0.0;
  for (int x = 0; x < mu.mass.rows(); ++x) {
    for (int a = 0; a < mu.mass.cols(); ++a) {
      const double p = mu.mass(x, a);
      if (p <= 0.0) continue;
      const double q = mu_ref.mass(x, a);
      if (q <= 0.0) throw std::domain_error("occupancy_kl: absolute continuity violated");
      total += p * std::log(p / q);
    }
  }
  return total;
}

int sample_step(const TabularMdp& mdp, int x, int a, RandomStream& rng) {
  if (x < 0 || x >= mdp.n_states() || a < 0 || a >= mdp.n_actions()) {
    throw std::invalid_argument("sample_step: state or action index out of range");
  }
  return rng.categorical(mdp.transition_row(x, a));
}

}  // namespace raviucb
