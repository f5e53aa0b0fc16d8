#pragma once

#include "raviucb/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <utility>

namespace raviucb {

struct ValueFunction {
  Vector values;  // length |X|
};

struct ActionValueFunction {
  Matrix values;  // |X| x |A|
};

/// Per-state action distribution. Row x is the distribution pi(.|x).
struct Policy {
  Matrix probs;  // |X| x |A|
};

/// Normalized discounted state-action visitation distribution.
struct OccupancyMeasure {
  Matrix mass;  // |X| x |A|
};

/// Finite discounted MDP with explicit reward table and transition tensor.
/// The transition tensor is stored as a row-stochastic matrix of shape
/// (|X|*|A|) x |X| where row x*|A|+a holds P(.|x,a). Construction validates
/// row sums to 1e-12, rewards in [0,1], and gamma in (0,1).
class TabularMdp {
 public:
  TabularMdp(Matrix reward, RowMatrix transition, double gamma, Vector init_dist);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  /// Effective horizon H = 1/(1-gamma).
  double horizon() const { return 1.0 / (1.0 - gamma_); }
  const Matrix& reward() const { return reward_; }
  const RowMatrix& transition() const { return transition_; }
  const Vector& init_dist() const { return init_dist_; }

  int row_index(int x, int a) const { return x * n_actions_ + a; }
  auto transition_row(int x, int a) const { return transition_.row(row_index(x, a)); }

  nlohmann::json to_json() const;
  static TabularMdp from_json(const nlohmann::json& doc);

 private:
  int n_states_;
  int n_actions_;
  Matrix reward_;
  RowMatrix transition_;
  double gamma_;
  Vector init_dist_;
};

/// Throws std::invalid_argument unless every row of probs is a probability
/// distribution over n_actions entries (nonnegative, sums to 1 within 1e-12).
void validate_policy(const Policy& pi, int n_states, int n_actions);

Policy uniform_policy(int n_states, int n_actions);

/// Deterministic argmax policy of an action-value table (ties go to the
/// lowest action index).
Policy greedy_policy(const ActionValueFunction& q);

/// (Pv)(x,a) = sum_x' P(x'|x,a) v(x').
ActionValueFunction expected_next_value(const TabularMdp& mdp, const ValueFunction& v);

/// r + gamma * (Pv).
ActionValueFunction bellman_backup(const TabularMdp& mdp, const ValueFunction& v);

/// Exact optimal value/action-value pair. Iterates the max-backup until the
/// contraction certificate guarantees a sup-norm Bellman residual of at most
/// tol*(1-gamma), which puts the returned V within tol of V*.
std::pair<ValueFunction, ActionValueFunction> value_iteration(const TabularMdp& mdp, double tol);

/// Exact V^pi by a direct dense solve of (I - gamma*P_pi) V = r_pi.
ValueFunction policy_evaluation(const TabularMdp& mdp, const Policy& pi);

/// State occupancy nu^pi solving nu = (1-gamma)*nu0 + gamma*P_pi^T nu.
Vector state_occupancy(const TabularMdp& mdp, const Policy& pi);

/// mu^pi(x,a) = nu^pi(x) * pi(a|x), certified against the flow constraints.
OccupancyMeasure occupancy_measure(const TabularMdp& mdp, const Policy& pi);

/// <mu^pi, r>, the normalized discounted return in [0,1].
double normalized_return(const TabularMdp& mdp, const Policy& pi);

/// Sup-norm residual of the Bellman flow constraints
/// || E^T mu - gamma P^T mu - (1-gamma) nu0 ||_inf.
double flow_residual(const TabularMdp& mdp, const OccupancyMeasure& mu);

/// Conditional relative entropy H(pi || pi_ref) = <nu^pi, KL(pi||pi_ref)>.
/// Requires per-state absolute continuity of pi w.r.t. pi_ref.
double conditional_relative_entropy(const TabularMdp& mdp, const Policy& pi, const Policy& pi_ref);

/// KL(mu || mu_ref) by direct summation with the 0*log(0) := 0 convention.
double occupancy_kl(const OccupancyMeasure& mu, const OccupancyMeasure& mu_ref);

/// Draws the next state from P(.|x,a) by inverse CDF, consuming exactly one
/// uniform variate from the stream.
int sample_step(const TabularMdp& mdp, int x, int a, RandomStream& rng);

}  // namespace raviucb
