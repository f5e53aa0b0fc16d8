#pragma once

#include "raviucb/mdp.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace raviucb {

/// Run parameters for the RAVI-UCB loop. `truncation_H` is the clamp level
/// of the optimistic backup and equals 1/(1-gamma) for the environment the
/// run executes in.
struct PlannerConfig {
  long horizon_T = 0;
  double learning_rate_eta = 0.0;
  double truncation_H = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  std::optional<Policy> initial_policy;  // defaults to uniform
};

/// Mutable learner state carried across epochs: the epoch index, the
/// Q-table consumed by the next softmax update, the policy it updates from,
/// and the value function it produced. Q entries stay in [0, H] and policy
/// rows stay normalized throughout a run.
struct LearnerState {
  int epoch_index = 0;
  ActionValueFunction q;  // Q_k
  Policy pi_prev;         // pi_{k-1}
  ValueFunction v;        // V_k
};

/// eta = sqrt(2 log|A| / (H^2 T)).
double default_learning_rate(int n_actions, double H, long T);

/// Fills eta (default rate), delta (1/T) and the clamp level from the MDP.
PlannerConfig default_planner_config(const TabularMdp& mdp, long T, std::uint64_t seed);

/// One mirror-descent step against log-sum-exp values: returns
///   V(x)   = (1/eta) log sum_a pi_prev(a|x) exp(eta Q(x,a))
///   pi(a|x) = pi_prev(a|x) exp(eta (Q(x,a) - V(x)))
/// computed with per-state max subtraction; the new policy rows are
/// renormalized to remove rounding drift.
std::pair<ValueFunction, Policy> softmax_update(const Policy& pi_prev,
                                                const ActionValueFunction& q, double eta);

/// Entrywise clamp of r + cb + gamma*estimated_pv to [0, H]. Bonuses must be
/// nonnegative.
ActionValueFunction optimistic_backup(const Matrix& reward, const Matrix& cb,
                                      const Matrix& estimated_pv, double gamma, double H);

/// Backend contract for the planner: a model refreshed from the data store
/// at each epoch boundary, an estimated backup of the epoch value function,
/// a bonus table, and a transition recorder. Calls per epoch k arrive in the
/// order refresh_model -> prepare_epoch(V_k) -> estimated_backup/bonus_table,
/// followed by record_transition for each step of the epoch.
class EstimatorBackend {
 public:
  virtual ~EstimatorBackend() = default;

  virtual int n_states() const = 0;
  virtual int n_actions() const = 0;

  /// Recomputes the transition model from everything recorded so far.
  virtual void refresh_model() = 0;
  /// Receives the epoch value function V_k; computes any V-dependent caches
  /// (for the linear-mixture backend, the epoch feature table).
  virtual void prepare_epoch(const ValueFunction& v_k) = 0;
  /// (P_hat_k V_k)(x,a) as an |X| x |A| table. May fall outside [0,H].
  virtual Matrix estimated_backup() const = 0;
  /// CB_k(x,a) as an |X| x |A| table, clamped at H.
  virtual Matrix bonus_table() const = 0;
  virtual void record_transition(int x, int a, int x_next) = 0;
  /// Small serializable summary of the per-epoch estimator state.
  virtual nlohmann::json epoch_snapshot() const = 0;
};

struct StepRecord {
  long t = 0;
  int epoch = 0;
  int state = 0;
  int action = 0;
  double reward = 0.0;
  bool reset = false;
};

struct EpochRecord {
  int k = 0;
  long t_start = 0;
  ValueFunction v;            // V_k
  Policy policy;              // pi_k
  ActionValueFunction q_next; // Q_{k+1}
  Matrix bonus;               // CB_k
  Matrix backup;              // (P_hat_k V_k)
  nlohmann::json estimator;
};

/// Full trace of one RAVI-UCB run. Epochs partition [1, T]; every epoch ends
/// with a reset except possibly the last. Immutable after the run completes.
struct RunLog {
  long horizon_T = 0;
  double eta = 0.0;
  double gamma = 0.0;
  double truncation_H = 0.0;
  double delta = 0.0;
  double beta = 0.0;        // bonus coefficient used by the backend
  double reg_lambda = 0.0;  // ridge parameter (linear-mixture runs only)
  std::uint64_t seed = 0;
  std::string backend;
  Policy initial_policy;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  int n_epochs() const { return static_cast<int>(epochs.size()); }
  /// Number of steps spent in epoch k (1-based).
  long epoch_length(int k) const;
};

/// Executes the main loop: per epoch, refresh the estimator from the data
/// gathered so far, run one softmax update, build the optimistic backup, then
/// act with the epoch policy until the geometric reset coin fires (or t
/// reaches T). Stream consumption order per step: action draw, transition
/// draw, reset coin, and the reset-state draw when the coin fires. The coin
/// is still drawn on the final step but has no effect.
RunLog run_ravi_ucb(const TabularMdp& env, EstimatorBackend& estimator,
                    const PlannerConfig& config, RandomStream& rng);

/// Corollary-style policy selection: the policy of an epoch index drawn
/// uniformly at random from the recorded epochs.
Policy online_to_batch_select(const RunLog& log, RandomStream& rng);

}  // namespace raviucb
