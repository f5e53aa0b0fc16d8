#include "raviucb/planner.hpp"

#include <cmath>
#include <limits>

namespace raviucb {

double default_learning_rate(int n_actions, double H, long T) {
  if (n_actions < 2) {
    throw std::invalid_argument("default_learning_rate: need at least two actions");
  }
  if (T < 1) throw std::invalid_argument("default_learning_rate: T must be at least 1");
  if (!(H > 0.0)) throw std::invalid_argument("default_learning_rate: H must be positive");
  return std::sqrt(2.0 * std::log(static_cast<double>(n_actions)) /
                   (H * H * static_cast<double>(T)));
}

PlannerConfig default_planner_config(const TabularMdp& mdp, long T, std::uint64_t seed) {
  PlannerConfig config;
  config.horizon_T = T;
  config.truncation_H = mdp.horizon();
  config.learning_rate_eta = default_learning_rate(mdp.n_actions(), config.truncation_H, T);
  config.delta = std::min(0.5, 1.0 / static_cast<double>(T));
  config.seed = seed;
  return config;
}

std::pair<ValueFunction, Policy> softmax_update(const Policy& pi_prev,
                                                const ActionValueFunction& q, double eta) {
  const int n = static_cast<int>(pi_prev.probs.rows());
  const int m = static_cast<int>(pi_prev.probs.cols());
  if (q.values.rows() != n || q.values.cols() != m) {
    throw std::invalid_argument("softmax_update: policy and Q shapes differ");
  }
  if (!(eta > 0.0)) throw std::invalid_argument("softmax_update: eta must be positive");
  validate_policy(pi_prev, n, m);

  ValueFunction v{Vector::Zero(n)};
  Policy pi{Matrix::Zero(n, m)};
  for (int x = 0; x < n; ++x) {
    // Max over the support of pi_prev keeps the weighted log-sum-exp finite.
    double shift = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < m; ++a) {
      if (pi_prev.probs(x, a) > 0.0) shift = std::max(shift, eta * q.values(x, a));
    }
    double mass = 0.0;
    for (int a = 0; a < m; ++a) {
      const double w = pi_prev.probs(x, a);
      if (w > 0.0) mass += w * std::exp(eta * q.values(x, a) - shift);
    }
    const double vx = (shift + std::log(mass)) / eta;
    v.values(x) = vx;
    double row_sum = 0.0;
    for (int a = 0; a < m; ++a) {
      const double w = pi_prev.probs(x, a);
      const double p = w > 0.0 ? w * std::exp(eta * (q.values(x, a) - vx)) : 0.0;
      pi.probs(x, a) = p;
      row_sum += p;
    }
    pi.probs.row(x) /= row_sum;
  }
  return {std::move(v), std::move(pi)};
}

ActionValueFunction optimistic_backup(const Matrix& reward, const Matrix& cb,
                                      const Matrix& estimated_pv, double gamma, double H) {
  if (cb.rows() != reward.rows() || cb.cols() != reward.cols() ||
      estimated_pv.rows() != reward.rows() || estimated_pv.cols() != reward.cols()) {
    throw std::invalid_argument("optimistic_backup: shape mismatch");
  }
  if ((cb.array() < 0.0).any()) {
    throw std::invalid_argument("optimistic_backup: bonuses must be nonnegative");
  }
  ActionValueFunction out;
  out.values = (reward + cb + gamma * estimated_pv).cwiseMax(0.0).cwiseMin(H);
  return out;
}

long RunLog::epoch_length(int k) const {
  if (k < 1 || k > n_epochs()) throw std::invalid_argument("epoch_length: index out of range");
  const long start = epochs[k - 1].t_start;
  const long end = (k == n_epochs()) ? horizon_T + 1 : epochs[k].t_start;
  return end - start;
}

RunLog run_ravi_ucb(const TabularMdp& env, EstimatorBackend& estimator,
                    const PlannerConfig& config, RandomStream& rng) {
  const int n = env.n_states();
  const int m = env.n_actions();
  if (estimator.n_states() != n || estimator.n_actions() != m) {
    throw std::invalid_argument("run_ravi_ucb: estimator dimensions do not match the MDP");
  }
  if (config.horizon_T < 1) throw std::invalid_argument("run_ravi_ucb: horizon must be positive");
  if (!(config.learning_rate_eta > 0.0)) {
    throw std::invalid_argument("run_ravi_ucb: eta must be positive");
  }
  if (!(config.delta > 0.0 && config.delta < 1.0)) {
    throw std::invalid_argument("run_ravi_ucb: delta must lie in (0,1)");
  }
  if (!(config.truncation_H > 0.0)) {
    throw std::invalid_argument("run_ravi_ucb: truncation level must be positive");
  }

  Policy pi_prev = config.initial_policy.value_or(uniform_policy(n, m));
  validate_policy(pi_prev, n, m);

  RunLog log;
  log.horizon_T = config.horizon_T;
  log.eta = config.learning_rate_eta;
  log.gamma = env.gamma();
  log.truncation_H = config.truncation_H;
  log.delta = config.delta;
  log.seed = config.seed;
  log.initial_policy = pi_prev;
  log.steps.reserve(static_cast<std::size_t>(config.horizon_T));

  LearnerState state;
  state.q = ActionValueFunction{Matrix::Zero(n, m)};  // Q_1 = E V_0 with V_0 = 0
  state.pi_prev = std::move(pi_prev);
  const double reset_prob = 1.0 - env.gamma();
  long t = 1;
  int x = rng.categorical(env.init_dist());
  while (t <= config.horizon_T) {
    const int k = ++state.epoch_index;
    const long t_k = t;
    estimator.refresh_model();
    auto [v_k, pi_k] = softmax_update(state.pi_prev, state.q, config.learning_rate_eta);
    state.v = v_k;
    estimator.prepare_epoch(v_k);
    const Matrix bonus = estimator.bonus_table();
    const Matrix backup = estimator.estimated_backup();
    ActionValueFunction q_next =
        optimistic_backup(env.reward(), bonus, backup, env.gamma(), config.truncation_H);
    log.epochs.push_back(
        EpochRecord{k, t_k, v_k, pi_k, q_next, bonus, backup, estimator.epoch_snapshot()});

    bool epoch_done = false;
    while (!epoch_done) {
      const int a = rng.categorical(pi_k.probs.row(x));
      const int x_next = sample_step(env, x, a, rng);
      estimator.record_transition(x, a, x_next);
      const bool coin = rng.uniform() < reset_prob;
      const bool at_horizon = (t == config.horizon_T);
      log.steps.push_back(StepRecord{t, k, x, a, env.reward()(x, a), coin && !at_horizon});
      ++t;
      if (at_horizon) {
        epoch_done = true;  // coin consumed for stream alignment, no reset
      } else if (coin) {
        x = rng.categorical(env.init_dist());
        epoch_done = true;
      } else {
        x = x_next;
      }
    }
    state.pi_prev = std::move(pi_k);
    state.q = std::move(q_next);
  }
  return log;
}

Policy online_to_batch_select(const RunLog& log, RandomStream& rng) {
  const int k = log.n_epochs();
  if (k == 0) throw std::invalid_argument("online_to_batch_select: run has no epochs");
  int idx = static_cast<int>(rng.uniform() * k);
  if (idx >= k) idx = k - 1;
  return log.epochs[static_cast<std::size_t>(idx)].policy;
}

}  // namespace raviucb
