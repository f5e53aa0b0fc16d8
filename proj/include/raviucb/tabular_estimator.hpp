#pragma once

#include "raviucb/planner.hpp"

namespace raviucb {

/// Visit counts driving the count-based estimator. Pair counts start at 1
/// so that the maximum-likelihood rows are always well defined, which keeps
/// the invariant n(x,a) = 1 + sum_x' n3(x,a,x').
struct CountTables {
  using LongMatrix = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>;

  CountTables(int n_states, int n_actions)
      : n_states_(n_states),
        n_actions_(n_actions),
        pair_count(LongMatrix::Constant(n_states, n_actions, 1)),
        next_count(LongMatrix::Zero(static_cast<long>(n_states) * n_actions, n_states)) {}

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  int n_states_;
  int n_actions_;
  LongMatrix pair_count;  // n, |X| x |A|
  LongMatrix next_count;  // n3, (|X|*|A|) x |X|

  nlohmann::json to_json() const;
};

void record_transition_tab(CountTables& counts, int x, int a, int x_next);

/// Maximum-likelihood rows n3(x,a,.)/n(x,a). Rows are sub-stochastic: an
/// n-times-visited pair sums to (n-1)/n and an unvisited pair is all zero.
RowMatrix mle_estimate(const CountTables& counts);

/// Entrywise beta / sqrt(n(x,a)), clamped above at H.
Matrix tabular_bonus(const CountTables& counts, double beta, double H);

/// beta = 8 H sqrt(|X| log(|X| |A| T / delta)).
double tabular_beta(int n_states, int n_actions, long T, double delta, double H);

/// Count-based backend for the planner loop.
class TabularBackend final : public EstimatorBackend {
 public:
  TabularBackend(int n_states, int n_actions, double beta, double H)
      : counts_(n_states, n_actions),
        beta_(beta),
        H_(H),
        p_hat_(RowMatrix::Zero(static_cast<long>(n_states) * n_actions, n_states)),
        bonus_(Matrix::Zero(n_states, n_actions)),
        backup_(Matrix::Zero(n_states, n_actions)) {
    if (!(beta >= 0.0)) throw std::invalid_argument("TabularBackend: beta must be nonnegative");
    if (!(H > 0.0)) throw std::invalid_argument("TabularBackend: H must be positive");
  }

  int n_states() const override { return counts_.n_states(); }
  int n_actions() const override { return counts_.n_actions(); }
  double beta() const { return beta_; }
  const CountTables& counts() const { return counts_; }

  void refresh_model() override {
    p_hat_ = mle_estimate(counts_);
    bonus_ = tabular_bonus(counts_, beta_, H_);
  }

  void prepare_epoch(const ValueFunction& v_k) override {
    const Vector flat = p_hat_ * v_k.values;
    backup_ = Eigen::Map<const RowMatrix>(flat.data(), n_states(), n_actions());
  }

  Matrix estimated_backup() const override { return backup_; }
  Matrix bonus_table() const override { return bonus_; }

  void record_transition(int x, int a, int x_next) override {
    record_transition_tab(counts_, x, a, x_next);
  }

  nlohmann::json epoch_snapshot() const override;

 private:
  CountTables counts_;
  double beta_;
  double H_;
  RowMatrix p_hat_;
  Matrix bonus_;
  Matrix backup_;
};

}  // namespace raviucb
