#pragma once

#include "raviucb/harness.hpp"
#include "raviucb/planner.hpp"
#include "raviucb/validation.hpp"

#include <cmath>

namespace raviucb::testing {

/// Dirichlet(1,...,1) rows; strictly positive entries almost surely.
inline Matrix random_stochastic(int rows, int cols, RandomStream& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) m.row(i) = random_simplex(cols, rng).transpose();
  return m;
}

inline TabularMdp random_mdp(int n_states, int n_actions, double gamma, RandomStream& rng) {
  Matrix reward(n_states, n_actions);
  for (int x = 0; x < n_states; ++x) {
    for (int a = 0; a < n_actions; ++a) reward(x, a) = rng.uniform();
  }
  RowMatrix transition = random_stochastic(n_states * n_actions, n_states, rng);
  Vector nu0 = random_simplex(n_states, rng);
  return TabularMdp(std::move(reward), std::move(transition), gamma, std::move(nu0));
}

inline Policy random_policy(int n_states, int n_actions, RandomStream& rng) {
  return Policy{random_stochastic(n_states, n_actions, rng)};
}

/// Test backend that reports the exact transition model and a constant
/// bonus table; lets the planner run with zero estimation error.
class ExactBackend final : public EstimatorBackend {
 public:
  ExactBackend(const TabularMdp& mdp, double bonus)
      : mdp_(mdp), bonus_(Matrix::Constant(mdp.n_states(), mdp.n_actions(), bonus)) {}

  int n_states() const override { return mdp_.n_states(); }
  int n_actions() const override { return mdp_.n_actions(); }
  void refresh_model() override {}
  void prepare_epoch(const ValueFunction& v_k) override {
    backup_ = expected_next_value(mdp_, v_k).values;
  }
  Matrix estimated_backup() const override { return backup_; }
  Matrix bonus_table() const override { return bonus_; }
  void record_transition(int, int, int) override {}
  nlohmann::json epoch_snapshot() const override { return nlohmann::json::object(); }

 private:
  const TabularMdp& mdp_;
  Matrix bonus_;
  Matrix backup_;
};

/// Kolmogorov-Smirnov statistic of observed epoch lengths against the
/// geometric law on {1, 2, ...} with success probability p. Both CDFs are
/// step functions on the integers, so the supremum is scanned there.
inline double ks_geometric_statistic(const std::vector<long>& lengths, double p) {
  long max_len = 1;
  for (const long len : lengths) max_len = std::max(max_len, len);
  std::vector<double> count(static_cast<std::size_t>(max_len) + 1, 0.0);
  for (const long len : lengths) count[static_cast<std::size_t>(len)] += 1.0;
  const double n = static_cast<double>(lengths.size());
  double worst = 0.0;
  double empirical = 0.0;
  for (long v = 1; v <= max_len; ++v) {
    empirical += count[static_cast<std::size_t>(v)] / n;
    const double cdf = 1.0 - std::pow(1.0 - p, static_cast<double>(v));
    worst = std::max(worst, std::abs(empirical - cdf));
  }
  return worst;
}

/// Reset-terminated epoch lengths of a run (the final horizon-cut epoch is
/// dropped so that the geometric law applies exactly).
inline std::vector<long> completed_epoch_lengths(const RunLog& log) {
  std::vector<long> lengths;
  for (int k = 1; k + 1 <= log.n_epochs(); ++k) lengths.push_back(log.epoch_length(k));
  return lengths;
}

}  // namespace raviucb::testing
