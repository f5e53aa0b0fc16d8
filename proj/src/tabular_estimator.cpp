#include "raviucb/tabular_estimator.hpp"

#include <cmath>

namespace raviucb {

nlohmann::json CountTables::to_json() const {
  nlohmann::json doc;
  auto n_rows = nlohmann::json::array();
  for (int x = 0; x < n_states_; ++x) {
    auto row = nlohmann::json::array();
    for (int a = 0; a < n_actions_; ++a) row.push_back(pair_count(x, a));
    n_rows.push_back(std::move(row));
  }
  doc["n"] = std::move(n_rows);
  auto n3 = nlohmann::json::array();
  for (int x = 0; x < n_states_; ++x) {
    auto per_action = nlohmann::json::array();
    for (int a = 0; a < n_actions_; ++a) {
      auto row = nlohmann::json::array();
      for (int y = 0; y < n_states_; ++y) {
        row.push_back(next_count(static_cast<long>(x) * n_actions_ + a, y));
      }
      per_action.push_back(std::move(row));
    }
    n3.push_back(std::move(per_action));
  }
  doc["n3"] = std::move(n3);
  return doc;
}

void record_transition_tab(CountTables& counts, int x, int a, int x_next) {
  if (x < 0 || x >= counts.n_states() || a < 0 || a >= counts.n_actions() || x_next < 0 ||
      x_next >= counts.n_states()) {
    throw std::out_of_range("record_transition_tab: index out of range");
  }
  counts.pair_count(x, a) += 1;
  counts.next_count(static_cast<long>(x) * counts.n_actions() + a, x_next) += 1;
}

RowMatrix mle_estimate(const CountTables& counts) {
  RowMatrix p_hat(counts.next_count.rows(), counts.next_count.cols());
  for (int x = 0; x < counts.n_states(); ++x) {
    for (int a = 0; a < counts.n_actions(); ++a) {
      const long row = static_cast<long>(x) * counts.n_actions() + a;
      const double denom = static_cast<double>(counts.pair_count(x, a));
      p_hat.row(row) = counts.next_count.row(row).cast<double>() / denom;
    }
  }
  return p_hat;
}

Matrix tabular_bonus(const CountTables& counts, double beta, double H) {
  if (!(beta >= 0.0)) throw std::invalid_argument("tabular_bonus: beta must be nonnegative");
  return (beta / counts.pair_count.cast<double>().array().sqrt()).min(H).matrix();
}

double tabular_beta(int n_states, int n_actions, long T, double delta, double H) {
  if (n_states < 1 || n_actions < 1 || T < 1 || !(H > 0.0)) {
    throw std::invalid_argument("tabular_beta: dimensions and H must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("tabular_beta: delta must lie in (0,1)");
  }
  const double inside = static_cast<double>(n_states) *
                        std::log(static_cast<double>(n_states) * n_actions *
                                 static_cast<double>(T) / delta);
  return 8.0 * H * std::sqrt(inside);
}

nlohmann::json TabularBackend::epoch_snapshot() const {
  nlohmann::json doc;
  auto rows = nlohmann::json::array();
  for (int x = 0; x < n_states(); ++x) {
    auto row = nlohmann::json::array();
    for (int a = 0; a < n_actions(); ++a) row.push_back(counts_.pair_count(x, a));
    rows.push_back(std::move(row));
  }
  doc["n"] = std::move(rows);
  return doc;
}

}  // namespace raviucb
