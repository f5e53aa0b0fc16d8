#include "support.hpp"

#include "raviucb/tabular_estimator.hpp"

#include <doctest.h>

#include <cmath>

using namespace raviucb;
using namespace raviucb::testing;

TEST_CASE("count tables") {
  CountTables counts(3, 2);
  SUBCASE("fresh tables") {
    CHECK(counts.pair_count.minCoeff() == 1);
    CHECK(counts.next_count.cwiseAbs().maxCoeff() == 0);
  }
  SUBCASE("one transition") {
    record_transition_tab(counts, 0, 0, 1);
    CHECK(counts.pair_count(0, 0) == 2);
    CHECK(counts.next_count(0, 1) == 1);
  }
  SUBCASE("invariant n = 1 + sum n3 under random updates") {
    RandomStream rng(31);
    for (int i = 0; i < 500; ++i) {
      record_transition_tab(counts, static_cast<int>(rng.uniform() * 3),
                            static_cast<int>(rng.uniform() * 2),
                            static_cast<int>(rng.uniform() * 3));
    }
    for (int x = 0; x < 3; ++x) {
      for (int a = 0; a < 2; ++a) {
        CHECK(counts.pair_count(x, a) == 1 + counts.next_count.row(x * 2 + a).sum());
      }
    }
  }
  SUBCASE("k identical transitions") {
    for (int i = 0; i < 7; ++i) record_transition_tab(counts, 1, 1, 2);
    CHECK(counts.pair_count(1, 1) == 8);
  }
  SUBCASE("out-of-range indices rejected") {
    CHECK_THROWS_AS(record_transition_tab(counts, 3, 0, 0), std::out_of_range);
    CHECK_THROWS_AS(record_transition_tab(counts, 0, 2, 0), std::out_of_range);
    CHECK_THROWS_AS(record_transition_tab(counts, 0, 0, -1), std::out_of_range);
  }
}

TEST_CASE("mle_estimate") {
  SUBCASE("unvisited pair gives an all-zero row") {
    CountTables counts(2, 2);
    const RowMatrix p_hat = mle_estimate(counts);
    CHECK(p_hat.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("three visits to the same successor give 3/4") {
    CountTables counts(2, 2);
    for (int i = 0; i < 3; ++i) record_transition_tab(counts, 0, 0, 1);
    const RowMatrix p_hat = mle_estimate(counts);
    CHECK(p_hat(0, 1) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(p_hat(0, 0) == 0.0);
  }
  SUBCASE("law of large numbers against the sampling oracle") {
    RandomStream rng(32);
    const TabularMdp mdp = random_mdp(4, 2, 0.9, rng);
    CountTables counts(4, 2);
    const int samples = 100000;
    for (int i = 0; i < samples; ++i) {
      record_transition_tab(counts, 1, 0, sample_step(mdp, 1, 0, rng));
    }
    const RowMatrix p_hat = mle_estimate(counts);
    const double sup_err =
        (p_hat.row(1 * 2 + 0) - mdp.transition_row(1, 0)).cwiseAbs().maxCoeff();
    CHECK(sup_err <= 0.02);
  }
}

TEST_CASE("tabular_bonus") {
  const double H = 10.0;
  SUBCASE("fresh tables saturate at min(beta, H)") {
    CountTables counts(2, 2);
    CHECK(tabular_bonus(counts, 1.0, H).maxCoeff() == doctest::Approx(1.0));
    CHECK(tabular_bonus(counts, 25.0, H).maxCoeff() == doctest::Approx(H));
  }
  SUBCASE("hundred visits with beta = 5") {
    CountTables counts(1, 1);
    for (int i = 0; i < 99; ++i) record_transition_tab(counts, 0, 0, 0);
    CHECK(counts.pair_count(0, 0) == 100);
    CHECK(tabular_bonus(counts, 5.0, H)(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("monotone in the counts") {
    CountTables counts(2, 2);
    Matrix prev = tabular_bonus(counts, 3.0, H);
    RandomStream rng(33);
    for (int i = 0; i < 50; ++i) {
      record_transition_tab(counts, static_cast<int>(rng.uniform() * 2),
                            static_cast<int>(rng.uniform() * 2),
                            static_cast<int>(rng.uniform() * 2));
      const Matrix next = tabular_bonus(counts, 3.0, H);
      CHECK(((prev - next).array() >= -1e-15).all());
      prev = next;
    }
  }
}

TEST_CASE("tabular_beta") {
  SUBCASE("direct formula evaluation") {
    CHECK(tabular_beta(2, 2, 100, 0.01, 10.0) ==
          doctest::Approx(368.2891860802184).epsilon(1e-12));
  }
  SUBCASE("linear in H") {
    const double base = tabular_beta(3, 2, 1000, 0.05, 1.0);
    CHECK(tabular_beta(3, 2, 1000, 0.05, 4.0) == doctest::Approx(4.0 * base).epsilon(1e-12));
  }
  SUBCASE("monotone in T and 1/delta") {
    CHECK(tabular_beta(3, 2, 2000, 0.05, 2.0) > tabular_beta(3, 2, 1000, 0.05, 2.0));
    CHECK(tabular_beta(3, 2, 1000, 0.01, 2.0) > tabular_beta(3, 2, 1000, 0.05, 2.0));
  }
  SUBCASE("invalid delta rejected") {
    CHECK_THROWS_AS(tabular_beta(2, 2, 100, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(tabular_beta(2, 2, 100, 1.0, 1.0), std::invalid_argument);
  }
}

TEST_CASE("count snapshot export") {
  CountTables counts(2, 2);
  record_transition_tab(counts, 0, 1, 1);
  const nlohmann::json doc = counts.to_json();
  CHECK(doc.at("n").at(0).at(1) == 2);
  CHECK(doc.at("n3").at(0).at(1).at(1) == 1);
  CHECK(doc.at("n3").at(0).at(0).at(0) == 0);
}

TEST_CASE("bonus sum growth along a run") {
  // With beta <= H the clamp never binds and the realized bonus sum should
  // grow like sqrt(T): log-log slope at most 0.6 and the normalized sum
  // bounded by a fixed constant.
  const TabularMdp mdp = reference_tabular_mdp();
  const double H = mdp.horizon();
  const double beta = 0.5 * H;
  std::vector<double> horizons;
  std::vector<double> sums;
  for (int power = 10; power <= 16; power += 2) {
    const long T = 1L << power;
    TabularBackend backend(mdp.n_states(), mdp.n_actions(), beta, H);
    PlannerConfig config = default_planner_config(mdp, T, 17);
    RandomStream rng(17);
    const RunLog log = run_ravi_ucb(mdp, backend, config, rng);
    double realized = 0.0;
    for (const auto& step : log.steps) {
      realized += log.epochs[static_cast<std::size_t>(step.epoch - 1)].bonus(step.state,
                                                                             step.action);
    }
    horizons.push_back(static_cast<double>(T));
    sums.push_back(realized);
    const double normalized =
        realized / (beta * std::sqrt(static_cast<double>(mdp.n_states()) * mdp.n_actions() *
                                     static_cast<double>(T)));
    CHECK(normalized <= 2.0);
  }
  CHECK(fit_loglog_slope(horizons, sums) <= 0.6);
}
