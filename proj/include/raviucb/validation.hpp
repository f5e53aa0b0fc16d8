#pragma once

#include "raviucb/linmix.hpp"
#include "raviucb/planner.hpp"

#include <functional>
#include <string>
#include <vector>

namespace raviucb {

/// Outcome of one numeric certification. `pass` holds exactly when
/// `worst_slack <= tolerance`; checks that combine sub-criteria with
/// different tolerances report the worst excess over the sub-tolerance and
/// declare tolerance zero.
struct CheckReport {
  std::string check;
  bool pass = false;
  double worst_slack = 0.0;
  double tolerance = 0.0;
  nlohmann::json details;
};

nlohmann::json check_reports_to_json(const std::vector<CheckReport>& reports);

/// Uniform Dirichlet draw on the n-simplex (n exponential variates).
Vector random_simplex(int n, RandomStream& rng);

/// Exact per-epoch account of a recorded run: the optimal return, each
/// epoch policy's return and mean bonus under its own occupancy measure,
/// and the resulting cumulative regret, all via dense linear solves with
/// one solve per epoch.
struct RegretAccount {
  double optimal_return = 0.0;
  std::vector<double> epoch_return;
  std::vector<double> epoch_bonus_mean;  // <mu^{pi_k}, CB_k>
  std::vector<long> epoch_length;
  double cumulative_regret = 0.0;
};

RegretAccount compute_regret(const TabularMdp& mdp, const RunLog& run);

/// Ordinary least squares slope of log(y) against log(t).
double fit_loglog_slope(const std::vector<double>& t, const std::vector<double>& y);

/// Bonus validity: for each epoch and pair, gamma * |<P(.|x,a), V_k> -
/// backup_k(x,a)| must not exceed CB_k(x,a). Reports the worst excess and
/// the number of violating (epoch, x, a) triples.
CheckReport check_validity(const RunLog& run, const TabularMdp& true_mdp);

/// Sandwich of the optimistic backup on epochs where validity holds:
/// r + gamma P V_k <= Q_{k+1} <= r + 2 CB_k + gamma P V_k entrywise.
CheckReport check_sandwich(const RunLog& run, const TabularMdp& true_mdp);

/// Mirror-descent identities along the run: per epoch, V_k attains the
/// KL-regularized maximum against random simplex candidates with equality at
/// pi_k (tolerance 1e-9), and the running sums satisfy the pi_0-anchored
/// log-sum-exp identity (tolerance 1e-6).
CheckReport check_md_identity(const RunLog& run, int n_candidates, RandomStream& rng);

/// Chain bound KL(mu^pi || mu^pi') <= H * H(pi || pi'), both sides exact.
CheckReport check_kl_chain(const TabularMdp& mdp, const Policy& pi, const Policy& pi_ref);

/// Capped epoch-normalized log potential of the recorded feature trace:
/// sum_k (1/|T_k|) sum_{t in T_k} log(1 + |T_k| ||phi_{k,t}||^2_{Lambda_k^-1})
/// <= d log(1 + B^2 H^2 T / (lambda d)).
CheckReport check_elliptical(const RunLog& run, const LinearMixtureMdp& mdp);

/// Number of epochs containing a feature with ||phi||_{Lambda_k^-1} >= 1 is
/// at most (d/log 2) log(1 + B^2 H^2 T / (lambda d)).
CheckReport check_bad_epochs(const RunLog& run, const LinearMixtureMdp& mdp);

/// Monte Carlo coverage of the self-normalized bound
/// ||sum phi_s eta_s||^2_{Lambda_t^-1} <= 2 sigma^2 log(det(Lambda_t)^{1/2}
/// det(Lambda_0)^{-1/2} / delta) under bounded noise, uniformly over t.
/// Coverage must reach 1 - delta - 3 sqrt(delta(1-delta)/trials).
CheckReport check_self_normalized(int d, double sigma, long T, double delta, int trials,
                                  RandomStream& rng);

/// Online-to-batch consistency: resampling an epoch index proportionally to
/// recorded epoch lengths reproduces realized regret / T within three
/// standard errors. Also compares, over completed epochs, realized bonus
/// sums against H * <mu^{pi_k}, CB_k> within three standard errors of the
/// mean difference.
CheckReport check_online_to_batch(const TabularMdp& mdp, const RunLog& run, int trials,
                                  RandomStream& rng);

/// Scaling law of mean cumulative regret: runs the supplied runner at each
/// horizon for n_seeds seeds (seed values 1..n_seeds) and requires the
/// log-log slope of the mean regret to stay at or below max_slope.
CheckReport check_regret_slope(const std::function<double(long, std::uint64_t)>& regret_of,
                               const std::vector<long>& T_values, int n_seeds, double max_slope);

}  // namespace raviucb
