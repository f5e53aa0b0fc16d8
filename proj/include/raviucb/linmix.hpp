#pragma once

#include "raviucb/planner.hpp"

#include <vector>

namespace raviucb {

/// Discounted MDP whose transition kernel is a linear mixture
/// P(x'|x,a) = sum_i theta_i psi_i(x,a,x') of known component kernels with
/// unknown weights. The true weights are kept only for simulation and for
/// the oracle checks; the learner sees psi alone. Each psi_i is stored like
/// the tabular transition table, as an (|X|*|A|) x |X| matrix.
class LinearMixtureMdp {
 public:
  LinearMixtureMdp(std::vector<RowMatrix> psi, Vector theta, Matrix reward, double gamma,
                   Vector init_dist, double bound_B);

  int dim() const { return static_cast<int>(psi_.size()); }
  const std::vector<RowMatrix>& psi() const { return psi_; }
  const Vector& theta() const { return theta_; }
  double bound_B() const { return bound_B_; }
  /// The induced tabular MDP with P = sum_i theta_i psi_i; used as the
  /// simulation environment and by the exact oracles.
  const TabularMdp& base() const { return base_; }

  nlohmann::json to_json() const;
  static LinearMixtureMdp from_json(const nlohmann::json& doc);

 private:
  std::vector<RowMatrix> psi_;
  Vector theta_;
  double bound_B_;
  TabularMdp base_;
};

/// Instance generator: psi_i = kernel i (each row-stochastic) and theta on
/// the simplex, so the mixture is automatically a valid kernel and B =
/// sqrt(d) certifies the feature bound.
LinearMixtureMdp build_convex_mixture_env(std::vector<RowMatrix> kernels, Vector theta,
                                          Matrix reward, double gamma, Vector init_dist);

/// Epoch feature table phi_V(x,a) = sum_x' psi(x,a,x') V(x'), one row per
/// flattened (x,a) pair.
struct FeatureTable {
  Matrix phi;  // (|X|*|A|) x d
};

/// Regularized design matrix and response vector accumulated across epochs.
struct DesignState {
  DesignState(int dim, double reg_lambda)
      : lambda_mat(Matrix::Identity(dim, dim) * reg_lambda),
        b_vec(Vector::Zero(dim)),
        reg_lambda(reg_lambda) {
    if (!(reg_lambda > 0.0)) throw std::invalid_argument("DesignState: lambda must be positive");
  }

  Matrix lambda_mat;  // d x d, symmetric positive definite
  Vector b_vec;       // length d
  double reg_lambda;
};

/// Exact feature table of a value function with entries in [0, H]. The range
/// requirement is enforced because the confidence width calibration relies
/// on it.
FeatureTable phi_of_value(const LinearMixtureMdp& mdp, const ValueFunction& v, double H);

/// Rank-one design update: Lambda += phi phi^T, b += phi * v_next.
void record_transition_lin(DesignState& design, const Eigen::Ref<const Vector>& phi_xa,
                           double v_next, double H);

/// theta_hat = Lambda^{-1} b via an SPD factorization.
Vector least_squares_theta(const DesignState& design);

/// Inner products <phi(x,a), theta_hat> reshaped to an |X| x |A| table.
Matrix estimated_backup_values(const Vector& theta_hat, const FeatureTable& features,
                               int n_states, int n_actions);

/// Entrywise beta * ||phi(x,a)||_{Lambda^{-1}}, computed through one
/// factorization of Lambda and triangular solves, clamped above at H.
Matrix elliptical_bonus(const FeatureTable& features, const DesignState& design, double beta,
                        double H, int n_states, int n_actions);

/// beta = H sqrt(2 ((d/2) log[1 + T B^2 H^2/(lambda d)] + log(1/delta)))
///        + sqrt(lambda) B.
double linmix_beta(int d, long T, double B, double H, double reg_lambda, double delta);

/// Least-squares backend for the planner loop. The design matrix is frozen
/// within an epoch; the estimate and the bonus table go through SPD
/// factorizations and triangular solves, never an explicit inverse.
class LinMixBackend final : public EstimatorBackend {
 public:
  LinMixBackend(const LinearMixtureMdp& mdp, double beta, double reg_lambda, double H)
      : mdp_(mdp),
        design_(mdp.dim(), reg_lambda),
        beta_(beta),
        H_(H),
        theta_hat_(Vector::Zero(mdp.dim())) {
    if (!(beta >= 0.0)) throw std::invalid_argument("LinMixBackend: beta must be nonnegative");
    if (!(H > 0.0)) throw std::invalid_argument("LinMixBackend: H must be positive");
  }

  int n_states() const override { return mdp_.base().n_states(); }
  int n_actions() const override { return mdp_.base().n_actions(); }
  double beta() const { return beta_; }
  const DesignState& design() const { return design_; }

  void refresh_model() override;
  void prepare_epoch(const ValueFunction& v_k) override;
  Matrix estimated_backup() const override;
  Matrix bonus_table() const override { return bonus_; }
  void record_transition(int x, int a, int x_next) override;
  nlohmann::json epoch_snapshot() const override;

 private:
  const LinearMixtureMdp& mdp_;
  DesignState design_;
  double beta_;
  double H_;
  Vector theta_hat_;
  Matrix lambda_at_refresh_;
  Vector b_at_refresh_;
  FeatureTable phi_k_;
  ValueFunction v_k_;
  Matrix bonus_;
};

}  // namespace raviucb
