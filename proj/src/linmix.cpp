#include "raviucb/linmix.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>

namespace raviucb {

namespace {

constexpr double kMixtureRowTol = 1e-10;

TabularMdp induced_base(const std::vector<RowMatrix>& psi, const Vector& theta, Matrix reward,
                        double gamma, Vector init_dist) {
  if (psi.empty()) throw std::invalid_argument("LinearMixtureMdp: need at least one kernel");
  if (static_cast<int>(psi.size()) != theta.size()) {
    throw std::invalid_argument("LinearMixtureMdp: psi/theta dimension mismatch");
  }
  RowMatrix p = RowMatrix::Zero(psi[0].rows(), psi[0].cols());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (psi[i].rows() != p.rows() || psi[i].cols() != p.cols()) {
      throw std::invalid_argument("LinearMixtureMdp: kernel shapes differ");
    }
    p += theta(static_cast<long>(i)) * psi[i];
  }
  for (long r = 0; r < p.rows(); ++r) {
    const double sum = p.row(r).sum();
    if (std::abs(sum - 1.0) > kMixtureRowTol || (p.row(r).array() < 0.0).any()) {
      std::ostringstream msg;
      msg << "LinearMixtureMdp: mixture row " << r << " is not a probability vector";
      throw std::invalid_argument(msg.str());
    }
  }
  return TabularMdp(std::move(reward), std::move(p), gamma, std::move(init_dist));
}

}  // namespace

LinearMixtureMdp::LinearMixtureMdp(std::vector<RowMatrix> psi, Vector theta, Matrix reward,
                                   double gamma, Vector init_dist, double bound_B)
    : psi_(std::move(psi)),
      theta_(std::move(theta)),
      bound_B_(bound_B),
      base_(induced_base(psi_, theta_, std::move(reward), gamma, std::move(init_dist))) {
  if (theta_.norm() > bound_B_ + 1e-9) {
    throw std::invalid_argument("LinearMixtureMdp: ||theta|| exceeds the stated bound B");
  }
  // Boundedness certificate for the feature map: for V in [0,H]^X the
  // per-coordinate extreme of <psi_i(x,a,.), V> is H times the larger of the
  // positive and negative parts of the row, so ||phi_V|| <= H ||c|| with c
  // the vector of those row bounds. This is conservative but checkable.
  for (long r = 0; r < psi_[0].rows(); ++r) {
    double c_norm_sq = 0.0;
    for (const auto& kernel : psi_) {
      const auto row = kernel.row(r).array();
      const double pos = row.max(0.0).sum();
      const double neg = (-row).max(0.0).sum();
      const double c = std::max(pos, neg);
      c_norm_sq += c * c;
    }
    if (std::sqrt(c_norm_sq) > bound_B_ + 1e-9) {
      throw std::invalid_argument(
          "LinearMixtureMdp: feature bound certificate failed; increase B or rescale psi");
    }
  }
}

nlohmann::json LinearMixtureMdp::to_json() const {
  nlohmann::json doc;
  const int n = base_.n_states();
  const int m = base_.n_actions();
  doc["n_states"] = n;
  doc["n_actions"] = m;
  doc["gamma"] = base_.gamma();
  doc["nu0"] = std::vector<double>(base_.init_dist().data(), base_.init_dist().data() + n);
  auto reward_rows = nlohmann::json::array();
  for (int x = 0; x < n; ++x) {
    auto row = nlohmann::json::array();
    for (int a = 0; a < m; ++a) row.push_back(base_.reward()(x, a));
    reward_rows.push_back(std::move(row));
  }
  doc["reward"] = std::move(reward_rows);
  doc["d"] = dim();
  doc["theta"] = std::vector<double>(theta_.data(), theta_.data() + theta_.size());
  doc["B"] = bound_B_;
  auto psi_doc = nlohmann::json::array();
  for (const auto& kernel : psi_) {
    auto per_state = nlohmann::json::array();
    for (int x = 0; x < n; ++x) {
      auto per_action = nlohmann::json::array();
      for (int a = 0; a < m; ++a) {
        auto row = nlohmann::json::array();
        for (int y = 0; y < n; ++y) row.push_back(kernel(static_cast<long>(x) * m + a, y));
        per_action.push_back(std::move(row));
      }
      per_state.push_back(std::move(per_action));
    }
    psi_doc.push_back(std::move(per_state));
  }
  doc["psi"] = std::move(psi_doc);
  return doc;
}

LinearMixtureMdp LinearMixtureMdp::from_json(const nlohmann::json& doc) {
  const int n = doc.at("n_states").get<int>();
  const int m = doc.at("n_actions").get<int>();
  const int d = doc.at("d").get<int>();
  if (n <= 0 || m <= 0 || d <= 0) throw std::invalid_argument("mixture json: nonpositive dimensions");
  Matrix reward(n, m);
  const auto& rj = doc.at("reward");
  for (int x = 0; x < n; ++x) {
    for (int a = 0; a < m; ++a) reward(x, a) = rj.at(x).at(a).get<double>();
  }
  Vector nu0(n);
  for (int x = 0; x < n; ++x) nu0(x) = doc.at("nu0").at(x).get<double>();
  Vector theta(d);
  for (int i = 0; i < d; ++i) theta(i) = doc.at("theta").at(i).get<double>();
  std::vector<RowMatrix> psi;
  psi.reserve(static_cast<std::size_t>(d));
  const auto& pj = doc.at("psi");
  if (static_cast<int>(pj.size()) != d) throw std::invalid_argument("mixture json: psi shape");
  for (int i = 0; i < d; ++i) {
    RowMatrix kernel(static_cast<long>(n) * m, n);
    for (int x = 0; x < n; ++x) {
      for (int a = 0; a < m; ++a) {
        for (int y = 0; y < n; ++y) {
          kernel(static_cast<long>(x) * m + a, y) = pj.at(i).at(x).at(a).at(y).get<double>();
        }
      }
    }
    psi.push_back(std::move(kernel));
  }
  return LinearMixtureMdp(std::move(psi), std::move(theta), std::move(reward),
                          doc.at("gamma").get<double>(), std::move(nu0), doc.at("B").get<double>());
}

LinearMixtureMdp build_convex_mixture_env(std::vector<RowMatrix> kernels, Vector theta,
                                          Matrix reward, double gamma, Vector init_dist) {
  if (kernels.empty()) throw std::invalid_argument("build_convex_mixture_env: no kernels");
  if (static_cast<int>(kernels.size()) != theta.size()) {
    throw std::invalid_argument("build_convex_mixture_env: kernel/theta count mismatch");
  }
  for (const auto& kernel : kernels) {
    for (long r = 0; r < kernel.rows(); ++r) {
      const double sum = kernel.row(r).sum();
      if (std::abs(sum - 1.0) > 1e-12 || (kernel.row(r).array() < 0.0).any()) {
        throw std::invalid_argument("build_convex_mixture_env: kernel rows must be stochastic");
      }
    }
  }
  if ((theta.array() < 0.0).any() || std::abs(theta.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("build_convex_mixture_env: theta must lie on the simplex");
  }
  const double bound = std::sqrt(static_cast<double>(kernels.size()));
  return LinearMixtureMdp(std::move(kernels), std::move(theta), std::move(reward), gamma,
                          std::move(init_dist), bound);
}

FeatureTable phi_of_value(const LinearMixtureMdp& mdp, const ValueFunction& v, double H) {
  const int n = mdp.base().n_states();
  if (v.values.size() != n) throw std::invalid_argument("phi_of_value: value length must be |X|");
  if ((v.values.array() < -1e-9).any() || (v.values.array() > H + 1e-9).any()) {
    throw std::invalid_argument("phi_of_value: value entries must lie in [0, H]");
  }
  FeatureTable table;
  table.phi.resize(mdp.psi()[0].rows(), mdp.dim());
  for (int i = 0; i < mdp.dim(); ++i) {
    table.phi.col(i) = mdp.psi()[static_cast<std::size_t>(i)] * v.values;
  }
  return table;
}

void record_transition_lin(DesignState& design, const Eigen::Ref<const Vector>& phi_xa,
                           double v_next, double H) {
  if (phi_xa.size() != design.b_vec.size()) {
    throw std::invalid_argument("record_transition_lin: feature dimension mismatch");
  }
  if (v_next < -1e-9 || v_next > H + 1e-9) {
    throw std::invalid_argument("record_transition_lin: value sample out of [0, H]");
  }
  design.lambda_mat += phi_xa * phi_xa.transpose();
  design.b_vec += phi_xa * v_next;
}

Vector least_squares_theta(const DesignState& design) {
  Eigen::LLT<Matrix> llt(design.lambda_mat);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("least_squares_theta: design matrix is not positive definite");
  }
  Vector theta = llt.solve(design.b_vec);
  const double residual = (design.lambda_mat * theta - design.b_vec).norm();
  if (!(residual <= 1e-9 * (1.0 + design.b_vec.norm()))) {
    throw std::runtime_error("least_squares_theta: solve residual above tolerance");
  }
  return theta;
}

Matrix estimated_backup_values(const Vector& theta_hat, const FeatureTable& features,
                               int n_states, int n_actions) {
  if (features.phi.cols() != theta_hat.size() ||
      features.phi.rows() != static_cast<long>(n_states) * n_actions) {
    throw std::invalid_argument("estimated_backup_values: shape mismatch");
  }
  const Vector flat = features.phi * theta_hat;
  return Eigen::Map<const RowMatrix>(flat.data(), n_states, n_actions);
}

Matrix elliptical_bonus(const FeatureTable& features, const DesignState& design, double beta,
                        double H, int n_states, int n_actions) {
  if (!(beta >= 0.0)) throw std::invalid_argument("elliptical_bonus: beta must be nonnegative");
  Eigen::LLT<Matrix> llt(design.lambda_mat);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("elliptical_bonus: design matrix is not positive definite");
  }
  Matrix bonus(n_states, n_actions);
  for (int x = 0; x < n_states; ++x) {
    for (int a = 0; a < n_actions; ++a) {
      const Vector half =
          llt.matrixL().solve(features.phi.row(static_cast<long>(x) * n_actions + a).transpose());
      bonus(x, a) = std::min(H, beta * half.norm());
    }
  }
  return bonus;
}

double linmix_beta(int d, long T, double B, double H, double reg_lambda, double delta) {
  if (d < 1 || T < 1 || !(B > 0.0) || !(H > 0.0) || !(reg_lambda > 0.0)) {
    throw std::invalid_argument("linmix_beta: dimensions and scales must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("linmix_beta: delta must lie in (0,1)");
  }
  const double log_term = std::log(1.0 + static_cast<double>(T) * B * B * H * H /
                                             (reg_lambda * static_cast<double>(d)));
  const double width = H * std::sqrt(2.0 * (0.5 * d * log_term + std::log(1.0 / delta)));
  return width + std::sqrt(reg_lambda) * B;
}

void LinMixBackend::refresh_model() {
  theta_hat_ = least_squares_theta(design_);
  lambda_at_refresh_ = design_.lambda_mat;
  b_at_refresh_ = design_.b_vec;
}

void LinMixBackend::prepare_epoch(const ValueFunction& v_k) {
  v_k_ = v_k;
  phi_k_ = phi_of_value(mdp_, v_k, H_);
  bonus_ = elliptical_bonus(phi_k_, design_, beta_, H_, n_states(), n_actions());
}

Matrix LinMixBackend::estimated_backup() const {
  return estimated_backup_values(theta_hat_, phi_k_, n_states(), n_actions());
}

void LinMixBackend::record_transition(int x, int a, int x_next) {
  const long row = static_cast<long>(x) * n_actions() + a;
  record_transition_lin(design_, phi_k_.phi.row(row).transpose(), v_k_.values(x_next), H_);
}

nlohmann::json LinMixBackend::epoch_snapshot() const {
  nlohmann::json doc;
  const int d = mdp_.dim();
  auto lambda_rows = nlohmann::json::array();
  for (int i = 0; i < d; ++i) {
    auto row = nlohmann::json::array();
    for (int j = 0; j < d; ++j) row.push_back(lambda_at_refresh_(i, j));
    lambda_rows.push_back(std::move(row));
  }
  doc["Lambda"] = std::move(lambda_rows);
  doc["b"] = std::vector<double>(b_at_refresh_.data(), b_at_refresh_.data() + d);
  doc["theta_hat"] = std::vector<double>(theta_hat_.data(), theta_hat_.data() + d);
  return doc;
}

}  // namespace raviucb
