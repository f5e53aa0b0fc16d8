#include "raviucb/harness.hpp"
#include "raviucb/tabular_estimator.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

namespace py = pybind11;
using namespace raviucb;

namespace {

Matrix policy_matrix(const Policy& pi) { return pi.probs; }

TabularMdp make_tabular(const Matrix& reward, const std::vector<Matrix>& transition, double gamma,
                        const Vector& nu0) {
  const int n = static_cast<int>(reward.rows());
  const int m = static_cast<int>(reward.cols());
  if (static_cast<int>(transition.size()) != n) {
    throw std::invalid_argument("transition must hold one |A| x |X| block per state");
  }
  RowMatrix flat(static_cast<long>(n) * m, n);
  for (int x = 0; x < n; ++x) {
    if (transition[x].rows() != m || transition[x].cols() != n) {
      throw std::invalid_argument("each transition block must be |A| x |X|");
    }
    for (int a = 0; a < m; ++a) flat.row(static_cast<long>(x) * m + a) = transition[x].row(a);
  }
  return TabularMdp(reward, std::move(flat), gamma, nu0);
}

LinearMixtureMdp make_mixture(const std::vector<std::vector<Matrix>>& kernels, const Vector& theta,
                              const Matrix& reward, double gamma, const Vector& nu0) {
  std::vector<RowMatrix> psi;
  const int n = static_cast<int>(reward.rows());
  const int m = static_cast<int>(reward.cols());
  for (const auto& kernel : kernels) {
    if (static_cast<int>(kernel.size()) != n) {
      throw std::invalid_argument("each kernel must hold one |A| x |X| block per state");
    }
    RowMatrix flat(static_cast<long>(n) * m, n);
    for (int x = 0; x < n; ++x) {
      for (int a = 0; a < m; ++a) flat.row(static_cast<long>(x) * m + a) = kernel[x].row(a);
    }
    psi.push_back(std::move(flat));
  }
  return build_convex_mixture_env(std::move(psi), theta, reward, gamma, nu0);
}

py::dict report_to_dict(const CheckReport& report) {
  py::dict out;
  out["check"] = report.check;
  out["pass"] = report.pass;
  out["worst_slack"] = report.worst_slack;
  out["tolerance"] = report.tolerance;
  out["details"] = report.details.dump();
  return out;
}

ExperimentConfig config_for(const TabularMdp& mdp, long T) {
  ExperimentConfig config;
  config.backend = "tabular";
  config.T = T;
  config.seeds = {0};
  config.tabular = mdp;
  return config;
}

ExperimentConfig config_for(const LinearMixtureMdp& mdp, long T) {
  ExperimentConfig config;
  config.backend = "linmix";
  config.T = T;
  config.seeds = {0};
  config.mixture = mdp;
  return config;
}

template <class Env>
RunLog run_with_overrides(const Env& env, long T, std::uint64_t seed, std::optional<double> eta,
                          std::optional<double> beta, std::optional<double> delta,
                          std::optional<double> reg_lambda) {
  ExperimentConfig config = config_for(env, T);
  config.eta = eta;
  config.beta = beta;
  config.delta = delta;
  config.reg_lambda = reg_lambda;
  return execute_run(config, T, seed);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Regularized approximate value iteration with optimistic bonuses "
            "for discounted tabular and linear-mixture MDPs.";

  py::class_<TabularMdp>(m, "TabularMdp")
      .def(py::init(&make_tabular), py::arg("reward"), py::arg("transition"), py::arg("gamma"),
           py::arg("nu0"),
           "Build from a reward table (|X| x |A|), per-state transition blocks "
           "(list of |A| x |X| arrays), a discount and an initial distribution.")
      .def_property_readonly("n_states", &TabularMdp::n_states)
      .def_property_readonly("n_actions", &TabularMdp::n_actions)
      .def_property_readonly("gamma", &TabularMdp::gamma)
      .def_property_readonly("horizon", &TabularMdp::horizon)
      .def_property_readonly("reward", [](const TabularMdp& mdp) { return mdp.reward(); })
      .def("to_json", [](const TabularMdp& mdp) { return mdp.to_json().dump(); })
      .def_static("from_json", [](const std::string& text) {
        return TabularMdp::from_json(nlohmann::json::parse(text));
      });

  py::class_<LinearMixtureMdp>(m, "LinearMixtureMdp")
      .def_property_readonly("d", &LinearMixtureMdp::dim)
      .def_property_readonly("B", &LinearMixtureMdp::bound_B)
      .def_property_readonly("theta", [](const LinearMixtureMdp& mdp) { return mdp.theta(); })
      .def_property_readonly("base", &LinearMixtureMdp::base,
                             py::return_value_policy::reference_internal)
      .def("to_json", [](const LinearMixtureMdp& mdp) { return mdp.to_json().dump(); })
      .def_static("from_json", [](const std::string& text) {
        return LinearMixtureMdp::from_json(nlohmann::json::parse(text));
      });

  m.def("build_convex_mixture_env", &make_mixture, py::arg("kernels"), py::arg("theta"),
        py::arg("reward"), py::arg("gamma"), py::arg("nu0"),
        "Mixture instance from row-stochastic component kernels and simplex weights.");

  py::class_<RunLog>(m, "RunLog")
      .def_property_readonly("T", [](const RunLog& log) { return log.horizon_T; })
      .def_property_readonly("eta", [](const RunLog& log) { return log.eta; })
      .def_property_readonly("beta", [](const RunLog& log) { return log.beta; })
      .def_property_readonly("n_epochs", &RunLog::n_epochs)
      .def("epoch_length", &RunLog::epoch_length, py::arg("k"))
      .def("states",
           [](const RunLog& log) {
             std::vector<int> out;
             out.reserve(log.steps.size());
             for (const auto& step : log.steps) out.push_back(step.state);
             return out;
           })
      .def("actions",
           [](const RunLog& log) {
             std::vector<int> out;
             out.reserve(log.steps.size());
             for (const auto& step : log.steps) out.push_back(step.action);
             return out;
           })
      .def("rewards",
           [](const RunLog& log) {
             std::vector<double> out;
             out.reserve(log.steps.size());
             for (const auto& step : log.steps) out.push_back(step.reward);
             return out;
           })
      .def("epoch_of_step",
           [](const RunLog& log) {
             std::vector<int> out;
             out.reserve(log.steps.size());
             for (const auto& step : log.steps) out.push_back(step.epoch);
             return out;
           })
      .def("epoch_value", [](const RunLog& log, int k) { return log.epochs.at(k - 1).v.values; })
      .def("epoch_policy",
           [](const RunLog& log, int k) { return log.epochs.at(k - 1).policy.probs; })
      .def("epoch_bonus", [](const RunLog& log, int k) { return log.epochs.at(k - 1).bonus; })
      .def("epoch_q_next",
           [](const RunLog& log, int k) { return log.epochs.at(k - 1).q_next.values; });

  m.def("value_iteration",
        [](const TabularMdp& mdp, double tol) {
          auto [v, q] = value_iteration(mdp, tol);
          return py::make_tuple(v.values, q.values);
        },
        py::arg("mdp"), py::arg("tol") = 1e-10);
  m.def("policy_evaluation",
        [](const TabularMdp& mdp, const Matrix& pi) {
          return policy_evaluation(mdp, Policy{pi}).values;
        });
  m.def("occupancy_measure", [](const TabularMdp& mdp, const Matrix& pi) {
    return occupancy_measure(mdp, Policy{pi}).mass;
  });
  m.def("normalized_return",
        [](const TabularMdp& mdp, const Matrix& pi) { return normalized_return(mdp, Policy{pi}); });
  m.def("flow_residual", [](const TabularMdp& mdp, const Matrix& mu) {
    return flow_residual(mdp, OccupancyMeasure{mu});
  });
  m.def("conditional_relative_entropy",
        [](const TabularMdp& mdp, const Matrix& pi, const Matrix& pi_ref) {
          return conditional_relative_entropy(mdp, Policy{pi}, Policy{pi_ref});
        });
  m.def("occupancy_kl", [](const Matrix& mu, const Matrix& mu_ref) {
    return occupancy_kl(OccupancyMeasure{mu}, OccupancyMeasure{mu_ref});
  });
  m.def("greedy_policy", [](const Matrix& q) { return greedy_policy(ActionValueFunction{q}).probs; });

  m.def("default_learning_rate", &default_learning_rate, py::arg("n_actions"), py::arg("H"),
        py::arg("T"));
  m.def("tabular_beta", &tabular_beta, py::arg("n_states"), py::arg("n_actions"), py::arg("T"),
        py::arg("delta"), py::arg("H"));
  m.def("linmix_beta", &linmix_beta, py::arg("d"), py::arg("T"), py::arg("B"), py::arg("H"),
        py::arg("reg_lambda"), py::arg("delta"));

  m.def("run_ravi_ucb_tabular", &run_with_overrides<TabularMdp>, py::arg("mdp"), py::arg("T"),
        py::arg("seed") = 0, py::arg("eta") = std::nullopt, py::arg("beta") = std::nullopt,
        py::arg("delta") = std::nullopt, py::arg("reg_lambda") = std::nullopt,
        "One seeded run with the count-based backend; omitted parameters use "
        "the standard defaults.");
  m.def("run_ravi_ucb_linmix", &run_with_overrides<LinearMixtureMdp>, py::arg("mdp"), py::arg("T"),
        py::arg("seed") = 0, py::arg("eta") = std::nullopt, py::arg("beta") = std::nullopt,
        py::arg("delta") = std::nullopt, py::arg("reg_lambda") = std::nullopt,
        "One seeded run with the least-squares backend.");

  m.def("online_to_batch_select", [](const RunLog& log, std::uint64_t seed) {
    RandomStream rng(seed);
    return policy_matrix(online_to_batch_select(log, rng));
  });

  m.def("cumulative_regret", [](const TabularMdp& mdp, const RunLog& log) {
    return compute_regret(mdp, log).cumulative_regret;
  });

  m.def("check_validity",
        [](const RunLog& log, const TabularMdp& mdp) { return report_to_dict(check_validity(log, mdp)); });
  m.def("check_sandwich",
        [](const RunLog& log, const TabularMdp& mdp) { return report_to_dict(check_sandwich(log, mdp)); });
  m.def("check_md_identity", [](const RunLog& log, int candidates, std::uint64_t seed) {
    RandomStream rng(seed);
    return report_to_dict(check_md_identity(log, candidates, rng));
  });
  m.def("check_elliptical", [](const RunLog& log, const LinearMixtureMdp& mdp) {
    return report_to_dict(check_elliptical(log, mdp));
  });
  m.def("check_bad_epochs", [](const RunLog& log, const LinearMixtureMdp& mdp) {
    return report_to_dict(check_bad_epochs(log, mdp));
  });
  m.def("check_self_normalized",
        [](int d, double sigma, long T, double delta, int trials, std::uint64_t seed) {
          RandomStream rng(seed);
          return report_to_dict(check_self_normalized(d, sigma, T, delta, trials, rng));
        });
  m.def("check_online_to_batch",
        [](const TabularMdp& mdp, const RunLog& log, int trials, std::uint64_t seed) {
          RandomStream rng(seed);
          return report_to_dict(check_online_to_batch(mdp, log, trials, rng));
        });

  m.def("reference_tabular_mdp", &reference_tabular_mdp);
  m.def("reference_mixture_mdp", &reference_mixture_mdp);
}
