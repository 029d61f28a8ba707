#include "core/assignment_problem.hpp"

#include <cmath>

namespace treatsel {

AssignmentProblem build_assignment_problem(const EffectTable& table,
                                           const std::vector<double>& cohort_weight,
                                           const std::vector<double>& control_means,
                                           const std::vector<GuardrailSpec>& guardrails,
                                           int num_treatments, bool include_control) {
  const std::size_t n = table.n_cohorts();
  if (n == 0) throw Error::config("assignment problem needs at least one cohort");
  if (cohort_weight.size() != n) throw Error::config("cohort weight vector has wrong length");
  const int K = static_cast<int>(guardrails.size());
  const int num_metrics = K + 1;
  for (int k = 0; k < num_metrics; ++k) {
    for (int j = 1; j <= num_treatments; ++j) {
      if (table.source_index(j, k) < 0) {
        throw Error::config("effect table is missing treatment " + std::to_string(j) + ", metric " +
                            std::to_string(k));
      }
    }
  }
  if (!control_means.empty()) {
    if (static_cast<int>(control_means.size()) != num_metrics) {
      throw Error::config("control mean vector has wrong length");
    }
    for (double m : control_means) {
      if (m == 0.0) throw Error::data("normalization impossible: a control mean is zero");
    }
  }

  AssignmentProblem out;
  if (include_control) out.arms.push_back(0);
  for (int j = 1; j <= num_treatments; ++j) out.arms.push_back(j);
  const int J = static_cast<int>(out.arms.size());
  const std::size_t len = n * static_cast<std::size_t>(J);

  // Per-metric weighted, normalized effect and sd columns.
  std::vector<std::vector<double>> mu(num_metrics, std::vector<double>(len, 0.0));
  std::vector<std::vector<double>> sd(num_metrics, std::vector<double>(len, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < J; ++a) {
      int arm = out.arms[a];
      if (arm == 0) continue;
      for (int k = 0; k < num_metrics; ++k) {
        const EffectEstimate& e = table.get(i, arm, k);
        double denom = control_means.empty() ? 1.0 : control_means[k];
        double w = cohort_weight[i] / denom;
        mu[k][i * J + a] = w * e.tau;
        sd[k][i * J + a] = std::fabs(w) * std::sqrt(std::max(0.0, e.var));
      }
    }
  }

  auto& st = out.stochastic;
  auto& dt = out.deterministic;
  st.n = dt.n = static_cast<int>(n);
  st.J = dt.J = J;
  st.mu.push_back(mu[0]);
  st.sigma.push_back(sd[0]);
  dt.mu.push_back(mu[0]);
  for (int k = 1; k <= K; ++k) {
    const GuardrailSpec& g = guardrails[static_cast<std::size_t>(k - 1)];
    auto add_row = [&](double sign, double rhs) {
      std::vector<double> m(len), s(len);
      for (std::size_t q = 0; q < len; ++q) {
        m[q] = sign * mu[k][q];
        s[q] = sd[k][q];
      }
      st.mu.push_back(m);
      st.sigma.push_back(s);
      st.c.push_back(rhs);
      dt.mu.push_back(std::move(m));
      dt.c.push_back(rhs);
      out.row_metric.push_back(k);
    };
    switch (g.direction) {
      case GuardrailSpec::Direction::Le:
        add_row(1.0, g.threshold);
        break;
      case GuardrailSpec::Direction::Ge:
        add_row(-1.0, -g.threshold);
        break;
      case GuardrailSpec::Direction::Band:
        if (g.threshold < 0) throw Error::config("band guardrail needs a non-negative threshold");
        add_row(1.0, g.threshold);
        add_row(-1.0, g.threshold);
        break;
    }
  }
  st.K = static_cast<int>(st.c.size());
  dt.K = static_cast<int>(dt.c.size());
  return out;
}

}  // namespace treatsel
