#include "core/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace treatsel {

namespace {

void validate_input(const BootstrapInput& input) {
  if (input.n < 1 || input.J < 1 || input.K < 0) {
    throw Error::config("bootstrap input needs n >= 1 and J >= 1");
  }
  const std::size_t want =
      static_cast<std::size_t>(input.n) * input.J * (static_cast<std::size_t>(input.K) + 1);
  if (input.cells.size() != want) {
    throw Error::config("bootstrap input has " + std::to_string(input.cells.size()) +
                        " cells, expected " + std::to_string(want));
  }
  if (input.B < 1) throw Error::config("bootstrap needs B >= 1 replicates");
  for (const auto& cell : input.cells) {
    if (cell.n_treat < 1 || cell.n_control < 1) {
      throw Error::data("bootstrap cell has an empty arm");
    }
    if (cell.var_treat < 0 || cell.var_control < 0) {
      throw Error::data("bootstrap cell has a negative variance");
    }
  }
}

}  // namespace

ResampledEffects resample_estimates(const BootstrapInput& input, int b) {
  validate_input(input);
  std::mt19937_64 rng(derive_seed(input.seed, "bootstrap_rep_" + std::to_string(b)));
  std::normal_distribution<double> z;
  ResampledEffects out;
  out.mu.resize(input.cells.size());
  out.var_treat.resize(input.cells.size());
  out.var_control.resize(input.cells.size());
  for (std::size_t q = 0; q < input.cells.size(); ++q) {
    const BootstrapCell& cell = input.cells[q];
    const double total_var = cell.var_treat + cell.var_control;
    const double total_n = static_cast<double>(cell.n_treat + cell.n_control);
    out.mu[q] = cell.mu_hat + std::sqrt(total_var / total_n) * z(rng);
    if (input.resample_variances) {
      double vt = cell.var_treat;
      if (cell.n_treat >= 2 && vt > 0.0) {
        std::chi_squared_distribution<double> chi(static_cast<double>(cell.n_treat - 1));
        vt = cell.var_treat * chi(rng) / static_cast<double>(cell.n_treat);
      }
      double vc = cell.var_control;
      if (cell.n_control >= 2 && vc > 0.0) {
        std::chi_squared_distribution<double> chi(static_cast<double>(cell.n_control - 1));
        vc = cell.var_control * chi(rng) / static_cast<double>(cell.n_control);
      }
      out.var_treat[q] = vt;
      out.var_control[q] = vc;
    } else {
      out.var_treat[q] = cell.var_treat;
      out.var_control[q] = cell.var_control;
    }
  }
  return out;
}

BootstrapResult bootstrap_assignments(const BootstrapInput& input, const BootstrapSolver& solver,
                                      const std::vector<double>& x_hat,
                                      const BootstrapRunConfig& cfg) {
  validate_input(input);
  if (x_hat.empty()) throw Error::config("bootstrap needs the original assignment");
  const std::size_t nx = x_hat.size();
  const bool dense = nx <= cfg.dense_covariance_limit;

  BootstrapResult res;
  res.x_hat = x_hat;
  std::vector<double> sum(nx, 0.0), sumsq(nx, 0.0);
  std::vector<double> outer;
  if (dense) outer.assign(nx * nx, 0.0);

  for (int b = 0; b < input.B; ++b) {
    ResampledEffects eff = resample_estimates(input, b);
    std::vector<double> xb;
    try {
      xb = solver(eff);
    } catch (const Error& e) {
      if (e.status() == Status::Infeasible) {
        ++res.failures;
        continue;
      }
      throw;
    }
    if (xb.size() != nx) {
      throw Error::internal("bootstrap solver returned an assignment of unexpected length");
    }
    ++res.resamples_used;
    for (std::size_t q = 0; q < nx; ++q) {
      sum[q] += xb[q];
      sumsq[q] += xb[q] * xb[q];
    }
    if (dense) {
      for (std::size_t a = 0; a < nx; ++a) {
        const double xa = xb[a];
        if (xa == 0.0) continue;
        double* row = outer.data() + a * nx;
        for (std::size_t bq = 0; bq < nx; ++bq) row[bq] += xa * xb[bq];
      }
    }
  }

  const double failure_fraction =
      static_cast<double>(res.failures) / static_cast<double>(input.B);
  if (failure_fraction > cfg.max_failure_fraction) {
    throw Error::infeasible("bootstrap unstable: " + std::to_string(res.failures) + " of " +
                            std::to_string(input.B) + " replicates failed to solve");
  }
  if (res.resamples_used == 0) {
    throw Error::infeasible("bootstrap produced no successful replicates");
  }

  const double used = static_cast<double>(res.resamples_used);
  res.x_bar.resize(nx);
  res.bias.resize(nx);
  res.var_diag.resize(nx);
  for (std::size_t q = 0; q < nx; ++q) {
    res.x_bar[q] = sum[q] / used;
    res.bias[q] = res.x_bar[q] - x_hat[q];
    double v = res.resamples_used >= 2
                   ? (sumsq[q] - used * res.x_bar[q] * res.x_bar[q]) / (used - 1.0)
                   : 0.0;
    res.var_diag[q] = std::max(0.0, v);
  }
  if (dense) {
    res.covariance.assign(nx * nx, 0.0);
    if (res.resamples_used >= 2) {
      for (std::size_t a = 0; a < nx; ++a) {
        for (std::size_t bq = 0; bq < nx; ++bq) {
          double cov = (outer[a * nx + bq] - used * res.x_bar[a] * res.x_bar[bq]) / (used - 1.0);
          res.covariance[a * nx + bq] = cov;
        }
      }
    }
  }
  return res;
}

std::vector<double> bias_correct(const std::vector<double>& x_hat, const std::vector<double>& bias,
                                 int n, int J, double eps) {
  if (x_hat.size() != static_cast<std::size_t>(n) * J || bias.size() != x_hat.size()) {
    throw Error::config("bias correction got mismatched assignment lengths");
  }
  if (!(eps > 0.0 && eps < 0.5)) throw Error::config("bias correction eps must lie in (0, 0.5)");

  auto centered_log = [&](const double* row, std::vector<double>& out) {
    double total = 0.0;
    for (int j = 0; j < J; ++j) out[j] = std::max(row[j], eps);
    for (int j = 0; j < J; ++j) total += out[j];
    double mean_log = 0.0;
    for (int j = 0; j < J; ++j) {
      out[j] = std::log(out[j] / total);
      mean_log += out[j];
    }
    mean_log /= static_cast<double>(J);
    for (int j = 0; j < J; ++j) out[j] -= mean_log;
  };

  std::vector<double> corrected(x_hat.size());
  std::vector<double> lp(J), lq(J), row(J);
  for (int i = 0; i < n; ++i) {
    const double* p = x_hat.data() + static_cast<std::size_t>(i) * J;
    for (int j = 0; j < J; ++j) row[j] = p[j] + bias[static_cast<std::size_t>(i) * J + j];
    centered_log(p, lp);
    centered_log(row.data(), lq);
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < J; ++j) {
      lp[j] = 2.0 * lp[j] - lq[j];
      mx = std::max(mx, lp[j]);
    }
    double total = 0.0;
    for (int j = 0; j < J; ++j) {
      lp[j] = std::exp(lp[j] - mx);
      total += lp[j];
    }
    for (int j = 0; j < J; ++j) corrected[static_cast<std::size_t>(i) * J + j] = lp[j] / total;
  }
  return corrected;
}

}  // namespace treatsel
