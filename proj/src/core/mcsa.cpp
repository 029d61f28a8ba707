#include "core/mcsa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace treatsel {

void StochasticProblem::validate() const {
  if (n < 1 || J < 1 || K < 0) throw Error::config("stochastic problem needs n >= 1 and J >= 1");
  if (static_cast<int>(mu.size()) != K + 1 || static_cast<int>(sigma.size()) != K + 1) {
    throw Error::config("stochastic problem expects K+1 mean and sd vectors");
  }
  if (static_cast<int>(c.size()) != K) throw Error::config("threshold count does not match K");
  const std::size_t len = static_cast<std::size_t>(n) * J;
  for (int k = 0; k <= K; ++k) {
    if (mu[k].size() != len || sigma[k].size() != len) {
      throw Error::config("stochastic problem vectors have wrong length");
    }
    for (double v : mu[k]) {
      if (!std::isfinite(v)) throw Error::data("stochastic problem means must be finite");
    }
    for (double s : sigma[k]) {
      if (!(s >= 0.0) || !std::isfinite(s)) {
        throw Error::data("stochastic problem standard deviations must be finite and >= 0");
      }
    }
  }
}

void simplex_project(std::span<double> v) {
  const std::size_t m = v.size();
  if (m == 1) {
    v[0] = 1.0;
    return;
  }
  static thread_local std::vector<double> sorted;
  sorted.assign(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cum = 0.0;
  double theta = 0.0;
  std::size_t rho = 0;
  for (std::size_t j = 0; j < m; ++j) {
    cum += sorted[j];
    double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0.0) {
      rho = j + 1;
      theta = t;
    }
  }
  (void)rho;
  double total = 0.0;
  for (auto& x : v) {
    x = std::max(0.0, x - theta);
    total += x;
  }
  if (total > 0.0) {
    for (auto& x : v) x /= total;
  } else {
    for (auto& x : v) x = 1.0 / static_cast<double>(m);
  }
}

void weighted_simplex_project(std::span<double> v, std::span<const double> w) {
  const std::size_t m = v.size();
  if (m == 1) {
    v[0] = 1.0;
    return;
  }
  // z_j(lambda) = max(0, v_j - lambda / (2 w_j)); sum is monotone decreasing
  // in lambda, solved by bisection on the dual multiplier.
  auto mass = [&](double lambda) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += std::max(0.0, v[j] - lambda / (2.0 * w[j]));
    return s;
  };
  double lo = 0.0, hi = 1.0;
  // Bracket: lambda <= 0 side first.
  if (mass(0.0) < 1.0) {
    lo = -1.0;
    while (mass(lo) < 1.0) {
      hi = lo;
      lo *= 2.0;
      if (lo < -1e18) throw Error::internal("weighted projection failed to bracket");
    }
    hi = lo / 2.0;
    std::swap(lo, hi);
    if (lo > hi) std::swap(lo, hi);
  } else {
    while (mass(hi) > 1.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e18) throw Error::internal("weighted projection failed to bracket");
    }
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10 * (1.0 + std::fabs(hi)); ++it) {
    double mid = 0.5 * (lo + hi);
    if (mass(mid) > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double lambda = 0.5 * (lo + hi);
  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    v[j] = std::max(0.0, v[j] - lambda / (2.0 * w[j]));
    total += v[j];
  }
  if (total > 0.0) {
    for (auto& x : v) x /= total;
  } else {
    for (auto& x : v) x = 1.0 / static_cast<double>(m);
  }
}

std::vector<double> estimate_constraints(const StochasticProblem& p, std::span<const double> x,
                                         int L, std::mt19937_64& rng) {
  if (L < 1) throw Error::config("constraint estimation needs L >= 1 samples");
  std::vector<double> g(static_cast<std::size_t>(p.K));
  std::normal_distribution<double> z;
  const std::size_t len = x.size();
  for (int k = 1; k <= p.K; ++k) {
    const auto& mu = p.mu[k];
    const auto& sd = p.sigma[k];
    double mean = -p.c[k - 1];
    double var = 0.0;
    for (std::size_t q = 0; q < len; ++q) {
      mean += mu[q] * x[q];
      double sx = sd[q] * x[q];
      var += sx * sx;
    }
    double noise = 0.0;
    if (var > 0.0) {
      double zbar = 0.0;
      for (int l = 0; l < L; ++l) zbar += z(rng);
      noise = std::sqrt(var) * zbar / static_cast<double>(L);
    }
    g[static_cast<std::size_t>(k - 1)] = mean + noise;
  }
  return g;
}

namespace {

// Sample a coefficient vector U ~ Normal(mu, diag(sigma^2)) into out.
void sample_vector(const std::vector<double>& mu, const std::vector<double>& sd,
                   std::vector<double>& out, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  out.resize(mu.size());
  for (std::size_t q = 0; q < mu.size(); ++q) {
    out[q] = sd[q] > 0.0 ? mu[q] + sd[q] * z(rng) : mu[q];
  }
}

}  // namespace

McsaResult mcsa_solve(const StochasticProblem& p, const McsaConfig& cfg) {
  p.validate();
  if (cfg.iterations < 1) throw Error::config("MCSA needs at least one iteration");
  if (!cfg.eta0.empty() && static_cast<int>(cfg.eta0.size()) != p.K) {
    throw Error::config("eta0 must either be empty or list one tolerance per constraint");
  }
  const std::size_t len = static_cast<std::size_t>(p.n) * p.J;
  const double sqrt_n_iters = std::sqrt(static_cast<double>(cfg.iterations));

  std::vector<double> eta0(static_cast<std::size_t>(p.K));
  for (int k = 0; k < p.K; ++k) {
    eta0[k] = cfg.eta0.empty() ? 0.05 * std::fabs(p.c[k]) + 0.01 : cfg.eta0[k];
  }

  // Step scale: for the Euclidean prox, match the domain diameter sqrt(2n)
  // against the expected gradient norm; the adaptive prox absorbs gradient
  // magnitude into its diagonal metric, so only the per-coordinate range
  // matters there.
  double grad_norm = 0.0;
  for (int k = 0; k <= p.K; ++k) {
    double s = 0.0;
    for (std::size_t q = 0; q < len; ++q) s += p.mu[k][q] * p.mu[k][q] + p.sigma[k][q] * p.sigma[k][q];
    grad_norm = std::max(grad_norm, std::sqrt(s));
  }
  double scale = cfg.prox == ProxKind::Sgd
                     ? std::sqrt(2.0 * p.n) / std::max(grad_norm, 1e-12)
                     : 2.0;
  const double gamma = cfg.gamma0 * scale / sqrt_n_iters;

  std::mt19937_64 rng(derive_seed(cfg.seed, "mcsa"));
  std::vector<double> x(len, 1.0 / static_cast<double>(p.J));
  std::vector<double> x_acc(len, 0.0);
  double w_acc = 0.0;
  long b_count = 0;
  std::vector<double> h;
  std::vector<double> h_sq;  // adagrad accumulator
  if (cfg.prox == ProxKind::Adagrad) h_sq.assign(len, 0.0);
  std::vector<int> violated;

  McsaResult res;
  if (cfg.record_trace) res.trace.reserve(static_cast<std::size_t>(cfg.iterations));

  for (long t = 0; t < cfg.iterations; ++t) {
    auto g = estimate_constraints(p, x, cfg.samples_per_step, rng);
    violated.clear();
    bool feasible = true;
    for (int k = 0; k < p.K; ++k) {
      if (g[k] > eta0[k] / sqrt_n_iters) {
        violated.push_back(k);
        feasible = false;
      }
    }

    int step_kind;
    if (feasible) {
      // Objective step: gradient of -x.U0 for the minimization view.
      sample_vector(p.mu[0], p.sigma[0], h, rng);
      for (auto& v : h) v = -v;
      step_kind = -1;
      for (std::size_t q = 0; q < len; ++q) x_acc[q] += gamma * x[q];
      w_acc += gamma;
      ++b_count;
    } else {
      int pick = violated.size() == 1
                     ? violated[0]
                     : violated[std::uniform_int_distribution<std::size_t>(0, violated.size() - 1)(rng)];
      sample_vector(p.mu[pick + 1], p.sigma[pick + 1], h, rng);
      step_kind = pick;
    }

    if (cfg.record_trace) {
      McsaTraceRow row;
      row.t = t;
      row.step = step_kind;
      row.eta_t = p.K > 0 ? eta0[static_cast<std::size_t>(std::max(0, step_kind))] / sqrt_n_iters : 0.0;
      row.in_b = feasible;
      row.g_hat = g;
      res.trace.push_back(std::move(row));
    }

    if (cfg.prox == ProxKind::Sgd) {
      for (std::size_t q = 0; q < len; ++q) x[q] -= 0.5 * gamma * h[q];
      for (int i = 0; i < p.n; ++i) {
        simplex_project(std::span<double>(x.data() + static_cast<std::size_t>(i) * p.J,
                                          static_cast<std::size_t>(p.J)));
      }
    } else {
      for (std::size_t q = 0; q < len; ++q) h_sq[q] += h[q] * h[q];
      static thread_local std::vector<double> weights;
      weights.resize(len);
      for (std::size_t q = 0; q < len; ++q) {
        weights[q] = cfg.adagrad_delta + std::sqrt(h_sq[q]);
        x[q] -= 0.5 * gamma * h[q] / weights[q];
      }
      for (int i = 0; i < p.n; ++i) {
        std::size_t off = static_cast<std::size_t>(i) * p.J;
        weighted_simplex_project(std::span<double>(x.data() + off, static_cast<std::size_t>(p.J)),
                                 std::span<const double>(weights.data() + off,
                                                         static_cast<std::size_t>(p.J)));
      }
    }
  }

  if (b_count == 0) {
    throw McsaNoProgressError(
        "MCSA made no objective step in " + std::to_string(cfg.iterations) +
            " iterations: every iterate looked infeasible at the requested tolerance",
        std::move(res.trace));
  }
  res.x_hat.resize(len);
  for (std::size_t q = 0; q < len; ++q) res.x_hat[q] = x_acc[q] / w_acc;
  res.objective_steps = b_count;
  res.iterations = cfg.iterations;
  res.final_g_hat = estimate_constraints(p, res.x_hat, cfg.samples_per_step, rng);
  return res;
}

}  // namespace treatsel
