#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "core/common.hpp"

namespace treatsel {

// Chance-style assignment problem with independent normal uncertainty on
// every coefficient:
//   maximize   E[U_0] . x   subject to  E[U_k . x] <= c[k-1],  x in product of simplices,
// where U_k ~ Normal(mu[k], diag(sigma[k]^2)).
struct StochasticProblem {
  int n = 0;
  int J = 0;
  int K = 0;
  std::vector<std::vector<double>> mu;     // K+1 vectors of length n*J, objective first
  std::vector<std::vector<double>> sigma;  // matching elementwise standard deviations
  std::vector<double> c;                   // K thresholds

  void validate() const;
};

enum class ProxKind { Sgd, Adagrad };

struct McsaConfig {
  long iterations = 10000;   // N
  int samples_per_step = 50; // L constraint samples per iteration
  double gamma0 = 1.0;       // step scale multiplier; the base step is gamma0 * S / sqrt(N)
                             // with S matched to the domain diameter and gradient norm
  std::vector<double> eta0;  // per-constraint tolerance scale; empty = 0.05*|c_k| + 0.01
  ProxKind prox = ProxKind::Sgd;
  double adagrad_delta = 1e-6;
  std::uint64_t seed = 0;
  bool record_trace = true;
};

struct McsaTraceRow {
  long t = 0;
  int step = -1;  // -1 objective step, otherwise the violated constraint index
  double eta_t = 0.0;
  bool in_b = false;
  std::vector<double> g_hat;  // K estimates at the iterate
};

struct McsaResult {
  std::vector<double> x_hat;  // n*J
  long objective_steps = 0;   // |B|
  long iterations = 0;
  std::vector<double> final_g_hat;  // fresh estimate at x_hat
  std::vector<McsaTraceRow> trace;  // empty unless record_trace
};

// Raised when no iterate ever looked feasible (B stayed empty).
class McsaNoProgressError : public Error {
 public:
  McsaNoProgressError(std::string msg, std::vector<McsaTraceRow> tr)
      : Error(Status::Infeasible, std::move(msg)), trace(std::move(tr)) {}
  std::vector<McsaTraceRow> trace;
};

McsaResult mcsa_solve(const StochasticProblem& p, const McsaConfig& cfg);

// Monte Carlo constraint estimates (1/L) sum_l (x . U_{k,l} - c_k); the
// projected scalar is sampled from its exact normal law.
std::vector<double> estimate_constraints(const StochasticProblem& p, std::span<const double> x,
                                         int L, std::mt19937_64& rng);

// Euclidean projection onto the probability simplex, in place.
void simplex_project(std::span<double> v);

// Projection under the weighted norm sum_j w_j (z_j - v_j)^2, w_j > 0.
void weighted_simplex_project(std::span<double> v, std::span<const double> w);

}  // namespace treatsel
