#include "core/simplex_lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>

namespace treatsel {

void DeterministicProblem::validate() const {
  if (n < 1 || J < 1 || K < 0) throw Error::config("LP needs n >= 1 cohorts and J >= 1 arms");
  if (static_cast<int>(mu.size()) != K + 1) {
    throw Error::config("LP expects K+1 coefficient vectors, got " + std::to_string(mu.size()));
  }
  if (static_cast<int>(c.size()) != K) throw Error::config("LP threshold count does not match K");
  const std::size_t len = static_cast<std::size_t>(n) * J;
  for (const auto& v : mu) {
    if (v.size() != len) throw Error::config("LP coefficient vector has wrong length");
    for (double d : v) {
      if (!std::isfinite(d)) throw Error::data("LP coefficients must be finite");
    }
  }
  for (double d : c) {
    if (!std::isfinite(d)) throw Error::data("LP thresholds must be finite");
  }
}

namespace {

// Dense LU with partial pivoting for the K x K working systems.
struct DenseLU {
  int k = 0;
  std::vector<double> a;
  std::vector<int> piv;

  bool factor(const std::vector<double>& m, int kk) {
    k = kk;
    a = m;
    piv.resize(k);
    for (int col = 0; col < k; ++col) {
      int best = col;
      double mag = std::fabs(a[col * k + col]);
      for (int r = col + 1; r < k; ++r) {
        double v = std::fabs(a[r * k + col]);
        if (v > mag) {
          mag = v;
          best = r;
        }
      }
      if (mag < 1e-13) return false;
      piv[col] = best;
      if (best != col) {
        for (int cc = 0; cc < k; ++cc) std::swap(a[col * k + cc], a[best * k + cc]);
      }
      double d = a[col * k + col];
      for (int r = col + 1; r < k; ++r) {
        double f = a[r * k + col] / d;
        a[r * k + col] = f;
        for (int cc = col + 1; cc < k; ++cc) a[r * k + cc] -= f * a[col * k + cc];
      }
    }
    return true;
  }

  void solve(std::vector<double>& b) const {
    for (int col = 0; col < k; ++col) {
      if (piv[col] != col) std::swap(b[col], b[piv[col]]);
      for (int r = col + 1; r < k; ++r) b[r] -= a[r * k + col] * b[col];
    }
    for (int r = k - 1; r >= 0; --r) {
      for (int cc = r + 1; cc < k; ++cc) b[r] -= a[r * k + cc] * b[cc];
      b[r] /= a[r * k + r];
    }
  }
};

std::vector<double> transpose(const std::vector<double>& m, int k) {
  std::vector<double> t(m.size());
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) t[c * k + r] = m[r * k + c];
  }
  return t;
}

class GubSimplex {
 public:
  explicit GubSimplex(const DeterministicProblem& p)
      : n_(p.n), J_(p.J), K_(p.K), rhs_(p.c), obj_(p.mu[0]) {
    rows_.reserve(K_);
    for (int k = 0; k < K_; ++k) rows_.push_back(p.mu[k + 1].data());
    slack_base_ = static_cast<long>(n_) * J_;
    art_base_ = slack_base_ + K_;
    double cs = 1.0;
    for (double v : obj_) cs = std::max(cs, std::fabs(v));
    obj_scale_ = cs;
  }

  LpSolution solve();

 private:
  int n_, J_, K_;
  std::vector<double> rhs_;
  std::vector<double> exact_rhs_;
  std::vector<double> obj_;
  std::vector<const double*> rows_;
  long slack_base_ = 0;
  long art_base_ = 0;
  double obj_scale_ = 1.0;

  bool phase1_ = false;
  std::vector<int> key_;         // basic arm per cohort
  std::vector<double> val_key_;  // its value
  struct Extra {
    long col;
    double val;
  };
  std::vector<Extra> extras_;     // exactly K_ entries
  std::vector<double> key_sum_;   // per row: sum over cohorts of key coefficients
  std::vector<char> is_basic_;    // over all columns incl. slacks/artificials
  double objective_ = 0.0;

  // Per-iteration work vectors.
  std::vector<double> w_, wt_, y_;
  DenseLU lu_, lu_t_;

  int cohort_of(long col) const { return col < slack_base_ ? static_cast<int>(col / J_) : -1; }
  double a_of(int k, long col) const {
    if (col < slack_base_) return rows_[k][col];
    if (col < art_base_) return col - slack_base_ == k ? 1.0 : 0.0;
    return col - art_base_ == k ? -1.0 : 0.0;
  }
  double c_of(long col) const {
    if (phase1_) return col >= art_base_ ? -1.0 : 0.0;
    if (col < slack_base_) return obj_[col];
    return 0.0;
  }
  long key_col(int cohort) const { return static_cast<long>(cohort) * J_ + key_[cohort]; }

  void build_working_matrix() {
    w_.assign(static_cast<std::size_t>(K_) * K_, 0.0);
    for (int e = 0; e < K_; ++e) {
      long col = extras_[e].col;
      int ch = cohort_of(col);
      for (int k = 0; k < K_; ++k) {
        double v = a_of(k, col);
        if (ch >= 0) v -= a_of(k, key_col(ch));
        w_[static_cast<std::size_t>(k) * K_ + e] = v;
      }
    }
    if (K_ > 0) {
      wt_ = transpose(w_, K_);
      if (!lu_.factor(w_, K_) || !lu_t_.factor(wt_, K_)) {
        throw Error::internal("LP basis became singular");
      }
    }
  }

  // Duals for the coupling rows under current phase costs.
  void compute_duals() {
    y_.assign(K_, 0.0);
    if (K_ == 0) return;
    for (int e = 0; e < K_; ++e) {
      long col = extras_[e].col;
      int ch = cohort_of(col);
      y_[e] = c_of(col) - (ch >= 0 ? c_of(key_col(ch)) : 0.0);
    }
    lu_t_.solve(y_);
  }

  double reduced_cost(long col) const {
    int ch = cohort_of(col);
    double rc = c_of(col);
    for (int k = 0; k < K_; ++k) rc -= y_[k] * a_of(k, col);
    if (ch >= 0) {
      long kc = key_col(ch);
      double rck = c_of(kc);
      for (int k = 0; k < K_; ++k) rck -= y_[k] * a_of(k, kc);
      rc -= rck;
    }
    return rc;
  }

  void recompute_values() {
    std::vector<double> v(K_);
    for (int k = 0; k < K_; ++k) v[k] = rhs_[k] - key_sum_[k];
    if (K_ > 0) lu_.solve(v);
    for (int e = 0; e < K_; ++e) extras_[e].val = v[e];
    std::fill(val_key_.begin(), val_key_.end(), 1.0);
    for (int e = 0; e < K_; ++e) {
      int ch = cohort_of(extras_[e].col);
      if (ch >= 0) val_key_[ch] -= v[e];
    }
    objective_ = 0.0;
    for (int i = 0; i < n_; ++i) objective_ += c_of(key_col(i)) * val_key_[i];
    for (const auto& e : extras_) objective_ += c_of(e.col) * e.val;
  }

  struct Entering {
    long col = -1;
    double rc = 0.0;
  };

  Entering price_window(long start_cohort, long count, bool bland) const {
    Entering best;
    for (long w = 0; w < count; ++w) {
      int i = static_cast<int>((start_cohort + w) % n_);
      long kc = key_col(i);
      double base = c_of(kc);
      for (int k = 0; k < K_; ++k) base -= y_[k] * a_of(k, kc);
      for (int j = 0; j < J_; ++j) {
        long col = static_cast<long>(i) * J_ + j;
        if (is_basic_[col]) continue;
        double rc = c_of(col) - base;
        for (int k = 0; k < K_; ++k) rc -= y_[k] * rows_[k][col];
        if (rc > rc_tol()) {
          if (bland) {
            if (best.col < 0 || col < best.col) best = {col, rc};
          } else if (rc > best.rc) {
            best = {col, rc};
          }
        }
      }
    }
    for (int k = 0; k < K_; ++k) {
      long col = slack_base_ + k;
      if (is_basic_[col]) continue;
      double rc = c_of(col) - y_[k];
      if (rc > rc_tol()) {
        if (bland) {
          if (best.col < 0 || col < best.col) best = {col, rc};
        } else if (rc > best.rc) {
          best = {col, rc};
        }
      }
    }
    return best;
  }

  double rc_tol() const { return 1e-9 * obj_scale_; }

  // Returns false when the phase is optimal.
  bool iterate(long& cursor, bool bland, long window) {
    build_working_matrix();
    recompute_values();  // exact basis values every step; incremental updates
                         // drift after clamping and stall the ratio test
    compute_duals();
    Entering ent = bland ? price_window(0, n_, true) : price_window(cursor, std::min<long>(window, n_), false);
    if (ent.col < 0 && !bland) {
      ent = price_window(0, n_, false);  // full sweep before declaring optimal
    }
    cursor = (cursor + window) % std::max(1, n_);
    if (ent.col < 0) return false;

    // Direction: solve W d = r for the extras, then back out key deltas.
    std::vector<double> d(K_);
    {
      int ch = cohort_of(ent.col);
      for (int k = 0; k < K_; ++k) {
        double v = a_of(k, ent.col);
        if (ch >= 0) v -= a_of(k, key_col(ch));
        d[k] = v;
      }
      if (K_ > 0) lu_.solve(d);
    }
    // Key deltas: entering cohort gains +1, cohorts hosting structural extras
    // absorb the extra movement.
    std::vector<std::pair<int, double>> dkey;
    {
      int ch = cohort_of(ent.col);
      if (ch >= 0) dkey.emplace_back(ch, 1.0);
      for (int e = 0; e < K_; ++e) {
        int ce = cohort_of(extras_[e].col);
        if (ce < 0) continue;
        bool found = false;
        for (auto& [ci, dv] : dkey) {
          if (ci == ce) {
            dv -= d[e];
            found = true;
            break;
          }
        }
        if (!found) dkey.emplace_back(ce, -d[e]);
      }
    }

    const double ratio_tol = 1e-11;
    double theta = std::numeric_limits<double>::infinity();
    long leave_col = -1;
    int leave_kind = -1;  // 0 = key, 1 = extra
    int leave_idx = -1;
    auto consider = [&](double val, double dir, long col, int kind, int idx) {
      if (dir <= ratio_tol) return;
      double t = std::max(val, 0.0) / dir;
      if (t < theta - 1e-13 || (t < theta + 1e-13 && (leave_col < 0 || col < leave_col))) {
        theta = t;
        leave_col = col;
        leave_kind = kind;
        leave_idx = idx;
      }
    };
    for (auto& [ci, dv] : dkey) consider(val_key_[ci], dv, key_col(ci), 0, ci);
    for (int e = 0; e < K_; ++e) {
      consider(extras_[e].val, d[e], extras_[e].col, 1, e);
      // Artificials sit at zero in phase 2 and must not rise again.
      if (!phase1_ && extras_[e].col >= art_base_ && d[e] < -ratio_tol) {
        consider(0.0, 1.0, extras_[e].col, 1, e);  // forces theta = 0 at worst
      }
    }
    if (leave_col < 0) throw Error::internal("LP detected an unbounded direction on a bounded domain");

    // Move.
    for (auto& [ci, dv] : dkey) val_key_[ci] = std::max(0.0, val_key_[ci] - theta * dv);
    for (int e = 0; e < K_; ++e) extras_[e].val = std::max(0.0, extras_[e].val - theta * d[e]);
    objective_ += theta * ent.rc;

    if (const char* tr = std::getenv("TREATSEL_LP_TRACE"); tr && tr[0] >= '2') {
      std::fprintf(stderr, "piv ent=%ld rc=%.3e leave=%ld kind=%d theta=%.3e obj=%.12g\n", ent.col,
                   ent.rc, leave_col, leave_kind, theta, objective_);
      if (tr[0] >= '3') {
        std::fprintf(stderr, "  y:");
        for (int k = 0; k < K_; ++k) std::fprintf(stderr, " %.6e", y_[k]);
        double dres = 0.0;
        for (int e = 0; e < K_; ++e) {
          long col = extras_[e].col;
          int ch = cohort_of(col);
          double lhs = 0.0;
          for (int k = 0; k < K_; ++k) lhs += w_[static_cast<std::size_t>(k) * K_ + e] * y_[k];
          double r = c_of(col) - (ch >= 0 ? c_of(key_col(ch)) : 0.0);
          dres = std::max(dres, std::fabs(lhs - r));
        }
        std::fprintf(stderr, " dres=%.3e\n  extras:", dres);
        for (const auto& e : extras_) std::fprintf(stderr, " (%ld,%.6e)", e.col, e.val);
        std::fprintf(stderr, "\n  W:");
        for (int k = 0; k < K_; ++k) {
          for (int e = 0; e < K_; ++e)
            std::fprintf(stderr, " %.3e", w_[static_cast<std::size_t>(k) * K_ + e]);
          std::fprintf(stderr, " |");
        }
        std::fprintf(stderr, "\n  keys:");
        for (int i = 0; i < std::min(n_, 40); ++i)
          std::fprintf(stderr, " %d:%d=%.4e", i, key_[i], val_key_[i]);
        std::fprintf(stderr, "\n");
      }
    }

    // Swap basis columns.
    is_basic_[ent.col] = 1;
    is_basic_[leave_col] = 0;
    int ent_cohort = cohort_of(ent.col);
    if (leave_kind == 0) {
      int li = leave_idx;
      if (ent_cohort == li) {
        update_key(li, static_cast<int>(ent.col % J_), theta);
      } else {
        // Promote one of the leaving cohort's structural extras to key, then
        // store the entering column as that extra.
        int promote = -1;
        for (int e = 0; e < K_; ++e) {
          if (cohort_of(extras_[e].col) == li) {
            promote = e;
            break;
          }
        }
        if (promote < 0) throw Error::internal("LP key replacement failed");
        update_key(li, static_cast<int>(extras_[promote].col % J_), extras_[promote].val);
        extras_[promote] = {ent.col, theta};
      }
    } else {
      extras_[leave_idx] = {ent.col, theta};
    }
    return true;
  }

  void update_key(int cohort, int new_arm, double new_val) {
    long old_col = key_col(cohort);
    for (int k = 0; k < K_; ++k) key_sum_[k] -= a_of(k, old_col);
    key_[cohort] = new_arm;
    long nc = key_col(cohort);
    for (int k = 0; k < K_; ++k) key_sum_[k] += a_of(k, nc);
    val_key_[cohort] = new_val;
  }

  void certify(LpSolution& sol) const;
};

LpSolution GubSimplex::solve() {
  // Anti-degeneracy: relax each coupling row by a distinct tiny amount so
  // vertices where several rows bind at once (e.g. paired band rows with a
  // zero threshold) stop producing endless zero-length pivots. Reduced costs
  // never see the right-hand side, so the exact thresholds can be restored
  // at optimality and the basis stays dual feasible; certification then
  // measures the true residuals.
  exact_rhs_ = rhs_;
  for (int k = 0; k < K_; ++k) {
    const double u = 1.0 + static_cast<double>(mix64(k + 1) % 1048576) / 1048576.0;
    rhs_[k] += 1e-8 * u * (1.0 + std::fabs(rhs_[k]));
  }

  key_.assign(n_, 0);
  val_key_.assign(n_, 1.0);
  key_sum_.assign(K_, 0.0);
  is_basic_.assign(static_cast<std::size_t>(art_base_ + K_), 0);
  for (int i = 0; i < n_; ++i) {
    for (int k = 0; k < K_; ++k) key_sum_[k] += a_of(k, key_col(i));
    is_basic_[key_col(i)] = 1;
  }
  extras_.clear();
  phase1_ = false;
  for (int k = 0; k < K_; ++k) {
    double s = rhs_[k] - key_sum_[k];
    if (s >= 0.0) {
      extras_.push_back({slack_base_ + k, s});
      is_basic_[slack_base_ + k] = 1;
    } else {
      extras_.push_back({art_base_ + k, -s});
      is_basic_[art_base_ + k] = 1;
      phase1_ = true;
    }
  }

  LpSolution sol;
  const long window = std::max<long>(256, n_ / 16);
  const long max_iters = 200000 + 100L * (n_ + K_);
  long cursor = 0;
  long iters = 0;

  for (int phase = phase1_ ? 1 : 2; phase <= 2; ++phase) {
    phase1_ = (phase == 1);
    build_working_matrix();
    recompute_values();
    // Stall handling: blips below the meaningful-progress threshold (pivot
    // rounding, degenerate theta) must not reset the counter, or greedy
    // pricing can cycle on a degenerate plateau forever.
    bool bland = false;
    long degenerate_streak = 0;
    double stall_obj = objective_;
    while (true) {
      if (!iterate(cursor, bland, window)) break;
      ++iters;
      if (objective_ > stall_obj + 1e-9 * (1.0 + std::fabs(stall_obj))) {
        stall_obj = objective_;
        degenerate_streak = 0;
        bland = false;
      } else if (++degenerate_streak > 1000) {
        bland = true;
      }
      if (std::getenv("TREATSEL_LP_TRACE") && iters % 8192 == 0) {
        std::fprintf(stderr, "iters=%ld phase=%d obj=%.12g streak=%ld bland=%d\n", iters,
                     phase1_ ? 1 : 2, objective_, degenerate_streak, bland ? 1 : 0);
      }
      if (iters > max_iters) throw Error::internal("LP iteration limit exceeded");
    }
    if (phase == 1) {
      build_working_matrix();
      recompute_values();
      double art_mass = 0.0;
      for (const auto& e : extras_) {
        if (e.col >= art_base_) art_mass += std::max(0.0, e.val);
      }
      if (art_mass > 1e-7 * (1.0 + std::fabs(rhs_.empty() ? 0.0 : rhs_[0]))) {
        sol.status = LpStatus::Infeasible;
        sol.iterations = iters;
        return sol;
      }
    }
  }

  rhs_ = exact_rhs_;
  build_working_matrix();
  recompute_values();
  compute_duals();

  sol.status = LpStatus::Optimal;
  sol.iterations = iters;
  sol.x.assign(static_cast<std::size_t>(n_) * J_, 0.0);
  for (int i = 0; i < n_; ++i) sol.x[key_col(i)] = std::max(0.0, val_key_[i]);
  for (const auto& e : extras_) {
    if (e.col < slack_base_) sol.x[e.col] = std::max(0.0, e.val);
  }
  sol.objective = 0.0;
  for (std::size_t q = 0; q < sol.x.size(); ++q) sol.objective += obj_[q] * sol.x[q];
  sol.duals.assign(static_cast<std::size_t>(K_) + n_, 0.0);
  for (int k = 0; k < K_; ++k) sol.duals[k] = y_[k];
  for (int i = 0; i < n_; ++i) {
    long kc = key_col(i);
    double yc = c_of(kc);
    for (int k = 0; k < K_; ++k) yc -= y_[k] * a_of(k, kc);
    sol.duals[K_ + i] = yc;
  }
  certify(sol);
  return sol;
}

void GubSimplex::certify(LpSolution& sol) const {
  const double scale = 1.0 + std::fabs(sol.objective);
  double max_violation = 0.0;

  for (int i = 0; i < n_; ++i) {
    double row = 0.0;
    for (int j = 0; j < J_; ++j) row += sol.x[static_cast<std::size_t>(i) * J_ + j];
    max_violation = std::max(max_violation, std::fabs(row - 1.0));
  }
  std::vector<double> slack(K_);
  for (int k = 0; k < K_; ++k) {
    double lhs = 0.0;
    for (std::size_t q = 0; q < sol.x.size(); ++q) lhs += rows_[k][q] * sol.x[q];
    slack[k] = rhs_[k] - lhs;
    max_violation = std::max(max_violation, std::max(0.0, lhs - rhs_[k]) / (1.0 + std::fabs(rhs_[k])));
  }
  for (double v : sol.x) max_violation = std::max(max_violation, -v);
  sol.max_violation = max_violation;
  if (max_violation > 1e-6) {
    throw Error::internal("LP certification failed: primal violation " + std::to_string(max_violation));
  }

  // Dual feasibility: every column's reduced cost non-positive, multipliers of
  // the <= rows non-negative.
  const double dtol = 1e-6 * obj_scale_;
  for (int k = 0; k < K_; ++k) {
    if (sol.duals[k] < -dtol) {
      throw Error::internal("LP certification failed: negative coupling dual");
    }
  }
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < J_; ++j) {
      long col = static_cast<long>(i) * J_ + j;
      double rc = obj_[col] - sol.duals[static_cast<std::size_t>(K_) + i];
      for (int k = 0; k < K_; ++k) rc -= sol.duals[k] * rows_[k][col];
      if (rc > dtol) {
        throw Error::internal("LP certification failed: improving column remains (rc = " +
                              std::to_string(rc) + ")");
      }
      // Complementary slackness on structural variables.
      if (sol.x[col] > 1e-7 && std::fabs(rc) > 10 * dtol) {
        throw Error::internal("LP certification failed: complementary slackness (structural)");
      }
    }
  }
  for (int k = 0; k < K_; ++k) {
    if (std::fabs(sol.duals[k] * slack[k]) > 1e-5 * scale) {
      throw Error::internal("LP certification failed: complementary slackness (coupling row)");
    }
  }

  double dual_obj = 0.0;
  for (int k = 0; k < K_; ++k) dual_obj += sol.duals[k] * rhs_[k];
  for (int i = 0; i < n_; ++i) dual_obj += sol.duals[static_cast<std::size_t>(K_) + i];
  sol.gap = dual_obj - sol.objective;
  if (std::fabs(sol.gap) > 1e-6 * scale) {
    throw Error::internal("LP certification failed: duality gap " + std::to_string(sol.gap));
  }
}

}  // namespace

LpSolution saa_solve(const DeterministicProblem& p) {
  p.validate();
  GubSimplex solver(p);
  return solver.solve();
}

}  // namespace treatsel
