#pragma once

// Linear programming: minimize c.x subject to sparse rows (<=, =, >=) and
// x >= 0.
//
// The solver is a two-phase revised primal simplex. The basis is factorized
// with Eigen's SparseLU and updated between refactorizations with a
// product-form eta file. Pricing uses Devex weights with a switch to Bland's
// rule after a long run of degenerate pivots (or Bland throughout, on
// request); both are deterministic.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aaa/error.hpp"

namespace aaa::lp {

enum class Sense { less_equal, equal, greater_equal };

struct Term {
  int var;
  double coeff;
};

struct Constraint {
  std::vector<Term> terms;
  Sense sense;
  double rhs;
};

class LinearProgram {
 public:
  explicit LinearProgram(int num_vars) : num_vars_(num_vars), objective_(static_cast<std::size_t>(num_vars), 0.0) {
    require(num_vars >= 0, ErrorKind::invalid_parameter, "negative variable count");
  }

  int num_vars() const noexcept { return num_vars_; }
  std::span<const double> objective() const noexcept { return objective_; }
  const std::vector<Constraint>& constraints() const noexcept { return constraints_; }
  std::size_t num_constraints() const noexcept { return constraints_.size(); }

  void set_objective(int var, double coeff) {
    check_var(var);
    require(std::isfinite(coeff), ErrorKind::invalid_parameter, "non-finite objective coefficient");
    objective_[static_cast<std::size_t>(var)] = coeff;
  }

  void set_objective(std::span<const double> coeffs) {
    require(coeffs.size() == objective_.size(), ErrorKind::size_mismatch, "objective length differs from num_vars");
    for (std::size_t j = 0; j < coeffs.size(); ++j) set_objective(static_cast<int>(j), coeffs[j]);
  }

  /// Duplicate variables are summed and zero coefficients dropped.
  void add_constraint(std::vector<Term> terms, Sense sense, double rhs) {
    require(std::isfinite(rhs), ErrorKind::invalid_parameter, "non-finite right-hand side");
    for (const Term& t : terms) {
      check_var(t.var);
      require(std::isfinite(t.coeff), ErrorKind::invalid_parameter, "non-finite constraint coefficient");
    }
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    std::vector<Term> merged;
    merged.reserve(terms.size());
    for (const Term& t : terms) {
      if (!merged.empty() && merged.back().var == t.var) {
        merged.back().coeff += t.coeff;
      } else {
        merged.push_back(t);
      }
    }
    std::erase_if(merged, [](const Term& t) { return t.coeff == 0.0; });
    constraints_.push_back({std::move(merged), sense, rhs});
  }

  void add_dense_constraint(std::span<const double> row, Sense sense, double rhs) {
    require(row.size() == objective_.size(), ErrorKind::size_mismatch, "row length differs from num_vars");
    std::vector<Term> terms;
    for (std::size_t j = 0; j < row.size(); ++j) terms.push_back({static_cast<int>(j), row[j]});
    add_constraint(std::move(terms), sense, rhs);
  }

  /// Plain-text standard-form listing, one constraint per line.
  void write_listing(std::ostream& os) const {
    const auto old_precision = os.precision(17);
    os << "minimize\n ";
    for (int j = 0; j < num_vars_; ++j) {
      if (objective_[static_cast<std::size_t>(j)] != 0.0) os << ' ' << objective_[static_cast<std::size_t>(j)] << " x" << j;
    }
    os << "\nsubject to\n";
    for (const Constraint& c : constraints_) {
      os << ' ';
      for (const Term& t : c.terms) os << ' ' << t.coeff << " x" << t.var;
      os << (c.sense == Sense::less_equal ? " <= " : c.sense == Sense::equal ? " = " : " >= ") << c.rhs << '\n';
    }
    os << "bounds\n  x >= 0 for all " << num_vars_ << " variables\nend\n";
    os.precision(old_precision);
  }

 private:
  void check_var(int var) const {
    if (var < 0 || var >= num_vars_) {
      throw Error(ErrorKind::invalid_parameter,
                  "variable index " + std::to_string(var) + " outside [0, " + std::to_string(num_vars_) + ")");
    }
  }

  int num_vars_;
  std::vector<double> objective_;
  std::vector<Constraint> constraints_;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit, numerical_failure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::iteration_limit: return "iteration-limit";
    case Status::numerical_failure: return "numerical-failure";
  }
  return "unknown";
}

enum class Pricing {
  devex,  // Devex reference weights; Bland's rule once degenerate pivots stall
  bland,    // Bland's smallest-index rule throughout
};

struct SolveOptions {
  double feas_tol = 1e-9;
  double opt_tol = 1e-9;
  long max_iters = 2'000'000;
  Pricing pricing = Pricing::devex;
  int refactor_interval = 100;
  int stall_limit = 5000;  // consecutive degenerate pivots before Bland takes over
};

struct LpSolution {
  Status status = Status::numerical_failure;
  std::vector<double> x;
  double objective_value = std::numeric_limits<double>::quiet_NaN();
  long iterations = 0;
  /// Largest constraint violation of `x`, each row divided by max(1, max |coeff|).
  double max_violation = 0.0;
  /// Final basis in the solver's internal column numbering. It can seed
  /// another solve of a program with the same constraints.
  std::vector<int> basis;

  bool optimal() const noexcept { return status == Status::optimal; }
};

/// Scaled violation of every row at x, as reported in LpSolution::max_violation.
inline double max_constraint_violation(const LinearProgram& lp, std::span<const double> x) {
  double worst = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) worst = std::max(worst, -x[j]);
  for (const Constraint& c : lp.constraints()) {
    double lhs = 0.0;
    double scale = 1.0;
    for (const Term& t : c.terms) {
      lhs += t.coeff * x[static_cast<std::size_t>(t.var)];
      scale = std::max(scale, std::abs(t.coeff));
    }
    double v = 0.0;
    switch (c.sense) {
      case Sense::less_equal: v = lhs - c.rhs; break;
      case Sense::greater_equal: v = c.rhs - lhs; break;
      case Sense::equal: v = std::abs(lhs - c.rhs); break;
    }
    worst = std::max(worst, v / scale);
  }
  return worst;
}

namespace detail {

class RevisedSimplex {
 public:
  RevisedSimplex(const LinearProgram& lp, const SolveOptions& opts) : opts_(opts), n_struct_(lp.num_vars()) {
    build(lp);
  }

  LpSolution run(std::span<const int> warm_basis) {
    if (!warm_basis.empty() && try_warm_start(warm_basis)) {
      for (int j = first_artificial_; j < ncols_; ++j) upper_[j] = 0.0;
      return finish_phase2();
    }
    if (!refactor()) return finish(Status::numerical_failure);

    if (num_artificial_ > 0) {
      set_phase_costs(/*phase=*/1);
      const Status s1 = iterate(/*phase=*/1);
      if (s1 != Status::optimal) return finish(s1);
      if (!refactor()) return finish(Status::numerical_failure);
      double infeas = 0.0;
      for (int r = 0; r < m_; ++r) {
        if (is_artificial(basis_[r])) infeas = std::max(infeas, xb_[r]);
      }
      if (infeas > opts_.feas_tol) return finish(Status::infeasible);
      for (int j = first_artificial_; j < ncols_; ++j) upper_[j] = 0.0;
    }
    return finish_phase2();
  }

  long iterations() const noexcept { return iterations_; }

 private:
  struct Eta {
    int pivot_row;
    double pivot;
    std::vector<std::pair<int, double>> entries;  // excludes pivot_row
  };

  LpSolution finish_phase2() {
    set_phase_costs(/*phase=*/2);
    const Status s2 = iterate(/*phase=*/2);
    if (s2 != Status::optimal) return finish(s2);
    if (!refactor()) return finish(Status::numerical_failure);
    return finish(Status::optimal);
  }

  /// Installs a caller's basis if it is well formed, nonsingular and primal
  /// feasible with every artificial at zero; otherwise restores the default start.
  bool try_warm_start(std::span<const int> warm) {
    if (static_cast<int>(warm.size()) != m_) return false;
    const std::vector<int> cold_basis = basis_;
    std::vector<int> pos(static_cast<std::size_t>(ncols_), -1);
    for (int r = 0; r < m_; ++r) {
      const int col = warm[static_cast<std::size_t>(r)];
      if (col < 0 || col >= ncols_ || pos[col] >= 0) return false;
      pos[col] = r;
    }
    basis_.assign(warm.begin(), warm.end());
    bool ok = refactor();
    for (int r = 0; ok && r < m_; ++r) {
      ok = xb_[r] >= -opts_.feas_tol && !(is_artificial(basis_[r]) && xb_[r] > opts_.feas_tol);
    }
    if (ok) {
      pos_ = std::move(pos);
      return true;
    }
    basis_ = cold_basis;
    xb_ = b_;
    return false;
  }

  bool is_artificial(int col) const noexcept { return col >= first_artificial_; }

  void build(const LinearProgram& lp) {
    const auto& cons = lp.constraints();
    m_ = static_cast<int>(cons.size());
    b_.assign(static_cast<std::size_t>(m_), 0.0);

    // Structural columns from row-wise terms; every row equilibrated to max |a| = 1
    // and flipped so that its right-hand side is nonnegative.
    std::vector<std::vector<std::pair<int, double>>> cols(static_cast<std::size_t>(n_struct_));
    std::vector<double> slack_sign(static_cast<std::size_t>(m_), 0.0);
    for (int r = 0; r < m_; ++r) {
      const Constraint& c = cons[static_cast<std::size_t>(r)];
      double scale = 0.0;
      for (const Term& t : c.terms) scale = std::max(scale, std::abs(t.coeff));
      if (scale == 0.0) scale = 1.0;
      double sign = c.rhs < 0.0 ? -1.0 : 1.0;
      for (const Term& t : c.terms) cols[static_cast<std::size_t>(t.var)].emplace_back(r, sign * t.coeff / scale);
      b_[r] = sign * c.rhs / scale;
      if (c.sense == Sense::less_equal) slack_sign[r] = sign;
      if (c.sense == Sense::greater_equal) slack_sign[r] = -sign;
    }

    col_start_.push_back(0);
    auto push_col = [&](const std::vector<std::pair<int, double>>& entries) {
      for (const auto& [row, v] : entries) {
        row_idx_.push_back(row);
        val_.push_back(v);
      }
      col_start_.push_back(static_cast<int>(row_idx_.size()));
    };
    for (const auto& col : cols) push_col(col);

    basis_.assign(static_cast<std::size_t>(m_), -1);
    int next = n_struct_;
    for (int r = 0; r < m_; ++r) {
      if (slack_sign[r] == 0.0) continue;
      push_col({{r, slack_sign[r]}});
      if (slack_sign[r] > 0.0) basis_[r] = next;
      ++next;
    }
    first_artificial_ = next;
    for (int r = 0; r < m_; ++r) {
      if (basis_[r] >= 0) continue;
      push_col({{r, 1.0}});
      basis_[r] = next++;
      ++num_artificial_;
    }
    ncols_ = next;
    upper_.assign(static_cast<std::size_t>(ncols_), std::numeric_limits<double>::infinity());
    cost_.assign(static_cast<std::size_t>(ncols_), 0.0);
    orig_cost_.assign(lp.objective().begin(), lp.objective().end());
    pos_.assign(static_cast<std::size_t>(ncols_), -1);
    for (int r = 0; r < m_; ++r) pos_[basis_[r]] = r;
    xb_ = b_;
  }

  void set_phase_costs(int phase) {
    std::fill(cost_.begin(), cost_.end(), 0.0);
    if (phase == 1) {
      for (int j = first_artificial_; j < ncols_; ++j) cost_[j] = 1.0;
    } else {
      for (int j = 0; j < n_struct_; ++j) cost_[j] = orig_cost_[j];
    }
  }

  bool refactor() {
    etas_.clear();
    if (m_ == 0) return true;
    std::vector<Eigen::Triplet<double>> trips;
    for (int r = 0; r < m_; ++r) {
      const int col = basis_[r];
      for (int k = col_start_[col]; k < col_start_[col + 1]; ++k) trips.emplace_back(row_idx_[k], r, val_[k]);
    }
    Eigen::SparseMatrix<double> bmat(m_, m_);
    bmat.setFromTriplets(trips.begin(), trips.end());
    bmat.makeCompressed();
    lu_.analyzePattern(bmat);
    lu_.factorize(bmat);
    if (lu_.info() != Eigen::Success) return false;
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(b_.data(), m_);
    Eigen::VectorXd x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success || !x.allFinite()) return false;
    for (int r = 0; r < m_; ++r) xb_[r] = x[r];
    return true;
  }

  /// alpha = B^{-1} a_col.
  void ftran(int col, Eigen::VectorXd& out) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(m_);
    for (int k = col_start_[col]; k < col_start_[col + 1]; ++k) a[row_idx_[k]] = val_[k];
    out = lu_.solve(a);
    for (const Eta& e : etas_) {
      const double vp = out[e.pivot_row] / e.pivot;
      if (vp != 0.0) {
        for (const auto& [i, a_i] : e.entries) out[i] -= a_i * vp;
      }
      out[e.pivot_row] = vp;
    }
  }

  /// y^T = c_B^T B^{-1}.
  void btran(Eigen::VectorXd& y) {
    Eigen::VectorXd v(m_);
    for (int r = 0; r < m_; ++r) v[r] = cost_[basis_[r]];
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = v[it->pivot_row];
      for (const auto& [i, a_i] : it->entries) s -= v[i] * a_i;
      v[it->pivot_row] = s / it->pivot;
    }
    y = lu_.transpose().solve(v);
  }

  double reduced_cost(int col, const Eigen::VectorXd& y) const {
    double d = cost_[col];
    for (int k = col_start_[col]; k < col_start_[col + 1]; ++k) d -= y[row_idx_[k]] * val_[k];
    return d;
  }

  /// rho^T = e_r^T B^{-1}, the r-th row of the basis inverse.
  void btran_unit(int r, Eigen::VectorXd& rho) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m_);
    v[r] = 1.0;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = v[it->pivot_row];
      for (const auto& [i, a_i] : it->entries) s -= v[i] * a_i;
      v[it->pivot_row] = s / it->pivot;
    }
    rho = lu_.transpose().solve(v);
  }

  bool eligible(int j, int phase) const noexcept {
    return pos_[j] < 0 && upper_[j] > 0.0 && !(phase == 2 && is_artificial(j));
  }

  void recompute_reduced_costs() {
    Eigen::VectorXd y;
    btran(y);
    for (int j = 0; j < ncols_; ++j) d_[j] = pos_[j] >= 0 ? 0.0 : reduced_cost(j, y);
  }

  int choose_entering(int phase, bool use_bland) const {
    int entering = -1;
    double best = 0.0;
    for (int j = 0; j < ncols_; ++j) {
      if (!eligible(j, phase) || d_[j] >= -opts_.opt_tol) continue;
      if (use_bland) return j;
      const double score = d_[j] * d_[j] / weight_[j];
      if (score > best) {
        best = score;
        entering = j;
      }
    }
    return entering;
  }

  Status iterate(int phase) {
    Eigen::VectorXd alpha;
    Eigen::VectorXd rho;
    std::vector<double> row(static_cast<std::size_t>(ncols_), 0.0);
    d_.assign(static_cast<std::size_t>(ncols_), 0.0);
    weight_.assign(static_cast<std::size_t>(ncols_), 1.0);
    recompute_reduced_costs();
    int degenerate_run = 0;
    bool verified = false;
    while (true) {
      if (iterations_ >= opts_.max_iters) return Status::iteration_limit;
      if (static_cast<int>(etas_.size()) >= opts_.refactor_interval) {
        if (!refactor()) return Status::numerical_failure;
        recompute_reduced_costs();
      }

      const bool use_bland = opts_.pricing == Pricing::bland || degenerate_run >= opts_.stall_limit;
      const int entering = choose_entering(phase, use_bland);
      if (entering < 0) {
        // Optimality is only declared on freshly computed reduced costs.
        if (verified) return Status::optimal;
        if (!refactor()) return Status::numerical_failure;
        recompute_reduced_costs();
        verified = true;
        continue;
      }
      verified = false;

      ftran(entering, alpha);
      // Pivots are accepted relative to the largest entry of the column.
      const double piv_tol = std::max(1e-9, 1e-7 * alpha.cwiseAbs().maxCoeff());

      // Ratio test. Bland: minimum ratio, ties to the smallest column index.
      // Otherwise Harris' two passes: bound the step with a small feasibility
      // relaxation, then take the largest pivot among rows inside the bound.
      int leave = -1;
      double theta = std::numeric_limits<double>::infinity();
      auto ratio = [&](int r, double relax) {
        const double a = alpha[r];
        const int col = basis_[r];
        if (a > piv_tol) return (std::max(xb_[r], 0.0) + relax) / a;
        if (a < -piv_tol && std::isfinite(upper_[col])) return (upper_[col] - std::min(xb_[r], upper_[col]) + relax) / -a;
        return std::numeric_limits<double>::infinity();
      };
      if (use_bland) {
        for (int r = 0; r < m_; ++r) {
          const double t = ratio(r, 0.0);
          if (!std::isfinite(t)) continue;
          const bool tie = leave >= 0 && std::abs(t - theta) <= 1e-12;
          if (leave < 0 || t < theta - 1e-12 || (tie && basis_[r] < basis_[leave])) {
            theta = tie ? std::min(theta, t) : t;
            leave = r;
          }
        }
      } else {
        double bound = std::numeric_limits<double>::infinity();
        for (int r = 0; r < m_; ++r) bound = std::min(bound, ratio(r, opts_.feas_tol));
        if (std::isfinite(bound)) {
          double best_pivot = 0.0;
          for (int r = 0; r < m_; ++r) {
            const double t = ratio(r, 0.0);
            if (t <= bound && std::abs(alpha[r]) > best_pivot) {
              best_pivot = std::abs(alpha[r]);
              leave = r;
              theta = t;
            }
          }
        }
      }
      if (leave < 0) return Status::unbounded;
      theta = std::max(theta, 0.0);
      degenerate_run = theta <= 1e-12 ? degenerate_run + 1 : 0;

      // Pivot row over the nonbasic columns, for the reduced-cost and weight updates.
      const double pivot = alpha[leave];
      const int leaving = basis_[leave];
      btran_unit(leave, rho);
      const double dq = d_[entering];
      const double wq = weight_[entering];
      for (int j = 0; j < ncols_; ++j) {
        if (pos_[j] >= 0 || j == entering) continue;
        double a = 0.0;
        for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) a += rho[row_idx_[k]] * val_[k];
        if (a == 0.0) continue;
        const double ratio_j = a / pivot;
        d_[j] -= dq * ratio_j;
        weight_[j] = std::max(weight_[j], ratio_j * ratio_j * wq);
      }
      d_[entering] = 0.0;
      d_[leaving] = -dq / pivot;
      weight_[leaving] = std::max(wq / (pivot * pivot), 1.0);

      for (int r = 0; r < m_; ++r) xb_[r] -= theta * alpha[r];
      xb_[leave] = theta;
      pos_[leaving] = -1;
      basis_[leave] = entering;
      pos_[entering] = leave;

      Eta eta{leave, pivot, {}};
      for (int r = 0; r < m_; ++r) {
        if (r != leave && std::abs(alpha[r]) > 1e-14) eta.entries.emplace_back(r, alpha[r]);
      }
      etas_.push_back(std::move(eta));
      ++iterations_;
    }
  }

  LpSolution finish(Status status) const {
    LpSolution sol;
    sol.status = status;
    sol.iterations = iterations_;
    if (status != Status::optimal) return sol;
    sol.basis = basis_;
    sol.x.assign(static_cast<std::size_t>(n_struct_), 0.0);
    for (int r = 0; r < m_; ++r) {
      if (basis_[r] < n_struct_) sol.x[basis_[r]] = xb_[r];
    }
    for (double& v : sol.x) {
      if (v < 0.0 && v >= -opts_.feas_tol) v = 0.0;
    }
    double obj = 0.0;
    for (int j = 0; j < n_struct_; ++j) obj += orig_cost_[j] * sol.x[j];
    sol.objective_value = obj;
    return sol;
  }

  SolveOptions opts_;
  int n_struct_;
  int m_ = 0;
  int ncols_ = 0;
  int first_artificial_ = 0;
  int num_artificial_ = 0;
  long iterations_ = 0;

  std::vector<int> col_start_;
  std::vector<int> row_idx_;
  std::vector<double> val_;
  std::vector<double> b_;
  std::vector<double> upper_;
  std::vector<double> cost_;
  std::vector<double> orig_cost_;
  std::vector<int> basis_;
  std::vector<int> pos_;
  std::vector<double> xb_;
  std::vector<Eta> etas_;
  std::vector<double> d_;       // reduced costs, exact after each refactor
  std::vector<double> weight_;  // Devex reference weights
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
};

}  // namespace detail

/// Solves `lp`. A `warm_basis` taken from an earlier solution of a program
/// with identical constraints skips phase one when it is still feasible.
inline LpSolution solve(const LinearProgram& lp, const SolveOptions& opts = {}, std::span<const int> warm_basis = {}) {
  detail::RevisedSimplex simplex(lp, opts);
  LpSolution sol = simplex.run(warm_basis);
  if (sol.optimal()) {
    sol.max_violation = max_constraint_violation(lp, sol.x);
    // An optimal answer must be feasible; anything else is lost precision.
    if (sol.max_violation > 1e3 * opts.feas_tol) sol.status = Status::numerical_failure;
  }
  return sol;
}

}  // namespace aaa::lp
