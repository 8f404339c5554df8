#pragma once

#include <stepmpc/qp_transcription.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace stepmpc {

enum class SolveStatus
{
  solved,
  max_iterations,
  primal_infeasible,
};

inline const char* to_string(SolveStatus status)
{
  switch (status)
  {
    case SolveStatus::solved: return "solved";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::primal_infeasible: return "primal_infeasible";
  }
  return "unknown";
}

/// Operator-splitting solver settings. Tolerances apply to unscaled
/// residuals, so reported accuracy does not depend on the equilibration.
struct SolverSettings
{
  double abs_tolerance = 1e-6;
  double rel_tolerance = 1e-6;
  int max_iterations = 4000;

  double rho = 0.1;            // base penalty on inequality rows
  double rho_eq_scale = 1e3;   // extra weight on equality (l == u) rows
  double rho_min = 1e-6;
  double rho_max = 1e6;
  double sigma = 1e-6;         // primal regularization in the KKT matrix
  double alpha = 1.6;          // over-relaxation

  int scaling_sweeps = 10;     // Ruiz equilibration passes (0 disables)
  int check_interval = 25;     // iterations between convergence checks
  bool adaptive_rho = true;
  int adaptive_rho_interval = 50;
  double adaptive_rho_threshold = 5.0;  // refactor when rho moves this much

  double infeasibility_tolerance = 1e-7;

  bool polish = true;          // active-set refinement after convergence
  double polish_delta = 1e-9;
  int polish_refine_steps = 3;
};

/// Primal/dual solution. dual_eq is free-signed; dual_ineq is non-negative.
struct QpSolution
{
  Eigen::VectorXd primal;
  Eigen::VectorXd dual_eq;
  Eigen::VectorXd dual_ineq;
  double objective = 0.0;
  SolveStatus status = SolveStatus::max_iterations;
  int iterations = 0;

  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  bool polished = false;
};

struct KktResiduals
{
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
};

/// First-order optimality of (solution) for (problem), evaluated on the
/// original, unscaled data.
inline KktResiduals kkt_residuals(const QpProblem& problem, const QpSolution& solution)
{
  KktResiduals r;
  Eigen::VectorXd stat = problem.hessian * solution.primal + problem.gradient;
  if (problem.eq_matrix.rows() > 0)
  {
    stat += problem.eq_matrix.transpose() * solution.dual_eq;
    r.primal = (problem.eq_matrix * solution.primal - problem.eq_rhs)
                   .cwiseAbs()
                   .maxCoeff();
  }
  if (problem.ineq_matrix.rows() > 0)
  {
    stat += problem.ineq_matrix.transpose() * solution.dual_ineq;
    const Eigen::VectorXd slack =
        problem.ineq_matrix * solution.primal - problem.ineq_rhs;
    r.primal = std::max(r.primal, slack.cwiseMax(0.0).maxCoeff());
    r.complementarity =
        (solution.dual_ineq.array() * slack.array()).abs().maxCoeff();
  }
  r.stationarity = stat.size() > 0 ? stat.cwiseAbs().maxCoeff() : 0.0;
  return r;
}

/// ADMM QP solver in the two-sided form
///   min 0.5 x' P x + q' x   s.t.  l <= A x <= u
/// with equalities folded in as l == u rows. One sparse LDL^T factorization
/// of the quasi-definite matrix [[P + sigma I, A'], [A, -diag(1/rho)]] is
/// reused across iterations and only rebuilt when the penalty is rescaled.
/// Identical inputs and settings produce bit-identical outputs: nothing in
/// the solve path depends on time, threads or addresses.
class AdmmQpSolver
{
public:
  explicit AdmmQpSolver(const SolverSettings& settings = {}) : settings_(settings) {}

  SolverSettings& settings() { return settings_; }
  const SolverSettings& settings() const { return settings_; }

  QpSolution solve(const QpProblem& problem,
                   const std::optional<QpSolution>& warm_start = std::nullopt)
  {
    setup(problem);
    if (warm_start && warm_start->primal.size() == n_ &&
        warm_start->dual_eq.size() == me_ && warm_start->dual_ineq.size() == m_ - me_)
    {
      x_ = (warm_start->primal.array() / d_.array()).matrix();
      Eigen::VectorXd y_un(m_);
      y_un.head(me_) = warm_start->dual_eq;
      y_un.tail(m_ - me_) = warm_start->dual_ineq;
      y_ = (c_ * y_un.array() / e_.array()).matrix();
      z_ = (a_scaled_ * x_).cwiseMax(l_scaled_).cwiseMin(u_scaled_);
    }
    else
    {
      x_.setZero(n_);
      z_.setZero(m_);
      y_.setZero(m_);
    }

    double best_score = std::numeric_limits<double>::infinity();
    Eigen::VectorXd y_prev_check = y_;

    SolveStatus status = SolveStatus::max_iterations;
    int iterations_used = settings_.max_iterations;
    double rp = std::numeric_limits<double>::infinity();
    double rd = std::numeric_limits<double>::infinity();

    for (int iter = 1; iter <= settings_.max_iterations; ++iter)
    {
      iterate();

      const bool checkpoint =
          iter % settings_.check_interval == 0 || iter == settings_.max_iterations;
      if (!checkpoint)
        continue;

      const Residuals res = unscaled_residuals();
      rp = res.rp;
      rd = res.rd;
      const double eps_p =
          settings_.abs_tolerance + settings_.rel_tolerance * res.rp_scale;
      const double eps_d =
          settings_.abs_tolerance + settings_.rel_tolerance * res.rd_scale;
      if (res.rp <= eps_p && res.rd <= eps_d)
      {
        status = SolveStatus::solved;
        iterations_used = iter;
        break;
      }

      const double score = std::max(res.rp, res.rd);
      if (score < best_score)
      {
        best_score = score;
        best_x_ = x_;
        best_y_ = y_;
        have_best_ = true;
      }

      if (m_ > 0 && detect_primal_infeasibility(y_ - y_prev_check))
      {
        status = SolveStatus::primal_infeasible;
        iterations_used = iter;
        break;
      }
      y_prev_check = y_;

      if (settings_.adaptive_rho && iter % settings_.adaptive_rho_interval == 0)
        adapt_rho(res);
    }

    if (status == SolveStatus::max_iterations && have_best_)
    {
      x_ = best_x_;
      y_ = best_y_;
    }

    QpSolution solution = extract(problem, status, iterations_used, rp, rd);
    if (status == SolveStatus::solved && settings_.polish)
      try_polish(problem, solution);
    return solution;
  }

private:
  struct Residuals
  {
    double rp = 0.0, rd = 0.0;
    double rp_scale = 0.0, rd_scale = 0.0;
    double ax_norm = 0.0, z_norm = 0.0;
    double px_norm = 0.0, aty_norm = 0.0, q_norm = 0.0;
  };

  static constexpr double kInf = 1e30;

  void setup(const QpProblem& problem)
  {
    n_ = problem.n_variables();
    me_ = static_cast<int>(problem.eq_matrix.rows());
    const int mi = static_cast<int>(problem.ineq_matrix.rows());
    m_ = me_ + mi;
    if (problem.hessian.rows() != n_ || problem.hessian.cols() != n_)
      throw std::invalid_argument("AdmmQpSolver: hessian dimension mismatch");
    if ((me_ > 0 && problem.eq_matrix.cols() != n_) ||
        (mi > 0 && problem.ineq_matrix.cols() != n_))
      throw std::invalid_argument("AdmmQpSolver: constraint dimension mismatch");

    q_orig_ = problem.gradient;
    cost_constant_ = problem.cost_constant;
    have_best_ = false;

    // Stack equalities over inequalities as two-sided rows.
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<size_t>(problem.eq_matrix.nonZeros() +
                                         problem.ineq_matrix.nonZeros()));
    for (int k = 0; k < problem.eq_matrix.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(problem.eq_matrix, k); it; ++it)
        triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                              it.value());
    for (int k = 0; k < problem.ineq_matrix.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(problem.ineq_matrix, k); it;
           ++it)
        triplets.emplace_back(me_ + static_cast<int>(it.row()),
                              static_cast<int>(it.col()), it.value());
    a_scaled_.resize(m_, n_);
    a_scaled_.setFromTriplets(triplets.begin(), triplets.end());

    l_orig_.resize(m_);
    u_orig_.resize(m_);
    l_orig_.head(me_) = problem.eq_rhs;
    u_orig_.head(me_) = problem.eq_rhs;
    l_orig_.tail(mi).setConstant(-kInf);
    u_orig_.tail(mi) = problem.ineq_rhs;

    p_scaled_ = problem.hessian;
    q_scaled_ = q_orig_;
    l_scaled_ = l_orig_;
    u_scaled_ = u_orig_;
    equilibrate();

    rho_bar_ = settings_.rho;
    build_rho();
    build_kkt();
  }

  void equilibrate()
  {
    d_ = Eigen::VectorXd::Ones(n_);
    e_ = Eigen::VectorXd::Ones(m_);
    c_ = 1.0;
    for (int sweep = 0; sweep < settings_.scaling_sweeps; ++sweep)
    {
      Eigen::VectorXd col_norm = Eigen::VectorXd::Zero(n_);
      for (int k = 0; k < p_scaled_.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(p_scaled_, k); it; ++it)
          col_norm(it.col()) = std::max(col_norm(it.col()), std::abs(it.value()));
      Eigen::VectorXd row_norm = Eigen::VectorXd::Zero(m_);
      for (int k = 0; k < a_scaled_.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(a_scaled_, k); it; ++it)
        {
          col_norm(it.col()) = std::max(col_norm(it.col()), std::abs(it.value()));
          row_norm(it.row()) = std::max(row_norm(it.row()), std::abs(it.value()));
        }

      Eigen::VectorXd dd(n_), ee(m_);
      for (int i = 0; i < n_; ++i)
        dd(i) = col_norm(i) > 0.0 ? 1.0 / std::sqrt(col_norm(i)) : 1.0;
      for (int i = 0; i < m_; ++i)
        ee(i) = row_norm(i) > 0.0 ? 1.0 / std::sqrt(row_norm(i)) : 1.0;

      scale_data(dd, ee);
      d_.array() *= dd.array();
      e_.array() *= ee.array();

      // Normalize the cost so the scaled Hessian and gradient live near 1.
      Eigen::VectorXd p_col = Eigen::VectorXd::Zero(n_);
      for (int k = 0; k < p_scaled_.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(p_scaled_, k); it; ++it)
          p_col(it.col()) = std::max(p_col(it.col()), std::abs(it.value()));
      const double p_mean = n_ > 0 ? p_col.mean() : 0.0;
      const double q_inf = q_scaled_.size() > 0 ? q_scaled_.cwiseAbs().maxCoeff() : 0.0;
      const double denom = std::max(p_mean, q_inf);
      if (denom > 0.0)
      {
        const double cc = 1.0 / denom;
        p_scaled_ *= cc;
        q_scaled_ *= cc;
        c_ *= cc;
      }
    }
  }

  void scale_data(const Eigen::VectorXd& dd, const Eigen::VectorXd& ee)
  {
    for (int k = 0; k < p_scaled_.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(p_scaled_, k); it; ++it)
        it.valueRef() *= dd(it.row()) * dd(it.col());
    for (int k = 0; k < a_scaled_.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(a_scaled_, k); it; ++it)
        it.valueRef() *= ee(it.row()) * dd(it.col());
    q_scaled_.array() *= dd.array();
    for (int i = 0; i < m_; ++i)
    {
      if (l_scaled_(i) > -kInf)
        l_scaled_(i) *= ee(i);
      if (u_scaled_(i) < kInf)
        u_scaled_(i) *= ee(i);
    }
  }

  void build_rho()
  {
    rho_vec_.resize(m_);
    rho_inv_.resize(m_);
    for (int i = 0; i < m_; ++i)
    {
      const bool is_eq = i < me_;
      const double rho = std::clamp(is_eq ? rho_bar_ * settings_.rho_eq_scale : rho_bar_,
                                    settings_.rho_min, settings_.rho_max);
      rho_vec_(i) = rho;
      rho_inv_(i) = 1.0 / rho;
    }
  }

  void build_kkt()
  {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<size_t>(p_scaled_.nonZeros() +
                                         2 * a_scaled_.nonZeros() + n_ + m_));
    for (int k = 0; k < p_scaled_.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(p_scaled_, k); it; ++it)
        triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                              it.value());
    for (int i = 0; i < n_; ++i)
      triplets.emplace_back(i, i, settings_.sigma);
    for (int k = 0; k < a_scaled_.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(a_scaled_, k); it; ++it)
      {
        triplets.emplace_back(n_ + static_cast<int>(it.row()),
                              static_cast<int>(it.col()), it.value());
        triplets.emplace_back(static_cast<int>(it.col()),
                              n_ + static_cast<int>(it.row()), it.value());
      }
    for (int i = 0; i < m_; ++i)
      triplets.emplace_back(n_ + i, n_ + i, -rho_inv_(i));

    kkt_.resize(n_ + m_, n_ + m_);
    kkt_.setFromTriplets(triplets.begin(), triplets.end());
    kkt_.makeCompressed();

    // Reuse the fill-reducing analysis when the sparsity pattern matches the
    // previous solve; in receding-horizon use it is identical every cycle.
    const Eigen::Index nnz = kkt_.nonZeros();
    const Eigen::Index outer = kkt_.outerSize() + 1;
    const bool same_pattern =
        symbolic_ready_ &&
        cached_outer_.size() == static_cast<size_t>(outer) &&
        cached_inner_.size() == static_cast<size_t>(nnz) &&
        std::equal(cached_outer_.begin(), cached_outer_.end(), kkt_.outerIndexPtr()) &&
        std::equal(cached_inner_.begin(), cached_inner_.end(), kkt_.innerIndexPtr());
    if (!same_pattern)
    {
      cached_outer_.assign(kkt_.outerIndexPtr(), kkt_.outerIndexPtr() + outer);
      cached_inner_.assign(kkt_.innerIndexPtr(), kkt_.innerIndexPtr() + nnz);
    }
    factorize(!same_pattern);
  }

  /// The -1/rho_i entry is the last stored entry of column n_ + i: the lower
  /// right block is diagonal, so no row below it appears in that column.
  void refresh_kkt_rho()
  {
    for (int i = 0; i < m_; ++i)
    {
      const Eigen::Index pos = kkt_.outerIndexPtr()[n_ + i + 1] - 1;
      kkt_.valuePtr()[pos] = -rho_inv_(i);
    }
    factorize(false);
  }

  void factorize(bool pattern_changed)
  {
    use_lu_ = false;
    if (pattern_changed || !symbolic_ready_)
    {
      ldlt_.analyzePattern(kkt_);
      symbolic_ready_ = true;
    }
    ldlt_.factorize(kkt_);
    if (ldlt_.info() != Eigen::Success)
    {
      lu_.compute(kkt_);
      if (lu_.info() != Eigen::Success)
        throw std::runtime_error("AdmmQpSolver: KKT factorization failed");
      use_lu_ = true;
    }
  }

  Eigen::VectorXd kkt_solve(const Eigen::VectorXd& rhs) const
  {
    return use_lu_ ? Eigen::VectorXd(lu_.solve(rhs)) : Eigen::VectorXd(ldlt_.solve(rhs));
  }

  void iterate()
  {
    Eigen::VectorXd rhs(n_ + m_);
    rhs.head(n_) = settings_.sigma * x_ - q_scaled_;
    rhs.tail(m_) = z_ - rho_inv_.cwiseProduct(y_);
    const Eigen::VectorXd sol = kkt_solve(rhs);

    const auto x_tilde = sol.head(n_);
    const Eigen::VectorXd z_tilde =
        z_ + rho_inv_.cwiseProduct(sol.tail(m_) - y_);

    const double alpha = settings_.alpha;
    x_ = alpha * x_tilde + (1.0 - alpha) * x_;
    const Eigen::VectorXd w =
        alpha * z_tilde + (1.0 - alpha) * z_ + rho_inv_.cwiseProduct(y_);
    z_ = w.cwiseMax(l_scaled_).cwiseMin(u_scaled_);
    y_ = rho_vec_.cwiseProduct(w - z_);
    // w - z is zero inside the bounds, so y keeps the correct sign pattern:
    // non-negative wherever only the upper bound can be active.
  }

  Residuals unscaled_residuals() const
  {
    Residuals r;
    const Eigen::VectorXd ax = a_scaled_ * x_;
    const Eigen::VectorXd ax_un = ax.cwiseQuotient(e_);
    const Eigen::VectorXd z_un = z_.cwiseQuotient(e_);
    r.ax_norm = m_ > 0 ? ax_un.cwiseAbs().maxCoeff() : 0.0;
    r.z_norm = m_ > 0 ? z_un.cwiseAbs().maxCoeff() : 0.0;
    r.rp = m_ > 0 ? (ax_un - z_un).cwiseAbs().maxCoeff() : 0.0;
    r.rp_scale = std::max(r.ax_norm, r.z_norm);

    const Eigen::VectorXd px_un =
        (p_scaled_ * x_).cwiseQuotient(d_) / c_;
    const Eigen::VectorXd aty_un =
        (a_scaled_.transpose() * y_).cwiseQuotient(d_) / c_;
    r.px_norm = n_ > 0 ? px_un.cwiseAbs().maxCoeff() : 0.0;
    r.aty_norm = n_ > 0 ? aty_un.cwiseAbs().maxCoeff() : 0.0;
    r.q_norm = q_orig_.size() > 0 ? q_orig_.cwiseAbs().maxCoeff() : 0.0;
    r.rd = n_ > 0 ? (px_un + q_orig_ + aty_un).cwiseAbs().maxCoeff() : 0.0;
    r.rd_scale = std::max({r.px_norm, r.q_norm, r.aty_norm});
    return r;
  }

  bool detect_primal_infeasibility(const Eigen::VectorXd& dy_scaled) const
  {
    const Eigen::VectorXd dy = dy_scaled.cwiseProduct(e_) / c_;
    const double dy_norm = dy.cwiseAbs().maxCoeff();
    if (dy_norm <= 1e-12)
      return false;
    const double eps = settings_.infeasibility_tolerance * dy_norm;

    const Eigen::VectorXd at_dy =
        (a_scaled_.transpose() * (dy_scaled / c_)).cwiseQuotient(d_);
    if (at_dy.cwiseAbs().maxCoeff() > eps)
      return false;

    double support = 0.0;
    for (int i = 0; i < m_; ++i)
    {
      const double dyi = std::abs(dy(i)) <= eps ? 0.0 : dy(i);
      if (dyi > 0.0 && u_orig_(i) >= kInf)
        return false;
      if (dyi < 0.0 && l_orig_(i) <= -kInf)
        return false;
      support += u_orig_(i) * std::max(dyi, 0.0) + l_orig_(i) * std::min(dyi, 0.0);
    }
    return support <= -eps;
  }

  void adapt_rho(const Residuals& res)
  {
    const double p = res.rp / std::max(res.rp_scale, 1e-12);
    const double d = res.rd / std::max(res.rd_scale, 1e-12);
    if (p <= 0.0 || d <= 0.0)
      return;
    const double rho_new =
        std::clamp(rho_bar_ * std::sqrt(p / d), settings_.rho_min, settings_.rho_max);
    const double ratio = rho_new / rho_bar_;
    if (ratio > settings_.adaptive_rho_threshold ||
        ratio < 1.0 / settings_.adaptive_rho_threshold)
    {
      rho_bar_ = rho_new;
      build_rho();
      refresh_kkt_rho();
    }
  }

  QpSolution extract(const QpProblem& problem, SolveStatus status, int iterations,
                     double rp, double rd) const
  {
    QpSolution s;
    s.status = status;
    s.iterations = iterations;
    s.primal_residual = rp;
    s.dual_residual = rd;
    s.primal = x_.cwiseProduct(d_);
    const Eigen::VectorXd y_un = y_.cwiseProduct(e_) / c_;
    s.dual_eq = y_un.head(me_);
    s.dual_ineq = y_un.tail(m_ - me_).cwiseMax(0.0);
    s.objective = 0.5 * s.primal.dot(problem.hessian * s.primal) +
                  q_orig_.dot(s.primal) + cost_constant_;
    return s;
  }

  /// Solves the delta-regularized reduced KKT system for a given active row
  /// set, with iterative refinement against the unregularized system.
  /// Returns false when the factorization breaks down.
  bool solve_reduced_kkt(const std::vector<int>& active, Eigen::VectorXd& t) const
  {
    const int na = static_cast<int>(active.size());

    Eigen::SparseMatrix<double> a_rows(na, n_);
    {
      std::vector<int> row_map(static_cast<size_t>(m_), -1);
      for (int r = 0; r < na; ++r)
        row_map[static_cast<size_t>(active[static_cast<size_t>(r)])] = r;
      std::vector<Eigen::Triplet<double>> at;
      at.reserve(static_cast<size_t>(a_scaled_.nonZeros()));
      for (int k = 0; k < a_scaled_.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(a_scaled_, k); it; ++it)
        {
          const int r = row_map[static_cast<size_t>(it.row())];
          if (r >= 0)
            at.emplace_back(r, static_cast<int>(it.col()), it.value());
        }
      a_rows.setFromTriplets(at.begin(), at.end());
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<size_t>(p_scaled_.nonZeros()) +
                     2 * static_cast<size_t>(a_rows.nonZeros()) +
                     static_cast<size_t>(n_ + na));
    for (int k = 0; k < p_scaled_.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(p_scaled_, k); it; ++it)
        triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                              it.value());
    for (int i = 0; i < n_; ++i)
      triplets.emplace_back(i, i, settings_.polish_delta);
    for (int k = 0; k < a_rows.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(a_rows, k); it; ++it)
      {
        triplets.emplace_back(n_ + static_cast<int>(it.row()),
                              static_cast<int>(it.col()), it.value());
        triplets.emplace_back(static_cast<int>(it.col()),
                              n_ + static_cast<int>(it.row()), it.value());
      }
    for (int i = 0; i < na; ++i)
      triplets.emplace_back(n_ + i, n_ + i, -settings_.polish_delta);

    Eigen::SparseMatrix<double> kkt(n_ + na, n_ + na);
    kkt.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(kkt);
    if (ldlt.info() != Eigen::Success)
      return false;

    Eigen::VectorXd rhs(n_ + na);
    rhs.head(n_) = -q_scaled_;
    for (int i = 0; i < na; ++i)
      rhs(n_ + i) = u_scaled_(active[static_cast<size_t>(i)]);

    t = ldlt.solve(rhs);
    for (int step = 0; step < settings_.polish_refine_steps; ++step)
    {
      Eigen::VectorXd residual = rhs;
      residual.head(n_) -= p_scaled_ * t.head(n_) + a_rows.transpose() * t.tail(na);
      residual.tail(na) -= a_rows * t.head(n_);
      t += ldlt.solve(residual);
    }
    return t.allFinite();
  }

  /// Active-set refinement: re-solves the equality-constrained QP defined by
  /// the constraints the duals mark active, then repairs the working set
  /// until it is consistent — rows whose multiplier comes out negative are
  /// dropped (redundant rows at degenerate vertices make the dual split
  /// non-unique) and inactive rows the candidate violates are pinned back.
  /// The result is kept only if it improves the unscaled KKT residuals.
  void try_polish(const QpProblem& problem, QpSolution& solution) const
  {
    std::vector<int> active;
    active.reserve(static_cast<size_t>(m_));
    std::vector<char> in_active(static_cast<size_t>(m_), 0);
    for (int i = 0; i < me_; ++i)
      active.push_back(i);
    for (int i = me_; i < m_; ++i)
      if (y_(i) > 0.0)
        active.push_back(i);
    for (const int i : active)
      in_active[static_cast<size_t>(i)] = 1;

    Eigen::VectorXd t;
    const double prune_tolerance = 1e-10;
    const double violation_tolerance = 1e-9;
    bool settled = false;
    for (int round = 0; round < 30; ++round)
    {
      if (!solve_reduced_kkt(active, t))
        return;
      // Equality rows always stay; inequality rows with clearly negative
      // multipliers should not have been pinned.
      std::vector<int> kept;
      kept.reserve(active.size());
      bool changed = false;
      for (size_t i = 0; i < active.size(); ++i)
      {
        const bool is_eq = active[i] < me_;
        if (is_eq || t(n_ + static_cast<int>(i)) >= -prune_tolerance)
        {
          kept.push_back(active[i]);
        }
        else
        {
          in_active[static_cast<size_t>(active[i])] = 0;
          changed = true;
        }
      }
      // Dropping redundant rows can let the candidate slide off constraints
      // that were never (or no longer) pinned; pin every row it violates.
      const Eigen::VectorXd ax = a_scaled_ * t.head(n_);
      for (int i = me_; i < m_; ++i)
      {
        if (in_active[static_cast<size_t>(i)])
          continue;
        if ((ax(i) - u_scaled_(i)) / e_(i) > violation_tolerance)
        {
          kept.push_back(i);
          in_active[static_cast<size_t>(i)] = 1;
          changed = true;
        }
      }
      active = std::move(kept);
      if (!changed)
      {
        settled = true;
        break;
      }
    }
    if (!settled)
      return;  // working set refuses to settle; keep the iterative solution
    const int na = static_cast<int>(active.size());

    QpSolution candidate = solution;
    candidate.primal = t.head(n_).cwiseProduct(d_);
    Eigen::VectorXd y_un = Eigen::VectorXd::Zero(m_);
    for (int i = 0; i < na; ++i)
    {
      const int row = active[static_cast<size_t>(i)];
      y_un(row) = t(n_ + i) * e_(row) / c_;
    }
    candidate.dual_eq = y_un.head(me_);
    candidate.dual_ineq = y_un.tail(m_ - me_).cwiseMax(0.0);

    const KktResiduals before = kkt_residuals(problem, solution);
    const KktResiduals after = kkt_residuals(problem, candidate);
    const double before_score =
        std::max({before.stationarity, before.primal, before.complementarity});
    const double after_score =
        std::max({after.stationarity, after.primal, after.complementarity});
    if (after_score <= before_score)
    {
      candidate.objective = 0.5 * candidate.primal.dot(problem.hessian * candidate.primal) +
                            q_orig_.dot(candidate.primal) + cost_constant_;
      candidate.primal_residual = after.primal;
      candidate.dual_residual = after.stationarity;
      candidate.polished = true;
      solution = candidate;
    }
  }

  SolverSettings settings_;

  int n_ = 0, me_ = 0, m_ = 0;
  Eigen::SparseMatrix<double> p_scaled_, a_scaled_, kkt_;
  Eigen::VectorXd q_scaled_, l_scaled_, u_scaled_;
  Eigen::VectorXd q_orig_, l_orig_, u_orig_;
  Eigen::VectorXd d_, e_;
  double c_ = 1.0;
  double cost_constant_ = 0.0;
  Eigen::VectorXd rho_vec_, rho_inv_;
  double rho_bar_ = 0.1;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  bool symbolic_ready_ = false;
  bool use_lu_ = false;
  std::vector<Eigen::SparseMatrix<double>::StorageIndex> cached_outer_, cached_inner_;

  Eigen::VectorXd x_, z_, y_;
  Eigen::VectorXd best_x_, best_y_;
  bool have_best_ = false;
};

}  // namespace stepmpc
