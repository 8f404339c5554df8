#pragma once

#include <stepmpc/contact_constraints.hpp>
#include <stepmpc/cost_builder.hpp>
#include <stepmpc/momentum_model.hpp>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stepmpc {

/// Stacked decision vector chi = [gamma(1); f(0); gamma(2); f(1); ...;
/// gamma(N); f(N-1)], one 21-wide block per stage.
struct ChiLayout
{
  static constexpr int state_dim = 9;
  static constexpr int control_dim = 12;
  static constexpr int block_dim = state_dim + control_dim;

  int n_stages = 0;

  explicit ChiLayout(int stages) : n_stages(stages)
  {
    if (stages < 1)
      throw std::invalid_argument("ChiLayout: n_stages must be >= 1");
  }

  int total_dim() const { return block_dim * n_stages; }

  /// Column of gamma(k), k in [1, n_stages].
  int state_offset(int k) const
  {
    if (k < 1 || k > n_stages)
      throw std::out_of_range("ChiLayout::state_offset: k must be in [1, n_stages]");
    return block_dim * (k - 1);
  }

  /// Column of f(k), k in [0, n_stages - 1].
  int control_offset(int k) const
  {
    if (k < 0 || k >= n_stages)
      throw std::out_of_range("ChiLayout::control_offset: k must be in [0, n_stages)");
    return block_dim * k + state_dim;
  }
};

/// Sparse QP in the form
///   min 0.5 chi' H chi + g' chi + const
///   s.t. eq_matrix chi = eq_rhs, ineq_matrix chi <= ineq_rhs.
struct QpProblem
{
  Eigen::SparseMatrix<double> hessian;
  Eigen::VectorXd gradient;
  Eigen::SparseMatrix<double> eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::SparseMatrix<double> ineq_matrix;
  Eigen::VectorXd ineq_rhs;
  double cost_constant = 0.0;

  int n_variables() const { return static_cast<int>(gradient.size()); }
};

namespace detail {

inline void add_block(std::vector<Eigen::Triplet<double>>& triplets, int row0, int col0,
                      const Eigen::Ref<const Eigen::MatrixXd>& block)
{
  for (int c = 0; c < block.cols(); ++c)
    for (int r = 0; r < block.rows(); ++r)
      if (block(r, c) != 0.0)
        triplets.emplace_back(row0 + r, col0 + c, block(r, c));
}

inline void add_diagonal(std::vector<Eigen::Triplet<double>>& triplets, int row0,
                         int col0, const Eigen::Ref<const Eigen::VectorXd>& diag,
                         double scale = 1.0)
{
  for (int i = 0; i < diag.size(); ++i)
    if (diag(i) * scale != 0.0)
      triplets.emplace_back(row0 + i, col0 + i, diag(i) * scale);
}

}  // namespace detail

/// Dynamics equalities. Row block k (k = 0..N-1) encodes
///   ev * gamma(k) - gamma(k+1) + f * f(k) = -g - s0
/// with the known gamma(0) term moved to the right-hand side of block 0, so a
/// trajectory rolled out with the same DiscreteModel has zero residual. Each
/// row block only touches the two neighbouring 21-wide column blocks.
inline void build_equality(const DiscreteModel& model, const Vector9d& gamma0,
                           const ChiLayout& layout,
                           Eigen::SparseMatrix<double>& eq_matrix,
                           Eigen::VectorXd& eq_rhs)
{
  const int n = layout.n_stages;
  const int rows = ChiLayout::state_dim * n;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(n) * 120);
  eq_rhs.resize(rows);

  const Eigen::MatrixXd minus_identity = -Eigen::MatrixXd::Identity(9, 9);
  for (int k = 0; k < n; ++k)
  {
    const int row0 = ChiLayout::state_dim * k;
    detail::add_block(triplets, row0, layout.state_offset(k + 1), minus_identity);
    detail::add_block(triplets, row0, layout.control_offset(k), model.f);
    if (k > 0)
      detail::add_block(triplets, row0, layout.state_offset(k), model.ev);
    eq_rhs.segment<9>(row0) = -model.g - model.s0;
  }
  eq_rhs.head<9>() -= model.ev * gamma0;

  eq_matrix.resize(rows, layout.total_dim());
  eq_matrix.setFromTriplets(triplets.begin(), triplets.end());
}

/// Contact inequalities: one stance block per foot per stage, left foot
/// first, acting on that stage's control columns. Only the right foot's
/// normal-force bounds react to impact_stage (stage < impact_stage means the
/// foot is still in flight), so the row count is constant across phases.
inline void build_inequalities(const StanceConstraintBlock& left_block,
                               const StanceConstraintBlock& right_block,
                               int impact_stage, const ChiLayout& layout,
                               const FootParams& params,
                               Eigen::SparseMatrix<double>& ineq_matrix,
                               Eigen::VectorXd& ineq_rhs)
{
  const int n = layout.n_stages;
  const int rows_per_stage = left_block.rows() + right_block.rows();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(n * rows_per_stage) * 3);
  ineq_rhs.resize(static_cast<Eigen::Index>(n) * rows_per_stage);

  for (int k = 0; k < n; ++k)
  {
    const int col_left = layout.control_offset(k);
    const int col_right = col_left + 6;
    const int row_left = rows_per_stage * k;
    const int row_right = row_left + left_block.rows();

    detail::add_block(triplets, row_left, col_left, left_block.a);
    ineq_rhs.segment(row_left, left_block.rows()) = left_block.b;

    detail::add_block(triplets, row_right, col_right, right_block.a);
    ineq_rhs.segment(row_right, right_block.rows()) = right_block.b;
    const auto [lower, upper] = normal_force_bounds(k, impact_stage, params);
    ineq_rhs(row_right + right_block.lower_bound_row()) = -lower;
    ineq_rhs(row_right + right_block.upper_bound_row()) = upper;
  }

  ineq_matrix.resize(static_cast<Eigen::Index>(n) * rows_per_stage, layout.total_dim());
  ineq_matrix.setFromTriplets(triplets.begin(), triplets.end());
}

/// Quadratic objective in chi. The rate term couples consecutive control
/// blocks with -k_df off-diagonals; f(-1) is the previous applied wrench and
/// only contributes to f(0)'s gradient and to the constant.
inline void build_cost(const CostWeights& weights, const ReferenceTrajectory& references,
                       int impact_stage_clamped, const Vector12d& f_prev,
                       const ChiLayout& layout, Eigen::SparseMatrix<double>& hessian,
                       Eigen::VectorXd& gradient, double& cost_constant)
{
  const int n = layout.n_stages;
  if (references.n_stages() != n)
    throw std::invalid_argument("build_cost: reference horizon mismatch");
  weights.validate();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(n) * 60);
  gradient = Eigen::VectorXd::Zero(layout.total_dim());
  cost_constant = 0.0;

  for (int k = 1; k <= n; ++k)
  {
    const Vector9d w = stage_cost_weight(k, impact_stage_clamped, n, weights);
    const int off = layout.state_offset(k);
    detail::add_diagonal(triplets, off, off, w);
    const Vector9d& ref = references.stage_refs[k - 1];
    gradient.segment<9>(off) = -(w.asDiagonal() * ref);
    cost_constant += 0.5 * ref.dot(w.asDiagonal() * ref);
  }

  for (int k = 0; k < n; ++k)
  {
    const int off = layout.control_offset(k);
    const double rate_terms = (k == n - 1) ? 1.0 : 2.0;
    const Vector12d diag = weights.k_f + rate_terms * weights.k_df;
    detail::add_diagonal(triplets, off, off, diag);
    if (k > 0)
    {
      const int prev = layout.control_offset(k - 1);
      detail::add_diagonal(triplets, off, prev, weights.k_df, -1.0);
      detail::add_diagonal(triplets, prev, off, weights.k_df, -1.0);
    }
  }
  gradient.segment<12>(layout.control_offset(0)) -= weights.k_df.asDiagonal() * f_prev;
  cost_constant += 0.5 * f_prev.dot(weights.k_df.asDiagonal() * f_prev);

  hessian.resize(layout.total_dim(), layout.total_dim());
  hessian.setFromTriplets(triplets.begin(), triplets.end());
}

/// Packs a per-stage trajectory into chi and back.
inline Eigen::VectorXd pack_chi(const HorizonTrajectory& trajectory,
                                const ChiLayout& layout)
{
  if (static_cast<int>(trajectory.states.size()) != layout.n_stages ||
      static_cast<int>(trajectory.controls.size()) != layout.n_stages)
    throw std::invalid_argument("pack_chi: horizon mismatch");
  Eigen::VectorXd chi(layout.total_dim());
  for (int k = 0; k < layout.n_stages; ++k)
  {
    chi.segment<9>(layout.state_offset(k + 1)) = trajectory.states[k];
    chi.segment<12>(layout.control_offset(k)) = trajectory.controls[k];
  }
  return chi;
}

inline HorizonTrajectory unpack_chi(const Eigen::VectorXd& chi, const ChiLayout& layout)
{
  if (chi.size() != layout.total_dim())
    throw std::invalid_argument("unpack_chi: dimension mismatch");
  HorizonTrajectory trajectory;
  trajectory.states.resize(static_cast<size_t>(layout.n_stages));
  trajectory.controls.resize(static_cast<size_t>(layout.n_stages));
  for (int k = 0; k < layout.n_stages; ++k)
  {
    trajectory.states[k] = chi.segment<9>(layout.state_offset(k + 1));
    trajectory.controls[k] = chi.segment<12>(layout.control_offset(k));
  }
  return trajectory;
}

/// Full transcription of one control cycle.
inline QpProblem assemble_qp(const DiscreteModel& model, const Vector9d& gamma0,
                             const StanceConstraintBlock& left_block,
                             const StanceConstraintBlock& right_block, int impact_stage,
                             const FootParams& params, const CostWeights& weights,
                             const ReferenceTrajectory& references,
                             const Vector12d& f_prev, const ChiLayout& layout)
{
  QpProblem qp;
  build_equality(model, gamma0, layout, qp.eq_matrix, qp.eq_rhs);
  build_inequalities(left_block, right_block, impact_stage, layout, params,
                     qp.ineq_matrix, qp.ineq_rhs);
  const int clamped = std::min(impact_stage, layout.n_stages);
  build_cost(weights, references, clamped, f_prev, layout, qp.hessian, qp.gradient,
             qp.cost_constant);
  return qp;
}

namespace detail {

inline void write_matrix_market(std::ofstream& out, const std::string& name,
                                const Eigen::SparseMatrix<double>& m)
{
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << "% " << name << "\n";
  out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
  char buf[64];
  for (int k = 0; k < m.outerSize(); ++k)
  {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
    {
      std::snprintf(buf, sizeof(buf), "%ld %ld %.17g\n", it.row() + 1, it.col() + 1,
                    it.value());
      out << buf;
    }
  }
}

inline void write_vector(std::ofstream& out, const std::string& name,
                         const Eigen::VectorXd& v)
{
  out << "%%MatrixMarket matrix array real general\n";
  out << "% " << name << "\n";
  out << v.size() << " 1\n";
  char buf[64];
  for (Eigen::Index i = 0; i < v.size(); ++i)
  {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v(i));
    out << buf;
  }
}

}  // namespace detail

/// Plain-text dump of a transcribed problem, one Matrix Market section per
/// component, for offline inspection.
inline void dump_problem(const QpProblem& qp, const std::string& path)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("dump_problem: cannot open " + path);
  detail::write_matrix_market(out, "hessian", qp.hessian);
  detail::write_vector(out, "gradient", qp.gradient);
  detail::write_matrix_market(out, "eq_matrix", qp.eq_matrix);
  detail::write_vector(out, "eq_rhs", qp.eq_rhs);
  detail::write_matrix_market(out, "ineq_matrix", qp.ineq_matrix);
  detail::write_vector(out, "ineq_rhs", qp.ineq_rhs);
  out << "% cost_constant\n" << qp.cost_constant << "\n";
}

}  // namespace stepmpc
