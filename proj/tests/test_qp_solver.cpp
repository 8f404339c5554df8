#include <catch2/catch_amalgamated.hpp>
#include <stepmpc/stepmpc.hpp>

#include "support/active_set_reference.hpp"

#include <cmath>
#include <random>

using namespace stepmpc;

namespace {

QpProblem dense_problem(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                        const Eigen::MatrixXd& aeq, const Eigen::VectorXd& beq,
                        const Eigen::MatrixXd& ai, const Eigen::VectorXd& bi,
                        double cost_constant = 0.0)
{
  QpProblem qp;
  qp.hessian = h.sparseView();
  qp.gradient = g;
  qp.eq_matrix = aeq.sparseView();
  qp.eq_rhs = beq;
  qp.ineq_matrix = ai.sparseView();
  qp.ineq_rhs = bi;
  qp.cost_constant = cost_constant;
  return qp;
}

struct SmallQp
{
  QpProblem qp;
  Eigen::MatrixXd h, aeq, ai;
  Eigen::VectorXd g, beq, bi;
};

SmallQp random_small_qp(std::mt19937& rng)
{
  std::uniform_int_distribution<int> un(2, 6), ume(0, 2), umi(1, 8);
  std::uniform_real_distribution<double> u(-1.0, 1.0), uslack(0.0, 0.5);

  const int n = un(rng);
  const int me = std::min(ume(rng), n - 1);
  const int mi = umi(rng);

  SmallQp p;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m(i, j) = u(rng);
  p.h = m.transpose() * m + 0.1 * Eigen::MatrixXd::Identity(n, n);

  Eigen::VectorXd x0(n), dir(n);
  for (int i = 0; i < n; ++i)
  {
    x0(i) = u(rng);
    dir(i) = u(rng);
  }

  p.aeq.resize(me, n);
  for (int i = 0; i < me; ++i)
    for (int j = 0; j < n; ++j)
      p.aeq(i, j) = u(rng);
  p.beq = p.aeq * x0;

  p.ai.resize(mi, n);
  for (int i = 0; i < mi; ++i)
    for (int j = 0; j < n; ++j)
      p.ai(i, j) = u(rng);
  p.bi = p.ai * x0;
  for (int i = 0; i < mi; ++i)
    p.bi(i) += uslack(rng);

  // Pull the unconstrained optimum well away from x0 so constraints activate.
  p.g = -(p.h * (x0 + 2.0 * dir));
  p.qp = dense_problem(p.h, p.g, p.aeq, p.beq, p.ai, p.bi);
  return p;
}

}  // namespace

TEST_CASE("textbook scalar problem: minimize (x - 1)^2 subject to x <= 1/2")
{
  Eigen::MatrixXd h(1, 1), ai(1, 1);
  h << 2.0;
  ai << 1.0;
  Eigen::VectorXd g(1), bi(1);
  g << -2.0;
  bi << 0.5;
  const QpProblem qp = dense_problem(h, g, Eigen::MatrixXd(0, 1),
                                     Eigen::VectorXd(0), ai, bi, 1.0);

  AdmmQpSolver solver;
  const QpSolution sol = solver.solve(qp);
  REQUIRE(sol.status == SolveStatus::solved);
  REQUIRE(sol.primal(0) == Catch::Approx(0.5).margin(1e-8));
  REQUIRE(sol.dual_ineq(0) == Catch::Approx(1.0).margin(1e-6));
  REQUIRE(sol.objective == Catch::Approx(0.25).margin(1e-8));
  REQUIRE(sol.polished);

  const KktResiduals kkt = kkt_residuals(qp, sol);
  REQUIRE(kkt.stationarity < 1e-9);
  REQUIRE(kkt.primal < 1e-9);
  REQUIRE(kkt.complementarity < 1e-9);
}

TEST_CASE("equality-constrained quadratic matches the KKT closed form")
{
  std::mt19937 rng(61);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 5;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m(i, j) = u(rng);
  const Eigen::MatrixXd h = m.transpose() * m + 0.5 * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i)
    g(i) = u(rng);
  Eigen::MatrixXd aeq = Eigen::MatrixXd::Ones(1, n);
  Eigen::VectorXd beq(1);
  beq << 1.0;

  // Closed form via the dense KKT system [[H, A'], [A, 0]].
  Eigen::MatrixXd kkt(n + 1, n + 1);
  kkt.setZero();
  kkt.topLeftCorner(n, n) = h;
  kkt.topRightCorner(n, 1) = aeq.transpose();
  kkt.bottomLeftCorner(1, n) = aeq;
  Eigen::VectorXd rhs(n + 1);
  rhs.head(n) = -g;
  rhs(n) = beq(0);
  const Eigen::VectorXd xy = kkt.fullPivLu().solve(rhs);

  const QpProblem qp = dense_problem(h, g, aeq, beq, Eigen::MatrixXd(0, n),
                                     Eigen::VectorXd(0));
  AdmmQpSolver solver;
  const QpSolution sol = solver.solve(qp);
  REQUIRE(sol.status == SolveStatus::solved);
  REQUIRE((sol.primal - xy.head(n)).lpNorm<Eigen::Infinity>() < 1e-7);
  REQUIRE(sol.dual_eq(0) == Catch::Approx(xy(n)).margin(1e-6));
  REQUIRE((qp.eq_matrix * sol.primal - qp.eq_rhs).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("random strictly convex problems agree with exhaustive enumeration")
{
  std::mt19937 rng(67);
  int with_active_set = 0;
  for (int trial = 0; trial < 200; ++trial)
  {
    const SmallQp p = random_small_qp(rng);
    const reference_qp::ReferenceSolution ref =
        reference_qp::solve_reference(p.h, p.g, p.aeq, p.beq, p.ai, p.bi);
    REQUIRE(ref.found);

    AdmmQpSolver solver;
    const QpSolution sol = solver.solve(p.qp);
    REQUIRE(sol.status == SolveStatus::solved);

    const double scale = std::max(1.0, ref.x.lpNorm<Eigen::Infinity>());
    REQUIRE((sol.primal - ref.x).lpNorm<Eigen::Infinity>() <= 1e-5 * scale);

    const double obj = 0.5 * sol.primal.dot(p.h * sol.primal) + p.g.dot(sol.primal);
    REQUIRE(std::abs(obj - ref.objective) <= 1e-7 * std::max(1.0, std::abs(ref.objective)));

    const KktResiduals kkt = kkt_residuals(p.qp, sol);
    REQUIRE(kkt.stationarity <= 1e-6);
    REQUIRE(kkt.primal <= 1e-6);
    REQUIRE(kkt.complementarity <= 1e-6);

    if (ref.lambda_ineq.size() > 0 && ref.lambda_ineq.maxCoeff() > 1e-6)
      ++with_active_set;
  }
  // The generator must actually exercise constrained optima, not just
  // interior ones.
  REQUIRE(with_active_set >= 50);
}

TEST_CASE("identical inputs produce bit-identical solutions")
{
  std::mt19937 rng(71);
  const SmallQp p = random_small_qp(rng);

  AdmmQpSolver s1, s2;
  const QpSolution a = s1.solve(p.qp);
  const QpSolution b = s2.solve(p.qp);
  REQUIRE(a.iterations == b.iterations);
  REQUIRE(a.status == b.status);
  REQUIRE(a.polished == b.polished);
  REQUIRE(a.objective == b.objective);
  for (int i = 0; i < a.primal.size(); ++i)
    REQUIRE(a.primal(i) == b.primal(i));
  for (int i = 0; i < a.dual_ineq.size(); ++i)
    REQUIRE(a.dual_ineq(i) == b.dual_ineq(i));

  // Re-using one solver instance is equally deterministic.
  const QpSolution c = s1.solve(p.qp);
  for (int i = 0; i < a.primal.size(); ++i)
    REQUIRE(a.primal(i) == c.primal(i));
}

TEST_CASE("uniformly scaling the objective leaves the argmin unchanged")
{
  std::mt19937 rng(73);
  const SmallQp p = random_small_qp(rng);
  AdmmQpSolver solver;
  const QpSolution base = solver.solve(p.qp);

  const double alpha = 7.3;
  const QpProblem scaled = dense_problem(alpha * p.h, alpha * p.g, p.aeq, p.beq,
                                         p.ai, p.bi);
  const QpSolution sol = solver.solve(scaled);
  REQUIRE(sol.status == SolveStatus::solved);
  REQUIRE((sol.primal - base.primal).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("contradictory inequalities are certified primal infeasible")
{
  Eigen::MatrixXd h(1, 1), ai(2, 1);
  h << 1.0;
  ai << 1.0, -1.0;  // x <= -1 and x >= 2
  Eigen::VectorXd g(1), bi(2);
  g << 0.0;
  bi << -1.0, -2.0;
  const QpProblem qp =
      dense_problem(h, g, Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), ai, bi);

  AdmmQpSolver solver;
  const QpSolution sol = solver.solve(qp);
  REQUIRE(sol.status == SolveStatus::primal_infeasible);
  REQUIRE(std::string(to_string(sol.status)) == "primal_infeasible");
}

TEST_CASE("status names")
{
  REQUIRE(std::string(to_string(SolveStatus::solved)) == "solved");
  REQUIRE(std::string(to_string(SolveStatus::max_iterations)) == "max_iterations");
}

TEST_CASE("warm starting from the optimum does not degrade the solve")
{
  std::mt19937 rng(79);
  const SmallQp p = random_small_qp(rng);
  AdmmQpSolver solver;
  const QpSolution cold = solver.solve(p.qp);
  REQUIRE(cold.status == SolveStatus::solved);

  const QpSolution warm = solver.solve(p.qp, cold);
  REQUIRE(warm.status == SolveStatus::solved);
  REQUIRE(warm.iterations <= cold.iterations);
  REQUIRE((warm.primal - cold.primal).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("optimality residuals respond to perturbations as expected")
{
  Eigen::MatrixXd h(1, 1), ai(1, 1);
  h << 2.0;
  ai << 1.0;
  Eigen::VectorXd g(1), bi(1);
  g << -2.0;
  bi << 0.5;
  const QpProblem qp =
      dense_problem(h, g, Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), ai, bi);

  AdmmQpSolver solver;
  QpSolution sol = solver.solve(qp);
  sol.primal(0) += 0.01;
  const KktResiduals kkt = kkt_residuals(qp, sol);
  REQUIRE(kkt.stationarity == Catch::Approx(0.02).margin(1e-6));
  REQUIRE(kkt.primal == Catch::Approx(0.01).margin(1e-6));
  REQUIRE(kkt.complementarity == Catch::Approx(0.01).margin(1e-6));
}

TEST_CASE("residuals of an all-zero problem are zero")
{
  QpProblem qp;
  qp.hessian.resize(3, 3);
  qp.gradient = Eigen::VectorXd::Zero(3);
  qp.eq_matrix.resize(0, 3);
  qp.eq_rhs.resize(0);
  qp.ineq_matrix.resize(0, 3);
  qp.ineq_rhs.resize(0);

  QpSolution sol;
  sol.primal = Eigen::VectorXd::Zero(3);
  sol.dual_eq.resize(0);
  sol.dual_ineq.resize(0);
  const KktResiduals kkt = kkt_residuals(qp, sol);
  REQUIRE(kkt.stationarity == 0.0);
  REQUIRE(kkt.primal == 0.0);
  REQUIRE(kkt.complementarity == 0.0);
}

TEST_CASE("solver rejects dimension mismatches")
{
  Eigen::MatrixXd h(2, 2);
  h.setIdentity();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(3);  // wrong size on purpose
  QpProblem qp;
  qp.hessian = h.sparseView();
  qp.gradient = g;
  qp.eq_matrix.resize(0, 2);
  qp.eq_rhs.resize(0);
  qp.ineq_matrix.resize(0, 2);
  qp.ineq_rhs.resize(0);
  AdmmQpSolver solver;
  REQUIRE_THROWS_AS(solver.solve(qp), std::invalid_argument);
}

TEST_CASE("transcribed control problem solves and satisfies its constraints")
{
  // End-to-end: a realistic single-support transcription at a short horizon,
  // solved and checked against feasibility and the enumeration oracle via
  // KKT residuals only (the problem is too large to enumerate).
  MomentumState state;
  state.com_position << 0.02, 0.01, 0.53;
  state.com_velocity << 0.3, -0.1, 0.0;

  ContactGeometry geometry;
  geometry.left_foot_position = Eigen::Vector3d(0.0, 0.08, 0.0);
  geometry.right_foot_position = Eigen::Vector3d(0.0, -0.08, 0.0);

  WrenchPair hold;
  hold.left.force = Eigen::Vector3d(0, 0, 30.0 * 9.81);

  const DiscreteModel model = discretize(linearize(state, hold, geometry), 0.01);
  const CostWeights weights = CostWeights::defaults();
  const FootParams params;
  const StanceConstraintBlock block = stance_block(params);
  const int n = 8;
  const ReferenceTrajectory refs =
      build_references(state, Eigen::Vector2d(0.0, 0.08), 0.53, n);
  Vector12d f_prev = Vector12d::Zero();
  f_prev(2) = 30.0 * 9.81;

  const QpProblem qp =
      assemble_qp(model, state.to_vector(), block, block, 5, params, weights, refs,
                  f_prev, ChiLayout(n));

  AdmmQpSolver solver;
  const QpSolution sol = solver.solve(qp);
  REQUIRE(sol.status == SolveStatus::solved);

  const KktResiduals kkt = kkt_residuals(qp, sol);
  REQUIRE(kkt.stationarity < 1e-6);
  REQUIRE(kkt.primal < 1e-6);
  REQUIRE(kkt.complementarity < 1e-6);

  // Swing stages really command zero right-foot wrench.
  const HorizonTrajectory traj = unpack_chi(sol.primal, ChiLayout(n));
  for (int k = 0; k < 5; ++k)
    REQUIRE(traj.controls[k].tail<6>().lpNorm<Eigen::Infinity>() < 1e-7);
}
