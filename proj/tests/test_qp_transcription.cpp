#include <catch2/catch_amalgamated.hpp>
#include <stepmpc/stepmpc.hpp>

#include <cstdio>
#include <fstream>
#include <random>
#include <string>

using namespace stepmpc;

namespace {

struct RandomInstance
{
  DiscreteModel model;
  Vector9d gamma0;
  CostWeights weights;
  ReferenceTrajectory refs;
  Vector12d f_prev;
  int impact_stage = 0;
};

MomentumState random_state(std::mt19937& rng)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MomentumState s;
  for (int i = 0; i < 3; ++i)
  {
    s.com_position(i) = u(rng);
    s.com_velocity(i) = u(rng);
    s.angular_momentum(i) = u(rng);
  }
  s.com_position(2) = 0.5 + 0.1 * u(rng);
  return s;
}

WrenchPair random_wrench(std::mt19937& rng)
{
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  WrenchPair w;
  for (int i = 0; i < 3; ++i)
  {
    w.left.force(i) = u(rng);
    w.left.torque(i) = u(rng) / 10.0;
    w.right.force(i) = u(rng);
    w.right.torque(i) = u(rng) / 10.0;
  }
  w.left.force(2) = std::abs(w.left.force(2)) + 100.0;
  w.right.force(2) = std::abs(w.right.force(2)) + 100.0;
  return w;
}

RandomInstance random_instance(std::mt19937& rng, int n)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> uw(0.0, 5.0);
  std::uniform_int_distribution<int> ui(0, n + 3);

  ContactGeometry geometry;
  geometry.left_foot_position = Eigen::Vector3d(0.02 * u(rng), 0.08, 0.0);
  geometry.right_foot_position = Eigen::Vector3d(0.02 * u(rng), -0.08, 0.0);

  RandomInstance inst;
  inst.model = discretize(linearize(random_state(rng), random_wrench(rng), geometry),
                          0.01);
  for (int i = 0; i < 9; ++i)
    inst.gamma0(i) = u(rng);

  inst.weights.k_gamma.setZero();
  for (int i = 2; i < 9; ++i)
    inst.weights.k_gamma(i) = uw(rng);
  for (int i = 0; i < 9; ++i)
    inst.weights.k_gamma_imp(i) = uw(rng);
  for (int i = 0; i < 12; ++i)
  {
    inst.weights.k_f(i) = 0.1 * uw(rng);
    inst.weights.k_df(i) = 0.1 * uw(rng);
    inst.f_prev(i) = 20.0 * u(rng);
  }

  inst.refs.stage_refs.resize(static_cast<size_t>(n));
  for (auto& r : inst.refs.stage_refs)
    for (int i = 0; i < 9; ++i)
      r(i) = u(rng);

  inst.impact_stage = ui(rng);
  return inst;
}

QpProblem assemble(const RandomInstance& inst, int n, const FootParams& params)
{
  const StanceConstraintBlock block = stance_block(params);
  return assemble_qp(inst.model, inst.gamma0, block, block, inst.impact_stage, params,
                     inst.weights, inst.refs, inst.f_prev, ChiLayout(n));
}

double quadratic_value(const QpProblem& qp, const Eigen::VectorXd& chi)
{
  return 0.5 * chi.dot(qp.hessian * chi) + qp.gradient.dot(chi) + qp.cost_constant;
}

}  // namespace

TEST_CASE("interleaved layout offsets")
{
  const ChiLayout layout(25);
  REQUIRE(layout.total_dim() == 525);
  REQUIRE(layout.state_offset(1) == 0);
  REQUIRE(layout.control_offset(0) == 9);
  REQUIRE(layout.state_offset(2) == 21);
  REQUIRE(layout.control_offset(1) == 30);
  REQUIRE(layout.state_offset(25) == 504);
  REQUIRE(layout.control_offset(24) == 513);

  REQUIRE_THROWS_AS(layout.state_offset(0), std::out_of_range);
  REQUIRE_THROWS_AS(layout.state_offset(26), std::out_of_range);
  REQUIRE_THROWS_AS(layout.control_offset(-1), std::out_of_range);
  REQUIRE_THROWS_AS(layout.control_offset(25), std::out_of_range);
  REQUIRE_THROWS_AS(ChiLayout(0), std::invalid_argument);
}

TEST_CASE("pack and unpack tile the decision vector blockwise")
{
  const int n = 4;
  const ChiLayout layout(n);
  HorizonTrajectory traj;
  for (int k = 0; k < n; ++k)
  {
    traj.states.push_back(Vector9d::Constant(100.0 + k));
    traj.controls.push_back(Vector12d::Constant(200.0 + k));
  }
  const Eigen::VectorXd chi = pack_chi(traj, layout);
  REQUIRE(chi.size() == layout.total_dim());
  for (int k = 0; k < n; ++k)
  {
    REQUIRE(chi(layout.state_offset(k + 1)) == 100.0 + k);
    REQUIRE(chi(layout.state_offset(k + 1) + 8) == 100.0 + k);
    REQUIRE(chi(layout.control_offset(k)) == 200.0 + k);
    REQUIRE(chi(layout.control_offset(k) + 11) == 200.0 + k);
  }

  const HorizonTrajectory back = unpack_chi(chi, layout);
  for (int k = 0; k < n; ++k)
  {
    REQUIRE((back.states[k] - traj.states[k]).norm() == 0.0);
    REQUIRE((back.controls[k] - traj.controls[k]).norm() == 0.0);
  }

  HorizonTrajectory bad = traj;
  bad.states.pop_back();
  REQUIRE_THROWS_AS(pack_chi(bad, layout), std::invalid_argument);
  REQUIRE_THROWS_AS(unpack_chi(chi.head(20), layout), std::invalid_argument);
}

TEST_CASE("rolled-out trajectories satisfy the dynamics equalities exactly")
{
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int trial = 0; trial < 20; ++trial)
  {
    const int n = 1 + trial % 7;
    const RandomInstance inst = random_instance(rng, n);
    const ChiLayout layout(n);

    HorizonTrajectory traj;
    Vector9d gamma = inst.gamma0;
    for (int k = 0; k < n; ++k)
    {
      Vector12d f;
      for (int i = 0; i < 12; ++i)
        f(i) = u(rng);
      gamma = inst.model.step(gamma, f);
      traj.states.push_back(gamma);
      traj.controls.push_back(f);
    }

    Eigen::SparseMatrix<double> eq;
    Eigen::VectorXd rhs;
    build_equality(inst.model, inst.gamma0, layout, eq, rhs);
    const Eigen::VectorXd residual = eq * pack_chi(traj, layout) - rhs;
    REQUIRE(residual.lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("transcription dimensions at the shipped horizon")
{
  std::mt19937 rng(23);
  const int n = 25;
  const RandomInstance inst = random_instance(rng, n);
  FootParams params;
  const QpProblem qp = assemble(inst, n, params);

  REQUIRE(qp.n_variables() == 525);
  REQUIRE(qp.hessian.rows() == 525);
  REQUIRE(qp.eq_matrix.rows() == 225);
  REQUIRE(qp.eq_matrix.cols() == 525);
  REQUIRE(qp.eq_rhs.size() == 225);
  const int rows_per_stage = 2 * stance_block(params).rows();
  REQUIRE(qp.ineq_matrix.rows() == n * rows_per_stage);
  REQUIRE(qp.ineq_rhs.size() == n * rows_per_stage);
}

TEST_CASE("single-stage equality block is [-I | F]")
{
  std::mt19937 rng(29);
  const RandomInstance inst = random_instance(rng, 1);
  const ChiLayout layout(1);
  Eigen::SparseMatrix<double> eq;
  Eigen::VectorXd rhs;
  build_equality(inst.model, inst.gamma0, layout, eq, rhs);

  const Eigen::MatrixXd dense = Eigen::MatrixXd(eq);
  REQUIRE(dense.rows() == 9);
  REQUIRE(dense.cols() == 21);
  REQUIRE((dense.leftCols<9>() + Eigen::MatrixXd::Identity(9, 9)).norm() == 0.0);
  REQUIRE((dense.rightCols<12>() - inst.model.f).norm() == 0.0);
  const Vector9d expected_rhs =
      -inst.model.g - inst.model.s0 - inst.model.ev * inst.gamma0;
  REQUIRE((rhs - expected_rhs).norm() < 1e-15);
}

TEST_CASE("equality rows touch only the neighbouring stage blocks")
{
  std::mt19937 rng(31);
  const int n = 6;
  const RandomInstance inst = random_instance(rng, n);
  Eigen::SparseMatrix<double> eq;
  Eigen::VectorXd rhs;
  build_equality(inst.model, inst.gamma0, ChiLayout(n), eq, rhs);

  const Eigen::MatrixXd dense = Eigen::MatrixXd(eq);
  for (int row = 0; row < dense.rows(); ++row)
  {
    const int k = row / 9;  // row block index
    const int lo = std::max(0, 21 * (k - 1));
    const int hi = 21 * (k + 1);
    for (int col = 0; col < dense.cols(); ++col)
    {
      if (col < lo || col >= hi)
        REQUIRE(dense(row, col) == 0.0);
    }
  }
}

TEST_CASE("swing-phase bound rows track the impact stage, left foot untouched")
{
  std::mt19937 rng(37);
  const int n = 5;
  RandomInstance inst = random_instance(rng, n);
  inst.impact_stage = 3;
  FootParams params;
  const StanceConstraintBlock block = stance_block(params);
  const QpProblem qp = assemble(inst, n, params);

  const int rows_per_stage = 2 * block.rows();
  for (int k = 0; k < n; ++k)
  {
    const int row_left = rows_per_stage * k;
    const int row_right = row_left + block.rows();

    REQUIRE((qp.ineq_rhs.segment(row_left, block.rows()) - block.b).norm() == 0.0);

    const double upper = qp.ineq_rhs(row_right + block.upper_bound_row());
    REQUIRE(qp.ineq_rhs(row_right + block.lower_bound_row()) == 0.0);
    if (k < 3)
      REQUIRE(upper == 0.0);
    else
      REQUIRE(upper == params.max_normal_force);
  }
}

TEST_CASE("quadratic form reproduces the direct cost evaluation")
{
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  FootParams params;
  for (const int n : {1, 2, 3, 5})
  {
    for (int trial = 0; trial < 25; ++trial)
    {
      const RandomInstance inst = random_instance(rng, n);
      const ChiLayout layout(n);
      const QpProblem qp = assemble(inst, n, params);

      Eigen::VectorXd chi(layout.total_dim());
      for (int i = 0; i < chi.size(); ++i)
        chi(i) = u(rng);

      const double direct = evaluate_cost_direct(unpack_chi(chi, layout), inst.refs,
                                                 inst.weights, inst.impact_stage,
                                                 inst.f_prev);
      const double quadratic = quadratic_value(qp, chi);
      REQUIRE(std::abs(quadratic - direct) <= 1e-9 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST_CASE("transcribed Hessian is positive semidefinite")
{
  std::mt19937 rng(43);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 5;
  const RandomInstance inst = random_instance(rng, n);
  FootParams params;
  const QpProblem qp = assemble(inst, n, params);
  for (int trial = 0; trial < 200; ++trial)
  {
    Eigen::VectorXd chi(qp.n_variables());
    for (int i = 0; i < chi.size(); ++i)
      chi(i) = u(rng);
    REQUIRE(chi.dot(qp.hessian * chi) >= -1e-10 * chi.squaredNorm());
  }
}

TEST_CASE("previous wrench enters only the first control block")
{
  std::mt19937 rng(47);
  const int n = 4;
  RandomInstance inst = random_instance(rng, n);
  FootParams params;

  const QpProblem base = assemble(inst, n, params);
  RandomInstance shifted = inst;
  shifted.f_prev = inst.f_prev + Vector12d::Constant(5.0);
  const QpProblem moved = assemble(shifted, n, params);

  REQUIRE((Eigen::MatrixXd(base.hessian) - Eigen::MatrixXd(moved.hessian)).norm() ==
          0.0);
  REQUIRE((Eigen::MatrixXd(base.eq_matrix) - Eigen::MatrixXd(moved.eq_matrix)).norm() ==
          0.0);
  REQUIRE((base.eq_rhs - moved.eq_rhs).norm() == 0.0);
  REQUIRE((base.ineq_rhs - moved.ineq_rhs).norm() == 0.0);

  const Eigen::VectorXd dg = moved.gradient - base.gradient;
  const ChiLayout layout(n);
  const Eigen::VectorXd expected_dg =
      -(inst.weights.k_df.asDiagonal() * (shifted.f_prev - inst.f_prev));
  REQUIRE((dg.segment<12>(layout.control_offset(0)) - expected_dg).norm() < 1e-12);
  for (int i = 0; i < dg.size(); ++i)
  {
    if (i < layout.control_offset(0) || i >= layout.control_offset(0) + 12)
      REQUIRE(dg(i) == 0.0);
  }

  const double expected_dc =
      0.5 * shifted.f_prev.dot(inst.weights.k_df.asDiagonal() * shifted.f_prev) -
      0.5 * inst.f_prev.dot(inst.weights.k_df.asDiagonal() * inst.f_prev);
  REQUIRE(moved.cost_constant - base.cost_constant ==
          Catch::Approx(expected_dc).margin(1e-10));
}

TEST_CASE("problem dump writes a readable matrix-market file")
{
  std::mt19937 rng(53);
  const RandomInstance inst = random_instance(rng, 2);
  FootParams params;
  const QpProblem qp = assemble(inst, 2, params);

  const std::string path = "transcription_dump_test.txt";
  dump_problem(qp, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string first_line;
  std::getline(in, first_line);
  REQUIRE(first_line == "%%MatrixMarket matrix coordinate real general");
  std::string rest((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  REQUIRE(rest.find("% gradient") != std::string::npos);
  REQUIRE(rest.find("% cost_constant") != std::string::npos);
  in.close();
  std::remove(path.c_str());

  REQUIRE_THROWS_AS(dump_problem(qp, "no_such_dir_xyz/dump.txt"), std::runtime_error);
}
