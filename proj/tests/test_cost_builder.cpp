#include <catch2/catch_amalgamated.hpp>
#include <stepmpc/stepmpc.hpp>

#include <random>

using namespace stepmpc;

namespace {

HorizonTrajectory constant_trajectory(const Vector9d& state, const Vector12d& control,
                                      int n)
{
  HorizonTrajectory traj;
  traj.states.assign(static_cast<size_t>(n), state);
  traj.controls.assign(static_cast<size_t>(n), control);
  return traj;
}

}  // namespace

TEST_CASE("references are constant over the horizon and feedback independent")
{
  MomentumState here;
  here.com_position << 0.3, -0.2, 0.61;
  here.com_velocity << 1.0, 2.0, 3.0;
  MomentumState elsewhere;

  const Eigen::Vector2d centroid(0.05, -0.04);
  const ReferenceTrajectory a = build_references(here, centroid, 0.53, 25);
  const ReferenceTrajectory b = build_references(elsewhere, centroid, 0.53, 25);

  REQUIRE(a.n_stages() == 25);
  Vector9d expected = Vector9d::Zero();
  expected << 0.05, -0.04, 0.53, 0, 0, 0, 0, 0, 0;
  for (int k = 0; k < 25; ++k)
  {
    REQUIRE((a.stage_refs[k] - expected).norm() == 0.0);
    REQUIRE((a.stage_refs[k] - b.stage_refs[k]).norm() == 0.0);
  }
  REQUIRE_THROWS_AS(build_references(here, centroid, 0.53, 0), std::invalid_argument);
}

TEST_CASE("impact weight covers the tail of the horizon")
{
  CostWeights w = CostWeights::defaults();
  const int n = 10;

  SECTION("impact in the middle: plain weight before, combined from impact on")
  {
    for (int k = 1; k <= n; ++k)
    {
      const Vector9d stage = stage_cost_weight(k, 4, n, w);
      if (k < 4)
        REQUIRE((stage - w.k_gamma).norm() == 0.0);
      else
        REQUIRE((stage - (w.k_gamma + w.k_gamma_imp)).norm() == 0.0);
    }
  }

  SECTION("impact clamped to the horizon end: terminal stage is always weighted")
  {
    // Callers clamp impact stages beyond the horizon to n, so the terminal
    // stage carries the combined weight no matter how far away impact is.
    const Vector9d terminal = stage_cost_weight(n, n, n, w);
    REQUIRE((terminal - (w.k_gamma + w.k_gamma_imp)).norm() == 0.0);
    const Vector9d before = stage_cost_weight(n - 1, n, n, w);
    REQUIRE((before - w.k_gamma).norm() == 0.0);
  }

  SECTION("impact at stage one weights the whole horizon")
  {
    for (int k = 1; k <= n; ++k)
    {
      REQUIRE((stage_cost_weight(k, 1, n, w) - (w.k_gamma + w.k_gamma_imp)).norm() ==
              0.0);
    }
  }

  SECTION("stage zero is not a decision variable")
  {
    REQUIRE_THROWS_AS(stage_cost_weight(0, 1, n, w), std::invalid_argument);
    REQUIRE_THROWS_AS(stage_cost_weight(n + 1, 1, n, w), std::invalid_argument);
  }
}

TEST_CASE("shipped default weights leave the transverse CoM free before impact")
{
  const CostWeights w = CostWeights::defaults();
  REQUIRE_NOTHROW(w.validate());
  REQUIRE(w.k_gamma(0) == 0.0);
  REQUIRE(w.k_gamma(1) == 0.0);
  REQUIRE(w.k_gamma(2) > 0.0);
  REQUIRE(w.k_gamma_imp(0) > 0.0);
  REQUIRE(w.k_gamma_imp(1) > 0.0);
  REQUIRE((w.k_f.array() > 0.0).all());
  REQUIRE((w.k_df.array() > 0.0).all());
  REQUIRE((w.k_df.array() > w.k_f.array()).all());
}

TEST_CASE("weight validation rejects transverse pre-impact weight and negatives")
{
  CostWeights w = CostWeights::defaults();
  w.k_gamma(0) = 1.0;
  REQUIRE_THROWS_AS(w.validate(), std::invalid_argument);

  w = CostWeights::defaults();
  w.k_f(3) = -1e-9;
  REQUIRE_THROWS_AS(w.validate(), std::invalid_argument);

  w = CostWeights::defaults();
  w.k_gamma_imp(4) = -1.0;
  REQUIRE_THROWS_AS(w.validate(), std::invalid_argument);
}

TEST_CASE("cost vanishes on the reference with zero wrench history")
{
  const CostWeights w = CostWeights::defaults();
  const Eigen::Vector2d centroid(0.02, 0.01);
  const ReferenceTrajectory refs =
      build_references(MomentumState{}, centroid, 0.53, 8);

  HorizonTrajectory traj;
  for (int k = 0; k < 8; ++k)
  {
    traj.states.push_back(refs.stage_refs[k]);
    traj.controls.push_back(Vector12d::Zero());
  }
  REQUIRE(evaluate_cost_direct(traj, refs, w, 3, Vector12d::Zero()) == 0.0);

  // Zero weights kill the cost no matter the trajectory.
  const CostWeights zero;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  HorizonTrajectory wild = traj;
  for (auto& s : wild.states)
    for (int i = 0; i < 9; ++i)
      s(i) = u(rng);
  for (auto& f : wild.controls)
    for (int i = 0; i < 12; ++i)
      f(i) = u(rng);
  REQUIRE(evaluate_cost_direct(wild, refs, zero, 3, Vector12d::Ones()) == 0.0);
}

TEST_CASE("single-stage cost matches a hand-computed value")
{
  CostWeights w;  // start from all-zero and set exactly what the example uses
  w.k_gamma(2) = 2.0;
  w.k_f(0) = 1.0;
  w.k_df(1) = 4.0;

  ReferenceTrajectory refs = build_references(MomentumState{}, {0, 0}, 0.5, 1);
  HorizonTrajectory traj;
  Vector9d state = refs.stage_refs[0];
  state(2) += 3.0;  // z error of 3
  Vector12d control = Vector12d::Zero();
  control(0) = 2.0;  // fx of 2 on the first foot
  control(1) = 5.0;  // fy of 5, rated against f_prev fy of 1
  traj.states.push_back(state);
  traj.controls.push_back(control);

  Vector12d f_prev = Vector12d::Zero();
  f_prev(1) = 1.0;

  // 0.5*2*3^2 + 0.5*1*2^2 + 0.5*4*(5-1)^2 = 9 + 2 + 32 = 43
  REQUIRE(evaluate_cost_direct(traj, refs, w, 99, f_prev) ==
          Catch::Approx(43.0).margin(1e-12));
}

TEST_CASE("wrench rate cost is charged against the previous cycle's command")
{
  CostWeights w;
  w.k_df = Vector12d::Ones();

  const ReferenceTrajectory refs = build_references(MomentumState{}, {0, 0}, 0.5, 3);
  const Vector12d held = 7.25 * Vector12d::Ones();
  const HorizonTrajectory traj = constant_trajectory(Vector9d::Zero(), held, 3);

  // Constant plan equal to f_prev: every rate term is zero.
  REQUIRE(evaluate_cost_direct(traj, refs, w, 1, held) == 0.0);

  // Constant plan offset from f_prev: only the first rate term pays.
  const Vector12d prev = held - Vector12d::Ones();
  REQUIRE(evaluate_cost_direct(traj, refs, w, 1, prev) ==
          Catch::Approx(0.5 * 12.0).margin(1e-12));
}

TEST_CASE("cost evaluation rejects inconsistent horizon lengths")
{
  const CostWeights w = CostWeights::defaults();
  const ReferenceTrajectory refs = build_references(MomentumState{}, {0, 0}, 0.5, 4);
  HorizonTrajectory traj = constant_trajectory(Vector9d::Zero(), Vector12d::Zero(), 4);
  traj.controls.pop_back();
  REQUIRE_THROWS_AS(evaluate_cost_direct(traj, refs, w, 1, Vector12d::Zero()),
                    std::invalid_argument);
}
