#pragma once

#include <stepmpc/momentum_model.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace stepmpc {

/// Diagonal weights of the tracking objective.
///
/// k_gamma runs over every stage and deliberately leaves the transverse CoM
/// position free (entries 0 and 1 are zero): before the impact stage the CoM
/// is allowed to travel. k_gamma_imp is added from the impact stage onward
/// and is what pulls the CoM over the support centroid; clamping the impact
/// stage into the horizon means it always covers at least the last stage, so
/// it doubles as a terminal cost. k_f and k_df are small wrench regularizers
/// (absolute magnitude and cycle-to-cycle rate).
struct CostWeights
{
  Vector9d k_gamma = Vector9d::Zero();
  Vector9d k_gamma_imp = Vector9d::Zero();
  Vector12d k_f = Vector12d::Zero();
  Vector12d k_df = Vector12d::Zero();

  static CostWeights defaults()
  {
    CostWeights w;
    w.k_gamma << 0.0, 0.0, 100.0, 1.0, 1.0, 1.0, 0.1, 0.1, 0.1;
    w.k_gamma_imp << 50.0, 50.0, 100.0, 1.0, 1.0, 1.0, 0.1, 0.1, 0.1;
    w.k_f = 1e-6 * Vector12d::Ones();
    w.k_df = 1e-4 * Vector12d::Ones();
    return w;
  }

  void validate() const
  {
    if (k_gamma(0) != 0.0 || k_gamma(1) != 0.0)
      throw std::invalid_argument(
          "CostWeights: k_gamma transverse CoM entries (0, 1) must be zero");
    if ((k_gamma.array() < 0.0).any() || (k_gamma_imp.array() < 0.0).any() ||
        (k_f.array() < 0.0).any() || (k_df.array() < 0.0).any())
      throw std::invalid_argument("CostWeights: weights must be non-negative");
  }
};

/// Per-stage state references gamma_d(k) for k = 1..n_stages, stored 0-based.
struct ReferenceTrajectory
{
  std::vector<Vector9d> stage_refs;

  int n_stages() const { return static_cast<int>(stage_refs.size()); }
};

/// References are feedback independent: every stage wants the CoM over the
/// given support centroid at the given height, zero velocity and zero
/// angular momentum. The current state is accepted for interface stability
/// but does not influence the output.
inline ReferenceTrajectory build_references(const MomentumState& /*current*/,
                                            const Eigen::Vector2d& support_centroid,
                                            double com_height, int n_stages)
{
  if (n_stages < 1)
    throw std::invalid_argument("build_references: n_stages must be >= 1");
  Vector9d ref = Vector9d::Zero();
  ref(0) = support_centroid.x();
  ref(1) = support_centroid.y();
  ref(2) = com_height;
  ReferenceTrajectory refs;
  refs.stage_refs.assign(static_cast<size_t>(n_stages), ref);
  return refs;
}

/// Diagonal state weight of one stage. Stage 0 is never weighted (it is not a
/// decision variable); callers pass the impact stage already clamped into
/// [0, n_stages].
inline Vector9d stage_cost_weight(int stage, int impact_stage_clamped, int n_stages,
                                  const CostWeights& weights)
{
  if (stage < 1 || stage > n_stages)
    throw std::invalid_argument("stage_cost_weight: stage must be in [1, n_stages]");
  Vector9d w = weights.k_gamma;
  if (stage >= impact_stage_clamped)
    w += weights.k_gamma_imp;
  return w;
}

/// A candidate horizon: states gamma(1..N) and controls f(0..N-1).
struct HorizonTrajectory
{
  std::vector<Vector9d> states;
  std::vector<Vector12d> controls;
};

/// Direct, non-transcribed evaluation of the full objective. This is the
/// oracle the quadratic-form assembly is tested against; keep it naive.
inline double evaluate_cost_direct(const HorizonTrajectory& trajectory,
                                   const ReferenceTrajectory& references,
                                   const CostWeights& weights, int impact_stage,
                                   const Vector12d& f_prev)
{
  const int n = static_cast<int>(trajectory.states.size());
  if (static_cast<int>(trajectory.controls.size()) != n || references.n_stages() != n)
    throw std::invalid_argument("evaluate_cost_direct: inconsistent horizon lengths");

  const int impact_clamped = std::min(impact_stage, n);
  double cost = 0.0;
  for (int k = 1; k <= n; ++k)
  {
    const Vector9d w = stage_cost_weight(k, impact_clamped, n, weights);
    const Vector9d e = trajectory.states[k - 1] - references.stage_refs[k - 1];
    cost += 0.5 * e.dot(w.asDiagonal() * e);
  }
  for (int k = 0; k < n; ++k)
  {
    const Vector12d& f = trajectory.controls[k];
    cost += 0.5 * f.dot(weights.k_f.asDiagonal() * f);
    const Vector12d df = f - (k == 0 ? f_prev : trajectory.controls[k - 1]);
    cost += 0.5 * df.dot(weights.k_df.asDiagonal() * df);
  }
  return cost;
}

}  // namespace stepmpc
