#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace stepmpc {

/// Rectangular foot with a linearized friction model. Dimensions are half
/// extents: length along x, width along y.
struct FootParams
{
  double friction_coefficient = 0.5;
  double torsional_friction_coefficient = 0.01;
  double half_length = 0.06;
  double half_width = 0.04;
  double max_normal_force = 2.0 * 30.0 * 9.81;
  int pyramid_facets = 4;

  void validate() const
  {
    if (!(friction_coefficient > 0.0))
      throw std::invalid_argument("FootParams: friction_coefficient must be > 0");
    if (torsional_friction_coefficient < 0.0)
      throw std::invalid_argument("FootParams: torsional_friction_coefficient must be >= 0");
    if (!(half_length > 0.0) || !(half_width > 0.0))
      throw std::invalid_argument("FootParams: foot half extents must be > 0");
    if (!(max_normal_force > 0.0))
      throw std::invalid_argument("FootParams: max_normal_force must be > 0");
    if (pyramid_facets < 4)
      throw std::invalid_argument("FootParams: pyramid_facets must be >= 4");
  }
};

/// One foot's feasible-wrench block, rows a * [fx fy fz tx ty tz]^T <= b.
///
/// Row layout (fixed, phase independent):
///   [0, facets)            friction pyramid, inscribed in the exact cone
///   [facets, facets + 4)   CoP rectangle
///   [facets + 4, ... + 2)  torsional friction
///   rows() - 2             normal force lower bound  (-fz <= -lower)
///   rows() - 1             normal force upper bound  ( fz <=  upper)
///
/// Swing phases are expressed by changing only the two normal-bound entries
/// of b to (0, 0); with fz pinned to zero every other row then collapses the
/// remaining wrench components to zero, so the row count never changes.
struct StanceConstraintBlock
{
  Eigen::MatrixXd a;
  Eigen::VectorXd b;

  int rows() const { return static_cast<int>(a.rows()); }
  int lower_bound_row() const { return rows() - 2; }
  int upper_bound_row() const { return rows() - 1; }
};

/// Builds the stance-phase block for one foot.
///
/// The pyramid facet normals are rotated half a sector off the axes and the
/// tangential limit is scaled by cos(pi/n), which inscribes the pyramid in
/// the exact cone: every wrench accepted here satisfies |f_t| <= mu * fz.
inline StanceConstraintBlock stance_block(const FootParams& params)
{
  params.validate();
  const int n = params.pyramid_facets;
  const int total = n + 4 + 2 + 2;

  StanceConstraintBlock block;
  block.a = Eigen::MatrixXd::Zero(total, 6);
  block.b = Eigen::VectorXd::Zero(total);

  const double mu_facet =
      params.friction_coefficient * std::cos(M_PI / static_cast<double>(n));
  for (int j = 0; j < n; ++j)
  {
    const double theta = (2.0 * j + 1.0) * M_PI / static_cast<double>(n);
    block.a(j, 0) = std::cos(theta);
    block.a(j, 1) = std::sin(theta);
    block.a(j, 2) = -mu_facet;
  }

  // CoP in [-half_length, half_length] x [-half_width, half_width], with
  // cop_x = -ty / fz and cop_y = tx / fz.
  int r = n;
  block.a(r, 4) = 1.0;
  block.a(r, 2) = -params.half_length;
  ++r;
  block.a(r, 4) = -1.0;
  block.a(r, 2) = -params.half_length;
  ++r;
  block.a(r, 3) = 1.0;
  block.a(r, 2) = -params.half_width;
  ++r;
  block.a(r, 3) = -1.0;
  block.a(r, 2) = -params.half_width;
  ++r;

  block.a(r, 5) = 1.0;
  block.a(r, 2) = -params.torsional_friction_coefficient;
  ++r;
  block.a(r, 5) = -1.0;
  block.a(r, 2) = -params.torsional_friction_coefficient;
  ++r;

  block.a(r, 2) = -1.0;
  block.b(r) = 0.0;
  ++r;
  block.a(r, 2) = 1.0;
  block.b(r) = params.max_normal_force;

  return block;
}

/// Normal-force bounds for one stage of the horizon: (0, 0) while the foot is
/// still in flight, (0, max_normal_force) from the impact stage onward.
inline std::pair<double, double> normal_force_bounds(int stage, int impact_stage,
                                                     const FootParams& params)
{
  if (stage < 0)
    throw std::invalid_argument("normal_force_bounds: stage must be >= 0");
  if (stage < impact_stage)
    return {0.0, 0.0};
  return {0.0, params.max_normal_force};
}

/// Convex hull of the active feet's corner points, projected to the ground
/// plane. Used for the step trigger and for CoM references.
class SupportPolygon
{
public:
  static SupportPolygon from_feet(const std::vector<Eigen::Vector3d>& foot_positions,
                                  const FootParams& params)
  {
    if (foot_positions.empty())
      throw std::invalid_argument("SupportPolygon: at least one active contact required");
    std::vector<Eigen::Vector2d> points;
    points.reserve(foot_positions.size() * 4);
    for (const auto& p : foot_positions)
    {
      for (const double sx : {-1.0, 1.0})
      {
        for (const double sy : {-1.0, 1.0})
        {
          points.emplace_back(p.x() + sx * params.half_length,
                              p.y() + sy * params.half_width);
        }
      }
    }
    SupportPolygon polygon;
    polygon.vertices_ = convex_hull(std::move(points));
    return polygon;
  }

  /// Counter-clockwise hull vertices.
  const std::vector<Eigen::Vector2d>& vertices() const { return vertices_; }

  /// Area centroid of the hull.
  Eigen::Vector2d centroid() const
  {
    const auto& v = vertices_;
    const int n = static_cast<int>(v.size());
    double area2 = 0.0;
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (int i = 0; i < n; ++i)
    {
      const auto& p = v[i];
      const auto& q = v[(i + 1) % n];
      const double cross = p.x() * q.y() - q.x() * p.y();
      area2 += cross;
      c += (p + q) * cross;
    }
    return c / (3.0 * area2);
  }

  /// Distance to the hull boundary, negative inside.
  double signed_distance(const Eigen::Vector2d& point) const
  {
    const auto& v = vertices_;
    const int n = static_cast<int>(v.size());
    double min_dist = std::numeric_limits<double>::infinity();
    bool inside = true;
    for (int i = 0; i < n; ++i)
    {
      const Eigen::Vector2d& p = v[i];
      const Eigen::Vector2d& q = v[(i + 1) % n];
      const Eigen::Vector2d e = q - p;
      const Eigen::Vector2d d = point - p;
      if (e.x() * d.y() - e.y() * d.x() < 0.0)
        inside = false;
      const double t = std::clamp(d.dot(e) / e.squaredNorm(), 0.0, 1.0);
      min_dist = std::min(min_dist, (d - t * e).norm());
    }
    return inside ? -min_dist : min_dist;
  }

private:
  // Monotone-chain hull; duplicates and collinear points are dropped.
  static std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts)
  {
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
      return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const auto& a, const auto& b) { return a == b; }),
              pts.end());
    const int n = static_cast<int>(pts.size());
    if (n < 3)
      throw std::invalid_argument("SupportPolygon: degenerate contact geometry");

    auto turns_right = [](const Eigen::Vector2d& o, const Eigen::Vector2d& a,
                          const Eigen::Vector2d& b) {
      return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x()) <= 0.0;
    };
    std::vector<Eigen::Vector2d> hull(2 * n);
    int k = 0;
    for (int i = 0; i < n; ++i)
    {
      while (k >= 2 && turns_right(hull[k - 2], hull[k - 1], pts[i]))
        --k;
      hull[k++] = pts[i];
    }
    const int lower = k + 1;
    for (int i = n - 2; i >= 0; --i)
    {
      while (k >= lower && turns_right(hull[k - 2], hull[k - 1], pts[i]))
        --k;
      hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
  }

  std::vector<Eigen::Vector2d> vertices_;
};

}  // namespace stepmpc
