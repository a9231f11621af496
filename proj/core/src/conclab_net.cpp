#include <array>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "ellipfit/conclab.hpp"
#include "ellipfit/errors.hpp"
#include "ellipfit/fitter.hpp"
#include "ellipfit/linalg.hpp"
#include "ellipfit/parallel.hpp"

#include "conclab_internal.hpp"

namespace ellip::conclab {
namespace {

using Vec3 = Eigen::Vector3d;

struct TriMesh {
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> faces;
};

TriMesh icosahedron() {
  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  std::vector<Vec3> v = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& x : v) x.normalize();
  std::vector<std::array<int, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  return {std::move(v), std::move(f)};
}

TriMesh subdivide(const TriMesh& mesh) {
  TriMesh out;
  out.verts = mesh.verts;
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Vec3 m = (out.verts[a] + out.verts[b]).normalized();
    out.verts.push_back(m);
    int idx = static_cast<int>(out.verts.size()) - 1;
    midpoint.emplace(key, idx);
    return idx;
  };
  for (const auto& f : mesh.faces) {
    int ab = mid(f[0], f[1]);
    int bc = mid(f[1], f[2]);
    int ca = mid(f[2], f[0]);
    out.faces.push_back({f[0], ab, ca});
    out.faces.push_back({f[1], bc, ab});
    out.faces.push_back({f[2], ca, bc});
    out.faces.push_back({ab, bc, ca});
  }
  return out;
}

// Chordal circumradius of a spherical face: distance from the projected
// circumcenter to the face vertices.  For this near-equilateral
// triangulation the circumcenter is the farthest interior point from the
// vertex set, so the max over faces bounds the covering radius.
double max_face_circumradius(const TriMesh& mesh) {
  double worst = 0.0;
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.verts[f[0]];
    const Vec3& b = mesh.verts[f[1]];
    const Vec3& c = mesh.verts[f[2]];
    Vec3 axis = (b - a).cross(c - a);
    double norm = axis.norm();
    if (!(norm > 0.0)) throw NumericError("half_net: degenerate face");
    axis /= norm;
    if (axis.dot(a) < 0.0) axis = -axis;
    for (int k = 0; k < 3; ++k)
      worst = std::max(worst, (axis - mesh.verts[f[k]]).norm());
  }
  return worst;
}

}  // namespace

Eigen::MatrixXd half_net(Eigen::Index d) {
  if (d == 1) {
    Eigen::MatrixXd net(2, 1);
    net << 1.0, -1.0;
    return net;
  }
  if (d == 2) {
    // Smallest k with chordal gap 2 sin(pi/k) <= 1/2 is 13.
    const int k = 13;
    const double two_pi = 8.0 * std::atan(1.0);
    Eigen::MatrixXd net(k, 2);
    for (int i = 0; i < k; ++i) {
      const double ang = two_pi * i / k;
      net(i, 0) = std::cos(ang);
      net(i, 1) = std::sin(ang);
    }
    return net;
  }
  if (d == 3) {
    TriMesh mesh = icosahedron();
    while (max_face_circumradius(mesh) > 0.5) mesh = subdivide(mesh);
    Eigen::MatrixXd net(static_cast<Eigen::Index>(mesh.verts.size()), 3);
    for (std::size_t i = 0; i < mesh.verts.size(); ++i)
      net.row(static_cast<Eigen::Index>(i)) = mesh.verts[i].transpose();
    return net;
  }
  throw PreconditionError("half_net: explicit construction only for d <= 3");
}

double net_covering_radius_estimate(const Eigen::MatrixXd& net,
                                    std::int64_t samples,
                                    RandomStream stream) {
  if (net.rows() < 1) throw PreconditionError("net_covering_radius: empty net");
  const Eigen::Index d = net.cols();
  double worst = 0.0;
  for (std::int64_t s = 0; s < samples; ++s) {
    Eigen::VectorXd a = sample_sphere_direction(d, stream);
    // Nearest net point by chordal distance, via the largest inner product.
    double best_dot = (net * a).maxCoeff();
    worst = std::max(worst, std::sqrt(std::max(0.0, 2.0 - 2.0 * best_dot)));
  }
  return worst;
}

NetDomination net_max_relation(const SymMatrix& m, const Eigen::MatrixXd& net) {
  if (net.cols() != m.dim())
    throw InvalidShapeError("net_max_relation: dimension mismatch");
  NetDomination out;
  out.op_norm = op_norm(m);
  for (Eigen::Index i = 0; i < net.rows(); ++i) {
    const Eigen::VectorXd a = net.row(i).transpose();
    out.net_abs_max = std::max(out.net_abs_max, std::abs(a.dot(m.mat() * a)));
  }
  out.holds = out.op_norm <= 2.0 * out.net_abs_max * (1.0 + 1e-9) + 1e-15;
  return out;
}

NetProfileEvent net_profile_event(Eigen::Index d, Eigen::Index n,
                                  int num_directions, std::int64_t trials,
                                  const RandomStream& base,
                                  const std::vector<double>& c2_values,
                                  int threads) {
  if (c2_values.empty())
    throw PreconditionError("net_profile_event: need at least one C2");
  if (num_directions < 1 || trials < 1)
    throw PreconditionError("net_profile_event: need directions and trials");

  std::vector<double> max_abs(trials);
  parallel_for(trials, threads, [&](std::int64_t t) {
    RandomStream stream = base.fork(static_cast<std::uint64_t>(t));
    PointCloud cloud = internal::conditioned_cloud(d, n, stream, nullptr);
    TruncatedWeights tw = truncate_center(qtilde(cloud), d);
    SymMatrix theta = fitter::kernel_gram(cloud).theta;
    Eigen::VectorXd weights = spd_solve(theta, tw.y);
    double worst = 0.0;
    for (int j = 0; j < num_directions; ++j) {
      Eigen::VectorXd a = sample_sphere_direction(d, stream);
      worst = std::max(
          worst,
          std::abs(internal::direction_value(cloud.directions, weights, a)));
    }
    max_abs[t] = worst;
  });

  NetProfileEvent out;
  out.d = d;
  out.n = n;
  out.trials = trials;
  out.num_directions = num_directions;
  out.c2_values = c2_values;
  for (double c2 : c2_values) {
    std::int64_t hits = 0;
    for (double v : max_abs)
      if (v <= c2) ++hits;
    out.frequency.push_back(static_cast<double>(hits) /
                            static_cast<double>(trials));
  }
  return out;
}

}  // namespace ellip::conclab
