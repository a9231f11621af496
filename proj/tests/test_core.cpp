#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "ellipfit/errors.hpp"
#include "ellipfit/linalg.hpp"
#include "ellipfit/parallel.hpp"
#include "ellipfit/point_cloud.hpp"
#include "ellipfit/random.hpp"
#include "ellipfit/stats.hpp"
#include "ellipfit/sym_matrix.hpp"

using namespace ellip;

namespace {

SymMatrix random_symmetric(Eigen::Index d, RandomStream& stream) {
  SymMatrix m(d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) m.set(i, j, stream.normal());
  return m;
}

}  // namespace

TEST_CASE("random stream is reproducible and keyed by (seed, id)") {
  RandomStream a(42, 7);
  RandomStream b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RandomStream c(42, 8);
  RandomStream d(43, 7);
  RandomStream base(42, 7);
  int diff_id = 0;
  int diff_seed = 0;
  for (int i = 0; i < 16; ++i) {
    std::uint64_t ref = base.next_u64();
    if (c.next_u64() != ref) ++diff_id;
    if (d.next_u64() != ref) ++diff_seed;
  }
  CHECK(diff_id >= 15);
  CHECK(diff_seed >= 15);
}

TEST_CASE("stream id layout and forking") {
  auto s = RandomStream::for_purpose(5, purpose::kQtilde, 123);
  CHECK(s.master_seed() == 5);
  CHECK(s.stream_id() == (purpose::kQtilde << 32) + 123);

  auto forked = s.fork(10);
  CHECK(forked.master_seed() == 5);
  CHECK(forked.stream_id() == s.stream_id() + 10);

  // A fork starts from block zero regardless of how far the parent advanced.
  RandomStream parent(9, 100);
  parent.next_u64();
  parent.next_u64();
  auto child = parent.fork(1);
  RandomStream fresh(9, 101);
  for (int i = 0; i < 20; ++i) CHECK(child.next_u64() == fresh.next_u64());
}

TEST_CASE("uniform01 range and mean") {
  RandomStream s(1, 0);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = s.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // SE of the mean is 1/sqrt(12 n); allow five of them.
  CHECK(std::abs(sum / n - 0.5) < 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("normal moments") {
  RandomStream s(2, 0);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = s.normal();
    sum += g;
    sum_sq += g * g;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 5.0 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));

  RandomStream v(2, 1);
  Eigen::VectorXd g = v.normal_vector(17);
  CHECK(g.size() == 17);
  CHECK(g.allFinite());
}

TEST_CASE("uniform_below stays in range and covers it") {
  RandomStream s(3, 0);
  const std::uint64_t bound = 7;
  std::vector<int> hits(bound, 0);
  for (int i = 0; i < 7000; ++i) {
    std::uint64_t v = s.uniform_below(bound);
    REQUIRE(v < bound);
    ++hits[v];
  }
  for (auto h : hits) CHECK(h > 700);
}

TEST_CASE("flatten is an isometry for the trace inner product") {
  RandomStream s(4, 0);
  for (Eigen::Index d : {2, 3, 10, 30}) {
    SymMatrix m = random_symmetric(d, s);
    SymMatrix n = random_symmetric(d, s);
    FlatVector fm = flatten(m);
    FlatVector fn = flatten(n);
    CHECK(fm.coords.size() == flat_dim(d));
    double trace_ip = (m.mat() * n.mat()).trace();
    double flat_ip = fm.coords.dot(fn.coords);
    double scale = m.mat().norm() * n.mat().norm();
    CHECK(std::abs(trace_ip - flat_ip) <= 1e-12 * scale);

    SymMatrix back = unflatten(fm);
    CHECK((back.mat() - m.mat()).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("flatten_outer and flatten_identity match the generic path") {
  RandomStream s(5, 0);
  const Eigen::Index d = 6;
  Eigen::VectorXd x = s.normal_vector(d);
  SymMatrix outer = SymMatrix::mirror_lower(x * x.transpose());
  Eigen::VectorXd direct = flatten_outer(x);
  CHECK((direct - flatten(outer).coords).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((flatten_identity(d) - flatten(SymMatrix::identity(d)).coords)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("from_coords rejects lengths that are not triangular numbers") {
  CHECK_THROWS_AS(FlatVector::from_coords(Eigen::VectorXd::Zero(4)),
                  InvalidShapeError);
  CHECK(FlatVector::from_coords(Eigen::VectorXd::Zero(6)).d == 3);
}

TEST_CASE("SymMatrix invariants") {
  Eigen::MatrixXd raw(2, 2);
  raw << 1.0, 99.0, 3.0, 4.0;
  SymMatrix m = SymMatrix::mirror_lower(raw);
  CHECK(m(0, 1) == 3.0);
  CHECK(m(1, 0) == 3.0);
  m.set(0, 1, -2.0);
  CHECK(m(1, 0) == -2.0);

  Eigen::VectorXd diag(3);
  diag << 1, 2, 3;
  SymMatrix d = SymMatrix::from_diagonal(diag);
  CHECK(d(1, 1) == 2.0);
  CHECK(d(0, 2) == 0.0);
}

TEST_CASE("sym_eig_extremes agrees with the general eigensolver") {
  RandomStream s(6, 0);
  for (Eigen::Index d : {2, 5, 12, 30}) {
    SymMatrix m = random_symmetric(d, s);
    EigExtremes ext = sym_eig_extremes(m);
    Eigen::EigenSolver<Eigen::MatrixXd> general(m.mat());
    Eigen::VectorXd evs = general.eigenvalues().real();
    double scale = std::max(1.0, m.mat().norm());
    CHECK(std::abs(ext.min - evs.minCoeff()) <= 1e-10 * scale);
    CHECK(std::abs(ext.max - evs.maxCoeff()) <= 1e-10 * scale);
  }

  Eigen::VectorXd diag(3);
  diag << -4, 0.5, 9;
  EigExtremes ext = sym_eig_extremes(SymMatrix::from_diagonal(diag));
  CHECK(ext.min == doctest::Approx(-4).epsilon(1e-14));
  CHECK(ext.max == doctest::Approx(9).epsilon(1e-14));

  SymMatrix bad(2);
  bad.set(0, 0, std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(sym_eig_extremes(bad), NumericError);
  CHECK_THROWS_AS(sym_eig_extremes(SymMatrix{}), InvalidShapeError);
}

TEST_CASE("lambda_max_with_vector returns a matching unit eigenvector") {
  RandomStream s(7, 0);
  SymMatrix m = random_symmetric(8, s);
  Eigen::VectorXd v;
  double lmax = lambda_max_with_vector(m, &v);
  CHECK(std::abs(v.norm() - 1.0) <= 1e-12);
  CHECK((m.mat() * v - lmax * v).norm() <= 1e-10 * std::max(1.0, std::abs(lmax)));
}

TEST_CASE("op_norm is the largest absolute eigenvalue") {
  Eigen::VectorXd diag(2);
  diag << -3, 2;
  CHECK(op_norm(SymMatrix::from_diagonal(diag)) == doctest::Approx(3.0));
}

TEST_CASE("spd_solve and spd_inverse") {
  RandomStream s(8, 0);
  const Eigen::Index d = 12;
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = s.normal();
  SymMatrix a = SymMatrix::mirror_lower(g * g.transpose() +
                                        Eigen::MatrixXd::Identity(d, d));
  Eigen::VectorXd b = s.normal_vector(d);

  Eigen::VectorXd x = spd_solve(a, b);
  CHECK((a.mat() * x - b).norm() <= 1e-10 * b.norm());

  Eigen::MatrixXd rhs(d, 3);
  rhs.col(0) = b;
  rhs.col(1) = s.normal_vector(d);
  rhs.col(2) = s.normal_vector(d);
  Eigen::MatrixXd xs = spd_solve_many(a, rhs);
  CHECK((xs.col(0) - x).norm() <= 1e-12 * x.norm());
  CHECK((a.mat() * xs - rhs).norm() <= 1e-10 * rhs.norm());

  Eigen::MatrixXd inv = spd_inverse(a);
  CHECK((a.mat() * inv - Eigen::MatrixXd::Identity(d, d)).norm() <= 1e-9);

  Eigen::VectorXd indef(2);
  indef << 1, -1;
  CHECK_THROWS_AS(spd_solve(SymMatrix::from_diagonal(indef), Eigen::VectorXd::Ones(2)),
                  NotPositiveDefiniteError);
}

TEST_CASE("point cloud construction and validation") {
  Eigen::MatrixXd pts(2, 3);
  pts << 3, 0, 0, 0, 0, 4;
  PointCloud cloud = PointCloud::from_points(pts);
  CHECK(cloud.d == 3);
  CHECK(cloud.n == 2);
  CHECK(cloud.norms_sq(0) == doctest::Approx(9.0));
  CHECK(cloud.norms_sq(1) == doctest::Approx(16.0));
  CHECK(cloud.directions.row(0).norm() == doctest::Approx(1.0));
  CHECK(cloud.directions(1, 2) == doctest::Approx(1.0));

  Eigen::MatrixXd with_zero = pts;
  with_zero.row(1).setZero();
  CHECK_THROWS_AS(PointCloud::from_points(with_zero), DegenerateInputError);

  Eigen::MatrixXd with_nan = pts;
  with_nan(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(PointCloud::from_points(with_nan), DegenerateInputError);
}

TEST_CASE("gaussian cloud scaling concentrates squared norms at one") {
  RandomStream s(9, 0);
  PointCloud cloud = sample_gaussian_cloud(200, 400, s);
  CHECK(cloud.points.rows() == 400);
  CHECK(cloud.points.cols() == 200);
  // E|x|^2 = 1, Var|x|^2 = 2/d; the mean over n points has SE sqrt(2/(d n)).
  double mean = cloud.norms_sq.mean();
  CHECK(std::abs(mean - 1.0) < 5.0 * std::sqrt(2.0 / (200.0 * 400.0)));
}

TEST_CASE("sphere directions are unit and centered") {
  RandomStream s(10, 0);
  Eigen::MatrixXd dirs = sample_sphere_directions(25, 4000, s);
  for (Eigen::Index i = 0; i < dirs.rows(); ++i)
    REQUIRE(std::abs(dirs.row(i).norm() - 1.0) <= 1e-12);
  // Each coordinate has mean zero and variance 1/d.
  Eigen::VectorXd mean = dirs.colwise().mean();
  CHECK(mean.cwiseAbs().maxCoeff() < 5.0 / std::sqrt(25.0 * 4000.0));
}

TEST_CASE("random_orthogonal produces orthogonal matrices") {
  RandomStream s(11, 0);
  for (Eigen::Index d : {2, 7, 20}) {
    Eigen::MatrixXd q = random_orthogonal(d, s);
    CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(d, d))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
  }
}

TEST_CASE("parallel_for fills every slot identically for any thread count") {
  const std::int64_t count = 1000;
  std::vector<double> one(count, 0.0), four(count, 0.0);
  auto body = [](std::vector<double>& slots) {
    return [&slots](std::int64_t i) {
      RandomStream s(77, std::uint64_t(i));
      slots[std::size_t(i)] = s.normal();
    };
  };
  parallel_for(count, 1, body(one));
  parallel_for(count, 4, body(four));
  CHECK(one == four);
  CHECK(std::count(one.begin(), one.end(), 0.0) == 0);
}

TEST_CASE("parallel_for propagates body exceptions") {
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [](std::int64_t i) {
                                 if (i == 42) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  CHECK(resolve_threads(3) == 3);
  CHECK(resolve_threads(0) >= 1);
  CHECK(resolve_threads(-1) >= 1);
}

TEST_CASE("wilson95 matches an external calculation") {
  WilsonInterval w = wilson95(8, 10);
  CHECK(w.lo == doctest::Approx(0.490162471536642).epsilon(1e-12));
  CHECK(w.hi == doctest::Approx(0.943317848545625).epsilon(1e-12));

  WilsonInterval zero = wilson95(0, 20);
  CHECK(zero.lo == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(zero.hi == doctest::Approx(0.161125158052819).epsilon(1e-12));

  WilsonInterval full = wilson95(20, 20);
  CHECK(full.lo == doctest::Approx(0.838874841947181).epsilon(1e-12));
  CHECK(full.hi == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(wilson95(1, 0), PreconditionError);
  CHECK_THROWS_AS(wilson95(5, 4), PreconditionError);
}

TEST_CASE("quantile interpolates order statistics") {
  std::vector<double> v{4, 1, 3, 2};
  CHECK(quantile(v, 0.0) == doctest::Approx(1.0));
  CHECK(quantile(v, 1.0) == doctest::Approx(4.0));
  CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({7.0}, 0.3) == doctest::Approx(7.0));
  CHECK_THROWS_AS(quantile({}, 0.5), PreconditionError);
  CHECK_THROWS_AS(quantile({1.0}, 1.5), PreconditionError);
}

TEST_CASE("ks_distance handles ties and disjoint supports") {
  CHECK(ks_distance({1, 2, 3}, {1, 2, 3}) == doctest::Approx(0.0));
  CHECK(ks_distance({0, 1}, {2, 3}) == doctest::Approx(1.0));
  // At t = 1: F_a = 2/3, F_b = 1/3.
  CHECK(ks_distance({1, 1, 2}, {1, 2, 2}) == doctest::Approx(1.0 / 3.0));

  RandomStream sa(12, 0), sb(12, 1);
  std::vector<double> a(20000), b(20000);
  for (auto& x : a) x = sa.normal();
  for (auto& x : b) x = sb.normal();
  CHECK(ks_distance(a, b) < 0.02);
}
