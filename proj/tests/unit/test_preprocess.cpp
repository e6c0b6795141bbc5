#include <doctest.h>

#include <cmath>
#include <vector>

#include "poselift/errors.hpp"
#include "poselift/preprocess.hpp"
#include "test_support.hpp"

using namespace poselift;
using poselift::testing::random_matrix;

namespace {

SkeletonSpec two_joint_spec() { return SkeletonSpec{{"root", "tip"}, 0, false}; }

}  // namespace

TEST_SUITE("preprocess") {

TEST_CASE("skeleton spec validation") {
  CHECK_NOTHROW(SkeletonSpec::human36m().validate());
  CHECK(SkeletonSpec::human36m().joint_count() == 17);
  CHECK(SkeletonSpec::human36m().input_dim() == 32);
  CHECK(SkeletonSpec::human36m().output_dim() == 48);
  CHECK_THROWS_AS((SkeletonSpec{{"a"}, 0, false}.validate()), InvalidInput);
  CHECK_THROWS_AS((SkeletonSpec{{"a", "b"}, 2, false}.validate()), InvalidInput);
  CHECK_THROWS_AS((SkeletonSpec{{"a", "a"}, 0, false}.validate()), InvalidInput);
  SkeletonSpec with_root = SkeletonSpec::human36m();
  with_root.include_root = true;
  CHECK(with_root.input_dim() == 34);
}

TEST_CASE("root_center subtracts the root joint") {
  SkeletonSpec spec{{"hip", "a", "b"}, 0, false};
  Pose2D p{Eigen::MatrixX2d(3, 2)};
  p.joints << 5, 7, 8, 11, 5, 7;
  const Pose2D c = root_center(p, spec);
  CHECK(c.joints(0, 0) == 0.0);
  CHECK(c.joints(0, 1) == 0.0);
  CHECK(c.joints(1, 0) == 3.0);
  CHECK(c.joints(1, 1) == 4.0);
  CHECK(c.joints(2, 0) == 0.0);
  // Idempotent.
  CHECK(root_center(c, spec).joints == c.joints);

  SkeletonSpec spec_root_last{{"a", "b", "hip"}, 2, false};
  const Pose2D d = root_center(p, spec_root_last);
  CHECK(d.joints.row(2).isZero(0.0));
  CHECK(d.joints(0, 0) == 0.0);
  CHECK(d.joints(1, 0) == 3.0);

  CHECK_THROWS_AS(root_center(Pose2D{Eigen::MatrixX2d::Zero(4, 2)}, spec), InvalidInput);
}

TEST_CASE("root_center on random 3D poses equals a per-joint loop") {
  const auto spec = SkeletonSpec::human36m();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Pose3D p{random_matrix(17, 3, seed, 500.0)};
    const Pose3D c = root_center(p, spec);
    for (int j = 0; j < 17; ++j) {
      for (int k = 0; k < 3; ++k) CHECK(c.joints(j, k) == p.joints(j, k) - p.joints(0, k));
    }
    CHECK(c.joints.row(0).isZero(0.0));
  }
}

TEST_CASE("network vectors skip the root") {
  const auto spec = SkeletonSpec::human36m();
  Pose2D p{random_matrix(17, 2, 3, 100.0)};
  const Vector v = to_input_vector(root_center(p, spec), spec);
  CHECK(v.size() == 32);

  const auto tiny = two_joint_spec();
  Pose2D q{Eigen::MatrixX2d(2, 2)};
  q.joints << 0, 0, 3, 4;
  const Vector w = to_input_vector(q, tiny);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == 3.0);
  CHECK(w[1] == 4.0);

  const Pose2D back = from_input_vector(v, spec);
  CHECK(back.joints == root_center(p, spec).joints);

  Pose2D off = q;
  off.joints(0, 0) = 1e-6;
  CHECK_THROWS_AS(to_input_vector(off, tiny), ContractViolation);
}

TEST_CASE("from_output_vector places the root at the origin") {
  const auto spec = SkeletonSpec::human36m();
  const Vector v = random_matrix(48, 1, 4, 300.0);
  const Pose3D p = from_output_vector(v, spec);
  CHECK(p.joints.rows() == 17);
  CHECK(p.joints.row(0).isZero(0.0));
  CHECK(to_output_vector(p, spec) == v);
  CHECK(from_output_vector(Vector::Zero(48), spec).joints.isZero(0.0));
  CHECK_THROWS_AS(from_output_vector(Vector::Zero(47), spec), InvalidInput);

  SkeletonSpec with_root = spec;
  with_root.include_root = true;
  const Pose3D centered = root_center(Pose3D{random_matrix(17, 3, 5)}, with_root);
  CHECK(from_output_vector(to_output_vector(centered, with_root), with_root).joints ==
        centered.joints);
}

TEST_CASE("fit_stats") {
  SUBCASE("two points") {
    Matrix d(2, 1);
    d << 0, 2;
    const NormStats s = fit_stats(d);
    CHECK(s.mean[0] == 1.0);
    CHECK(s.std[0] == 1.0);
  }
  SUBCASE("constant column is floored") {
    const Matrix d = Matrix::Constant(10, 3, 4.5);
    const NormStats s = fit_stats(d);
    CHECK(s.std[1] == kStdFloor);
    const Vector z = normalize(Vector::Constant(3, 4.5), s);
    CHECK(z.isZero(0.0));
    CHECK(z.allFinite());
  }
  SUBCASE("empty") { CHECK_THROWS_AS(fit_stats(Matrix(0, 3)), InvalidInput); }
  SUBCASE("matches a long-double two-pass oracle") {
    const Matrix d = random_matrix(10000, 7, 11, 250.0).array() + 30.0;
    const NormStats s = fit_stats(d);
    for (Eigen::Index c = 0; c < d.cols(); ++c) {
      long double sum = 0.0L;
      for (Eigen::Index r = 0; r < d.rows(); ++r) sum += d(r, c);
      const long double mean = sum / d.rows();
      long double sq = 0.0L;
      for (Eigen::Index r = 0; r < d.rows(); ++r) sq += (d(r, c) - mean) * (d(r, c) - mean);
      const double std_dev = static_cast<double>(std::sqrt(sq / d.rows()));
      CHECK(std::abs(s.mean[c] - static_cast<double>(mean)) < 1e-12 * std::abs(static_cast<double>(mean)) + 1e-12);
      CHECK(std::abs(s.std[c] - std_dev) < 1e-12 * std_dev);
    }
  }
}

TEST_CASE("normalize and denormalize") {
  const Matrix d = random_matrix(500, 5, 21, 40.0).array() + 7.0;
  const NormStats s = fit_stats(d);
  const Vector v = d.row(3).transpose();
  CHECK((denormalize(normalize(v, s), s) - v).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(normalize(s.mean, s).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(normalize(Vector::Zero(4), s), InvalidInput);
  CHECK_THROWS_AS(denormalize(Vector::Zero(6), s), InvalidInput);

  const Matrix z = normalize_rows(d, s);
  const NormStats after = fit_stats(z);
  CHECK(after.mean.cwiseAbs().maxCoeff() < 1e-9);
  CHECK((after.std.array() - 1.0).abs().maxCoeff() < 1e-6);
  CHECK((denormalize_rows(z, s) - d).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(normalize_rows(d, s).row(3).transpose() == normalize(v, s));
}

}
