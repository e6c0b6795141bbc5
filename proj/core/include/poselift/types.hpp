#pragma once

#include <Eigen/Core>

namespace poselift {

/// Batches are stored sample-per-row: an N x D matrix holds N vectors of width D.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// One skeleton in 2D, one joint per row, (x, y) in pixels or normalized units.
struct Pose2D {
  Eigen::MatrixX2d joints;

  Eigen::Index joint_count() const { return joints.rows(); }
};

/// One skeleton in 3D, one joint per row, (x, y, z) in millimeters or normalized units.
struct Pose3D {
  Eigen::MatrixX3d joints;

  Eigen::Index joint_count() const { return joints.rows(); }
};

}  // namespace poselift
