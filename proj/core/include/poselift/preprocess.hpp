#pragma once

#include <string>
#include <vector>

#include "poselift/types.hpp"

namespace poselift {

/// Joint naming and ordering shared by every pose, dataset and checkpoint.
struct SkeletonSpec {
  std::vector<std::string> joint_names;
  int root_index = 0;
  /// When false (the default) the root joint, identically zero after
  /// centering, is left out of the network vectors.
  bool include_root = false;

  /// 17 joints in Human3.6M order, rooted at the hip.
  static SkeletonSpec human36m();

  int joint_count() const { return static_cast<int>(joint_names.size()); }
  /// Joints that appear in the flattened network vectors.
  int vector_joint_count() const { return include_root ? joint_count() : joint_count() - 1; }
  int input_dim() const { return 2 * vector_joint_count(); }
  int output_dim() const { return 3 * vector_joint_count(); }

  /// Throws InvalidInput unless joint_count >= 2, the root is in range and names are unique.
  void validate() const;

  friend bool operator==(const SkeletonSpec&, const SkeletonSpec&) = default;
};

/// Standardization statistics, one entry per flattened dimension.
struct NormStats {
  Vector mean;
  Vector std;

  Eigen::Index dim() const { return mean.size(); }
};

inline constexpr double kStdFloor = 1e-8;
/// Root offset tolerated by to_input_vector/to_output_vector.
inline constexpr double kCenteredTolerance = 1e-9;

Pose2D root_center(const Pose2D& pose, const SkeletonSpec& spec);
Pose3D root_center(const Pose3D& pose, const SkeletonSpec& spec);

Vector to_input_vector(const Pose2D& pose, const SkeletonSpec& spec);
Vector to_output_vector(const Pose3D& pose, const SkeletonSpec& spec);
Pose2D from_input_vector(const Eigen::Ref<const Vector>& v, const SkeletonSpec& spec);
Pose3D from_output_vector(const Eigen::Ref<const Vector>& v, const SkeletonSpec& spec);

/// Sample mean and population standard deviation of the rows of `samples`,
/// with the deviation floored at kStdFloor.
NormStats fit_stats(const Matrix& samples);

Vector normalize(const Eigen::Ref<const Vector>& v, const NormStats& s);
Vector denormalize(const Eigen::Ref<const Vector>& v, const NormStats& s);
/// Row-wise versions for N x D batches.
Matrix normalize_rows(const Matrix& batch, const NormStats& s);
Matrix denormalize_rows(const Matrix& batch, const NormStats& s);

}  // namespace poselift
