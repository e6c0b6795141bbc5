#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "poselift/geometry.hpp"
#include "poselift/nn.hpp"
#include "poselift/preprocess.hpp"
#include "poselift/train.hpp"

namespace poselift {

/// Pinhole camera: p_cam = R p + t, u = fx x/z + cx, v = fy y/z + cy.
/// Camera axes are x right, y down, z forward.
struct CameraModel {
  int id = 0;
  double fx = 1150.0;
  double fy = 1150.0;
  double cx = 500.0;
  double cy = 500.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// Throws InvalidInput unless R^T R = I within 1e-9 and focal lengths are positive.
  void validate() const;
  Eigen::Vector3d to_camera(const Eigen::Vector3d& p) const { return rotation * p + translation; }
};

/// Camera at `distance` mm from the world origin, rotated `azimuth` radians
/// about the vertical axis and raised by `elevation` radians, looking at the origin.
CameraModel look_at_camera(int id, double azimuth, double elevation, double distance,
                           double focal = 1150.0, double cx = 500.0, double cy = 500.0);

/// `count` cameras spread evenly in azimuth with distances stepping from
/// min_distance to max_distance.
std::vector<CameraModel> default_camera_pool(int count = 4, double min_distance = 4000.0,
                                             double max_distance = 6000.0);

/// Kinematic tree for sampling: every joint hangs off its parent along a
/// random direction inside a cone around its rest direction.
struct SkeletonTemplate {
  SkeletonSpec spec;
  std::vector<int> parents;                     // -1 for the root
  std::vector<double> bone_lengths;             // mm, to the parent; 0 for the root
  std::vector<Eigen::Vector3d> rest_directions; // unit vectors, world frame (y down)
  std::vector<double> max_angles;               // cone half-angle in radians

  /// Human3.6M joint order with round-number bone lengths.
  static SkeletonTemplate human36m();

  /// Throws InvalidInput unless parents form a tree rooted at spec.root_index,
  /// parents precede children, and bone lengths are positive.
  void validate() const;
};

/// Forward kinematics from a root at the origin. Zero cone angles give the rest pose.
Pose3D sample_pose(const SkeletonTemplate& tmpl, Rng& rng);

/// Throws DegenerateGeometry if any joint has non-positive depth.
Pose2D project(const CameraModel& cam, const Pose3D& pose);

struct Sample {
  std::string id;
  Split split = Split::train;
  int camera_id = 0;
  BoundingBox box;  // tight box around the noisy 2D joints
  Pose2D pose2d;    // image pixels
  Pose3D pose3d;    // camera frame, millimeters
};

struct SynthConfig {
  int samples = 5000;
  double noise_sigma = 3.0;  // pixels
  std::uint64_t seed = 7;
  int cameras = 4;
  double min_distance = 4000.0;
  double max_distance = 6000.0;
  double max_offset = 200.0;  // mm of random ground-plane shift of the subject
  double image_width = 1000.0;
  double image_height = 1000.0;

  void validate() const;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct SplitSizes {
  int train = 0;
  int val = 0;
  int test = 0;
};

/// 70/15/15: val = floor(0.15 n), test = ceil(0.15 n), train takes the rest.
SplitSizes split_sizes(int n);

/// Samples `n_samples` poses with a random heading, projects each through a
/// camera drawn from `cameras`, adds N(0, noise_sigma^2) pixel noise to the 2D
/// joints and assigns splits by a seeded permutation. Sample i draws from its
/// own generator seeded by (seed, i). Output is ordered by sample index.
std::vector<Sample> make_dataset(const SkeletonTemplate& tmpl, int n_samples,
                                 const std::vector<CameraModel>& cameras, double noise_sigma,
                                 std::uint64_t seed, double max_offset = 200.0);

std::vector<Sample> make_dataset(const SkeletonTemplate& tmpl, const SynthConfig& config);

/// Root-centers both modalities of the samples in `split` and flattens them.
PairedDataset make_paired(const std::vector<Sample>& samples, Split split,
                          const SkeletonSpec& spec);

}  // namespace poselift
