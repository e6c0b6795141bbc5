#pragma once

#include <string>
#include <vector>

#include "poselift/preprocess.hpp"

namespace poselift {

/// Which joints the per-joint average runs over. The root always contributes
/// zero error after centering, so the two conventions differ by the factor
/// joint_count / (joint_count - 1).
enum class JointAveraging { all_joints, non_root };

const char* to_string(JointAveraging a);
JointAveraging joint_averaging_from_string(const std::string& s);

/// Mean per joint position error: both sides are root-centered, then the
/// Euclidean joint distance is averaged over samples and joints.
/// Throws InvalidInput on a count or joint-count mismatch.
double mpjpe(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts,
             const SkeletonSpec& spec, JointAveraging averaging = JointAveraging::all_joints);

/// Same metric on N x output_dim rows of root-relative flattened vectors.
double mpjpe_rows(const Matrix& preds, const Matrix& gts, const SkeletonSpec& spec,
                  JointAveraging averaging = JointAveraging::all_joints);

}  // namespace poselift
