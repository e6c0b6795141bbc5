#include "poselift/metrics.hpp"

#include <string>

#include "poselift/errors.hpp"

namespace poselift {

const char* to_string(JointAveraging a) {
  return a == JointAveraging::all_joints ? "all_joints" : "non_root";
}

JointAveraging joint_averaging_from_string(const std::string& s) {
  if (s == "all_joints") return JointAveraging::all_joints;
  if (s == "non_root") return JointAveraging::non_root;
  throw InvalidInput("unknown joint averaging '" + s + "' (expected all_joints or non_root)");
}

namespace {

// Sum of per-joint distances between two poses after root-centering each.
double pose_error_sum(const Pose3D& pred, const Pose3D& gt, const SkeletonSpec& spec) {
  const Pose3D p = root_center(pred, spec);
  const Pose3D g = root_center(gt, spec);
  return (p.joints - g.joints).rowwise().norm().sum();
}

double divisor(const SkeletonSpec& spec, JointAveraging averaging) {
  return averaging == JointAveraging::all_joints ? spec.joint_count() : spec.joint_count() - 1;
}

}  // namespace

double mpjpe(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts,
             const SkeletonSpec& spec, JointAveraging averaging) {
  if (preds.size() != gts.size()) {
    throw InvalidInput("mpjpe: " + std::to_string(preds.size()) + " predictions vs " +
                       std::to_string(gts.size()) + " ground-truth poses");
  }
  if (preds.empty()) throw InvalidInput("mpjpe: no poses");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += pose_error_sum(preds[i], gts[i], spec);
  return total / (static_cast<double>(preds.size()) * divisor(spec, averaging));
}

double mpjpe_rows(const Matrix& preds, const Matrix& gts, const SkeletonSpec& spec,
                  JointAveraging averaging) {
  if (preds.rows() != gts.rows() || preds.cols() != gts.cols()) {
    throw InvalidInput("mpjpe_rows: prediction and ground-truth shapes differ");
  }
  if (preds.rows() == 0) throw InvalidInput("mpjpe_rows: no poses");
  double total = 0.0;
  for (Eigen::Index i = 0; i < preds.rows(); ++i) {
    total += pose_error_sum(from_output_vector(preds.row(i).transpose(), spec),
                            from_output_vector(gts.row(i).transpose(), spec), spec);
  }
  return total / (static_cast<double>(preds.rows()) * divisor(spec, averaging));
}

}  // namespace poselift
