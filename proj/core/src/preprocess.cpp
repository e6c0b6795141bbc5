#include "poselift/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "poselift/errors.hpp"

namespace poselift {

SkeletonSpec SkeletonSpec::human36m() {
  return SkeletonSpec{{"Hip", "RHip", "RKnee", "RFoot", "LHip", "LKnee", "LFoot", "Spine",
                       "Thorax", "Neck", "Head", "LShoulder", "LElbow", "LWrist", "RShoulder",
                       "RElbow", "RWrist"},
                      0, false};
}

void SkeletonSpec::validate() const {
  if (joint_count() < 2) throw InvalidInput("SkeletonSpec: need at least 2 joints");
  if (root_index < 0 || root_index >= joint_count()) {
    throw InvalidInput("SkeletonSpec: root_index " + std::to_string(root_index) +
                       " out of range");
  }
  std::set<std::string> seen;
  for (const auto& name : joint_names) {
    if (!seen.insert(name).second) throw InvalidInput("SkeletonSpec: duplicate joint '" + name + "'");
  }
}

namespace {

template <typename Joints>
Joints centered(const Joints& joints, const SkeletonSpec& spec, const char* what) {
  if (joints.rows() != spec.joint_count()) {
    throw InvalidInput(std::string(what) + ": pose has " + std::to_string(joints.rows()) +
                       " joints, skeleton has " + std::to_string(spec.joint_count()));
  }
  Joints out = joints;
  const auto root = joints.row(spec.root_index).eval();
  for (Eigen::Index j = 0; j < out.rows(); ++j) out.row(j) -= root;
  // Subtracting a value from itself is exactly zero except for inf/nan.
  out.row(spec.root_index).setZero();
  return out;
}

template <typename Joints>
Vector flatten(const Joints& joints, const SkeletonSpec& spec, const char* what) {
  constexpr int kCols = Joints::ColsAtCompileTime;
  if (joints.rows() != spec.joint_count()) {
    throw InvalidInput(std::string(what) + ": pose/skeleton joint count mismatch");
  }
  if (joints.row(spec.root_index).cwiseAbs().maxCoeff() > kCenteredTolerance) {
    throw ContractViolation(std::string(what) + ": pose is not root-centered");
  }
  Vector v(kCols * spec.vector_joint_count());
  Eigen::Index k = 0;
  for (int j = 0; j < spec.joint_count(); ++j) {
    if (j == spec.root_index && !spec.include_root) continue;
    for (int c = 0; c < kCols; ++c) v[k++] = joints(j, c);
  }
  return v;
}

template <typename Joints>
Joints unflatten(const Eigen::Ref<const Vector>& v, const SkeletonSpec& spec, const char* what) {
  constexpr int kCols = Joints::ColsAtCompileTime;
  if (v.size() != kCols * spec.vector_joint_count()) {
    throw InvalidInput(std::string(what) + ": expected vector of length " +
                       std::to_string(kCols * spec.vector_joint_count()) + ", got " +
                       std::to_string(v.size()));
  }
  Joints joints = Joints::Zero(spec.joint_count(), kCols);
  Eigen::Index k = 0;
  for (int j = 0; j < spec.joint_count(); ++j) {
    if (j == spec.root_index && !spec.include_root) continue;
    for (int c = 0; c < kCols; ++c) joints(j, c) = v[k++];
  }
  return joints;
}

void check_length(Eigen::Index got, const NormStats& s, const char* what) {
  if (got != s.mean.size() || s.std.size() != s.mean.size()) {
    throw InvalidInput(std::string(what) + ": length " + std::to_string(got) +
                       " does not match statistics of length " + std::to_string(s.mean.size()));
  }
}

}  // namespace

Pose2D root_center(const Pose2D& pose, const SkeletonSpec& spec) {
  return Pose2D{centered(pose.joints, spec, "root_center")};
}

Pose3D root_center(const Pose3D& pose, const SkeletonSpec& spec) {
  return Pose3D{centered(pose.joints, spec, "root_center")};
}

Vector to_input_vector(const Pose2D& pose, const SkeletonSpec& spec) {
  return flatten(pose.joints, spec, "to_input_vector");
}

Vector to_output_vector(const Pose3D& pose, const SkeletonSpec& spec) {
  return flatten(pose.joints, spec, "to_output_vector");
}

Pose2D from_input_vector(const Eigen::Ref<const Vector>& v, const SkeletonSpec& spec) {
  return Pose2D{unflatten<Eigen::MatrixX2d>(v, spec, "from_input_vector")};
}

Pose3D from_output_vector(const Eigen::Ref<const Vector>& v, const SkeletonSpec& spec) {
  return Pose3D{unflatten<Eigen::MatrixX3d>(v, spec, "from_output_vector")};
}

NormStats fit_stats(const Matrix& samples) {
  if (samples.rows() == 0) throw InvalidInput("fit_stats: dataset is empty");
  const double n = static_cast<double>(samples.rows());
  NormStats s{Vector::Zero(samples.cols()), Vector::Zero(samples.cols())};
  // Two sequential passes, sample order fixed, so results are bit-stable.
  for (Eigen::Index d = 0; d < samples.cols(); ++d) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) sum += samples(i, d);
    const double mean = sum / n;
    double sq = 0.0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      const double diff = samples(i, d) - mean;
      sq += diff * diff;
    }
    s.mean[d] = mean;
    s.std[d] = std::max(std::sqrt(sq / n), kStdFloor);
  }
  return s;
}

Vector normalize(const Eigen::Ref<const Vector>& v, const NormStats& s) {
  check_length(v.size(), s, "normalize");
  return (v - s.mean).cwiseQuotient(s.std);
}

Vector denormalize(const Eigen::Ref<const Vector>& v, const NormStats& s) {
  check_length(v.size(), s, "denormalize");
  return v.cwiseProduct(s.std) + s.mean;
}

Matrix normalize_rows(const Matrix& batch, const NormStats& s) {
  check_length(batch.cols(), s, "normalize_rows");
  return (batch.rowwise() - s.mean.transpose()).array().rowwise() / s.std.transpose().array();
}

Matrix denormalize_rows(const Matrix& batch, const NormStats& s) {
  check_length(batch.cols(), s, "denormalize_rows");
  return (batch.array().rowwise() * s.std.transpose().array()).matrix().rowwise() +
         s.mean.transpose();
}

}  // namespace poselift
