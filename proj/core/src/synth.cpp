#include "poselift/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "poselift/errors.hpp"

namespace poselift {

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidInput("camera: focal lengths must be positive");
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw InvalidInput("camera: rotation is not orthonormal");
  }
}

CameraModel look_at_camera(int id, double azimuth, double elevation, double distance,
                           double focal, double cx, double cy) {
  // World y points down, so a raised camera has negative y.
  const Eigen::Vector3d center(distance * std::sin(azimuth) * std::cos(elevation),
                               -distance * std::sin(elevation),
                               -distance * std::cos(azimuth) * std::cos(elevation));
  const Eigen::Vector3d forward = (-center).normalized();
  const Eigen::Vector3d right = Eigen::Vector3d::UnitY().cross(forward).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  CameraModel cam;
  cam.id = id;
  cam.fx = cam.fy = focal;
  cam.cx = cx;
  cam.cy = cy;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * center;
  return cam;
}

std::vector<CameraModel> default_camera_pool(int count, double min_distance,
                                             double max_distance) {
  if (count < 1) throw InvalidInput("camera pool: need at least one camera");
  std::vector<CameraModel> pool;
  const double elevation = 10.0 * std::numbers::pi / 180.0;
  for (int k = 0; k < count; ++k) {
    const double azimuth = 2.0 * std::numbers::pi * k / count + std::numbers::pi / 4.0;
    const double t = count == 1 ? 0.5 : static_cast<double>(k) / (count - 1);
    pool.push_back(
        look_at_camera(k, azimuth, elevation, min_distance + t * (max_distance - min_distance)));
  }
  return pool;
}

SkeletonTemplate SkeletonTemplate::human36m() {
  const Eigen::Vector3d left(1, 0, 0), right(-1, 0, 0), down(0, 1, 0), up(0, -1, 0);
  constexpr double deg = std::numbers::pi / 180.0;
  SkeletonTemplate t;
  t.spec = SkeletonSpec::human36m();
  t.parents = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
  t.bone_lengths = {0, 130, 450, 440, 130, 450, 440, 230, 230, 120, 110,
                    150, 280, 250, 150, 280, 250};
  t.rest_directions = {Eigen::Vector3d::Zero(), right, down, down, left, down, down, up, up, up,
                       up, left, down, down, right, down, down};
  for (double a : {0, 10, 50, 60, 10, 50, 60, 20, 15, 20, 30, 15, 80, 90, 15, 80, 90}) {
    t.max_angles.push_back(a * deg);
  }
  return t;
}

void SkeletonTemplate::validate() const {
  spec.validate();
  const auto n = static_cast<std::size_t>(spec.joint_count());
  if (parents.size() != n || bone_lengths.size() != n || rest_directions.size() != n ||
      max_angles.size() != n) {
    throw InvalidInput("skeleton template: per-joint arrays must match the joint count");
  }
  for (std::size_t j = 0; j < n; ++j) {
    const bool is_root = static_cast<int>(j) == spec.root_index;
    if (is_root != (parents[j] < 0)) {
      throw InvalidInput("skeleton template: exactly the root joint must lack a parent");
    }
    if (is_root) continue;
    // Requiring parents to come first rules out cycles and gives a walk order.
    if (parents[j] >= static_cast<int>(j) && parents[j] != spec.root_index) {
      throw InvalidInput("skeleton template: joint " + std::to_string(j) +
                         " is listed before its parent");
    }
    if (parents[j] >= static_cast<int>(n)) throw InvalidInput("skeleton template: bad parent");
    if (!(bone_lengths[j] > 0.0)) throw InvalidInput("skeleton template: bone lengths must be > 0");
    if (std::abs(rest_directions[j].norm() - 1.0) > 1e-12) {
      throw InvalidInput("skeleton template: rest directions must be unit vectors");
    }
    if (!(max_angles[j] >= 0.0 && max_angles[j] <= std::numbers::pi)) {
      throw InvalidInput("skeleton template: angle ranges must be in [0, pi]");
    }
  }
}

Pose3D sample_pose(const SkeletonTemplate& tmpl, Rng& rng) {
  const int n = tmpl.spec.joint_count();
  Pose3D pose{Eigen::MatrixX3d::Zero(n, 3)};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int j = 0; j < n; ++j) {
    const int parent = tmpl.parents[static_cast<std::size_t>(j)];
    if (parent < 0) continue;
    const Eigen::Vector3d& rest = tmpl.rest_directions[static_cast<std::size_t>(j)];
    // Uniform direction on the spherical cap of half-angle max_angle.
    const double cos_max = std::cos(tmpl.max_angles[static_cast<std::size_t>(j)]);
    const double cos_t = 1.0 - unit(rng) * (1.0 - cos_max);
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    const Eigen::Vector3d a = rest.unitOrthogonal();
    const Eigen::Vector3d b = rest.cross(a);
    Eigen::Vector3d dir = cos_t * rest + sin_t * (std::cos(phi) * a + std::sin(phi) * b);
    if (sin_t > 0.0) dir.normalize();
    pose.joints.row(j) =
        pose.joints.row(parent) + tmpl.bone_lengths[static_cast<std::size_t>(j)] * dir.transpose();
  }
  return pose;
}

Pose2D project(const CameraModel& cam, const Pose3D& pose) {
  Pose2D out{Eigen::MatrixX2d(pose.joint_count(), 2)};
  for (Eigen::Index j = 0; j < pose.joint_count(); ++j) {
    const Eigen::Vector3d p = cam.to_camera(pose.joints.row(j).transpose());
    if (!(p.z() > 0.0)) {
      throw DegenerateGeometry("project: joint " + std::to_string(j) +
                               " has non-positive depth " + std::to_string(p.z()));
    }
    out.joints(j, 0) = cam.fx * (p.x() / p.z()) + cam.cx;
    out.joints(j, 1) = cam.fy * (p.y() / p.z()) + cam.cy;
  }
  return out;
}

void SynthConfig::validate() const {
  if (samples < 1) throw InvalidInput("synth: samples must be >= 1");
  if (!(noise_sigma >= 0.0)) throw InvalidInput("synth: noise_sigma must be >= 0");
  if (cameras < 1) throw InvalidInput("synth: cameras must be >= 1");
  if (!(min_distance > 0.0) || !(max_distance >= min_distance)) {
    throw InvalidInput("synth: need 0 < min_distance <= max_distance");
  }
  if (!(max_offset >= 0.0)) throw InvalidInput("synth: max_offset must be >= 0");
  if (!(image_width > 0.0) || !(image_height > 0.0)) {
    throw InvalidInput("synth: image size must be positive");
  }
}

SplitSizes split_sizes(int n) {
  SplitSizes s;
  // Integer arithmetic avoids 0.15 * n rounding surprises.
  s.val = (15 * n) / 100;
  s.test = (15 * n + 99) / 100;
  s.train = n - s.val - s.test;
  return s;
}

namespace {

Rng substream(std::uint64_t seed, std::uint64_t index, std::uint32_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    salt};
  return Rng(seq);
}

constexpr std::uint32_t kSampleSalt = 0x53414d50;  // "SAMP"
constexpr std::uint32_t kSplitSalt = 0x53504c54;   // "SPLT"

BoundingBox tight_box(const Pose2D& pose) {
  const Eigen::Vector2d lo = pose.joints.colwise().minCoeff().transpose();
  const Eigen::Vector2d hi = pose.joints.colwise().maxCoeff().transpose();
  return BoundingBox{lo.x(), lo.y(), hi.x() - lo.x(), hi.y() - lo.y()};
}

}  // namespace

std::vector<Sample> make_dataset(const SkeletonTemplate& tmpl, int n_samples,
                                 const std::vector<CameraModel>& cameras, double noise_sigma,
                                 std::uint64_t seed, double max_offset) {
  tmpl.validate();
  if (n_samples < 1) throw InvalidInput("make_dataset: n_samples must be >= 1");
  if (cameras.empty()) throw InvalidInput("make_dataset: camera pool is empty");
  if (!(noise_sigma >= 0.0)) throw InvalidInput("make_dataset: noise_sigma must be >= 0");
  for (const auto& cam : cameras) cam.validate();

  std::vector<Sample> samples(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(i), kSampleSalt);
    Pose3D body = sample_pose(tmpl, rng);
    std::uniform_real_distribution<double> heading(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> shift(-max_offset, max_offset);
    std::uniform_int_distribution<std::size_t> pick(0, cameras.size() - 1);
    const Eigen::Matrix3d yaw =
        Eigen::AngleAxisd(heading(rng), Eigen::Vector3d::UnitY()).toRotationMatrix();
    const Eigen::RowVector3d offset(shift(rng), 0.0, shift(rng));
    body.joints = (body.joints * yaw.transpose()).rowwise() + offset;
    const CameraModel& cam = cameras[pick(rng)];

    Sample& s = samples[static_cast<std::size_t>(i)];
    char id[16];
    std::snprintf(id, sizeof id, "s%06d", i);
    s.id = id;
    s.camera_id = cam.id;
    s.pose2d = project(cam, body);
    if (noise_sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, noise_sigma);
      for (Eigen::Index j = 0; j < s.pose2d.joints.rows(); ++j) {
        s.pose2d.joints(j, 0) += noise(rng);
        s.pose2d.joints(j, 1) += noise(rng);
      }
    }
    s.box = tight_box(s.pose2d);
    s.pose3d.joints = (body.joints * cam.rotation.transpose()).rowwise() +
                      cam.translation.transpose();
  }

  const SplitSizes sizes = split_sizes(n_samples);
  std::vector<std::size_t> perm(samples.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng split_rng = substream(seed, 0, kSplitSalt);
  std::shuffle(perm.begin(), perm.end(), split_rng);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    const auto rank = static_cast<int>(k);
    samples[perm[k]].split = rank < sizes.train               ? Split::train
                             : rank < sizes.train + sizes.val ? Split::val
                                                              : Split::test;
  }
  return samples;
}

std::vector<Sample> make_dataset(const SkeletonTemplate& tmpl, const SynthConfig& config) {
  config.validate();
  return make_dataset(tmpl, config.samples,
                      default_camera_pool(config.cameras, config.min_distance, config.max_distance),
                      config.noise_sigma, config.seed, config.max_offset);
}

PairedDataset make_paired(const std::vector<Sample>& samples, Split split,
                          const SkeletonSpec& spec) {
  spec.validate();
  PairedDataset out;
  out.split = split;
  Eigen::Index n = 0;
  for (const auto& s : samples) n += s.split == split ? 1 : 0;
  out.inputs.resize(n, spec.input_dim());
  out.targets.resize(n, spec.output_dim());
  Eigen::Index r = 0;
  for (const auto& s : samples) {
    if (s.split != split) continue;
    out.ids.push_back(s.id);
    out.inputs.row(r) = to_input_vector(root_center(s.pose2d, spec), spec).transpose();
    out.targets.row(r) = to_output_vector(root_center(s.pose3d, spec), spec).transpose();
    ++r;
  }
  return out;
}

}  // namespace poselift
