#include "poselift/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "poselift/errors.hpp"

namespace poselift {

CropTransform make_square_crop(const BoundingBox& bbox, double margin_frac, double image_w,
                               double image_h, double out_size) {
  if (!(bbox.w > 0.0) || !(bbox.h > 0.0)) {
    throw InvalidInput("make_square_crop: bounding box must have positive width and height");
  }
  if (!(margin_frac >= 0.0) || !std::isfinite(margin_frac)) {
    throw InvalidInput("make_square_crop: margin_frac must be a finite value >= 0");
  }
  if (!(image_w > 0.0) || !(image_h > 0.0)) {
    throw InvalidInput("make_square_crop: image size must be positive");
  }
  if (!(out_size > 0.0)) {
    throw InvalidInput("make_square_crop: out_size must be positive");
  }
  const double side = std::max(bbox.w, bbox.h) * (1.0 + margin_frac);
  const Point2 c = bbox.center();
  return CropTransform{c.x - 0.5 * side, c.y - 0.5 * side, side, out_size};
}

Point2 apply_crop(const CropTransform& t, const Point2& p) {
  const double s = t.out_size / t.side;
  return {(p.x - t.origin_x) * s, (p.y - t.origin_y) * s};
}

Point2 invert_crop(const CropTransform& t, const Point2& p) {
  const double s = t.side / t.out_size;
  return {p.x * s + t.origin_x, p.y * s + t.origin_y};
}

Pose2D apply_crop(const CropTransform& t, const Pose2D& pose) {
  Pose2D out{pose.joints};
  for (Eigen::Index j = 0; j < out.joints.rows(); ++j) {
    const Point2 q = apply_crop(t, Point2{pose.joints(j, 0), pose.joints(j, 1)});
    out.joints(j, 0) = q.x;
    out.joints(j, 1) = q.y;
  }
  return out;
}

Pose2D invert_crop(const CropTransform& t, const Pose2D& pose) {
  Pose2D out{pose.joints};
  for (Eigen::Index j = 0; j < out.joints.rows(); ++j) {
    const Point2 q = invert_crop(t, Point2{pose.joints(j, 0), pose.joints(j, 1)});
    out.joints(j, 0) = q.x;
    out.joints(j, 1) = q.y;
  }
  return out;
}

Heatmap::Heatmap(int joint_count, int width, int height)
    : joint_count_(joint_count), width_(width), height_(height) {
  if (joint_count < 0 || width < 0 || height < 0) {
    throw InvalidInput("Heatmap: dimensions must be non-negative");
  }
  values_.assign(static_cast<std::size_t>(joint_count) * static_cast<std::size_t>(width) *
                     static_cast<std::size_t>(height),
                 0.0);
}

Heatmap::Heatmap(int joint_count, int width, int height, std::vector<double> values)
    : Heatmap(joint_count, width, height) {
  if (values.size() != values_.size()) {
    throw InvalidInput("Heatmap: expected " + std::to_string(values_.size()) + " values, got " +
                       std::to_string(values.size()));
  }
  for (double v : values) {
    if (!(v >= 0.0)) {
      throw InvalidInput("Heatmap: activations must be non-negative and not NaN");
    }
  }
  values_ = std::move(values);
}

double& Heatmap::at(int joint, int col, int row) {
  return values_[(static_cast<std::size_t>(joint) * height_ + row) * width_ + col];
}

double Heatmap::at(int joint, int col, int row) const {
  return values_[(static_cast<std::size_t>(joint) * height_ + row) * width_ + col];
}

Pose2D decode_heatmap(const Heatmap& hm) {
  if (hm.joint_count() < 1 || hm.width() < 1 || hm.height() < 1) {
    throw InvalidInput("decode_heatmap: every joint grid must be non-empty");
  }
  const std::size_t cells = static_cast<std::size_t>(hm.width()) * hm.height();
  Pose2D out{Eigen::MatrixX2d(hm.joint_count(), 2)};
  const double* data = hm.values().data();
  for (int j = 0; j < hm.joint_count(); ++j) {
    const double* grid = data + static_cast<std::size_t>(j) * cells;
    // Strict comparison keeps the first (smallest row-major) maximum.
    std::size_t best = 0;
    for (std::size_t k = 0; k < cells; ++k) {
      if (!(grid[k] >= 0.0)) {
        throw InvalidInput("decode_heatmap: activations must be non-negative and not NaN");
      }
      if (grid[k] > grid[best]) best = k;
    }
    out.joints(j, 0) = static_cast<double>(best % hm.width());
    out.joints(j, 1) = static_cast<double>(best / hm.width());
  }
  return out;
}

}  // namespace poselift
