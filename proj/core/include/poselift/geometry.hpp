#pragma once

#include <vector>

#include "poselift/types.hpp"

namespace poselift {

/// Axis-aligned detector box in image pixels; (x, y) is the top-left corner.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  Point2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }
};

/// Square crop of the image followed by a resize to out_size x out_size.
///
/// Maps image pixels to network-input pixels with
///   p_crop = (p_img - origin) * out_size / side.
/// The crop is not clamped to the image, so the map is a bijection on the
/// whole plane and invert_crop() restores image coordinates exactly up to
/// rounding.
struct CropTransform {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double side = 1.0;
  double out_size = 224.0;

  double scale() const { return out_size / side; }
};

inline constexpr double kDefaultCropMargin = 0.15;
inline constexpr double kDefaultCropSize = 224.0;

/// Builds the square crop around a detection: the side is the longest box
/// side grown by margin_frac, and the square shares the box center.
/// Throws InvalidInput for non-positive box, image or output sizes, or a
/// negative margin.
CropTransform make_square_crop(const BoundingBox& bbox, double margin_frac, double image_w,
                               double image_h, double out_size = kDefaultCropSize);

Point2 apply_crop(const CropTransform& t, const Point2& p);
Point2 invert_crop(const CropTransform& t, const Point2& p);

Pose2D apply_crop(const CropTransform& t, const Pose2D& pose);
Pose2D invert_crop(const CropTransform& t, const Pose2D& pose);

/// Per-joint activation grids, stored joint-major then row-major:
/// value(j, col, row) = values[j * width * height + row * width + col].
class Heatmap {
 public:
  Heatmap(int joint_count, int width, int height);
  Heatmap(int joint_count, int width, int height, std::vector<double> values);

  int joint_count() const { return joint_count_; }
  int width() const { return width_; }
  int height() const { return height_; }

  double& at(int joint, int col, int row);
  double at(int joint, int col, int row) const;

  const std::vector<double>& values() const { return values_; }

 private:
  int joint_count_;
  int width_;
  int height_;
  std::vector<double> values_;
};

/// Argmax per joint, returned as (col, row) in heatmap cells. Ties go to the
/// smallest row-major index.
Pose2D decode_heatmap(const Heatmap& hm);

}  // namespace poselift
