#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "poselift/preprocess.hpp"
#include "poselift/synth.hpp"

namespace poselift {

/// Line-delimited dataset file.
///
///   # poselift-dataset v1
///   # joints=Hip,RHip,...        joint names in file order
///   # root=0
///   # image=1000x1000            width x height in pixels
///   # config=<16 hex digits>     hash of the generating configuration
///   id,split,camera,box_x,box_y,box_w,box_h,u_0,v_0,...,u_{J-1},v_{J-1},x_0,y_0,z_0,...
///
/// 2D joints are image pixels, 3D joints camera-frame millimeters. Reals use
/// the shortest decimal form that round-trips to the same binary64 value.
struct DatasetFile {
  SkeletonSpec skeleton;
  double image_width = 1000.0;
  double image_height = 1000.0;
  std::string config_hash;
  std::vector<Sample> samples;
};

void write_dataset(std::ostream& out, const DatasetFile& file);
void write_dataset(const std::filesystem::path& path, const DatasetFile& file);
/// Throws IoError with the path and line number on malformed input.
DatasetFile read_dataset(std::istream& in, const std::string& source = "<stream>");
DatasetFile read_dataset(const std::filesystem::path& path);

/// Pose file used by `predict`: "# poselift-poses2d v1" or "# poselift-poses3d v1",
/// a "# joints=" line, then "id,c_0,c_1,..." per pose with 2 or 3 values per joint.
struct PoseFile2D {
  std::vector<std::string> joint_names;
  std::vector<std::string> ids;
  std::vector<Pose2D> poses;
};

struct PoseFile3D {
  std::vector<std::string> joint_names;
  std::vector<std::string> ids;
  std::vector<Pose3D> poses;
};

PoseFile2D read_poses2d(const std::filesystem::path& path);
void write_poses2d(const std::filesystem::path& path, const PoseFile2D& file);
PoseFile3D read_poses3d(const std::filesystem::path& path);
void write_poses3d(const std::filesystem::path& path, const PoseFile3D& file);

/// Shortest round-trip decimal representation of a binary64 value.
std::string format_real(double v);
/// Strict parse of a whole field; throws InvalidInput otherwise.
double parse_real(std::string_view field);

}  // namespace poselift
