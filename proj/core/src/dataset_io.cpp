#include "poselift/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include "poselift/errors.hpp"

namespace poselift {

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view field) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw InvalidInput("not a number: '" + std::string(field) + "'");
  }
  return v;
}

namespace {

int parse_int(std::string_view field) {
  int v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw InvalidInput("not an integer: '" + std::string(field) + "'");
  }
  return v;
}

constexpr std::string_view kDatasetMagic = "# poselift-dataset v1";
constexpr std::string_view kPoses2DMagic = "# poselift-poses2d v1";
constexpr std::string_view kPoses3DMagic = "# poselift-poses3d v1";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join_names(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + names[i];
  return s;
}

std::vector<std::string> split_names(std::string_view s) {
  std::vector<std::string> names;
  for (auto f : split_fields(s)) names.emplace_back(f);
  return names;
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(source_ + ":" + std::to_string(number_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::string source_;
  int number_ = 0;
};

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return in;
}

template <int Cols, typename PoseFile>
PoseFile read_pose_file(const std::filesystem::path& path, std::string_view magic) {
  auto in = open_in(path);
  LineReader reader(in, path.string());
  std::string line;
  if (!reader.next(line) || line != magic) reader.fail("expected '" + std::string(magic) + "'");
  if (!reader.next(line) || !starts_with(line, "# joints=")) reader.fail("expected '# joints='");
  PoseFile file;
  file.joint_names = split_names(std::string_view(line).substr(9));
  const auto joints = static_cast<Eigen::Index>(file.joint_names.size());
  while (reader.next(line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_fields(line);
    if (static_cast<Eigen::Index>(fields.size()) != 1 + Cols * joints) {
      reader.fail("expected " + std::to_string(1 + Cols * joints) + " fields, got " +
                  std::to_string(fields.size()));
    }
    typename decltype(file.poses)::value_type pose;
    pose.joints.resize(joints, Cols);
    try {
      for (Eigen::Index j = 0; j < joints; ++j) {
        for (int c = 0; c < Cols; ++c) pose.joints(j, c) = parse_real(fields[1 + Cols * j + c]);
      }
    } catch (const InvalidInput& e) {
      reader.fail(e.what());
    }
    file.ids.emplace_back(fields[0]);
    file.poses.push_back(std::move(pose));
  }
  return file;
}

template <typename PoseFile>
void write_pose_file(const std::filesystem::path& path, std::string_view magic,
                     const PoseFile& file) {
  auto out = open_out(path);
  out << magic << "\n# joints=" << join_names(file.joint_names) << "\n";
  for (std::size_t i = 0; i < file.poses.size(); ++i) {
    out << file.ids[i];
    const auto& m = file.poses[i].joints;
    for (Eigen::Index j = 0; j < m.rows(); ++j) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << format_real(m(j, c));
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing: " + path.string());
}

}  // namespace

void write_dataset(std::ostream& out, const DatasetFile& file) {
  out << kDatasetMagic << '\n'
      << "# joints=" << join_names(file.skeleton.joint_names) << '\n'
      << "# root=" << file.skeleton.root_index << '\n'
      << "# image=" << format_real(file.image_width) << 'x' << format_real(file.image_height)
      << '\n'
      << "# config=" << file.config_hash << '\n';
  for (const auto& s : file.samples) {
    out << s.id << ',' << to_string(s.split) << ',' << s.camera_id << ',' << format_real(s.box.x)
        << ',' << format_real(s.box.y) << ',' << format_real(s.box.w) << ','
        << format_real(s.box.h);
    for (Eigen::Index j = 0; j < s.pose2d.joints.rows(); ++j) {
      out << ',' << format_real(s.pose2d.joints(j, 0)) << ',' << format_real(s.pose2d.joints(j, 1));
    }
    for (Eigen::Index j = 0; j < s.pose3d.joints.rows(); ++j) {
      for (int c = 0; c < 3; ++c) out << ',' << format_real(s.pose3d.joints(j, c));
    }
    out << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const DatasetFile& file) {
  auto out = open_out(path);
  write_dataset(out, file);
  if (!out) throw IoError("failed writing dataset: " + path.string());
}

DatasetFile read_dataset(std::istream& in, const std::string& source) {
  LineReader reader(in, source);
  std::string line;
  if (!reader.next(line) || line != kDatasetMagic) {
    reader.fail("expected '" + std::string(kDatasetMagic) + "'");
  }
  DatasetFile file;
  file.skeleton.root_index = 0;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const std::string_view v(line);
    if (v[0] == '#') {
      try {
        if (starts_with(v, "# joints=")) {
          file.skeleton.joint_names = split_names(v.substr(9));
        } else if (starts_with(v, "# root=")) {
          file.skeleton.root_index = parse_int(v.substr(7));
        } else if (starts_with(v, "# image=")) {
          const auto x = v.find('x', 8);
          if (x == std::string_view::npos) reader.fail("bad image size line");
          file.image_width = parse_real(v.substr(8, x - 8));
          file.image_height = parse_real(v.substr(x + 1));
        } else if (starts_with(v, "# config=")) {
          file.config_hash = std::string(v.substr(9));
        }
      } catch (const InvalidInput& e) {
        reader.fail(e.what());
      }
      continue;
    }
    const auto joints = static_cast<Eigen::Index>(file.skeleton.joint_names.size());
    if (joints == 0) reader.fail("sample record before '# joints=' header");
    const auto fields = split_fields(v);
    const auto expected = static_cast<std::size_t>(7 + 5 * joints);
    if (fields.size() != expected) {
      reader.fail("expected " + std::to_string(expected) + " fields, got " +
                  std::to_string(fields.size()));
    }
    Sample s;
    try {
      s.id = std::string(fields[0]);
      s.split = split_from_string(std::string(fields[1]));
      s.camera_id = parse_int(fields[2]);
      s.box = {parse_real(fields[3]), parse_real(fields[4]), parse_real(fields[5]),
               parse_real(fields[6])};
      s.pose2d.joints.resize(joints, 2);
      s.pose3d.joints.resize(joints, 3);
      std::size_t k = 7;
      for (Eigen::Index j = 0; j < joints; ++j) {
        s.pose2d.joints(j, 0) = parse_real(fields[k++]);
        s.pose2d.joints(j, 1) = parse_real(fields[k++]);
      }
      for (Eigen::Index j = 0; j < joints; ++j) {
        for (int c = 0; c < 3; ++c) s.pose3d.joints(j, c) = parse_real(fields[k++]);
      }
    } catch (const InvalidInput& e) {
      reader.fail(e.what());
    }
    file.samples.push_back(std::move(s));
  }
  try {
    file.skeleton.validate();
  } catch (const InvalidInput& e) {
    reader.fail(std::string("bad skeleton header: ") + e.what());
  }
  return file;
}

DatasetFile read_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_dataset(in, path.string());
}

PoseFile2D read_poses2d(const std::filesystem::path& path) {
  return read_pose_file<2, PoseFile2D>(path, kPoses2DMagic);
}

void write_poses2d(const std::filesystem::path& path, const PoseFile2D& file) {
  write_pose_file(path, kPoses2DMagic, file);
}

PoseFile3D read_poses3d(const std::filesystem::path& path) {
  return read_pose_file<3, PoseFile3D>(path, kPoses3DMagic);
}

void write_poses3d(const std::filesystem::path& path, const PoseFile3D& file) {
  write_pose_file(path, kPoses3DMagic, file);
}

}  // namespace poselift
