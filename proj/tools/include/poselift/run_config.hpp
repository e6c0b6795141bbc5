#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "poselift/metrics.hpp"
#include "poselift/nn.hpp"
#include "poselift/preprocess.hpp"
#include "poselift/synth.hpp"
#include "poselift/train.hpp"

namespace poselift::cli {

/// Environment variable naming the config file used when --config is absent.
inline constexpr const char* kConfigEnvVar = "POSELIFT_CONFIG";

struct EvalOptions {
  JointAveraging averaging = JointAveraging::all_joints;
  double crop_margin = kDefaultCropMargin;
  double crop_size = kDefaultCropSize;
  int detector_grid = 56;          // heatmap cells per side of the detector input
  double detector_noise = 2.0;     // pixels of localisation jitter in detector input space
  double detector_blob_sigma = 1.0;
  int workers = 1;
};

struct SweepOptions {
  std::vector<int> blocks{1, 2, 3};
  std::vector<int> widths{128, 256, 512, 1024};
};

/// Every tunable of a run. The skeleton is the 17-joint Human3.6M layout.
struct RunConfig {
  bool include_root = false;
  SynthConfig synth;
  NetworkConfig network;
  TrainingConfig training;
  EvalOptions eval;
  SweepOptions sweep;

  SkeletonSpec skeleton() const;
  /// Network config with input/output sizes taken from the skeleton.
  NetworkConfig network_for_skeleton() const;
  /// Throws InvalidInput naming the first bad field.
  void validate() const;
};

/// Parses a JSON document over the defaults. Unknown keys and wrongly typed
/// values throw InvalidInput; `source` prefixes the message.
RunConfig parse_run_config(const std::string& text, const std::string& source);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON of the whole configuration (sorted keys, no whitespace).
std::string to_json_text(const RunConfig& config);
std::string run_config_hash(const RunConfig& config);

}  // namespace poselift::cli
