#include "poselift/run_config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "poselift/errors.hpp"
#include "poselift/report.hpp"

namespace poselift::cli {

using nlohmann::json;

namespace {

json to_json(const RunConfig& c) {
  const auto& s = c.synth;
  const auto& n = c.network;
  const auto& t = c.training;
  const auto& e = c.eval;
  return json{
      {"skeleton", {{"include_root", c.include_root}}},
      {"synth",
       {{"samples", s.samples},
        {"noise_sigma", s.noise_sigma},
        {"seed", s.seed},
        {"cameras", s.cameras},
        {"min_distance", s.min_distance},
        {"max_distance", s.max_distance},
        {"max_offset", s.max_offset},
        {"image_width", s.image_width},
        {"image_height", s.image_height}}},
      {"network",
       {{"width", n.width},
        {"blocks", n.blocks},
        {"batchnorm", n.use_batchnorm},
        {"residual", n.use_residual},
        {"maxnorm", n.use_maxnorm},
        {"dropout", n.dropout_rate},
        {"maxnorm_c", n.maxnorm_c},
        {"bn_momentum", n.bn_momentum},
        {"bn_epsilon", n.bn_epsilon}}},
      {"training",
       {{"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"learning_rate", t.learning_rate},
        {"optimizer", to_string(t.optimizer)},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"adam_eps", t.adam_eps},
        {"lr_decay", t.lr_decay},
        {"seed", t.seed},
        {"shuffle", t.shuffle}}},
      {"eval",
       {{"mpjpe_joints", to_string(e.averaging)},
        {"crop_margin", e.crop_margin},
        {"crop_size", e.crop_size},
        {"detector_grid", e.detector_grid},
        {"detector_noise", e.detector_noise},
        {"detector_blob_sigma", e.detector_blob_sigma},
        {"workers", e.workers}}},
      {"sweep", {{"blocks", c.sweep.blocks}, {"widths", c.sweep.widths}}},
  };
}

bool same_kind(const json& want, const json& got) {
  if (want.is_number_float()) return got.is_number();
  if (want.is_number_unsigned()) return got.is_number_unsigned();
  if (want.is_number_integer()) return got.is_number_integer();
  return want.type() == got.type();
}

// Checks `user` against the shape of `defaults`, key by key.
void check_shape(const json& defaults, const json& user, const std::string& where,
                 const std::string& source) {
  if (!user.is_object()) {
    throw InvalidInput(source + ": " + (where.empty() ? "top level" : where) +
                       " must be an object");
  }
  for (const auto& [key, value] : user.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!defaults.contains(key)) throw InvalidInput(source + ": unknown key '" + path + "'");
    const json& want = defaults.at(key);
    if (want.is_object()) {
      check_shape(want, value, path, source);
    } else if (want.is_array()) {
      if (!value.is_array()) throw InvalidInput(source + ": '" + path + "' must be a list");
      for (const auto& item : value) {
        if (!item.is_number_integer()) {
          throw InvalidInput(source + ": '" + path + "' must hold integers");
        }
      }
    } else if (!same_kind(want, value)) {
      throw InvalidInput(source + ": '" + path + "' has the wrong type");
    }
  }
}

RunConfig from_json(const json& j) {
  RunConfig c;
  c.include_root = j.at("skeleton").at("include_root").get<bool>();
  const json& s = j.at("synth");
  c.synth.samples = s.at("samples").get<int>();
  c.synth.noise_sigma = s.at("noise_sigma").get<double>();
  c.synth.seed = s.at("seed").get<std::uint64_t>();
  c.synth.cameras = s.at("cameras").get<int>();
  c.synth.min_distance = s.at("min_distance").get<double>();
  c.synth.max_distance = s.at("max_distance").get<double>();
  c.synth.max_offset = s.at("max_offset").get<double>();
  c.synth.image_width = s.at("image_width").get<double>();
  c.synth.image_height = s.at("image_height").get<double>();
  const json& n = j.at("network");
  c.network.width = n.at("width").get<int>();
  c.network.blocks = n.at("blocks").get<int>();
  c.network.use_batchnorm = n.at("batchnorm").get<bool>();
  c.network.use_residual = n.at("residual").get<bool>();
  c.network.use_maxnorm = n.at("maxnorm").get<bool>();
  c.network.dropout_rate = n.at("dropout").get<double>();
  c.network.maxnorm_c = n.at("maxnorm_c").get<double>();
  c.network.bn_momentum = n.at("bn_momentum").get<double>();
  c.network.bn_epsilon = n.at("bn_epsilon").get<double>();
  const json& t = j.at("training");
  c.training.batch_size = t.at("batch_size").get<int>();
  c.training.epochs = t.at("epochs").get<int>();
  c.training.learning_rate = t.at("learning_rate").get<double>();
  c.training.optimizer = optimizer_from_string(t.at("optimizer").get<std::string>());
  c.training.beta1 = t.at("beta1").get<double>();
  c.training.beta2 = t.at("beta2").get<double>();
  c.training.adam_eps = t.at("adam_eps").get<double>();
  c.training.lr_decay = t.at("lr_decay").get<double>();
  c.training.seed = t.at("seed").get<std::uint64_t>();
  c.training.shuffle = t.at("shuffle").get<bool>();
  const json& e = j.at("eval");
  c.eval.averaging = joint_averaging_from_string(e.at("mpjpe_joints").get<std::string>());
  c.eval.crop_margin = e.at("crop_margin").get<double>();
  c.eval.crop_size = e.at("crop_size").get<double>();
  c.eval.detector_grid = e.at("detector_grid").get<int>();
  c.eval.detector_noise = e.at("detector_noise").get<double>();
  c.eval.detector_blob_sigma = e.at("detector_blob_sigma").get<double>();
  c.eval.workers = e.at("workers").get<int>();
  c.training.averaging = c.eval.averaging;
  c.sweep.blocks = j.at("sweep").at("blocks").get<std::vector<int>>();
  c.sweep.widths = j.at("sweep").at("widths").get<std::vector<int>>();
  return c;
}

}  // namespace

SkeletonSpec RunConfig::skeleton() const {
  SkeletonSpec spec = SkeletonSpec::human36m();
  spec.include_root = include_root;
  return spec;
}

NetworkConfig RunConfig::network_for_skeleton() const {
  NetworkConfig n = network;
  const SkeletonSpec spec = skeleton();
  n.input_dim = spec.input_dim();
  n.output_dim = spec.output_dim();
  return n;
}

void RunConfig::validate() const {
  synth.validate();
  const NetworkConfig n = network_for_skeleton();
  n.validate();
  training.validate(n);
  if (!(eval.crop_margin >= 0.0)) throw InvalidInput("eval.crop_margin must be >= 0");
  if (!(eval.crop_size > 0.0)) throw InvalidInput("eval.crop_size must be > 0");
  if (eval.detector_grid < 1) throw InvalidInput("eval.detector_grid must be >= 1");
  if (!(eval.detector_noise >= 0.0)) throw InvalidInput("eval.detector_noise must be >= 0");
  if (!(eval.detector_blob_sigma > 0.0)) {
    throw InvalidInput("eval.detector_blob_sigma must be > 0");
  }
  if (eval.workers < 1) throw InvalidInput("eval.workers must be >= 1");
  if (sweep.blocks.empty() || sweep.widths.empty()) {
    throw InvalidInput("sweep.blocks and sweep.widths must be non-empty");
  }
  for (int b : sweep.blocks) {
    if (b < 0) throw InvalidInput("sweep.blocks entries must be >= 0");
  }
  for (int w : sweep.widths) {
    if (w < 1) throw InvalidInput("sweep.widths entries must be >= 1");
  }
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(source + ": " + e.what());
  }
  json merged = to_json(RunConfig{});
  check_shape(merged, user, "", source);
  merged.merge_patch(user);
  try {
    return from_json(merged);
  } catch (const InvalidInput& e) {
    throw InvalidInput(source + ": " + e.what());
  } catch (const json::exception& e) {
    throw InvalidInput(source + ": " + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.string());
}

std::string to_json_text(const RunConfig& config) { return to_json(config).dump(); }

std::string run_config_hash(const RunConfig& config) {
  return config_hash(to_json_text(config));
}

}  // namespace poselift::cli
