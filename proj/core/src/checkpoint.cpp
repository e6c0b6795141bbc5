#include "poselift/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "poselift/errors.hpp"

namespace poselift {
namespace {

using nlohmann::json;

struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;
  bool row_major_copy;  // column-major Eigen matrices are transposed on the way out
};

// Names and shapes of every tensor in file order. `net` and stats must already
// be sized; reading fills them in place.
std::vector<TensorRef> tensor_table(Checkpoint& c) {
  std::vector<TensorRef> t;
  auto vec = [&](const std::string& name, Vector& v) {
    t.push_back({name, v.data(), v.size(), 1, false});
  };
  auto mat = [&](const std::string& name, Matrix& m) {
    t.push_back({name, m.data(), m.rows(), m.cols(), true});
  };
  vec("input_mean", c.input_stats.mean);
  vec("input_std", c.input_stats.std);
  vec("output_mean", c.output_stats.mean);
  vec("output_std", c.output_stats.std);
  const bool bn = c.network.config.use_batchnorm;
  auto stage = [&](const std::string& prefix, Stage& s) {
    mat(prefix + ".weight", s.dense.weight);
    vec(prefix + ".bias", s.dense.bias);
    if (bn) {
      vec(prefix + ".gamma", s.bn.gamma);
      vec(prefix + ".beta", s.bn.beta);
      vec(prefix + ".running_mean", s.bn.running_mean);
      vec(prefix + ".running_var", s.bn.running_var);
    }
  };
  stage("input", c.network.input);
  for (std::size_t b = 0; b < c.network.blocks.size(); ++b) {
    for (std::size_t k = 0; k < 2; ++k) {
      stage("block" + std::to_string(b) + ".stage" + std::to_string(k),
            c.network.blocks[b].stages[k]);
    }
  }
  mat("output.weight", c.network.output.weight);
  vec("output.bias", c.network.output.bias);
  return t;
}

void put_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xFFu));
    bits >>= 8;
  }
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

json network_to_json(const NetworkConfig& n) {
  return json{{"input_dim", n.input_dim},         {"output_dim", n.output_dim},
              {"width", n.width},                 {"blocks", n.blocks},
              {"use_batchnorm", n.use_batchnorm}, {"use_residual", n.use_residual},
              {"use_maxnorm", n.use_maxnorm},     {"dropout_rate", n.dropout_rate},
              {"maxnorm_c", n.maxnorm_c},         {"bn_momentum", n.bn_momentum},
              {"bn_epsilon", n.bn_epsilon}};
}

NetworkConfig network_from_json(const json& j) {
  NetworkConfig n;
  n.input_dim = j.at("input_dim").get<int>();
  n.output_dim = j.at("output_dim").get<int>();
  n.width = j.at("width").get<int>();
  n.blocks = j.at("blocks").get<int>();
  n.use_batchnorm = j.at("use_batchnorm").get<bool>();
  n.use_residual = j.at("use_residual").get<bool>();
  n.use_maxnorm = j.at("use_maxnorm").get<bool>();
  n.dropout_rate = j.at("dropout_rate").get<double>();
  n.maxnorm_c = j.at("maxnorm_c").get<double>();
  n.bn_momentum = j.at("bn_momentum").get<double>();
  n.bn_epsilon = j.at("bn_epsilon").get<double>();
  return n;
}

// Allocates every tensor for the given architecture so tensor_table() can address it.
Checkpoint shaped_checkpoint(const SkeletonSpec& spec, const NetworkConfig& cfg) {
  Checkpoint c;
  c.skeleton = spec;
  c.network = init_network(cfg, 0);
  c.input_stats = {Vector::Zero(cfg.input_dim), Vector::Ones(cfg.input_dim)};
  c.output_stats = {Vector::Zero(cfg.output_dim), Vector::Ones(cfg.output_dim)};
  return c;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Checkpoint c = ckpt;
  const auto table = tensor_table(c);
  json header;
  header["skeleton"] = {{"joint_names", c.skeleton.joint_names},
                        {"root_index", c.skeleton.root_index},
                        {"include_root", c.skeleton.include_root}};
  header["network"] = network_to_json(c.network.config);
  header["config_hash"] = c.config_hash;
  json tensors = json::array();
  for (const auto& t : table) {
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  }
  header["tensors"] = tensors;

  std::string out = std::string(kCheckpointMagic) + "\n" + header.dump() + "\n";
  for (const auto& t : table) {
    if (t.row_major_copy) {
      Eigen::Map<const Matrix> m(t.data, t.rows, t.cols);
      for (Eigen::Index r = 0; r < t.rows; ++r) {
        for (Eigen::Index col = 0; col < t.cols; ++col) put_f64(out, m(r, col));
      }
    } else {
      for (Eigen::Index i = 0; i < t.rows * t.cols; ++i) put_f64(out, t.data[i]);
    }
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  const std::string magic = std::string(kCheckpointMagic) + "\n";
  if (bytes.compare(0, magic.size(), magic) != 0) {
    throw IoError("checkpoint: missing '" + std::string(kCheckpointMagic) + "' magic line");
  }
  const auto header_end = bytes.find('\n', magic.size());
  if (header_end == std::string::npos) throw IoError("checkpoint: truncated header");

  Checkpoint c;
  json header;
  try {
    header = json::parse(bytes.substr(magic.size(), header_end - magic.size()));
    SkeletonSpec spec;
    spec.joint_names = header.at("skeleton").at("joint_names").get<std::vector<std::string>>();
    spec.root_index = header.at("skeleton").at("root_index").get<int>();
    spec.include_root = header.at("skeleton").at("include_root").get<bool>();
    spec.validate();
    const NetworkConfig cfg = network_from_json(header.at("network"));
    if (cfg.input_dim != spec.input_dim() || cfg.output_dim != spec.output_dim()) {
      throw IoError("checkpoint: network dimensions do not match the skeleton");
    }
    c = shaped_checkpoint(spec, cfg);
    c.config_hash = header.at("config_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: bad header: ") + e.what());
  } catch (const InvalidInput& e) {
    throw IoError(std::string("checkpoint: bad header: ") + e.what());
  }

  auto table = tensor_table(c);
  const auto& listed = header.at("tensors");
  if (listed.size() != table.size()) throw IoError("checkpoint: tensor table does not match architecture");
  std::size_t expected = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& t = table[i];
    if (listed[i].at("name") != t.name || listed[i].at("rows") != t.rows ||
        listed[i].at("cols") != t.cols) {
      throw IoError("checkpoint: tensor '" + t.name + "' has an unexpected name or shape");
    }
    expected += static_cast<std::size_t>(t.rows * t.cols) * 8;
  }
  const std::size_t payload = bytes.size() - header_end - 1;
  if (payload != expected) {
    throw IoError("checkpoint: payload has " + std::to_string(payload) + " bytes, expected " +
                  std::to_string(expected));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + header_end + 1;
  for (auto& t : table) {
    if (t.row_major_copy) {
      Eigen::Map<Matrix> m(t.data, t.rows, t.cols);
      for (Eigen::Index r = 0; r < t.rows; ++r) {
        for (Eigen::Index col = 0; col < t.cols; ++col, p += 8) m(r, col) = get_f64(p);
      }
    } else {
      for (Eigen::Index i = 0; i < t.rows * t.cols; ++i, p += 8) t.data[i] = get_f64(p);
    }
  }
  return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace poselift
