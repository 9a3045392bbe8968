#include "rcd/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rcd/error.hpp"

namespace rcd {

using json = nlohmann::json;

namespace {
constexpr const char* kFormat = "rc-detector-checkpoint";
constexpr int kVersion = 1;
}  // namespace

std::string checkpoint_to_json(const ModelConfig& cfg, const NetworkParams& p) {
  json root;
  root["format"] = kFormat;
  root["version"] = kVersion;
  root["header"] = {{"dim", cfg.dim},
                    {"heads", cfg.heads},
                    {"layers", cfg.layers},
                    {"d_out", cfg.d_out},
                    {"mode", to_string(cfg.mode)},
                    {"seed", cfg.seed},
                    {"sigma", cfg.sigma},
                    {"lr", cfg.lr},
                    {"epochs", cfg.epochs},
                    {"include_tie_pairs", cfg.include_tie_pairs},
                    {"qkv_bias", cfg.qkv_bias},
                    {"step", to_string(cfg.step)}};
  json tensors = json::array();
  visit_params(p, [&](const std::string& name, const Tensor& t) {
    tensors.push_back({{"name", name},
                       {"rows", t.rows()},
                       {"cols", t.cols()},
                       {"data", std::vector<double>(t.values().begin(), t.values().end())}});
  });
  root["tensors"] = std::move(tensors);
  return root.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
    if (root.at("format") != kFormat) throw SchemaError("not an rc-detector checkpoint");
    if (root.at("version") != kVersion) {
      throw SchemaError("unsupported checkpoint version " + root.at("version").dump());
    }
    const json& h = root.at("header");
    Checkpoint ck;
    ModelConfig& cfg = ck.config;
    cfg.dim = h.at("dim").get<std::size_t>();
    cfg.heads = h.at("heads").get<std::size_t>();
    cfg.layers = h.at("layers").get<std::size_t>();
    cfg.d_out = h.at("d_out").get<std::size_t>();
    auto mode = parse_mode(h.at("mode").get<std::string>());
    if (!mode) throw SchemaError("unknown mode in checkpoint header");
    cfg.mode = *mode;
    cfg.seed = h.at("seed").get<std::uint64_t>();
    cfg.sigma = h.at("sigma").get<double>();
    cfg.lr = h.at("lr").get<double>();
    cfg.epochs = h.at("epochs").get<std::size_t>();
    cfg.include_tie_pairs = h.at("include_tie_pairs").get<bool>();
    cfg.qkv_bias = h.at("qkv_bias").get<bool>();
    auto step = parse_step_unit(h.at("step").get<std::string>());
    if (!step) throw SchemaError("unknown step unit in checkpoint header");
    cfg.step = *step;
    validate_config(cfg);

    Rng unused(0);
    ck.params = init_network(cfg, unused);
    const json& tensors = root.at("tensors");
    std::size_t idx = 0;
    visit_params(ck.params, [&](const std::string& name, Tensor& t) {
      if (idx >= tensors.size()) throw SchemaError("checkpoint is missing tensor '" + name + "'");
      const json& jt = tensors[idx++];
      if (jt.at("name") != name) {
        throw SchemaError("checkpoint tensor " + std::to_string(idx - 1) + " is '" +
                          jt.at("name").get<std::string>() + "', expected '" + name + "'");
      }
      const auto rows = jt.at("rows").get<std::size_t>();
      const auto cols = jt.at("cols").get<std::size_t>();
      if (rows != t.rows() || cols != t.cols()) {
        throw SchemaError("checkpoint tensor '" + name + "' has shape " + std::to_string(rows) +
                          "x" + std::to_string(cols) + ", expected " + t.shape_string());
      }
      t = Tensor(rows, cols, jt.at("data").get<std::vector<double>>());
      if (!t.all_finite()) throw SchemaError("checkpoint tensor '" + name + "' is not finite");
    });
    if (idx != tensors.size()) throw SchemaError("checkpoint has unexpected extra tensors");
    return ck;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("invalid checkpoint header: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const NetworkParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_to_json(cfg, p);
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace rcd
