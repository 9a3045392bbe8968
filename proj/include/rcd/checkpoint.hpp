#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "rcd/params.hpp"

namespace rcd {

// Checkpoint JSON layout:
//   {"format": "rc-detector-checkpoint", "version": 1,
//    "header": {"dim", "heads", "layers", "d_out", "mode", "seed", "sigma",
//               "lr", "epochs", "include_tie_pairs", "qkv_bias", "step"},
//    "tensors": [{"name": str, "rows": int, "cols": int, "data": [float]}]}
// Tensors appear in visit_params order. Doubles are written in shortest
// round-trip form, so save -> load -> save reproduces the file byte for byte.
struct Checkpoint {
  ModelConfig config;
  NetworkParams params;
};

std::string checkpoint_to_json(const ModelConfig& cfg, const NetworkParams& p);
Checkpoint parse_checkpoint(std::string_view text);
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const NetworkParams& p);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rcd
