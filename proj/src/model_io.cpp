#include "epismart/model.hpp"

#include <json.hpp>

namespace epismart {

std::string arch_to_json(const ArchSpec& arch) {
  nlohmann::json j;
  j["in_channels"] = arch.in_channels;
  j["input_samples"] = arch.input_samples;
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : arch.blocks)
    j["blocks"].push_back({{"out_channels", b.out_channels},
                           {"kernel", b.kernel},
                           {"stride", b.stride},
                           {"pool", b.pool}});
  j["head_channels"] = arch.head_channels;
  j["batch_norm"] = arch.batch_norm;
  j["relu"] = arch.relu;
  j["bn_epsilon"] = arch.bn_epsilon;
  j["bn_momentum"] = arch.bn_momentum;
  j["param_budget"] = arch.param_budget;
  return j.dump();
}

ArchSpec arch_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("arch json: ") + e.what());
  }
  ArchSpec arch;
  arch.blocks.clear();
  try {
    arch.in_channels = j.at("in_channels").get<int>();
    arch.input_samples = j.at("input_samples").get<int>();
    for (const auto& jb : j.at("blocks")) {
      ConvBlockSpec b;
      b.out_channels = jb.at("out_channels").get<int>();
      b.kernel = jb.at("kernel").get<int>();
      b.stride = jb.value("stride", 1);
      b.pool = jb.value("pool", 1);
      arch.blocks.push_back(b);
    }
    arch.head_channels = j.at("head_channels").get<int>();
    arch.batch_norm = j.value("batch_norm", true);
    arch.relu = j.value("relu", true);
    arch.bn_epsilon = j.value("bn_epsilon", 1e-5);
    arch.bn_momentum = j.value("bn_momentum", 0.1);
    arch.param_budget = j.value("param_budget", 500000L);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("arch json: ") + e.what());
  }
  return arch;
}

}  // namespace epismart
