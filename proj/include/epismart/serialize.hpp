#pragma once

#include "epismart/engine.hpp"
#include "epismart/filters.hpp"
#include "epismart/model.hpp"
#include "epismart/scoring.hpp"
#include "epismart/signal.hpp"
#include "epismart/trainer.hpp"

#include <json.hpp>

namespace epismart {

// nlohmann ADL hooks. from_json fills only the keys present, so partial
// configs inherit the C++ defaults.

void to_json(nlohmann::json& j, const EventInterval& v);
void from_json(const nlohmann::json& j, EventInterval& v);

void to_json(nlohmann::json& j, const DriftSegment& v);
void from_json(const nlohmann::json& j, DriftSegment& v);

void to_json(nlohmann::json& j, const EventProcess& v);
void from_json(const nlohmann::json& j, EventProcess& v);

void to_json(nlohmann::json& j, const StreamSpec& v);
void from_json(const nlohmann::json& j, StreamSpec& v);

void to_json(nlohmann::json& j, const WindowingConfig& v);
void from_json(const nlohmann::json& j, WindowingConfig& v);

void to_json(nlohmann::json& j, const PreprocessConfig& v);
void from_json(const nlohmann::json& j, PreprocessConfig& v);

void to_json(nlohmann::json& j, const TrainConfig& v);
void from_json(const nlohmann::json& j, TrainConfig& v);

void to_json(nlohmann::json& j, const TrainReport& v);

void to_json(nlohmann::json& j, const EngineConfig& v);
void from_json(const nlohmann::json& j, EngineConfig& v);

void to_json(nlohmann::json& j, const ScoringConfig& v);
void from_json(const nlohmann::json& j, ScoringConfig& v);

void to_json(nlohmann::json& j, const MetricsReport& v);

nlohmann::json ledgers_to_json(const Ledgers& ledgers);

}  // namespace epismart
