#pragma once

// nlohmann::json converters for configuration structs. Shared by session
// headers, model metadata and CLI config files.

#include <json.hpp>

#include "bci/acquisition.hpp"
#include "bci/features.hpp"
#include "bci/signal.hpp"

namespace bci {

void to_json(nlohmann::json& j, const SamplingConfig& c);
void from_json(const nlohmann::json& j, SamplingConfig& c);

void to_json(nlohmann::json& j, const MontageConfig& m);
void from_json(const nlohmann::json& j, MontageConfig& m);

void to_json(nlohmann::json& j, const FilterDesign& d);
void from_json(const nlohmann::json& j, FilterDesign& d);

void to_json(nlohmann::json& j, const WindowConfig& w);
void from_json(const nlohmann::json& j, WindowConfig& w);

void to_json(nlohmann::json& j, const SynthConfig& s);
void from_json(const nlohmann::json& j, SynthConfig& s);

}  // namespace bci
