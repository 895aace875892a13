#pragma once

#include <string>

#include "xray/train.hpp"

namespace xray {

/// Line-oriented `key = value` text, '#' comments. Absent keys keep their
/// defaults; unknown keys and unparsable values are rejected with the line
/// number. An empty document yields the default TrainConfig.
TrainConfig parse_config(const std::string& text);

TrainConfig load_config_file(const std::string& path);

/// Canonical form: fixed key order, shortest round-trip number formatting.
/// parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const TrainConfig& cfg);

}  // namespace xray
