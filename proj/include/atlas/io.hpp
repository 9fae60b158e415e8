#pragma once

// Structured-text (JSON) documents for worlds, fitted tilts, and reports.
// Doubles are written in shortest round-trip form, so every probability
// reloads bit-exactly.

#include <filesystem>

#include <json.hpp>

#include "atlas/partitions.hpp"
#include "atlas/poi_world.hpp"
#include "atlas/recovery.hpp"
#include "atlas/tilt_fit.hpp"

namespace atlas {

using Json = nlohmann::json;

Json to_json(const WorldConfig& c);
WorldConfig world_config_from_json(const Json& j);

Json to_json(const World& w);
World world_from_json(const Json& j);

Json to_json(const BaseChain& b);
BaseChain base_chain_from_json(const Json& j);

Json to_json(const TiltParams& t);
TiltParams tilts_from_json(const Json& j);

Json to_json(const FitReport& r);
Json to_json(const BoundReport& r);
Json to_json(const RecoveryResult& r);
Json to_json(const PartitionDiagnostics& d);

Json to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const Json& j);
Json to_json(const VectorXd& v);
VectorXd vector_from_json(const Json& j);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

}  // namespace atlas
