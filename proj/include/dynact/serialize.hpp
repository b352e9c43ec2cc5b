#pragma once

// JSON mappings for the core domain types. Field names match the on-disk
// and log formats; optional fields are written as null when absent.

#include "dynact/core.hpp"

#include <json.hpp>

namespace dynact {

using Json = nlohmann::json;

void to_json(Json& j, const TaskSpec& t);
void from_json(const Json& j, TaskSpec& t);

void to_json(Json& j, const ActionRecord& r);
void from_json(const Json& j, ActionRecord& r);

void to_json(Json& j, const Step& s);
void from_json(const Json& j, Step& s);

void to_json(Json& j, const AblationFlags& f);
void from_json(const Json& j, AblationFlags& f);

void to_json(Json& j, const RunConfig& c);
void from_json(const Json& j, RunConfig& c);

void to_json(Json& j, const Trajectory& t);
void from_json(const Json& j, Trajectory& t);

/// Overlays the keys present in `j` onto `cfg`; absent keys keep their value.
void merge_config(RunConfig& cfg, const Json& j);

}  // namespace dynact
