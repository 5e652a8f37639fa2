#pragma once

// JSON encodings of solver and pipeline results. Every encoding decodes back
// to an equal value.

#include "pota/caot_solver.hpp"
#include "pota/pipeline.hpp"

#include <json.hpp>

namespace pota {

nlohmann::json mat_to_json(const Mat& m);
void mat_from_json(const nlohmann::json& j, Mat& m);

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

void to_json(nlohmann::json& j, const TransportPlan& p);
void from_json(const nlohmann::json& j, TransportPlan& p);

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

void to_json(nlohmann::json& j, const Heads& h);
void from_json(const nlohmann::json& j, Heads& h);

void to_json(nlohmann::json& j, const RunReport& r);
void from_json(const nlohmann::json& j, RunReport& r);

void to_json(nlohmann::json& j, const BenchRow& r);
void from_json(const nlohmann::json& j, BenchRow& r);

/// Serialized text: two-space indentation, trailing newline.
std::string dump_report(const nlohmann::json& j);

}  // namespace pota
