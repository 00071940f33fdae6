#pragma once

#include "allocsim/acceptance.hpp"
#include "allocsim/cohort.hpp"
#include "allocsim/policies.hpp"
#include "allocsim/simulator.hpp"
#include "allocsim/survival.hpp"
#include "allocsim/tuning.hpp"

#include "json.hpp"

#include <filesystem>
#include <initializer_list>
#include <string_view>

namespace allocsim {

using Json = nlohmann::json;

/// Throws Error(ConfigError) if `j` has keys outside `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view context);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

void to_json(Json& j, const CoxModel& m);
void from_json(const Json& j, CoxModel& m);

void to_json(Json& j, const AcceptanceModel& m);
void from_json(const Json& j, AcceptanceModel& m);

void to_json(Json& j, const AcceptancePolicyConfig& c);
void from_json(const Json& j, AcceptancePolicyConfig& c);

void to_json(Json& j, const PolicySpec& s);
void from_json(const Json& j, PolicySpec& s);

void to_json(Json& j, const CohortSchema& s);
void from_json(const Json& j, CohortSchema& s);

void to_json(Json& j, const GroundTruth& t);
void from_json(const Json& j, GroundTruth& t);

void to_json(Json& j, const CohortConfig& c);
void from_json(const Json& j, CohortConfig& c);

void to_json(Json& j, const SimResult& r);
void from_json(const Json& j, SimResult& r);

void to_json(Json& j, const ReplicationSummary& s);

void to_json(Json& j, const TuneResult& r);
void from_json(const Json& j, TuneResult& r);

}  // namespace allocsim
