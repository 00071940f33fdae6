#include "allocsim/serialization.hpp"

#include "allocsim/error.hpp"

#include <fstream>

namespace allocsim {

namespace {

Json vector_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

template <typename T>
void read_optional(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view context) {
  if (!j.is_object())
    throw Error(ErrorCode::ConfigError, std::string(context) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(ErrorCode::ConfigError,
                  "unknown key '" + key + "' in " + std::string(context));
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void to_json(Json& j, const CoxModel& m) {
  j = Json{{"coefficients", vector_json(m.coefficients)},
           {"baseline_times", m.baseline_times},
           {"baseline_cumhaz", m.baseline_cumhaz},
           {"covariate_dim", m.covariate_dim},
           {"schema_hash", m.schema_hash}};
}

void from_json(const Json& j, CoxModel& m) {
  reject_unknown_keys(j, {"coefficients", "baseline_times", "baseline_cumhaz", "covariate_dim", "schema_hash"},
                      "Cox model");
  m.coefficients = vector_from(j.at("coefficients"));
  m.baseline_times = j.at("baseline_times").get<std::vector<double>>();
  m.baseline_cumhaz = j.at("baseline_cumhaz").get<std::vector<double>>();
  m.covariate_dim = j.at("covariate_dim").get<int>();
  m.schema_hash = j.value("schema_hash", std::string{});
  m.validate();
}

void to_json(Json& j, const AcceptanceModel& m) {
  j = Json{{"intercept", m.intercept}, {"weights", vector_json(m.weights)}, {"schema_hash", m.schema_hash}};
}

void from_json(const Json& j, AcceptanceModel& m) {
  reject_unknown_keys(j, {"intercept", "weights", "schema_hash"}, "acceptance model");
  m.intercept = j.at("intercept").get<double>();
  m.weights = vector_from(j.at("weights"));
  m.schema_hash = j.value("schema_hash", std::string{});
}

void to_json(Json& j, const AcceptancePolicyConfig& c) {
  j = Json{{"exponent_alpha", c.exponent_alpha}, {"always_accept", c.always_accept}};
}

void from_json(const Json& j, AcceptancePolicyConfig& c) {
  reject_unknown_keys(j, {"exponent_alpha", "always_accept"}, "acceptance settings");
  read_optional(j, "exponent_alpha", c.exponent_alpha);
  read_optional(j, "always_accept", c.always_accept);
  c.validate();
}

void to_json(Json& j, const PolicySpec& s) {
  j = Json{{"kind", std::string(to_string(s.kind))},
           {"delta_tiebreak", s.delta_tiebreak},
           {"delta_exclude", s.delta_exclude},
           {"urgency_weight", s.urgency_weight},
           {"max_distance_nm", s.max_distance_nm ? Json(*s.max_distance_nm) : Json(nullptr)},
           {"potential_theta", s.potential_theta}};
}

void from_json(const Json& j, PolicySpec& s) {
  reject_unknown_keys(j,
                      {"kind", "delta_tiebreak", "delta_exclude", "urgency_weight", "max_distance_nm",
                       "potential_theta"},
                      "policy");
  s = PolicySpec{};
  s.kind = parse_policy_kind(j.at("kind").get<std::string>());
  read_optional(j, "delta_tiebreak", s.delta_tiebreak);
  read_optional(j, "delta_exclude", s.delta_exclude);
  read_optional(j, "urgency_weight", s.urgency_weight);
  if (j.contains("max_distance_nm") && !j["max_distance_nm"].is_null()) {
    if (j["max_distance_nm"].is_string()) {
      if (j["max_distance_nm"].get<std::string>() != "unbounded")
        throw Error(ErrorCode::ConfigError, "max_distance_nm must be a number or \"unbounded\"");
    } else {
      s.max_distance_nm = j["max_distance_nm"].get<double>();
    }
  }
  read_optional(j, "potential_theta", s.potential_theta);
  if ((s.delta_tiebreak || s.delta_exclude) && s.kind != PolicyKind::StatusQuo)
    throw Error(ErrorCode::ConfigError, "delta_tiebreak/delta_exclude apply to status_quo only");
  s.validate();
}

void to_json(Json& j, const CohortSchema& s) {
  j = Json{{"waitlist_dim", s.waitlist_dim}, {"donor_dim", s.donor_dim}, {"graft_dim", s.graft_dim}};
}

void from_json(const Json& j, CohortSchema& s) {
  reject_unknown_keys(j, {"waitlist_dim", "donor_dim", "graft_dim"}, "schema");
  s.waitlist_dim = j.at("waitlist_dim").get<int>();
  s.donor_dim = j.at("donor_dim").get<int>();
  s.graft_dim = j.at("graft_dim").get<int>();
}

void to_json(Json& j, const GroundTruth& t) {
  j = Json{{"graft", t.graft}, {"waitlist", t.waitlist}, {"acceptance", t.acceptance}};
}

void from_json(const Json& j, GroundTruth& t) {
  reject_unknown_keys(j, {"graft", "waitlist", "acceptance"}, "ground truth");
  t.graft = j.at("graft").get<CoxModel>();
  t.waitlist = j.at("waitlist").get<CoxModel>();
  t.acceptance = j.at("acceptance").get<AcceptanceModel>();
}

void to_json(Json& j, const CohortConfig& c) {
  Json centers = Json::array();
  for (const auto& p : c.center_locations) centers.push_back({p.latitude(), p.longitude()});
  j = Json{{"patient_rate_per_day", c.patient_rate_per_day},
           {"donor_rate_per_day", c.donor_rate_per_day},
           {"dbd_fraction", c.dbd_fraction},
           {"blood_type_dist", c.blood_type_dist},
           {"status_dist", c.status_dist},
           {"status_risk_correlation", c.status_risk_correlation},
           {"center_locations", centers},
           {"donor_location_jitter_deg", c.donor_location_jitter_deg},
           {"dims", c.dims},
           {"true_waitlist_theta", c.true_waitlist_theta},
           {"true_graft_theta", c.true_graft_theta},
           {"baseline_rate", c.baseline_rate},
           {"graft_baseline_rate", c.graft_baseline_rate},
           {"acceptance_intercept", c.acceptance_intercept},
           {"acceptance_weights", c.acceptance_weights},
           {"initial_waitlist_size", c.initial_waitlist_size},
           {"listing_history_days", c.listing_history_days},
           {"covariate_update_rate", c.covariate_update_rate},
           {"covariate_update_sd", c.covariate_update_sd},
           {"truth_grid_step_days", c.truth_grid_step_days},
           {"truth_grid_max_days", c.truth_grid_max_days},
           {"horizon_days", c.horizon_days},
           {"seed", c.seed}};
}

void from_json(const Json& j, CohortConfig& c) {
  reject_unknown_keys(
      j,
      {"preset", "patient_rate_per_day", "donor_rate_per_day", "dbd_fraction", "blood_type_dist",
       "status_dist", "status_risk_correlation", "center_locations", "donor_location_jitter_deg", "dims",
       "true_waitlist_theta", "true_graft_theta", "baseline_rate", "graft_baseline_rate",
       "acceptance_intercept", "acceptance_weights", "initial_waitlist_size", "listing_history_days",
       "covariate_update_rate", "covariate_update_sd", "truth_grid_step_days", "truth_grid_max_days",
       "horizon_days", "seed"},
      "cohort config");
  c = CohortConfig{};
  if (j.contains("preset")) {
    const auto preset = j["preset"].get<std::string>();
    if (preset != "one_month") throw Error(ErrorCode::ConfigError, "unknown cohort preset '" + preset + "'");
    c = CohortConfig::one_month_preset();
  }
  read_optional(j, "patient_rate_per_day", c.patient_rate_per_day);
  read_optional(j, "donor_rate_per_day", c.donor_rate_per_day);
  read_optional(j, "dbd_fraction", c.dbd_fraction);
  read_optional(j, "blood_type_dist", c.blood_type_dist);
  read_optional(j, "status_dist", c.status_dist);
  read_optional(j, "status_risk_correlation", c.status_risk_correlation);
  if (j.contains("center_locations")) {
    c.center_locations.clear();
    for (const auto& p : j["center_locations"]) {
      const auto ll = p.get<std::array<double, 2>>();
      c.center_locations.emplace_back(ll[0], ll[1]);
    }
  }
  read_optional(j, "donor_location_jitter_deg", c.donor_location_jitter_deg);
  read_optional(j, "dims", c.dims);
  read_optional(j, "true_waitlist_theta", c.true_waitlist_theta);
  read_optional(j, "true_graft_theta", c.true_graft_theta);
  read_optional(j, "baseline_rate", c.baseline_rate);
  read_optional(j, "graft_baseline_rate", c.graft_baseline_rate);
  read_optional(j, "acceptance_intercept", c.acceptance_intercept);
  read_optional(j, "acceptance_weights", c.acceptance_weights);
  read_optional(j, "initial_waitlist_size", c.initial_waitlist_size);
  read_optional(j, "listing_history_days", c.listing_history_days);
  read_optional(j, "covariate_update_rate", c.covariate_update_rate);
  read_optional(j, "covariate_update_sd", c.covariate_update_sd);
  read_optional(j, "truth_grid_step_days", c.truth_grid_step_days);
  read_optional(j, "truth_grid_max_days", c.truth_grid_max_days);
  read_optional(j, "horizon_days", c.horizon_days);
  read_optional(j, "seed", c.seed);
  c.validate();
}

void to_json(Json& j, const SimResult& r) {
  Json transplants = Json::array();
  for (const auto& t : r.transplants)
    transplants.push_back({{"donor_id", t.donor_id},
                           {"patient_id", t.patient_id},
                           {"time_days", t.time_days},
                           {"delta_years", t.delta_years}});
  j = Json{{"total_life_years", r.total_life_years},
           {"transplant_count", r.transplants.size()},
           {"discarded_donors", r.discarded_donors},
           {"waitlist_deaths", r.waitlist_deaths},
           {"offers_made", r.offers_made},
           {"offers_rejected", r.offers_rejected},
           {"transplants", transplants}};
}

void from_json(const Json& j, SimResult& r) {
  r = SimResult{};
  r.total_life_years = j.at("total_life_years").get<double>();
  r.discarded_donors = j.at("discarded_donors").get<std::size_t>();
  r.waitlist_deaths = j.at("waitlist_deaths").get<std::size_t>();
  r.offers_made = j.at("offers_made").get<std::size_t>();
  r.offers_rejected = j.at("offers_rejected").get<std::size_t>();
  for (const auto& t : j.at("transplants"))
    r.transplants.push_back({t.at("donor_id").get<DonorId>(), t.at("patient_id").get<PatientId>(),
                             t.at("time_days").get<double>(), t.at("delta_years").get<double>()});
}

void to_json(Json& j, const ReplicationSummary& s) {
  j = Json{{"mean", s.mean}, {"std", s.std_dev}, {"seeds", s.seeds}, {"totals", s.totals}};
}

void to_json(Json& j, const TuneResult& r) {
  Json log = Json::array();
  for (const auto& e : r.evaluation_log) log.push_back({{"theta", e.theta}, {"score", e.score}});
  j = Json{{"best_theta", r.best_theta}, {"best_score", r.best_score}, {"evaluation_log", log}};
}

void from_json(const Json& j, TuneResult& r) {
  r = TuneResult{};
  r.best_theta = j.at("best_theta").get<PotentialVector>();
  r.best_score = j.at("best_score").get<double>();
  for (const auto& e : j.at("evaluation_log"))
    r.evaluation_log.push_back({e.at("theta").get<PotentialVector>(), e.at("score").get<double>()});
}

}  // namespace allocsim
