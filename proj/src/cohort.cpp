#include "allocsim/cohort.hpp"

#include "allocsim/error.hpp"
#include "allocsim/rng.hpp"
#include "allocsim/serialization.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace allocsim {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Inverse CDF of a categorical distribution at u in [0, 1).
std::size_t category_at(double u, std::span<const double> probs) {
  double cum = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    cum += probs[k];
    if (u < cum) return k;
  }
  return probs.size() - 1;
}

std::size_t draw_categorical(Rng& rng, std::span<const double> probs) {
  return category_at(rng.uniform(), probs);
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector standard_normal(Rng& rng, int dim) {
  Vector x(dim);
  for (int i = 0; i < dim; ++i) x[i] = rng.normal();
  return x;
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void check_simplex(std::span<const double> p, std::string_view what) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidArgument, std::string(what) + " has a negative entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must sum to 1");
}

// --- CSV -------------------------------------------------------------------

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

struct CsvTable {
  fs::path path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  CsvTable t;
  t.path = path;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw Error(ErrorCode::ParseError, t.path.filename().string() + ": line " +
                                             std::to_string(line_no) + ": expected " +
                                             std::to_string(t.header.size()) + " cells, got " +
                                             std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw Error(ErrorCode::ParseError, path.string() + ": missing header");
  return t;
}

class RowReader {
 public:
  RowReader(const CsvTable& t, std::size_t row) : t_(t), row_(row) {}

  const std::string& raw(std::size_t col) const { return t_.rows[row_][col]; }

  [[noreturn]] void fail(std::size_t col, const std::string& why) const {
    throw Error(ErrorCode::ParseError,
                t_.path.filename().string() + ": line " + std::to_string(t_.line_numbers[row_]) +
                    ", column " + std::to_string(col + 1) + " ('" + t_.header[col] + "'): " + why);
  }

  double number(std::size_t col) const {
    const std::string& s = raw(col);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
      fail(col, "cannot parse number '" + s + "'");
    return v;
  }

  std::uint64_t integer(std::size_t col) const {
    const std::string& s = raw(col);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
      fail(col, "cannot parse integer '" + s + "'");
    return v;
  }

  BloodType blood(std::size_t col) const {
    try {
      return parse_blood_type(raw(col));
    } catch (const Error&) {
      fail(col, "unknown blood type '" + raw(col) + "'");
    }
  }

  GeoPoint point(std::size_t lat_col, std::size_t lon_col) const {
    const double lat = number(lat_col);
    const double lon = number(lon_col);
    if (!(lat >= -90.0 && lat <= 90.0)) fail(lat_col, "latitude out of range");
    if (!(lon >= -180.0 && lon <= 180.0)) fail(lon_col, "longitude out of range");
    return GeoPoint(lat, lon);
  }

  Vector vector(std::size_t first_col, int dim) const {
    Vector v(dim);
    for (int k = 0; k < dim; ++k) v[k] = number(first_col + static_cast<std::size_t>(k));
    return v;
  }

 private:
  const CsvTable& t_;
  std::size_t row_;
};

std::vector<std::string> numbered(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

void expect_header(const CsvTable& t, const std::vector<std::string>& expected) {
  if (t.header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw Error(ErrorCode::SchemaMismatch,
                t.path.filename().string() + ": header does not match schema; expected " + want);
  }
}

std::vector<std::string> patient_header(const CohortSchema& s, bool with_death) {
  std::vector<std::string> h{"id", "arrival_day", "blood_type", "status", "lat", "lon"};
  if (with_death) h.push_back("death_day");
  for (auto& c : numbered("wl_cov_", s.waitlist_dim)) h.push_back(c);
  for (auto& c : numbered("gr_cov_", s.graft_dim)) h.push_back(c);
  return h;
}

std::vector<std::string> donor_header(const CohortSchema& s) {
  std::vector<std::string> h{"id", "arrival_day", "blood_type", "is_dbd", "lat", "lon"};
  for (auto& c : numbered("don_cov_", s.donor_dim)) h.push_back(c);
  return h;
}

std::vector<std::string> update_header(const CohortSchema& s) {
  std::vector<std::string> h{"patient_id", "day"};
  for (auto& c : numbered("wl_cov_", s.waitlist_dim)) h.push_back(c);
  return h;
}

void append_vector(std::ostream& out, const Vector& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) out << ',' << format_double(v[k]);
}

void sort_events(std::vector<CohortEvent>& events) {
  std::stable_sort(events.begin(), events.end(), event_before);
}

void add_death_event(std::vector<CohortEvent>& events, const Patient& p, double horizon) {
  if (p.death_time && *p.death_time <= horizon)
    events.push_back({*p.death_time, PatientDeath{p.id}});
}

}  // namespace

std::string CohortSchema::hash() const {
  return "w" + std::to_string(waitlist_dim) + "-d" + std::to_string(donor_dim) + "-g" +
         std::to_string(graft_dim);
}

int event_priority(const CohortEvent& e) {
  // variant order is Patient, Donor, CovariateUpdate, PatientDeath
  static constexpr int kRank[] = {2, 3, 1, 0};
  return kRank[e.payload.index()];
}

std::uint64_t event_subject_id(const CohortEvent& e) {
  return std::visit(
      [](const auto& p) -> std::uint64_t {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Patient> || std::is_same_v<T, Donor>)
          return p.id;
        else
          return p.patient_id;
      },
      e.payload);
}

bool event_before(const CohortEvent& a, const CohortEvent& b) {
  if (a.time != b.time) return a.time < b.time;
  const int pa = event_priority(a), pb = event_priority(b);
  if (pa != pb) return pa < pb;
  return event_subject_id(a) < event_subject_id(b);
}

bool operator==(const CovariateUpdate& a, const CovariateUpdate& b) {
  return a.patient_id == b.patient_id &&
         a.waitlist_covariates.size() == b.waitlist_covariates.size() &&
         (a.waitlist_covariates.size() == 0 || a.waitlist_covariates == b.waitlist_covariates);
}

bool operator==(const PatientDeath& a, const PatientDeath& b) { return a.patient_id == b.patient_id; }

bool operator==(const CohortEvent& a, const CohortEvent& b) {
  return a.time == b.time && a.payload == b.payload;
}

bool operator==(const Cohort& a, const Cohort& b) {
  return a.schema == b.schema && a.horizon_days == b.horizon_days && a.events == b.events;
}

std::vector<Patient> Cohort::patients() const {
  std::vector<Patient> out;
  for (const auto& e : events)
    if (const auto* p = std::get_if<Patient>(&e.payload)) out.push_back(*p);
  return out;
}

std::vector<Donor> Cohort::donors() const {
  std::vector<Donor> out;
  for (const auto& e : events)
    if (const auto* d = std::get_if<Donor>(&e.payload)) out.push_back(*d);
  return out;
}

void Cohort::validate() const {
  std::unordered_set<PatientId> seen;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (i > 0 && event_before(e, events[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "cohort events are not time-sorted");
    if (const auto* p = std::get_if<Patient>(&e.payload)) {
      p->validate();
      if (p->waitlist_covariates.size() != schema.waitlist_dim ||
          p->graft_covariates.size() != schema.graft_dim)
        throw Error(ErrorCode::SchemaMismatch,
                    "patient " + std::to_string(p->id) + " covariates do not match schema");
      if (!seen.insert(p->id).second)
        throw Error(ErrorCode::InvalidArgument, "duplicate patient id " + std::to_string(p->id));
    } else if (const auto* d = std::get_if<Donor>(&e.payload)) {
      if (d->donor_covariates.size() != schema.donor_dim)
        throw Error(ErrorCode::SchemaMismatch,
                    "donor " + std::to_string(d->id) + " covariates do not match schema");
    } else {
      const auto id = event_subject_id(e);
      if (!seen.count(id))
        throw Error(ErrorCode::InvalidArgument,
                    "event references patient " + std::to_string(id) + " before its arrival");
      if (const auto* u = std::get_if<CovariateUpdate>(&e.payload);
          u && u->waitlist_covariates.size() != schema.waitlist_dim)
        throw Error(ErrorCode::SchemaMismatch, "covariate update does not match schema");
    }
  }
}

std::vector<GeoPoint> default_center_locations() {
  return {
      {42.36, -71.06},  {40.71, -74.01},  {39.95, -75.17},  {40.44, -79.99},
      {39.29, -76.61},  {35.99, -78.90},  {33.75, -84.39},  {25.76, -80.19},
      {36.16, -86.78},  {41.50, -81.69},  {41.88, -87.63},  {44.98, -93.27},
      {38.63, -90.20},  {29.76, -95.37},  {32.78, -96.80},  {39.74, -104.99},
      {33.45, -112.07}, {40.76, -111.89}, {47.61, -122.33}, {37.77, -122.42},
      {34.05, -118.24},
  };
}

void CohortConfig::validate() const {
  if (!(patient_rate_per_day > 0.0) || !(donor_rate_per_day > 0.0))
    throw Error(ErrorCode::InvalidArgument, "arrival rates must be positive");
  if (!(dbd_fraction >= 0.0 && dbd_fraction <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "dbd_fraction must lie in [0, 1]");
  check_simplex(blood_type_dist, "blood_type_dist");
  check_simplex(status_dist, "status_dist");
  if (!(status_risk_correlation >= 0.0 && status_risk_correlation <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "status_risk_correlation must lie in [0, 1]");
  if (dims.waitlist_dim < 0 || dims.donor_dim < 0 || dims.graft_dim < 0)
    throw Error(ErrorCode::InvalidArgument, "covariate dimensions must be non-negative");
  if (static_cast<int>(true_waitlist_theta.size()) != dims.waitlist_dim)
    throw Error(ErrorCode::InvalidArgument, "true_waitlist_theta length must equal waitlist dim");
  if (static_cast<int>(true_graft_theta.size()) != dims.graft_model_dim())
    throw Error(ErrorCode::InvalidArgument,
                "true_graft_theta length must equal donor dim + graft dim + 1");
  if (static_cast<int>(acceptance_weights.size()) != dims.acceptance_model_dim())
    throw Error(ErrorCode::InvalidArgument,
                "acceptance_weights length must equal donor dim + waitlist dim + 1");
  if (!(baseline_rate > 0.0) || !(graft_baseline_rate > 0.0))
    throw Error(ErrorCode::InvalidArgument, "baseline rates must be positive");
  if (initial_waitlist_size < 0 || !(listing_history_days >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "initial waitlist settings must be non-negative");
  if (!(covariate_update_rate >= 0.0) || !(covariate_update_sd >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "covariate update settings must be non-negative");
  if (!(truth_grid_step_days > 0.0) || !(truth_grid_max_days >= truth_grid_step_days))
    throw Error(ErrorCode::InvalidArgument, "invalid ground-truth grid");
  if (!(horizon_days >= 0.0) || !std::isfinite(horizon_days))
    throw Error(ErrorCode::InvalidArgument, "horizon_days must be finite and non-negative");
  if (!(donor_location_jitter_deg >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "donor_location_jitter_deg must be non-negative");
}

CohortConfig CohortConfig::one_month_preset(std::uint64_t seed) {
  CohortConfig c;
  c.horizon_days = 30.0;
  c.donor_rate_per_day = 100.0 / 30.0;
  c.patient_rate_per_day = 3.5;
  c.initial_waitlist_size = 300;
  c.covariate_update_rate = 0.02;
  c.seed = seed;
  return c;
}

GroundTruth ground_truth(const CohortConfig& config) {
  const std::string hash = config.dims.hash();
  GroundTruth t;
  t.waitlist = exponential_baseline_model(to_vector(config.true_waitlist_theta), config.baseline_rate,
                                          config.truth_grid_step_days, config.truth_grid_max_days, hash);
  t.graft = exponential_baseline_model(to_vector(config.true_graft_theta), config.graft_baseline_rate,
                                       config.truth_grid_step_days, config.truth_grid_max_days, hash);
  t.acceptance = AcceptanceModel{config.acceptance_intercept, to_vector(config.acceptance_weights), hash};
  return t;
}

Cohort generate(const CohortConfig& config) {
  config.validate();
  Rng rng(config.seed);
  Cohort cohort;
  cohort.schema = config.dims;
  cohort.horizon_days = config.horizon_days;
  cohort.truth = ground_truth(config);

  const auto centers = config.center_locations.empty() ? default_center_locations()
                                                       : config.center_locations;
  const Vector theta_w = to_vector(config.true_waitlist_theta);
  const double theta_norm = theta_w.norm();
  const double rho = config.status_risk_correlation;
  const double horizon = config.horizon_days;

  std::vector<Patient> patients;
  auto make_patient = [&](PatientId id, double listing, double entry) {
    Patient p;
    p.id = id;
    p.listing_time = listing;
    p.blood_type = kBloodTypes[draw_categorical(rng, config.blood_type_dist)];
    p.center = centers[rng.index(centers.size())];
    p.waitlist_covariates = standard_normal(rng, config.dims.waitlist_dim);
    p.graft_covariates = standard_normal(rng, config.dims.graft_dim);
    const double risk = config.dims.waitlist_dim ? theta_w.dot(p.waitlist_covariates) : 0.0;
    // Latent urgency: standard normal, correlated with the true risk score.
    const double noise = rng.normal();
    const double urgency = theta_norm > 0.0
                               ? rho * risk / theta_norm + std::sqrt(1.0 - rho * rho) * noise
                               : noise;
    p.status = 1 + static_cast<int>(category_at(std_normal_cdf(-urgency), config.status_dist));
    p.death_time = entry + rng.exponential(config.baseline_rate * std::exp(risk));
    patients.push_back(p);
  };

  PatientId next_patient = 1;
  for (int i = 0; i < config.initial_waitlist_size; ++i) {
    const double listing = -rng.uniform() * config.listing_history_days;
    make_patient(next_patient++, listing, 0.0);
  }
  for (double t = rng.exponential(config.patient_rate_per_day); t <= horizon;
       t += rng.exponential(config.patient_rate_per_day))
    make_patient(next_patient++, t, t);

  std::vector<Donor> donors;
  DonorId next_donor = 1;
  for (double t = rng.exponential(config.donor_rate_per_day); t <= horizon;
       t += rng.exponential(config.donor_rate_per_day)) {
    Donor d;
    d.id = next_donor++;
    d.arrival_time = t;
    d.blood_type = kBloodTypes[draw_categorical(rng, config.blood_type_dist)];
    const GeoPoint& c = centers[rng.index(centers.size())];
    const double lat = std::clamp(c.latitude() + config.donor_location_jitter_deg * rng.normal(), -90.0, 90.0);
    double lon = c.longitude() + config.donor_location_jitter_deg * rng.normal();
    if (lon > 180.0) lon -= 360.0;
    if (lon < -180.0) lon += 360.0;
    d.location = GeoPoint(lat, lon);
    d.is_dbd = rng.bernoulli(config.dbd_fraction);
    d.donor_covariates = standard_normal(rng, config.dims.donor_dim);
    donors.push_back(std::move(d));
  }

  for (const auto& p : patients) {
    const double entry = std::max(p.listing_time, 0.0);
    cohort.events.push_back({entry, p});
    add_death_event(cohort.events, p, horizon);
  }
  for (auto& d : donors) cohort.events.push_back({d.arrival_time, std::move(d)});

  if (config.covariate_update_rate > 0.0) {
    for (const auto& p : patients) {
      const double entry = std::max(p.listing_time, 0.0);
      const double stop = std::min(horizon, p.death_time.value_or(horizon));
      Vector x = p.waitlist_covariates;
      for (double t = entry + rng.exponential(config.covariate_update_rate); t < stop;
           t += rng.exponential(config.covariate_update_rate)) {
        for (Eigen::Index k = 0; k < x.size(); ++k) x[k] += config.covariate_update_sd * rng.normal();
        cohort.events.push_back({t, CovariateUpdate{p.id, x}});
      }
    }
  }
  sort_events(cohort.events);
  return cohort;
}

Cohort load_csv(const fs::path& patients_path, const fs::path& donors_path,
                const CohortSchema& schema, const LoadOptions& options) {
  Cohort cohort;
  cohort.schema = schema;

  const CsvTable pt = read_csv(patients_path);
  const bool with_death = std::find(pt.header.begin(), pt.header.end(), "death_day") != pt.header.end();
  expect_header(pt, patient_header(schema, with_death));
  const std::size_t cov0 = with_death ? 7 : 6;

  std::vector<CohortEvent> events;
  std::vector<Patient> patients;
  double previous = -std::numeric_limits<double>::infinity();
  bool unsorted = false;
  for (std::size_t r = 0; r < pt.rows.size(); ++r) {
    RowReader row(pt, r);
    Patient p;
    p.id = row.integer(0);
    p.listing_time = row.number(1);
    p.blood_type = row.blood(2);
    const auto status = row.integer(3);
    if (status < 1 || status > 6) row.fail(3, "status must be in 1..6");
    p.status = static_cast<int>(status);
    p.center = row.point(4, 5);
    if (with_death && !row.raw(6).empty()) {
      p.death_time = row.number(6);
      if (*p.death_time < p.listing_time) row.fail(6, "death_day precedes arrival_day");
    }
    p.waitlist_covariates = row.vector(cov0, schema.waitlist_dim);
    p.graft_covariates = row.vector(cov0 + static_cast<std::size_t>(schema.waitlist_dim), schema.graft_dim);
    if (p.listing_time < previous) unsorted = true;
    previous = p.listing_time;
    patients.push_back(std::move(p));
  }

  const CsvTable dt = read_csv(donors_path);
  expect_header(dt, donor_header(schema));
  std::vector<Donor> donors;
  previous = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < dt.rows.size(); ++r) {
    RowReader row(dt, r);
    Donor d;
    d.id = row.integer(0);
    d.arrival_time = row.number(1);
    if (d.arrival_time < 0.0) row.fail(1, "arrival_day must be non-negative");
    d.blood_type = row.blood(2);
    const auto dbd = row.integer(3);
    if (dbd > 1) row.fail(3, "is_dbd must be 0 or 1");
    d.is_dbd = dbd == 1;
    d.location = row.point(4, 5);
    d.donor_covariates = row.vector(6, schema.donor_dim);
    if (d.arrival_time < previous) unsorted = true;
    previous = d.arrival_time;
    donors.push_back(std::move(d));
  }

  std::vector<CohortEvent> updates;
  if (options.updates_path && fs::exists(*options.updates_path)) {
    const CsvTable ut = read_csv(*options.updates_path);
    expect_header(ut, update_header(schema));
    previous = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < ut.rows.size(); ++r) {
      RowReader row(ut, r);
      const double day = row.number(1);
      if (day < previous) unsorted = true;
      previous = day;
      updates.push_back({day, CovariateUpdate{row.integer(0), row.vector(2, schema.waitlist_dim)}});
    }
  }

  double latest = 0.0;
  for (const auto& p : patients) latest = std::max(latest, std::max(p.listing_time, 0.0));
  for (const auto& d : donors) latest = std::max(latest, d.arrival_time);
  for (const auto& u : updates) latest = std::max(latest, u.time);
  cohort.horizon_days = options.horizon_days.value_or(latest);

  for (const auto& p : patients) {
    events.push_back({std::max(p.listing_time, 0.0), p});
    add_death_event(events, p, cohort.horizon_days);
  }
  for (auto& d : donors) events.push_back({d.arrival_time, std::move(d)});
  for (auto& u : updates) events.push_back(std::move(u));
  sort_events(events);
  cohort.events = std::move(events);
  cohort.resorted = unsorted;
  cohort.validate();
  return cohort;
}

void save_csv(const Cohort& cohort, const fs::path& patients_path, const fs::path& donors_path,
              const std::optional<fs::path>& updates_path) {
  std::ofstream pout(patients_path);
  std::ofstream dout(donors_path);
  if (!pout || !dout) throw Error(ErrorCode::IoError, "cannot write cohort CSV files");

  auto write_header = [](std::ostream& out, const std::vector<std::string>& h) {
    for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
    out << '\n';
  };
  write_header(pout, patient_header(cohort.schema, true));
  write_header(dout, donor_header(cohort.schema));

  std::ofstream uout;
  if (updates_path) {
    uout.open(*updates_path);
    if (!uout) throw Error(ErrorCode::IoError, "cannot write " + updates_path->string());
    write_header(uout, update_header(cohort.schema));
  }

  for (const auto& e : cohort.events) {
    if (const auto* p = std::get_if<Patient>(&e.payload)) {
      pout << p->id << ',' << format_double(p->listing_time) << ',' << to_string(p->blood_type) << ','
           << p->status << ',' << format_double(p->center.latitude()) << ','
           << format_double(p->center.longitude()) << ','
           << (p->death_time ? format_double(*p->death_time) : "");
      append_vector(pout, p->waitlist_covariates);
      append_vector(pout, p->graft_covariates);
      pout << '\n';
    } else if (const auto* d = std::get_if<Donor>(&e.payload)) {
      dout << d->id << ',' << format_double(d->arrival_time) << ',' << to_string(d->blood_type) << ','
           << (d->is_dbd ? 1 : 0) << ',' << format_double(d->location.latitude()) << ','
           << format_double(d->location.longitude());
      append_vector(dout, d->donor_covariates);
      dout << '\n';
    } else if (const auto* u = std::get_if<CovariateUpdate>(&e.payload); u && updates_path) {
      uout << u->patient_id << ',' << format_double(e.time);
      append_vector(uout, u->waitlist_covariates);
      uout << '\n';
    }
  }
}

void save_cohort_dir(const Cohort& cohort, const fs::path& dir) {
  fs::create_directories(dir);
  save_csv(cohort, dir / "patients.csv", dir / "donors.csv", dir / "updates.csv");
  Json sidecar;
  sidecar["version"] = 1;
  sidecar["schema"] = cohort.schema;
  sidecar["schema_hash"] = cohort.schema.hash();
  sidecar["horizon_days"] = cohort.horizon_days;
  if (cohort.truth) sidecar["ground_truth"] = *cohort.truth;
  write_json_file(dir / "schema.json", sidecar);
}

Cohort load_cohort_dir(const fs::path& dir) {
  const Json sidecar = read_json_file(dir / "schema.json");
  reject_unknown_keys(sidecar, {"version", "schema", "schema_hash", "horizon_days", "ground_truth"},
                      "cohort schema sidecar");
  const auto schema = sidecar.at("schema").get<CohortSchema>();
  if (sidecar.contains("schema_hash") && sidecar["schema_hash"].get<std::string>() != schema.hash())
    throw Error(ErrorCode::SchemaMismatch, "schema_hash does not match schema dimensions");
  LoadOptions opts;
  opts.updates_path = dir / "updates.csv";
  if (sidecar.contains("horizon_days")) opts.horizon_days = sidecar["horizon_days"].get<double>();
  Cohort cohort = load_csv(dir / "patients.csv", dir / "donors.csv", schema, opts);
  if (sidecar.contains("ground_truth")) cohort.truth = sidecar["ground_truth"].get<GroundTruth>();
  return cohort;
}

std::vector<SurvivalSample> waitlist_training_data(
    const Cohort& cohort, std::span<const std::pair<PatientId, double>> transplanted) {
  std::unordered_map<PatientId, double> transplant_time(transplanted.begin(), transplanted.end());
  std::vector<SurvivalSample> out;
  for (const auto& e : cohort.events) {
    const auto* p = std::get_if<Patient>(&e.payload);
    if (!p) continue;
    const double start = std::max(p->listing_time, 0.0);
    double end = cohort.horizon_days;
    bool event = false;
    if (p->death_time && *p->death_time <= end) {
      end = *p->death_time;
      event = true;
    }
    if (auto it = transplant_time.find(p->id); it != transplant_time.end() && it->second < end) {
      end = it->second;
      event = false;
    }
    out.push_back({std::max(end - start, 0.0), event, p->waitlist_covariates});
  }
  return out;
}

namespace {

template <typename Fn>
void sample_compatible_pairs(const Cohort& cohort, std::size_t n_pairs, Rng& rng, Fn&& emit) {
  const auto patients = cohort.patients();
  const auto donors = cohort.donors();
  if (patients.empty() || donors.empty())
    throw Error(ErrorCode::InvalidArgument, "cohort needs patients and donors to form pairs");
  std::size_t produced = 0;
  std::size_t attempts = 0;
  while (produced < n_pairs) {
    if (++attempts > 1000 * (n_pairs + 1))
      throw Error(ErrorCode::InvalidArgument, "cohort has no blood-compatible pairs");
    const Donor& d = donors[rng.index(donors.size())];
    const Patient& p = patients[rng.index(patients.size())];
    if (!compatible(d.blood_type, p.blood_type)) continue;
    emit(d, p);
    ++produced;
  }
}

const GroundTruth& require_truth(const Cohort& cohort) {
  if (!cohort.truth)
    throw Error(ErrorCode::InvalidArgument, "cohort carries no ground-truth models");
  return *cohort.truth;
}

}  // namespace

std::vector<SurvivalSample> graft_training_data(const Cohort& cohort, std::size_t n_pairs,
                                                double follow_up_days, std::uint64_t seed) {
  const GroundTruth& truth = require_truth(cohort);
  const double rate = truth.graft.baseline_times.empty()
                          ? 0.0
                          : truth.graft.baseline_cumhaz.back() / truth.graft.baseline_times.back();
  if (!(rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "ground-truth graft baseline is empty");
  Rng rng(seed);
  std::vector<SurvivalSample> out;
  out.reserve(n_pairs);
  sample_compatible_pairs(cohort, n_pairs, rng, [&](const Donor& d, const Patient& p) {
    Vector x = graft_features(d, p);
    const double failure = rng.exponential(rate * std::exp(truth.graft.linear_predictor(x)));
    const double censor = rng.uniform() * follow_up_days;
    out.push_back({std::min(failure, censor), failure <= censor, std::move(x)});
  });
  return out;
}

LabeledPairs acceptance_training_data(const Cohort& cohort, std::size_t n_pairs, std::uint64_t seed) {
  const GroundTruth& truth = require_truth(cohort);
  Rng rng(seed);
  LabeledPairs out;
  out.features.resize(static_cast<Eigen::Index>(n_pairs), cohort.schema.acceptance_model_dim());
  Eigen::Index row = 0;
  sample_compatible_pairs(cohort, n_pairs, rng, [&](const Donor& d, const Patient& p) {
    const Vector x = acceptance_features(d, p);
    out.features.row(row++) = x.transpose();
    out.labels.push_back(rng.bernoulli(truth.acceptance.predict(x)) ? 1 : 0);
  });
  return out;
}

}  // namespace allocsim
