#include "allocsim/cohort.hpp"
#include "allocsim/error.hpp"

#include "doctest.h"
#include "support.hpp"

#include <cmath>
#include <fstream>
#include <map>

using namespace allocsim;

namespace {

CohortConfig small_config(std::uint64_t seed) {
  CohortConfig c;
  c.horizon_days = 20.0;
  c.initial_waitlist_size = 15;
  c.covariate_update_rate = 0.05;
  c.seed = seed;
  return c;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("zero horizon yields an empty cohort") {
  CohortConfig c;
  c.horizon_days = 0.0;
  const Cohort cohort = generate(c);
  CHECK(cohort.events.empty());
}

TEST_CASE("Poisson arrival counts") {
  CohortConfig c;
  c.patient_rate_per_day = 1.0;
  c.donor_rate_per_day = 0.5;
  c.horizon_days = 10000.0;
  c.truth_grid_step_days = 30.0;
  const Cohort cohort = generate(c);
  CHECK(std::abs(static_cast<double>(cohort.patients().size()) - 10000.0) <= 300.0);
  CHECK(std::abs(static_cast<double>(cohort.donors().size()) - 5000.0) <= 3.0 * std::sqrt(5000.0));
}

TEST_CASE("generation is deterministic in the seed") {
  CHECK(generate(small_config(5)) == generate(small_config(5)));
  CHECK_FALSE(generate(small_config(5)) == generate(small_config(6)));
}

TEST_CASE("generated cohorts are well formed") {
  const Cohort cohort = generate(small_config(9));
  CHECK_NOTHROW(cohort.validate());
  REQUIRE(cohort.truth.has_value());
  for (std::size_t i = 1; i < cohort.events.size(); ++i)
    CHECK_FALSE(event_before(cohort.events[i], cohort.events[i - 1]));
  int initial = 0;
  for (const auto& p : cohort.patients()) {
    CHECK(p.waitlist_covariates.size() == cohort.schema.waitlist_dim);
    CHECK(p.graft_covariates.size() == cohort.schema.graft_dim);
    if (p.listing_time < 0.0) ++initial;
  }
  CHECK(initial == 15);
  for (const auto& d : cohort.donors()) {
    CHECK(d.donor_covariates.size() == cohort.schema.donor_dim);
    CHECK(d.arrival_time >= 0.0);
    CHECK(d.arrival_time <= cohort.horizon_days);
  }
  for (const auto& e : cohort.events)
    if (const auto* death = std::get_if<PatientDeath>(&e.payload)) {
      bool found = false;
      for (const auto& p : cohort.patients())
        if (p.id == death->patient_id) {
          found = true;
          CHECK(p.death_time == e.time);
        }
      CHECK(found);
    }
}

TEST_CASE("blood type frequencies follow the configured distribution") {
  CohortConfig c;
  c.patient_rate_per_day = 5000.0;
  c.horizon_days = 10.0;
  c.truth_grid_step_days = 30.0;
  const auto patients = generate(c).patients();
  REQUIRE(patients.size() > 45000);
  std::map<BloodType, double> freq;
  for (const auto& p : patients) freq[p.blood_type] += 1.0 / static_cast<double>(patients.size());
  for (auto bt : kBloodTypes) CHECK(std::abs(freq[bt] - c.blood_type_dist[index_of(bt)]) <= 0.01);
}

TEST_CASE("higher true risk dies sooner") {
  CohortConfig c;
  c.patient_rate_per_day = 20.0;
  c.horizon_days = 365.0;
  const Cohort cohort = generate(c);
  const auto data = waitlist_training_data(cohort);
  const Vector theta = Eigen::Map<const Vector>(c.true_waitlist_theta.data(), 2);
  std::vector<double> scores;
  for (const auto& s : data) scores.push_back(theta.dot(s.covariates));
  CHECK(concordance_index(scores, data) > 0.6);
}

TEST_CASE("status correlates with true risk") {
  CohortConfig c;
  c.patient_rate_per_day = 200.0;
  c.horizon_days = 20.0;
  const auto patients = generate(c).patients();
  const Vector theta = Eigen::Map<const Vector>(c.true_waitlist_theta.data(), 2);
  double urgent = 0, urgent_n = 0, calm = 0, calm_n = 0;
  for (const auto& p : patients) {
    const double r = theta.dot(p.waitlist_covariates);
    if (p.status <= 2) urgent += r, urgent_n += 1;
    if (p.status >= 5) calm += r, calm_n += 1;
  }
  CHECK(urgent / urgent_n > calm / calm_n);
}

TEST_CASE("config validation") {
  CohortConfig c;
  c.blood_type_dist = {0.5, 0.5, 0.5, 0.0};
  CHECK_THROWS_AS(c.validate(), Error);
  c = CohortConfig{};
  c.patient_rate_per_day = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = CohortConfig{};
  c.true_waitlist_theta = {1.0};
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("one-month preset is about one hundred donors") {
  const Cohort cohort = generate(CohortConfig::one_month_preset(3));
  CHECK(cohort.horizon_days == 30.0);
  CHECK(cohort.donors().size() > 70);
  CHECK(cohort.donors().size() < 130);
}

TEST_CASE("save then load is the identity") {
  const auto dir = testing::scratch_dir("cohort_roundtrip");
  const Cohort original = generate(small_config(21));
  save_cohort_dir(original, dir);
  const Cohort loaded = load_cohort_dir(dir);
  CHECK(loaded == original);
  REQUIRE(loaded.truth.has_value());
  CHECK(loaded.truth->waitlist.coefficients == original.truth->waitlist.coefficients);

  // Plain CSV loading with only the two files and an explicit schema.
  LoadOptions opts;
  opts.updates_path = dir / "updates.csv";
  opts.horizon_days = original.horizon_days;
  CHECK(load_csv(dir / "patients.csv", dir / "donors.csv", original.schema, opts) == original);
}

TEST_CASE("CSV error contracts") {
  const auto dir = testing::scratch_dir("cohort_errors");
  const CohortSchema schema{1, 1, 1};
  const std::string donors = "id,arrival_day,blood_type,is_dbd,lat,lon,don_cov_0\n1,0.5,O,1,40,-75,0.1\n";
  write_file(dir / "donors.csv", donors);

  SUBCASE("malformed number names line and column") {
    write_file(dir / "patients.csv",
               "id,arrival_day,blood_type,status,lat,lon,death_day,wl_cov_0,gr_cov_0\n"
               "1,0,O,2,40,-75,,0.3,0.1\n"
               "2,1,A,3,41,-74,,abc,0.2\n");
    try {
      load_csv(dir / "patients.csv", dir / "donors.csv", schema);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      const std::string msg = e.what();
      CHECK(msg.find("line 3") != std::string::npos);
      CHECK(msg.find("column 8") != std::string::npos);
      CHECK(msg.find("wl_cov_0") != std::string::npos);
    }
  }
  SUBCASE("header disagreeing with the schema") {
    write_file(dir / "patients.csv", "id,arrival_day,blood_type,status,lat,lon,wl_cov_0\n1,0,O,2,40,-75,0.3\n");
    try {
      load_csv(dir / "patients.csv", dir / "donors.csv", schema);
      FAIL("expected a schema mismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SchemaMismatch);
    }
  }
  SUBCASE("missing death column means no scripted deaths") {
    write_file(dir / "patients.csv",
               "id,arrival_day,blood_type,status,lat,lon,wl_cov_0,gr_cov_0\n"
               "1,0,O,2,40,-75,0.3,0.1\n"
               "2,2,B,5,41,-74,0.1,0.2\n");
    const Cohort c = load_csv(dir / "patients.csv", dir / "donors.csv", schema);
    CHECK(c.patients().size() == 2);
    for (const auto& p : c.patients()) CHECK_FALSE(p.death_time.has_value());
    for (const auto& e : c.events) CHECK_FALSE(std::holds_alternative<PatientDeath>(e.payload));
    CHECK_FALSE(c.resorted);
    CHECK(c.horizon_days == 2.0);
  }
  SUBCASE("unsorted rows are sorted and flagged") {
    write_file(dir / "patients.csv",
               "id,arrival_day,blood_type,status,lat,lon,death_day,wl_cov_0,gr_cov_0\n"
               "1,5,O,2,40,-75,9,0.3,0.1\n"
               "2,1,B,5,41,-74,,0.1,0.2\n");
    LoadOptions opts;
    opts.horizon_days = 10.0;
    const Cohort c = load_csv(dir / "patients.csv", dir / "donors.csv", schema, opts);
    CHECK(c.resorted);
    CHECK(c.patients().front().id == 2);
    int deaths = 0;
    for (const auto& e : c.events) deaths += std::holds_alternative<PatientDeath>(e.payload);
    CHECK(deaths == 1);
  }
  SUBCASE("bad blood type") {
    write_file(dir / "patients.csv",
               "id,arrival_day,blood_type,status,lat,lon,death_day,wl_cov_0,gr_cov_0\n1,0,Q,2,40,-75,,0.3,0.1\n");
    CHECK_THROWS_AS(load_csv(dir / "patients.csv", dir / "donors.csv", schema), Error);
  }
}

TEST_CASE("event ordering at equal times") {
  const Patient p = testing::make_patient(4, BloodType::O);
  const Donor d = testing::make_donor(1, BloodType::O);
  const CohortEvent death{1.0, PatientDeath{9}}, update{1.0, CovariateUpdate{9, Vector::Zero(1)}},
      arrival{1.0, p}, donor{1.0, d}, later{1.5, PatientDeath{1}};
  CHECK(event_before(death, update));
  CHECK(event_before(update, arrival));
  CHECK(event_before(arrival, donor));
  CHECK(event_before(donor, later));
  CHECK_FALSE(event_before(donor, arrival));
}

TEST_CASE("training data helpers") {
  const Cohort cohort = generate(small_config(4));
  const auto wl = waitlist_training_data(cohort);
  CHECK(wl.size() == cohort.patients().size());
  const auto patients = cohort.patients();
  // Censoring at transplant shortens the record and drops the event.
  const PatientId first = patients.front().id;
  const double start = std::max(patients.front().listing_time, 0.0);
  const std::pair<PatientId, double> tx{first, start + 0.5};
  const auto censored = waitlist_training_data(cohort, std::span(&tx, 1));
  CHECK(censored.front().time == doctest::Approx(0.5));
  CHECK_FALSE(censored.front().event);

  const auto graft = graft_training_data(cohort, 200, 3650.0, 1);
  CHECK(graft.size() == 200);
  for (const auto& s : graft) {
    CHECK(s.covariates.size() == cohort.schema.graft_model_dim());
    CHECK(s.time >= 0.0);
  }
  const auto acc = acceptance_training_data(cohort, 300, 1);
  CHECK(acc.features.rows() == 300);
  CHECK(acc.features.cols() == cohort.schema.acceptance_model_dim());
  CHECK(acc.labels.size() == 300);
}
