#include "allocsim/simulator.hpp"

#include "allocsim/error.hpp"
#include "allocsim/matching.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <thread>
#include <unordered_map>

namespace allocsim {

namespace {

constexpr int kBatchDeadlinePriority = 4;
constexpr std::size_t kNoCohortEvent = std::numeric_limits<std::size_t>::max();

struct QueuedEvent {
  double time;
  int priority;
  std::uint64_t subject;
  std::uint64_t seq;
  std::size_t cohort_index;  // kNoCohortEvent for batch deadlines
  std::uint64_t batch_id;
};

struct LaterFirst {
  bool operator()(const QueuedEvent& a, const QueuedEvent& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.priority != b.priority) return a.priority > b.priority;
    if (a.subject != b.subject) return a.subject > b.subject;
    return a.seq > b.seq;
  }
};

void check_schema(const Cohort& cohort, const ModelSet& models) {
  const CohortSchema& s = cohort.schema;
  auto mismatch = [](const std::string& what) { throw Error(ErrorCode::SchemaMismatch, what); };
  if (models.graft.covariate_dim != s.graft_model_dim())
    mismatch("graft model expects " + std::to_string(models.graft.covariate_dim) +
             " covariates; cohort schema gives " + std::to_string(s.graft_model_dim()));
  if (models.waitlist.covariate_dim != s.waitlist_dim)
    mismatch("waitlist model expects " + std::to_string(models.waitlist.covariate_dim) +
             " covariates; cohort schema gives " + std::to_string(s.waitlist_dim));
  for (const auto* hash : {&models.graft.schema_hash, &models.waitlist.schema_hash})
    if (!hash->empty() && *hash != s.hash())
      mismatch("model schema hash '" + *hash + "' does not match cohort '" + s.hash() + "'");
  if (const auto* logistic = dynamic_cast<const LogisticAcceptance*>(models.acceptance.get())) {
    if (logistic->model().weights.size() != s.acceptance_model_dim())
      mismatch("acceptance model expects " + std::to_string(logistic->model().weights.size()) +
               " features; cohort schema gives " + std::to_string(s.acceptance_model_dim()));
    if (!logistic->model().schema_hash.empty() && logistic->model().schema_hash != s.hash())
      mismatch("acceptance model schema hash does not match cohort");
  }
}

// Active patients kept sorted by id so every scan is deterministic.
class Waitlist {
 public:
  std::span<const Patient> patients() const { return patients_; }

  void add(Patient p) {
    p.death_time.reset();  // latent truth never reaches a policy
    p.active = true;
    const auto it = lower(p.id);
    if (it != patients_.end() && it->id == p.id)
      throw Error(ErrorCode::InvalidArgument, "patient " + std::to_string(p.id) + " listed twice");
    patients_.insert(it, std::move(p));
  }

  Patient* find(PatientId id) {
    const auto it = lower(id);
    return (it != patients_.end() && it->id == id) ? &*it : nullptr;
  }

  bool remove(PatientId id) {
    const auto it = lower(id);
    if (it == patients_.end() || it->id != id) return false;
    patients_.erase(it);
    return true;
  }

 private:
  std::vector<Patient>::iterator lower(PatientId id) {
    return std::lower_bound(patients_.begin(), patients_.end(), id,
                            [](const Patient& p, PatientId v) { return p.id < v; });
  }

  std::vector<Patient> patients_;
};

}  // namespace

void SimConfig::validate() const {
  if (!(horizon_days > 0.0) || !std::isfinite(horizon_days))
    throw Error(ErrorCode::InvalidArgument, "horizon_days must be positive");
  policy.validate();
  acceptance.validate();
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be at least 1");
  if (!(batch_window_hours > 0.0))
    throw Error(ErrorCode::InvalidArgument, "batch_window_hours must be positive");
  if (replications < 1) throw Error(ErrorCode::InvalidArgument, "replications must be at least 1");
}

ModelSet models_from_truth(const GroundTruth& truth) {
  return ModelSet{truth.graft, truth.waitlist, std::make_shared<LogisticAcceptance>(truth.acceptance)};
}

CascadeOutcome offer_cascade(const Donor& donor, std::span<const Patient> waitlist,
                             const ModelSet& models, const PolicySpec& policy,
                             const AcceptancePolicyConfig& acceptance, Rng& rng) {
  if (!acceptance.always_accept && !models.acceptance)
    throw Error(ErrorCode::InvalidArgument, "stochastic acceptance requires an acceptance predictor");
  const auto order = rank_candidates(waitlist, donor, models.survival(), policy);
  std::unordered_map<PatientId, const Patient*> by_id;
  for (const auto& p : waitlist) by_id.emplace(p.id, &p);

  CascadeOutcome out;
  for (const auto& c : order) {
    if (!c.eligible_to_transplant) continue;
    ++out.offers_made;
    bool accepted = acceptance.always_accept;
    if (!accepted) {
      const double p = models.acceptance->probability(donor, *by_id.at(c.patient_id));
      accepted = rng.uniform() < adjusted_probability(p, acceptance.exponent_alpha);
    }
    if (accepted) {
      out.transplant = TransplantRecord{donor.id, c.patient_id, donor.arrival_time, c.delta_years};
      return out;
    }
    ++out.offers_rejected;
  }
  return out;
}

SimResult run(const SimConfig& config, const Cohort& cohort, const ModelSet& models) {
  config.validate();
  check_schema(cohort, models);

  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, LaterFirst> queue;
  std::uint64_t seq = 0;
  for (std::size_t i = 0; i < cohort.events.size(); ++i) {
    const auto& e = cohort.events[i];
    if (!(e.time >= 0.0 && e.time <= config.horizon_days))
      throw Error(ErrorCode::EventOutOfRange,
                  "event at day " + std::to_string(e.time) + " lies outside [0, " +
                      std::to_string(config.horizon_days) + "]");
    queue.push({e.time, event_priority(e), event_subject_id(e), seq++, i, 0});
  }

  Rng rng(config.seed);
  SimResult result;
  Waitlist waitlist;

  auto record = [&](const TransplantRecord& t) {
    result.transplants.push_back(t);
    result.total_life_years += t.delta_years;
    waitlist.remove(t.patient_id);
  };

  struct OpenBatch {
    std::uint64_t id;
    std::vector<Donor> donors;
  };
  std::optional<OpenBatch> batch;
  std::uint64_t next_batch_id = 1;

  auto flush = [&](double now) {
    const auto patients = waitlist.patients();
    const auto rows = static_cast<Eigen::Index>(batch->donors.size());
    const auto cols = static_cast<Eigen::Index>(patients.size());
    WeightMatrix w = WeightMatrix::Constant(rows, cols, forbidden());
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Donor& d = batch->donors[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < cols; ++c) {
        const Patient& p = patients[static_cast<std::size_t>(c)];
        if (!compatible(d.blood_type, p.blood_type)) continue;
        if (!config.policy.within_distance(distance_nm(d.location, p.center))) continue;
        const double gain = delta(d, p, models.graft, models.waitlist, config.policy.urgency_weight);
        if (gain > 0.0) w(r, c) = gain;
      }
    }
    const Assignment matched = max_weight_matching(w);
    std::vector<TransplantRecord> done;
    for (const auto& [r, c] : matched)
      done.push_back({batch->donors[static_cast<std::size_t>(r)].id,
                      patients[static_cast<std::size_t>(c)].id, now, w(r, c)});
    result.offers_made += done.size();
    result.discarded_donors += batch->donors.size() - done.size();
    for (const auto& t : done) record(t);
    batch.reset();
  };

  while (!queue.empty()) {
    const QueuedEvent ev = queue.top();
    queue.pop();
    if (ev.cohort_index == kNoCohortEvent) {
      if (batch && batch->id == ev.batch_id) flush(ev.time);
      continue;
    }
    const auto& payload = cohort.events[ev.cohort_index].payload;
    if (const auto* p = std::get_if<Patient>(&payload)) {
      waitlist.add(*p);
    } else if (const auto* death = std::get_if<PatientDeath>(&payload)) {
      if (waitlist.remove(death->patient_id)) ++result.waitlist_deaths;
    } else if (const auto* update = std::get_if<CovariateUpdate>(&payload)) {
      if (Patient* target = waitlist.find(update->patient_id))
        target->waitlist_covariates = update->waitlist_covariates;
    } else if (const auto* donor = std::get_if<Donor>(&payload)) {
      if (config.batch_size > 1 && donor->is_dbd) {
        if (!batch) {
          batch = OpenBatch{next_batch_id++, {}};
          const double deadline =
              std::min(ev.time + config.batch_window_hours / 24.0, config.horizon_days);
          queue.push({deadline, kBatchDeadlinePriority, batch->id, seq++, kNoCohortEvent, batch->id});
        }
        batch->donors.push_back(*donor);
        if (static_cast<int>(batch->donors.size()) >= config.batch_size) flush(ev.time);
        continue;
      }
      const CascadeOutcome outcome =
          offer_cascade(*donor, waitlist.patients(), models, config.policy, config.acceptance, rng);
      result.offers_made += outcome.offers_made;
      result.offers_rejected += outcome.offers_rejected;
      if (outcome.transplant)
        record(*outcome.transplant);
      else
        ++result.discarded_donors;
    }
  }
  return result;
}

ReplicationSummary summarize(std::span<const double> totals) {
  ReplicationSummary s;
  s.totals.assign(totals.begin(), totals.end());
  const double n = static_cast<double>(totals.size());
  if (totals.empty()) return s;
  double sum = 0.0;
  for (double v : totals) sum += v;
  s.mean = sum / n;
  if (totals.size() > 1) {
    double ss = 0.0;
    for (double v : totals) ss += (v - s.mean) * (v - s.mean);
    s.std_dev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::vector<SimResult> run_replications(const SimConfig& config, const Cohort& cohort,
                                        const ModelSet& models, int threads) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.replications);
  std::vector<SimResult> results(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      SimConfig c = config;
      c.seed = config.seed + i;
      results[i] = run(c, cohort, models);
    }
  };
  const auto workers = static_cast<std::size_t>(std::clamp(threads, 1, static_cast<int>(n)));
  if (workers == 1) {
    worker();
    return results;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          worker();
        } catch (...) {
          errors[w] = std::current_exception();
          next = n;
        }
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

ReplicationSummary replicate(const SimConfig& config, const Cohort& cohort, const ModelSet& models,
                             int threads) {
  const auto results = run_replications(config, cohort, models, threads);
  std::vector<double> totals;
  for (const auto& r : results) totals.push_back(r.total_life_years);
  ReplicationSummary s = summarize(totals);
  for (std::size_t i = 0; i < results.size(); ++i) s.seeds.push_back(config.seed + i);
  return s;
}

void write_transplants_csv(std::ostream& out, const SimResult& result) {
  const auto old_precision = out.precision(17);
  out << "donor_id,patient_id,time_days,delta_years\n";
  for (const auto& t : result.transplants)
    out << t.donor_id << ',' << t.patient_id << ',' << t.time_days << ',' << t.delta_years << '\n';
  out.precision(old_precision);
}

}  // namespace allocsim
