#include "allocsim/cli.hpp"

#include "allocsim/error.hpp"
#include "allocsim/rng.hpp"
#include "allocsim/serialization.hpp"
#include "allocsim/tuning.hpp"

#include "CLI11.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

namespace allocsim {

namespace fs = std::filesystem;

namespace {

constexpr int kConfigVersion = 1;

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

LogLevel log_level_from_env() {
  const char* raw = std::getenv("ALLOCSIM_LOG");
  if (raw == nullptr || *raw == '\0') return LogLevel::Warn;
  const std::string_view v(raw);
  if (v == "error") return LogLevel::Error;
  if (v == "warn") return LogLevel::Warn;
  if (v == "info") return LogLevel::Info;
  if (v == "debug") return LogLevel::Debug;
  throw Error(ErrorCode::ConfigError, "ALLOCSIM_LOG must be one of error, warn, info, debug");
}

class Logger {
 public:
  Logger(std::ostream& sink, LogLevel level) : sink_(sink), level_(level) {}

  void warn(std::string_view msg) const { write(LogLevel::Warn, "warn", msg); }
  void info(std::string_view msg) const { write(LogLevel::Info, "info", msg); }
  void debug(std::string_view msg) const { write(LogLevel::Debug, "debug", msg); }

 private:
  void write(LogLevel level, std::string_view tag, std::string_view msg) const {
    if (level <= level_) sink_ << "[allocsim " << tag << "] " << msg << '\n';
  }

  std::ostream& sink_;
  LogLevel level_;
};

std::string fmt(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, end) : std::to_string(v);
}

struct Flags {
  std::string command;
  fs::path config;
  std::optional<fs::path> out;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::optional<std::string> model;
};

// Where a cohort comes from: a generator config or a saved directory.
struct CohortSource {
  std::optional<CohortConfig> generate;
  std::optional<fs::path> dir;

  Json identity() const {
    if (generate) return Json{{"generate", *generate}};
    return Json{{"dir", fs::weakly_canonical(*dir).string()}};
  }

  Cohort load() const { return generate ? allocsim::generate(*generate) : load_cohort_dir(*dir); }
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

CohortSource parse_cohort_source(const Json& j, const fs::path& base, std::string_view context) {
  reject_unknown_keys(j, {"generate", "dir"}, context);
  if (j.contains("generate") == j.contains("dir"))
    throw Error(ErrorCode::ConfigError, std::string(context) + " needs exactly one of 'generate' or 'dir'");
  CohortSource src;
  if (j.contains("generate"))
    src.generate = j["generate"].get<CohortConfig>();
  else
    src.dir = resolve(base, j["dir"].get<std::string>());
  return src;
}

struct ModelSources {
  std::optional<fs::path> graft;
  std::optional<fs::path> waitlist;
  std::optional<fs::path> acceptance;
  std::optional<double> constant_acceptance;
};

ModelSources parse_model_sources(const Json& j, const fs::path& base) {
  reject_unknown_keys(j, {"graft", "waitlist", "acceptance"}, "models");
  ModelSources m;
  if (j.contains("graft")) m.graft = resolve(base, j["graft"].get<std::string>());
  if (j.contains("waitlist")) m.waitlist = resolve(base, j["waitlist"].get<std::string>());
  if (j.contains("acceptance")) {
    const Json& a = j["acceptance"];
    if (a.is_object()) {
      reject_unknown_keys(a, {"constant"}, "models.acceptance");
      m.constant_acceptance = a.at("constant").get<double>();
      if (!(*m.constant_acceptance >= 0.0 && *m.constant_acceptance <= 1.0))
        throw Error(ErrorCode::ConfigError, "models.acceptance.constant must lie in [0, 1]");
    } else {
      m.acceptance = resolve(base, a.get<std::string>());
    }
  }
  return m;
}

// Paths win; anything left unspecified comes from the cohort's ground truth.
ModelSet resolve_models(const ModelSources& src, const Cohort& cohort) {
  auto need_truth = [&](const char* what) -> const GroundTruth& {
    if (!cohort.truth)
      throw Error(ErrorCode::ConfigError,
                  std::string("no ") + what + " model given and the cohort carries no ground truth");
    return *cohort.truth;
  };
  ModelSet m;
  m.graft = src.graft ? read_json_file(*src.graft).get<CoxModel>() : need_truth("graft").graft;
  m.waitlist = src.waitlist ? read_json_file(*src.waitlist).get<CoxModel>() : need_truth("waitlist").waitlist;
  if (src.constant_acceptance)
    m.acceptance = std::make_shared<ConstantAcceptance>(*src.constant_acceptance);
  else if (src.acceptance)
    m.acceptance = std::make_shared<LogisticAcceptance>(read_json_file(*src.acceptance).get<AcceptanceModel>());
  else
    m.acceptance = std::make_shared<LogisticAcceptance>(need_truth("acceptance").acceptance);
  return m;
}

// Simulation settings; the horizon defaults to the cohort's.
struct SimSettings {
  SimConfig base;
  std::optional<double> horizon_days;

  SimConfig for_cohort(const PolicySpec& policy, const Cohort& cohort) const {
    SimConfig c = base;
    c.policy = policy;
    c.horizon_days = horizon_days.value_or(cohort.horizon_days);
    c.validate();
    return c;
  }
};

SimSettings parse_simulation(const Json& j) {
  reject_unknown_keys(
      j, {"horizon_days", "batch_size", "batch_window_hours", "seed", "replications", "acceptance"},
      "simulation");
  SimSettings s;
  if (j.contains("horizon_days")) s.horizon_days = j["horizon_days"].get<double>();
  s.base.batch_size = j.value("batch_size", s.base.batch_size);
  s.base.batch_window_hours = j.value("batch_window_hours", s.base.batch_window_hours);
  s.base.seed = j.value("seed", s.base.seed);
  s.base.replications = j.value("replications", s.base.replications);
  if (j.contains("acceptance")) s.base.acceptance = j["acceptance"].get<AcceptancePolicyConfig>();
  SimConfig probe = s.base;
  if (s.horizon_days) probe.horizon_days = *s.horizon_days;
  probe.validate();
  return s;
}

struct Context {
  const Flags& flags;
  Json root;
  fs::path base_dir;
  std::ostream& out;
  const Logger& log;
  bool& configured;  // set once the config is fully validated

  bool has(const char* key) const { return root.contains(key); }

  const Json& section(const char* key) const {
    if (!root.contains(key))
      throw Error(ErrorCode::ConfigError, std::string("config is missing required section '") + key + "'");
    return root[key];
  }

  fs::path output_dir() const {
    if (flags.out) return *flags.out;
    if (root.contains("output_dir")) return resolve(base_dir, root["output_dir"].get<std::string>());
    throw Error(ErrorCode::ConfigError, "no output directory: pass --out or set output_dir");
  }

  CohortSource cohort() const { return parse_cohort_source(section("cohort"), base_dir, "cohort"); }

  ModelSources models() const {
    return has("models") ? parse_model_sources(root["models"], base_dir) : ModelSources{};
  }

  SimSettings simulation() const {
    SimSettings s = has("simulation") ? parse_simulation(root["simulation"]) : SimSettings{};
    if (flags.seed) s.base.seed = *flags.seed;
    return s;
  }

  PolicySpec policy() const { return section("policy").get<PolicySpec>(); }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return f;
}

// ---- gen-cohort -------------------------------------------------------------

int cmd_gen_cohort(Context& ctx) {
  const CohortSource src = ctx.cohort();
  if (!src.generate) throw Error(ErrorCode::ConfigError, "gen-cohort needs cohort.generate");
  CohortConfig cfg = *src.generate;
  if (ctx.flags.seed) cfg.seed = *ctx.flags.seed;
  const fs::path dir = ctx.output_dir();
  ctx.configured = true;

  const Cohort cohort = generate(cfg);
  ensure_dir(dir);
  save_cohort_dir(cohort, dir);
  ctx.log.info("wrote " + std::to_string(cohort.patients().size()) + " patients and " +
               std::to_string(cohort.donors().size()) + " donors to " + dir.string());
  ctx.out << "patients=" << cohort.patients().size() << " donors=" << cohort.donors().size()
          << " events=" << cohort.events.size() << '\n';
  return kExitOk;
}

// ---- fit --------------------------------------------------------------------

struct FitSettings {
  std::string model;
  std::uint64_t seed = 0;
  double holdout_fraction = 0.3;
  FitOptions cox;
  LogisticFitOptions logistic;
  std::size_t n_pairs = 5000;
  double follow_up_days = 3652.5;
};

FitSettings parse_fit(const Context& ctx) {
  FitSettings s;
  if (ctx.has("fit")) {
    const Json& j = ctx.root["fit"];
    reject_unknown_keys(j,
                        {"model", "seed", "holdout_fraction", "ridge_penalty", "max_newton_iters",
                         "tolerance", "l2_penalty", "logistic_iters", "logistic_step", "n_pairs",
                         "follow_up_days"},
                        "fit");
    s.model = j.value("model", s.model);
    s.seed = j.value("seed", s.seed);
    s.holdout_fraction = j.value("holdout_fraction", s.holdout_fraction);
    s.cox.ridge_penalty = j.value("ridge_penalty", s.cox.ridge_penalty);
    s.cox.max_newton_iters = j.value("max_newton_iters", s.cox.max_newton_iters);
    s.cox.tolerance = j.value("tolerance", s.cox.tolerance);
    s.logistic.l2_penalty = j.value("l2_penalty", s.logistic.l2_penalty);
    s.logistic.iters = j.value("logistic_iters", s.logistic.iters);
    s.logistic.step = j.value("logistic_step", s.logistic.step);
    s.n_pairs = j.value("n_pairs", s.n_pairs);
    s.follow_up_days = j.value("follow_up_days", s.follow_up_days);
  }
  if (ctx.flags.model) s.model = *ctx.flags.model;
  if (ctx.flags.seed) s.seed = *ctx.flags.seed;
  if (s.model != "graft" && s.model != "waitlist" && s.model != "acceptance")
    throw Error(ErrorCode::ConfigError,
                "model kind must be graft, waitlist or acceptance (got '" + s.model + "')");
  if (!(s.holdout_fraction > 0.0 && s.holdout_fraction < 1.0))
    throw Error(ErrorCode::ConfigError, "holdout_fraction must lie in (0, 1)");
  if (s.cox.ridge_penalty < 0.0 || s.logistic.l2_penalty < 0.0)
    throw Error(ErrorCode::ConfigError, "penalties must be non-negative");
  if (s.n_pairs < 2 || !(s.follow_up_days > 0.0))
    throw Error(ErrorCode::ConfigError, "n_pairs must be at least 2 and follow_up_days positive");
  return s;
}

// Seeded permutation split into (train, holdout) index lists.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split(std::size_t n, double holdout,
                                                                    std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  auto n_hold = static_cast<std::size_t>(std::llround(holdout * static_cast<double>(n)));
  n_hold = std::clamp<std::size_t>(n_hold, 1, n - 1);
  std::vector<std::size_t> hold(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_hold), idx.end());
  std::sort(hold.begin(), hold.end());
  std::sort(train.begin(), train.end());
  return {train, hold};
}

template <typename T>
std::vector<T> pick(const std::vector<T>& all, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

int cmd_fit(Context& ctx) {
  const CohortSource src = ctx.cohort();
  const FitSettings s = parse_fit(ctx);
  const fs::path dir = ctx.output_dir();
  ctx.configured = true;

  const Cohort cohort = src.load();
  Json model_json;
  Json metrics{{"model", s.model}, {"seed", s.seed}, {"holdout_fraction", s.holdout_fraction}};

  if (s.model == "acceptance") {
    const LabeledPairs data = acceptance_training_data(cohort, s.n_pairs, s.seed);
    const auto [train, hold] = split(data.labels.size(), s.holdout_fraction, s.seed);
    const auto rows = [](const std::vector<std::size_t>& v) {
      return std::vector<Eigen::Index>(v.begin(), v.end());
    };
    const Matrix x_train = data.features(rows(train), Eigen::all);
    const Matrix x_hold = data.features(rows(hold), Eigen::all);
    AcceptanceModel model = fit_logistic(x_train, pick(data.labels, train), s.logistic);
    model.schema_hash = cohort.schema.hash();
    std::vector<double> scores;
    for (Eigen::Index r = 0; r < x_hold.rows(); ++r) scores.push_back(model.predict(x_hold.row(r).transpose()));
    metrics["auroc"] = auroc(scores, pick(data.labels, hold));
    metrics["n_train"] = train.size();
    metrics["n_holdout"] = hold.size();
    model_json = model;
  } else {
    const std::vector<SurvivalSample> data =
        s.model == "waitlist" ? waitlist_training_data(cohort)
                              : graft_training_data(cohort, s.n_pairs, s.follow_up_days, s.seed);
    const auto [train, hold] = split(data.size(), s.holdout_fraction, s.seed);
    const auto train_data = pick(data, train);
    const auto hold_data = pick(data, hold);
    FitReport report = fit_cox_report(train_data, s.cox);
    report.model.schema_hash = cohort.schema.hash();
    std::vector<double> scores;
    for (const auto& smp : hold_data) scores.push_back(report.model.linear_predictor(smp.covariates));
    metrics["c_index"] = concordance_index(scores, hold_data);
    metrics["n_train"] = train.size();
    metrics["n_holdout"] = hold.size();
    metrics["newton_iterations"] = report.iterations;
    model_json = report.model;
  }

  ensure_dir(dir);
  write_json_file(dir / (s.model + "_model.json"), model_json);
  write_json_file(dir / (s.model + "_metrics.json"), metrics);
  ctx.out << metrics.dump() << '\n';
  return kExitOk;
}

// ---- simulate / compare / sweep -----------------------------------------------

Json summary_json(const std::vector<SimResult>& runs, const SimConfig& config) {
  std::vector<double> totals;
  double transplants = 0, deaths = 0, discarded = 0, offers = 0;
  for (const auto& r : runs) {
    totals.push_back(r.total_life_years);
    transplants += static_cast<double>(r.transplants.size());
    deaths += static_cast<double>(r.waitlist_deaths);
    discarded += static_cast<double>(r.discarded_donors);
    offers += static_cast<double>(r.offers_made);
  }
  const double n = static_cast<double>(runs.size());
  const ReplicationSummary s = summarize(totals);
  return Json{{"policy", config.policy},
              {"acceptance", config.acceptance},
              {"horizon_days", config.horizon_days},
              {"batch_size", config.batch_size},
              {"batch_window_hours", config.batch_window_hours},
              {"seed", config.seed},
              {"replications", runs.size()},
              {"mean_total_life_years", s.mean},
              {"std_total_life_years", s.std_dev},
              {"totals", s.totals},
              {"mean_transplants", transplants / n},
              {"mean_waitlist_deaths", deaths / n},
              {"mean_discarded_donors", discarded / n},
              {"mean_offers_made", offers / n}};
}

int cmd_simulate(Context& ctx) {
  const CohortSource src = ctx.cohort();
  const ModelSources model_src = ctx.models();
  const SimSettings sim = ctx.simulation();
  const PolicySpec policy = ctx.policy();
  const fs::path dir = ctx.output_dir();
  ctx.configured = true;

  const Cohort cohort = src.load();
  const ModelSet models = resolve_models(model_src, cohort);
  const SimConfig config = sim.for_cohort(policy, cohort);
  ctx.log.info("simulating " + std::to_string(config.replications) + " replication(s)");
  const auto runs = run_replications(config, cohort, models, ctx.flags.threads);

  ensure_dir(dir);
  const Json summary = summary_json(runs, config);
  write_json_file(dir / "summary.json", summary);

  auto reps = open_out(dir / "replications.csv");
  reps << "seed,total_life_years,transplants,discarded_donors,waitlist_deaths,offers_made,offers_rejected\n";
  auto tx = open_out(dir / "transplants.csv");
  tx << "seed,donor_id,patient_id,time_days,delta_years\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const SimResult& r = runs[i];
    const std::uint64_t seed = config.seed + i;
    reps << seed << ',' << fmt(r.total_life_years) << ',' << r.transplants.size() << ','
         << r.discarded_donors << ',' << r.waitlist_deaths << ',' << r.offers_made << ','
         << r.offers_rejected << '\n';
    for (const auto& t : r.transplants)
      tx << seed << ',' << t.donor_id << ',' << t.patient_id << ',' << fmt(t.time_days) << ','
         << fmt(t.delta_years) << '\n';
  }
  ctx.out << "mean_total_life_years=" << fmt(summary["mean_total_life_years"].get<double>())
          << " std=" << fmt(summary["std_total_life_years"].get<double>()) << '\n';
  return kExitOk;
}

int cmd_compare(Context& ctx) {
  const CohortSource src = ctx.cohort();
  const ModelSources model_src = ctx.models();
  const SimSettings sim = ctx.simulation();
  const Json& list = ctx.section("policies");
  if (!list.is_array() || list.empty())
    throw Error(ErrorCode::ConfigError, "policies must be a non-empty array");
  std::vector<std::pair<std::string, PolicySpec>> policies;
  std::set<std::string> names;
  for (const auto& entry : list) {
    if (!entry.is_object() || !entry.contains("name"))
      throw Error(ErrorCode::ConfigError, "every policies entry needs a name");
    Json spec = entry;
    const auto name = spec["name"].get<std::string>();
    if (!names.insert(name).second) throw Error(ErrorCode::ConfigError, "duplicate policy name '" + name + "'");
    spec.erase("name");
    policies.emplace_back(name, spec.get<PolicySpec>());
  }
  const fs::path dir = ctx.output_dir();
  ctx.configured = true;

  const Cohort cohort = src.load();
  const ModelSet models = resolve_models(model_src, cohort);
  ensure_dir(dir);
  auto csv = open_out(dir / "compare.csv");
  csv << "policy,mean,std\n";
  for (const auto& [name, spec] : policies) {
    const SimConfig config = sim.for_cohort(spec, cohort);
    ctx.log.info("policy " + name);
    const ReplicationSummary s = replicate(config, cohort, models, ctx.flags.threads);
    csv << name << ',' << fmt(s.mean) << ',' << fmt(s.std_dev) << '\n';
    ctx.out << name << ' ' << fmt(s.mean) << ' ' << fmt(s.std_dev) << '\n';
  }
  return kExitOk;
}

enum class SweepParam { Alpha, MaxDistance, BatchB };

int cmd_sweep(Context& ctx) {
  const CohortSource src = ctx.cohort();
  const ModelSources model_src = ctx.models();
  const SimSettings sim = ctx.simulation();
  const PolicySpec policy = ctx.policy();
  const Json& j = ctx.section("sweep");
  reject_unknown_keys(j, {"parameter", "values"}, "sweep");
  const auto name = j.at("parameter").get<std::string>();
  SweepParam param;
  if (name == "alpha")
    param = SweepParam::Alpha;
  else if (name == "max_distance")
    param = SweepParam::MaxDistance;
  else if (name == "batch_B")
    param = SweepParam::BatchB;
  else
    throw Error(ErrorCode::ConfigError, "sweep parameter must be alpha, max_distance or batch_B");
  const Json& values = j.at("values");
  if (!values.is_array() || values.empty())
    throw Error(ErrorCode::ConfigError, "sweep values must be a non-empty array");

  // Each value becomes a (label, mutation) pair, checked before any run.
  struct Point {
    std::string label;
    SimSettings settings;
    PolicySpec policy;
  };
  std::vector<Point> points;
  for (const auto& v : values) {
    Point p{v.is_string() ? v.get<std::string>() : v.dump(), sim, policy};
    switch (param) {
      case SweepParam::Alpha:
        p.settings.base.acceptance.exponent_alpha = v.get<double>();
        p.settings.base.acceptance.validate();
        break;
      case SweepParam::MaxDistance:
        if (v.is_string() && v.get<std::string>() == "unbounded")
          p.policy.max_distance_nm.reset();
        else
          p.policy.max_distance_nm = v.get<double>();
        p.policy.validate();
        break;
      case SweepParam::BatchB:
        if (!v.is_number_integer() || v.get<int>() < 1)
          throw Error(ErrorCode::ConfigError, "batch_B values must be positive integers");
        p.settings.base.batch_size = v.get<int>();
        break;
    }
    points.push_back(std::move(p));
  }
  const fs::path dir = ctx.output_dir();
  ctx.configured = true;

  const Cohort cohort = src.load();
  const ModelSet models = resolve_models(model_src, cohort);
  ensure_dir(dir);
  auto csv = open_out(dir / "sweep.csv");
  const bool deltas = param == SweepParam::BatchB;
  csv << name << ",mean,std" << (deltas ? ",delta_vs_first,relative_delta_vs_first" : "") << '\n';
  std::optional<double> first;
  for (const auto& p : points) {
    const SimConfig config = p.settings.for_cohort(p.policy, cohort);
    ctx.log.info(name + " = " + p.label);
    const ReplicationSummary s = replicate(config, cohort, models, ctx.flags.threads);
    if (!first) first = s.mean;
    csv << p.label << ',' << fmt(s.mean) << ',' << fmt(s.std_dev);
    if (deltas) {
      const double d = s.mean - *first;
      csv << ',' << fmt(d) << ',' << (*first != 0.0 ? fmt(d / *first) : std::string("nan"));
    }
    csv << '\n';
    ctx.out << p.label << ' ' << fmt(s.mean) << ' ' << fmt(s.std_dev) << '\n';
  }
  return kExitOk;
}

// ---- tune -------------------------------------------------------------------

int cmd_tune(Context& ctx) {
  const Json& j = ctx.section("tune");
  reject_unknown_keys(j, {"budget", "search_box", "local_refine", "seed", "training", "evaluation"}, "tune");
  TuneConfig cfg;
  cfg.budget_evals = j.value("budget", cfg.budget_evals);
  cfg.local_refine = j.value("local_refine", cfg.local_refine);
  cfg.seed = j.value("seed", cfg.seed);
  if (ctx.flags.seed) cfg.seed = *ctx.flags.seed;
  if (j.contains("search_box")) {
    const Json& box = j["search_box"];
    if (box.is_array() && box.size() == 2 && box[0].is_number()) {
      const auto b = box.get<std::pair<double, double>>();
      cfg.search_box.fill(b);
    } else {
      const auto b = box.get<std::vector<std::pair<double, double>>>();
      if (b.size() != 4) throw Error(ErrorCode::ConfigError, "search_box needs one [lo, hi] per blood type");
      std::copy(b.begin(), b.end(), cfg.search_box.begin());
    }
  }
  cfg.validate();

  auto sources = [&](const char* key) {
    std::vector<CohortSource> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_array()) throw Error(ErrorCode::ConfigError, std::string("tune.") + key + " must be an array");
    for (const auto& s : j[key]) out.push_back(parse_cohort_source(s, ctx.base_dir, std::string("tune.") + key));
    return out;
  };
  const auto training = sources("training");
  const auto evaluation = sources("evaluation");
  if (training.empty()) throw Error(ErrorCode::ConfigError, "tune.training needs at least one cohort");
  for (const auto& t : training)
    for (const auto& e : evaluation)
      if (t.identity() == e.identity())
        throw Error(ErrorCode::ConfigError, "training and evaluation cohorts must be distinct");

  PolicySpec policy;
  policy.kind = PolicyKind::Potential;
  if (ctx.has("policy")) policy = ctx.policy();
  if (policy.kind != PolicyKind::Potential)
    throw Error(ErrorCode::ConfigError, "tune needs a potential policy");
  const ModelSources model_src = ctx.models();
  const fs::path dir = ctx.output_dir();
  ctx.configured = true;

  for (const auto& s : training) cfg.training_cohorts.push_back(s.load());
  std::vector<Cohort> held_out;
  for (const auto& s : evaluation) held_out.push_back(s.load());
  for (const auto& t : cfg.training_cohorts)
    for (const auto& e : held_out)
      if (t == e) throw Error(ErrorCode::ConfigError, "a training cohort is identical to an evaluation cohort");

  const ModelSet models = resolve_models(model_src, cfg.training_cohorts.front());
  ctx.log.info("tuning with budget " + std::to_string(cfg.budget_evals));
  const TuneResult result = tune_potentials(cfg, models, policy);

  Json doc = result;
  if (!held_out.empty()) {
    const double tuned = evaluate_theta(result.best_theta, held_out, models, policy);
    const double myopic = evaluate_theta(PotentialVector{}, held_out, models, policy);
    doc["evaluation"] = Json{{"cohorts", held_out.size()}, {"tuned", tuned}, {"myopic", myopic}};
  }
  ensure_dir(dir);
  write_json_file(dir / "tune.json", doc);
  ctx.out << "best_score=" << fmt(result.best_score) << " theta=" << Json(result.best_theta).dump() << '\n';
  return kExitOk;
}

void report_error(std::ostream& err, std::string_view code, std::string_view message, int exit_code) {
  err << Json{{"error", code}, {"message", message}, {"exit_code", exit_code}}.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Flags flags;
  CLI::App app{"Heart allocation policy simulator", "allocsim"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen-cohort", "generate a synthetic cohort directory"},
      {"fit", "fit a graft, waitlist or acceptance model"},
      {"simulate", "simulate one policy over replications"},
      {"compare", "compare several policies on the same seeds"},
      {"sweep", "sweep alpha, max_distance or batch_B"},
      {"tune", "tune blood-type potentials"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory (overrides output_dir)");
    sub->add_option("--seed", flags.seed, "seed override");
    sub->add_option("--threads", flags.threads, "worker cap for replications")->check(CLI::PositiveNumber);
    if (name == "fit") sub->add_option("--model", flags.model, "graft, waitlist or acceptance");
    sub->callback([&flags, n = name] { flags.command = n; });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error(err, "UsageError", e.what(), kExitConfig);
    return kExitConfig;
  }

  bool configured = false;
  try {
    const Logger log(err, log_level_from_env());
    Context ctx{flags, read_json_file(flags.config), flags.config.parent_path(), out, log, configured};
    reject_unknown_keys(ctx.root,
                        {"version", "cohort", "models", "simulation", "policy", "policies", "sweep", "tune",
                         "fit", "output_dir"},
                        "config");
    if (!ctx.root.contains("version") || ctx.root["version"] != kConfigVersion)
      throw Error(ErrorCode::ConfigError, "config version must be " + std::to_string(kConfigVersion));
    log.debug("command " + flags.command + " with " + flags.config.string());

    if (flags.command == "gen-cohort") return cmd_gen_cohort(ctx);
    if (flags.command == "fit") return cmd_fit(ctx);
    if (flags.command == "simulate") return cmd_simulate(ctx);
    if (flags.command == "compare") return cmd_compare(ctx);
    if (flags.command == "sweep") return cmd_sweep(ctx);
    return cmd_tune(ctx);
  } catch (const Error& e) {
    const int code = (!configured || e.code() == ErrorCode::ConfigError) ? kExitConfig : kExitRuntime;
    report_error(err, to_string(e.code()), e.what(), code);
    return code;
  } catch (const Json::exception& e) {
    const int code = configured ? kExitRuntime : kExitConfig;
    report_error(err, configured ? "DataError" : "ConfigError", e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error(err, "InternalError", e.what(), kExitRuntime);
    return kExitRuntime;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace allocsim
