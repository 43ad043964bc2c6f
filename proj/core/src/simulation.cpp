#include "prevcox/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "prevcox/censoring_weights.hpp"
#include "prevcox/errors.hpp"
#include "prevcox/estimators.hpp"
#include "prevcox/serialize.hpp"

namespace prevcox {

namespace {

constexpr std::uint64_t kGenTag = 0x67656e00ULL;    // dataset generation
constexpr std::uint64_t kPplTag = 0x70706cULL;      // risk-set sampling
constexpr std::uint64_t kCalibTag = 0xca11bULL;     // censoring calibration

void parallel_for(int jobs, int count, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (std::thread& th : workers) th.join();
}

}  // namespace

const char* baseline_shape_name(BaselineShape s) {
  switch (s) {
    case BaselineShape::Constant: return "h1";
    case BaselineShape::Linear: return "h2";
    case BaselineShape::Quadratic: return "h3";
  }
  return "h1";
}

BaselineShape baseline_shape_from_name(const std::string& name) {
  if (name == "h1") return BaselineShape::Constant;
  if (name == "h2") return BaselineShape::Linear;
  if (name == "h3") return BaselineShape::Quadratic;
  throw std::invalid_argument("unknown hazard name: " + name + " (expected h1, h2 or h3)");
}

void ScenarioSpec::validate() const {
  if (!(censoring_target >= 0.0 && censoring_target <= 0.9)) {
    throw std::invalid_argument("censoring_target must lie in [0, 0.9]");
  }
  if (n < 20) throw std::invalid_argument("n must be at least 20");
  if (n_replicates < 1) throw std::invalid_argument("n_replicates must be at least 1");
  if (ppl_replications < 1) throw std::invalid_argument("ppl_replications must be at least 1");
}

double invert_cumulative_hazard(BaselineShape shape, double e, double lp) {
  const double scaled = e / std::exp(lp);
  switch (shape) {
    case BaselineShape::Constant: return scaled / 2.0;      // H(t) = 2t
    case BaselineShape::Linear: return std::sqrt(scaled);   // H(t) = t^2
    case BaselineShape::Quadratic: return std::cbrt(scaled);// H(t) = t^3
  }
  return scaled / 2.0;
}

namespace {

struct Draw {
  double a, y, z1, z2;
  int delta;
};

// One accepted subject; the acceptance loop embodies left truncation:
// only histories with T > A are observable.
Draw draw_subject(BaselineShape shape, const Eigen::Vector2d& beta, double theta_c,
                  RngStream& rng, std::uint64_t& attempts, std::uint64_t& window_accepted) {
  for (;;) {
    ++attempts;
    if (attempts % 1000000 == 0) {
      if (window_accepted < 100) {
        throw AcceptanceStall("generate_dataset: acceptance rate below 1e-4 over 1e6 draws");
      }
      window_accepted = 0;
    }
    const double z1 = rng.normal();
    const double z2 = rng.uniform() < 0.5 ? 1.0 : 0.0;
    const double a = rng.exponential();
    const double e = rng.exponential();
    const double lp = beta[0] * z1 + beta[1] * z2;
    const double t = invert_cumulative_hazard(shape, e, lp);
    if (!(t > a)) continue;
    double y;
    int delta;
    if (std::isinf(theta_c)) {
      y = t;
      delta = 1;
    } else {
      const double c = theta_c * rng.uniform();
      y = std::min(t, a + c);
      delta = t <= a + c ? 1 : 0;
      if (!(y > a)) continue;  // measure-zero c == 0 guard
    }
    ++window_accepted;
    return {a, y, z1, z2, delta};
  }
}

}  // namespace

std::pair<Dataset, TruncationModel> generate_dataset(const ScenarioSpec& spec, RngStream& rng,
                                                     double theta_c) {
  std::vector<SubjectRecord> records;
  records.reserve(static_cast<std::size_t>(spec.n));
  std::uint64_t attempts = 0;
  std::uint64_t window_accepted = 0;
  for (int i = 0; i < spec.n; ++i) {
    const Draw dr =
        draw_subject(spec.hazard, spec.beta_true, theta_c, rng, attempts, window_accepted);
    SubjectRecord r;
    r.a = dr.a;
    r.y = dr.y;
    r.delta = dr.delta;
    r.z = Eigen::Vector2d(dr.z1, dr.z2);
    records.push_back(std::move(r));
  }
  return {Dataset(std::move(records)), TruncationModel::exponential(1.0)};
}

namespace {

double censored_fraction_probe(BaselineShape shape, const Eigen::Vector2d& beta, double theta_c,
                               int n_probe, RngStream rng) {
  std::uint64_t attempts = 0;
  std::uint64_t window_accepted = 0;
  int censored = 0;
  for (int i = 0; i < n_probe; ++i) {
    const Draw dr = draw_subject(shape, beta, theta_c, rng, attempts, window_accepted);
    censored += 1 - dr.delta;
  }
  return static_cast<double>(censored) / static_cast<double>(n_probe);
}

}  // namespace

double calibrate_censoring(const ScenarioSpec& spec, double target_rate) {
  if (target_rate <= 0.0) return std::numeric_limits<double>::infinity();
  if (target_rate > 0.9) throw std::invalid_argument("target censoring rate must be <= 0.9");

  static std::mutex cache_mutex;
  static std::map<std::pair<int, long>, double> cache;
  const std::pair<int, long> key{static_cast<int>(spec.hazard),
                                 std::lround(target_rate * 10000.0)};
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }

  constexpr int kProbe = 100000;
  constexpr double kTol = 0.005;
  constexpr int kMaxSteps = 60;
  int step = 0;
  auto probe = [&](double theta) {
    const std::uint64_t seed =
        mix64(kCalibTag ^ mix64(static_cast<std::uint64_t>(key.first) * 1000003ULL +
                                static_cast<std::uint64_t>(key.second)) ^
              mix64(static_cast<std::uint64_t>(step)));
    return censored_fraction_probe(spec.hazard, spec.beta_true, theta, kProbe, RngStream(seed));
  };

  // censoring decreases as theta grows; expand until the target is bracketed
  double lo = 1e-3;
  double hi = 1.0;
  while (step < kMaxSteps) {
    ++step;
    if (probe(hi) < target_rate) break;
    hi *= 4.0;
    if (hi > 1e12) throw CalibrationFailure("calibrate_censoring: cannot bracket target");
  }
  double theta = hi;
  while (step < kMaxSteps) {
    ++step;
    theta = 0.5 * (lo + hi);
    const double achieved = probe(theta);
    if (std::abs(achieved - target_rate) < kTol) {
      std::lock_guard<std::mutex> lock(cache_mutex);
      cache[key] = theta;
      return theta;
    }
    if (achieved > target_rate) {
      lo = theta;  // too much censoring: grow theta
    } else {
      hi = theta;
    }
  }
  throw CalibrationFailure("calibrate_censoring: no convergence in 60 bisection steps");
}

namespace {

MethodOutcome outcome_from_fit(const FitResult& fit) {
  MethodOutcome o;
  o.converged = fit.converged;
  o.beta = fit.beta;
  o.se = fit.standard_errors;
  o.iterations = fit.iterations;
  o.weight_floor_hits = fit.warnings.weight_floor_hits;
  o.dropped_replications = fit.warnings.dropped_replications;
  return o;
}

MethodOutcome outcome_from_error(const std::exception& e) {
  MethodOutcome o;
  o.converged = false;
  o.error = e.what();
  return o;
}

ReplicateRecord run_replicate(const ScenarioSpec& spec, double theta_c, int index) {
  ReplicateRecord rec;
  rec.index = index;
  RngStream gen_rng(mix64(spec.seed ^ mix64(kGenTag + static_cast<std::uint64_t>(index))));
  try {
    auto [dataset, truncation] = generate_dataset(spec, gen_rng, theta_c);
    int censored = 0;
    for (const SubjectRecord& r : dataset.records()) censored += 1 - r.delta;
    rec.censored_fraction =
        static_cast<double>(censored) / static_cast<double>(dataset.size());

    const CensoringWeights weights(dataset, truncation, 1e-12, spec.weight_form);
    const StreamKey ppl_key =
        StreamKey{spec.seed}.child(kPplTag).child(static_cast<std::uint64_t>(index));
    try {
      rec.ppl = outcome_from_fit(fit_ppl(dataset, weights, spec.ppl_replications, ppl_key));
    } catch (const std::exception& e) {
      rec.ppl = outcome_from_error(e);
    }
    try {
      rec.wee = outcome_from_fit(fit_wee(dataset, weights));
    } catch (const std::exception& e) {
      rec.wee = outcome_from_error(e);
    }
    try {
      rec.pl = outcome_from_fit(fit_reference_pl(dataset));
    } catch (const std::exception& e) {
      rec.pl = outcome_from_error(e);
    }
  } catch (const std::exception& e) {
    rec.ppl = rec.wee = rec.pl = outcome_from_error(e);
  }
  return rec;
}

MethodSummary summarize(const std::string& name, const ScenarioSpec& spec,
                        const std::vector<ReplicateRecord>& records,
                        const MethodOutcome ReplicateRecord::*member) {
  const int p = 2;
  MethodSummary s;
  s.method = name;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd ase = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd cover = Eigen::VectorXd::Zero(p);
  int good = 0;
  for (const ReplicateRecord& r : records) {
    const MethodOutcome& o = r.*member;
    if (!o.converged) {
      ++s.nonconverged;
      continue;
    }
    ++good;
    mean += o.beta;
    ase += o.se;
    for (int k = 0; k < p; ++k) {
      if (std::abs(o.beta[k] - spec.beta_true[k]) <= 1.96 * o.se[k]) cover[k] += 1.0;
    }
  }
  if (good == 0) {
    s.bias = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    s.ase = s.bias;
    s.coverage = s.bias;
    return s;
  }
  mean /= good;
  s.bias = mean - Eigen::VectorXd(spec.beta_true);
  s.ase = ase / good;
  s.coverage = cover / good;
  if (good >= 2) {
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(p);
    for (const ReplicateRecord& r : records) {
      const MethodOutcome& o = r.*member;
      if (o.converged) ss += (o.beta - mean).cwiseAbs2();
    }
    s.esd = (ss / (good - 1)).cwiseSqrt();
  }
  return s;
}

}  // namespace

MonteCarloReport aggregate(const ScenarioSpec& spec, double theta_c,
                           const std::vector<ReplicateRecord>& records) {
  MonteCarloReport report;
  report.spec = spec;
  report.theta_c = theta_c;
  report.completed_replicates = static_cast<int>(records.size());
  double cens = 0.0;
  for (const ReplicateRecord& r : records) cens += r.censored_fraction;
  report.achieved_censoring = records.empty() ? 0.0 : cens / static_cast<double>(records.size());
  report.methods.push_back(summarize("ppl", spec, records, &ReplicateRecord::ppl));
  report.methods.push_back(summarize("wee", spec, records, &ReplicateRecord::wee));
  report.methods.push_back(summarize("pl", spec, records, &ReplicateRecord::pl));
  return report;
}

const MethodSummary& MonteCarloReport::method(const std::string& name) const {
  for (const MethodSummary& m : methods) {
    if (m.method == name) return m;
  }
  throw std::out_of_range("no summary for method: " + name);
}

MonteCarloReport run_study(const ScenarioSpec& spec, const StudyOptions& options) {
  namespace fs = std::filesystem;
  spec.validate();
  const double theta_c = calibrate_censoring(spec, spec.censoring_target);

  const int total = spec.n_replicates;
  std::vector<ReplicateRecord> records(static_cast<std::size_t>(total));
  std::vector<bool> done(static_cast<std::size_t>(total), false);

  const bool persist = !options.out_dir.empty();
  fs::path replicates_path;
  if (persist) {
    fs::create_directories(options.out_dir);
    replicates_path = fs::path(options.out_dir) / "replicates.jsonl";
    if (options.resume && fs::exists(replicates_path)) {
      std::ifstream in(replicates_path);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty() || is_study_meta_line(line)) continue;
        try {
          ReplicateRecord rec = replicate_from_line(line);
          if (rec.index >= 0 && rec.index < total && !done[static_cast<std::size_t>(rec.index)]) {
            records[static_cast<std::size_t>(rec.index)] = std::move(rec);
            done[static_cast<std::size_t>(rec.index)] = true;
          }
        } catch (const std::exception&) {
          // unparseable line: recompute that replicate
        }
      }
    }
  }

  std::mutex io_mutex;
  std::ofstream append_log;
  if (persist) {
    const bool fresh = !fs::exists(replicates_path) || fs::file_size(replicates_path) == 0;
    append_log.open(replicates_path, std::ios::app);
    if (fresh) append_log << study_meta_to_line(spec, theta_c) << '\n';
    append_log.flush();
  }

  std::vector<int> todo;
  for (int i = 0; i < total; ++i) {
    if (!done[static_cast<std::size_t>(i)]) todo.push_back(i);
  }
  parallel_for(options.jobs, static_cast<int>(todo.size()), [&](int k) {
    const int index = todo[static_cast<std::size_t>(k)];
    ReplicateRecord rec = run_replicate(spec, theta_c, index);
    if (persist) {
      const std::string line = replicate_to_line(rec);
      std::lock_guard<std::mutex> lock(io_mutex);
      append_log << line << '\n';
      append_log.flush();
    }
    records[static_cast<std::size_t>(index)] = std::move(rec);
  });
  if (persist) append_log.close();

  MonteCarloReport report = aggregate(spec, theta_c, records);

  if (persist) {
    // canonical rewrite in replicate order so the final file does not
    // depend on completion order or worker count
    const fs::path tmp = replicates_path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << study_meta_to_line(spec, theta_c) << '\n';
      for (const ReplicateRecord& rec : records) out << replicate_to_line(rec) << '\n';
    }
    fs::rename(tmp, replicates_path);
    std::ofstream(fs::path(options.out_dir) / "report.json", std::ios::trunc)
        << report_to_json(report) << '\n';
    std::ofstream(fs::path(options.out_dir) / "report.tsv", std::ios::trunc)
        << report_to_tsv(report);
  }
  return report;
}

MonteCarloReport aggregate_replicates(const std::string& replicates_path) {
  std::ifstream in(replicates_path);
  if (!in) throw std::runtime_error("cannot open " + replicates_path);
  std::string line;
  bool have_meta = false;
  ScenarioSpec spec;
  double theta_c = 0.0;
  std::vector<ReplicateRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (is_study_meta_line(line)) {
      std::tie(spec, theta_c) = study_meta_from_line(line);
      have_meta = true;
    } else {
      records.push_back(replicate_from_line(line));
    }
  }
  if (!have_meta) {
    throw std::runtime_error("replicate log is missing its meta line: " + replicates_path);
  }
  std::sort(records.begin(), records.end(),
            [](const ReplicateRecord& a, const ReplicateRecord& b) { return a.index < b.index; });
  return aggregate(spec, theta_c, records);
}

}  // namespace prevcox
