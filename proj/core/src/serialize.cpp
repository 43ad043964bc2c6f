#include "prevcox/serialize.hpp"

#include <cinttypes>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace prevcox {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return json{{"p", m.rows()}, {"data", data}};  // row-major
}

json outcome_to_json(const MethodOutcome& o) {
  json j;
  j["converged"] = o.converged;
  if (o.converged) {
    j["beta"] = vec_to_json(o.beta);
    j["se"] = vec_to_json(o.se);
    j["iterations"] = o.iterations;
    if (o.weight_floor_hits > 0) j["weight_floor_hits"] = o.weight_floor_hits;
    if (o.dropped_replications > 0) j["dropped_replications"] = o.dropped_replications;
  } else {
    j["error"] = o.error;
  }
  return j;
}

MethodOutcome outcome_from_json(const json& j) {
  MethodOutcome o;
  o.converged = j.at("converged").get<bool>();
  if (o.converged) {
    o.beta = vec_from_json(j.at("beta"));
    o.se = vec_from_json(j.at("se"));
    o.iterations = j.value("iterations", 0);
    o.weight_floor_hits = j.value("weight_floor_hits", std::uint64_t{0});
    o.dropped_replications = j.value("dropped_replications", 0);
  } else {
    o.error = j.value("error", "");
  }
  return o;
}

json spec_to_json(const ScenarioSpec& spec) {
  return json{{"hazard", baseline_shape_name(spec.hazard)},
              {"beta_true", {spec.beta_true[0], spec.beta_true[1]}},
              {"n", spec.n},
              {"censoring_target", spec.censoring_target},
              {"n_replicates", spec.n_replicates},
              {"seed", spec.seed},
              {"ppl_replications", spec.ppl_replications},
              {"weight_form",
               spec.weight_form == WeightForm::Convolution ? "convolution" : "separable"}};
}

ScenarioSpec spec_from_json(const json& j) {
  ScenarioSpec spec;
  spec.hazard = baseline_shape_from_name(j.at("hazard").get<std::string>());
  spec.beta_true[0] = j.at("beta_true")[0].get<double>();
  spec.beta_true[1] = j.at("beta_true")[1].get<double>();
  spec.n = j.at("n").get<int>();
  spec.censoring_target = j.at("censoring_target").get<double>();
  spec.n_replicates = j.at("n_replicates").get<int>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.ppl_replications = j.at("ppl_replications").get<int>();
  spec.weight_form = j.value("weight_form", std::string("separable")) == "convolution"
                         ? WeightForm::Convolution
                         : WeightForm::Separable;
  return spec;
}

json summary_to_json(const MethodSummary& s) {
  json j;
  j["bias"] = vec_to_json(s.bias);
  j["esd"] = s.esd ? vec_to_json(*s.esd) : json(nullptr);
  j["ase"] = vec_to_json(s.ase);
  j["coverage"] = vec_to_json(s.coverage);
  j["nonconverged"] = s.nonconverged;
  return j;
}

void tsv_pair(std::ostringstream& out, const Eigen::VectorXd& v) {
  char buf[64];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.4f", v[i]);
    out << '\t' << buf;
  }
}

}  // namespace

std::string fit_to_json(const FitResult& fit, const BaselineHazard* baseline, int indent) {
  json j;
  j["method"] = fit.method;
  j["n"] = fit.n;
  j["converged"] = fit.converged;
  j["beta"] = vec_to_json(fit.beta);
  j["se"] = vec_to_json(fit.standard_errors);
  j["covariance"] = matrix_to_json(fit.covariance);
  j["iterations"] = fit.iterations;
  j["score_norm"] = fit.score_norm;
  j["replications"] = fit.replications;
  if (fit.replication_betas.size() > 1) {
    json reps = json::array();
    for (const Eigen::VectorXd& b : fit.replication_betas) reps.push_back(vec_to_json(b));
    j["replication_betas"] = reps;
  }
  j["warnings"] = json{{"weight_floor_hits", fit.warnings.weight_floor_hits},
                       {"dropped_replications", fit.warnings.dropped_replications},
                       {"ridge_engagements", fit.warnings.ridge_engagements},
                       {"empty_risk_sets", fit.warnings.empty_risk_sets},
                       {"ybar_zero_drops", fit.warnings.ybar_zero_drops}};
  if (baseline != nullptr) {
    j["breslow"] = json{{"times", baseline->times}, {"increments", baseline->increments}};
  }
  return j.dump(indent);
}

std::string report_to_json(const MonteCarloReport& report, int indent) {
  json methods;
  for (const MethodSummary& s : report.methods) methods[s.method] = summary_to_json(s);
  json j{{"spec", spec_to_json(report.spec)},
         {"theta_c", report.theta_c},
         {"achieved_censoring", report.achieved_censoring},
         {"completed_replicates", report.completed_replicates},
         {"methods", methods}};
  return j.dump(indent);
}

std::string report_to_tsv(const MonteCarloReport& report) {
  std::ostringstream out;
  out << "# hazard=" << baseline_shape_name(report.spec.hazard) << " n=" << report.spec.n
      << " censoring_target=" << report.spec.censoring_target
      << " achieved=" << report.achieved_censoring
      << " replicates=" << report.completed_replicates << " L=" << report.spec.ppl_replications
      << " seed=" << report.spec.seed << '\n';
  out << "method\tbias1\tbias2\tesd1\tesd2\tase1\tase2\tcoverage1\tcoverage2\tnonconverged\n";
  for (const MethodSummary& s : report.methods) {
    out << s.method;
    tsv_pair(out, s.bias);
    if (s.esd) {
      tsv_pair(out, *s.esd);
    } else {
      out << "\tnull\tnull";
    }
    tsv_pair(out, s.ase);
    tsv_pair(out, s.coverage);
    out << '\t' << s.nonconverged << '\n';
  }
  return out.str();
}

std::string replicate_to_line(const ReplicateRecord& record) {
  json j{{"index", record.index},
         {"censored_fraction", record.censored_fraction},
         {"methods", json{{"ppl", outcome_to_json(record.ppl)},
                          {"wee", outcome_to_json(record.wee)},
                          {"pl", outcome_to_json(record.pl)}}}};
  return j.dump();
}

ReplicateRecord replicate_from_line(const std::string& line) {
  const json j = json::parse(line);
  ReplicateRecord rec;
  rec.index = j.at("index").get<int>();
  rec.censored_fraction = j.at("censored_fraction").get<double>();
  rec.ppl = outcome_from_json(j.at("methods").at("ppl"));
  rec.wee = outcome_from_json(j.at("methods").at("wee"));
  rec.pl = outcome_from_json(j.at("methods").at("pl"));
  return rec;
}

std::string study_meta_to_line(const ScenarioSpec& spec, double theta_c) {
  json j{{"meta", json{{"spec", spec_to_json(spec)}, {"theta_c", theta_c}}}};
  return j.dump();
}

std::pair<ScenarioSpec, double> study_meta_from_line(const std::string& line) {
  const json j = json::parse(line);
  const json& meta = j.at("meta");
  double theta = meta.at("theta_c").is_null() ? 0.0 : meta.at("theta_c").get<double>();
  return {spec_from_json(meta.at("spec")), theta};
}

bool is_study_meta_line(const std::string& line) {
  return line.find("\"meta\"") != std::string::npos && line.find("\"index\"") == std::string::npos;
}

std::string error_to_json(const std::string& type, const std::string& message, long row,
                          const std::string& column) {
  json e{{"type", type}, {"message", message}};
  if (row >= 0) e["row"] = row;
  if (!column.empty()) e["column"] = column;
  return json{{"error", e}}.dump();
}

}  // namespace prevcox
