#pragma once

#include <string>

#include "prevcox/estimators.hpp"
#include "prevcox/inference.hpp"
#include "prevcox/simulation.hpp"

namespace prevcox {

// JSON renderings used by the CLI and the replicate log. Keys are
// emitted in sorted order and doubles round-trip exactly, so identical
// inputs give byte-identical text.
std::string fit_to_json(const FitResult& fit, const BaselineHazard* baseline = nullptr,
                        int indent = 2);

std::string report_to_json(const MonteCarloReport& report, int indent = 2);
std::string report_to_tsv(const MonteCarloReport& report);

// One replicate per line; a meta line carrying the scenario leads the file.
std::string replicate_to_line(const ReplicateRecord& record);
ReplicateRecord replicate_from_line(const std::string& line);
std::string study_meta_to_line(const ScenarioSpec& spec, double theta_c);
std::pair<ScenarioSpec, double> study_meta_from_line(const std::string& line);
bool is_study_meta_line(const std::string& line);

std::string error_to_json(const std::string& type, const std::string& message,
                          long row = -1, const std::string& column = {});

}  // namespace prevcox
