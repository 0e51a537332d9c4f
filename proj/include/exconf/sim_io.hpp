#pragma once

#include <string>
#include <vector>

#include "exconf/simlab.hpp"

namespace exconf::sim {

/// Parses a key = value study config (see README for the schema) and expands
/// the noise x n_cal x alpha x method grid into scenarios. Each cell gets a
/// substream seed derived from (config seed, cell index) and a stable
/// cell_id label. Throws ParseError on malformed input.
std::vector<SimScenario> parse_study_config(const std::string& path);

/// One row per cell x repetition.
void write_results_csv(const std::vector<CoverageReport>& reports,
                       const std::string& path);

/// Per-cell aggregate summaries.
void write_summary_json(const std::vector<CoverageReport>& reports,
                        const std::string& path);

}  // namespace exconf::sim
