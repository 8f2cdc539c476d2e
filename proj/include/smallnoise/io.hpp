#pragma once

#include "smallnoise/diagnostics.hpp"
#include "smallnoise/ekf.hpp"
#include "smallnoise/sde.hpp"
#include "smallnoise/studies.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace smallnoise::io {

using Json = nlohmann::ordered_json;

/// Writes via a temp file in the same directory plus rename, so an
/// interrupted run never leaves a partial file under the final name.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

/// One double, 17 significant digits (round-trip safe).
std::string format_double(double v);

std::string trajectory_csv(const sde::Trajectory& traj);
std::string filter_run_csv(const ekf::FilterRun& run);
Json filter_summary_json(const ekf::FilterRun& run, double epsilon);

Json assumption_report_json(const diag::AssumptionReport& rep);
Json stability_witness_json(const diag::StabilityWitness& w);

Json convergence_report_json(const studies::ConvergenceReport& rep, const Json& config_echo);
std::string convergence_paths_csv(const studies::ConvergenceReport& rep);

Json forgetting_report_json(const studies::ForgettingReport& rep, const Json& config_echo);
std::string forgetting_paths_csv(const studies::ForgettingReport& rep);

Json oracle_comparison_json(const studies::OracleComparison& cmp, const Json& config_echo);

}  // namespace smallnoise::io
