#include "smallnoise/io.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace smallnoise::io {

namespace fs = std::filesystem;

void atomic_write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot open for writing: " + tmp.string());
        out << content;
        if (!out) throw ValidationError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

void append_row(std::string* out, const std::vector<double>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) out->push_back(',');
        *out += format_double(vals[i]);
    }
    out->push_back('\n');
}

Json vec_json(const Vec& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Json mat_json(const Mat& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Json moment_json(const diag::MomentEstimate& e) {
    return Json{{"q_order", e.q_order},
                {"value", e.value},
                {"std_error", e.std_error},
                {"n_samples", e.n_samples}};
}

}  // namespace

std::string trajectory_csv(const sde::Trajectory& traj) {
    const int n = traj.y_path.empty() ? 0 : static_cast<int>(traj.y_path.front().size());
    const int d = traj.z_path.empty() ? 0 : static_cast<int>(traj.z_path.front().size());
    std::string out = "t";
    for (int i = 1; i <= n; ++i) out += ",y_" + std::to_string(i);
    for (int i = 1; i <= d; ++i) out += ",z_" + std::to_string(i);
    out.push_back('\n');
    std::vector<double> row;
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        row.clear();
        row.push_back(traj.times[k]);
        for (int i = 0; i < n; ++i) row.push_back(traj.y_path[k](i));
        for (int i = 0; i < d; ++i) row.push_back(traj.z_path[k](i));
        append_row(&out, row);
    }
    return out;
}

std::string filter_run_csv(const ekf::FilterRun& run) {
    if (run.states.empty()) return "t\n";
    const int n = static_cast<int>(run.states.front().m.size());
    std::string out = "t";
    for (int i = 1; i <= n; ++i) out += ",m_" + std::to_string(i);
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) out += ",q_" + std::to_string(i) + std::to_string(j);
    out += ",scaled_err_norm\n";
    std::vector<double> row;
    for (std::size_t k = 0; k < run.states.size(); ++k) {
        row.clear();
        row.push_back(run.states[k].t);
        for (int i = 0; i < n; ++i) row.push_back(run.states[k].m(i));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) row.push_back(run.states[k].q.mat()(i, j));
        row.push_back(k < run.scaled_errors.size() ? run.scaled_errors[k].norm() : 0.0);
        append_row(&out, row);
    }
    return out;
}

Json filter_summary_json(const ekf::FilterRun& run, double epsilon) {
    const auto& last = run.states.back();
    return Json{{"schema", "filter-v1"},
                {"epsilon", epsilon},
                {"t_final", last.t},
                {"m_final", vec_json(last.m)},
                {"q_final_scaled", mat_json(last.q.mat())},
                {"q_final_unscaled", mat_json(Mat(epsilon * last.q.mat()))},
                {"projection_events", run.projection_events},
                {"regularization_events", run.regularization_events}};
}

Json assumption_report_json(const diag::AssumptionReport& rep) {
    return Json{
        {"schema", "diag-v1"},
        {"estimates",
         {{"almost_linear_mu_f", rep.mu_f},
          {"almost_linear_mu_h", rep.mu_h},
          {"injectivity_c", rep.injectivity_c},
          {"coefficient_sup", rep.coefficient_sup},
          {"ellipticity_min_eig_a", rep.min_eig_a},
          {"ellipticity_min_eig_llt_inv", rep.min_eig_llt_inv},
          {"q0_eig_ratio", rep.q0_eig_ratio}}},
        {"thresholds",
         {{"injectivity_min", rep.thresholds.injectivity_min},
          {"ellipticity_min", rep.thresholds.ellipticity_min},
          {"almost_linear_max", rep.thresholds.almost_linear_max},
          {"q0_ratio_max", rep.thresholds.q0_ratio_max}}},
        {"verdicts",
         {{"bounded", rep.bounded},
          {"almost_linear", rep.almost_linear},
          {"injective", rep.injective},
          {"elliptic", rep.elliptic},
          {"q0_ratio_ok", rep.q0_ratio_ok}}},
        {"sampling",
         {{"n_pairs", rep.n_pairs},
          {"n_z_samples", rep.n_z_samples},
          {"seed", rep.seed},
          {"box_y_lo", vec_json(rep.box_y_lo)},
          {"box_y_hi", vec_json(rep.box_y_hi)},
          {"box_z_lo", vec_json(rep.box_z_lo)},
          {"box_z_hi", vec_json(rep.box_z_hi)}}}};
}

Json stability_witness_json(const diag::StabilityWitness& w) {
    return Json{{"schema", "diag-v1"},
                {"c_hat", w.c_hat},
                {"C_hat", w.c_big_hat},
                {"residual", w.residual},
                {"grid_points", w.grid.size()},
                {"t_end", w.grid.empty() ? 0.0 : w.grid.back()},
                {"overflowed", w.overflowed}};
}

Json convergence_report_json(const studies::ConvergenceReport& rep, const Json& config_echo) {
    Json moments = Json::array();
    for (const auto& c : rep.moments)
        moments.push_back(Json{{"eps", c.eps},
                               {"t", c.t},
                               {"moment", moment_json(c.estimate)}});
    Json fits = Json::array();
    for (const auto& f : rep.fits)
        fits.push_back(Json{{"t", f.t},
                            {"q_order", f.q_order},
                            {"alpha_hat", f.alpha_hat},
                            {"intercept", f.intercept},
                            {"r2", f.r2},
                            {"ci_lo", f.ci_lo},
                            {"ci_hi", f.ci_hi}});
    return Json{{"schema", "study-v1"},
                {"kind", "convergence"},
                {"config", config_echo},
                {"status", rep.status},
                {"eps_grid", rep.eps_grid},
                {"n_paths", rep.n_paths},
                {"failed_per_eps", rep.failed_per_eps},
                {"moments", std::move(moments)},
                {"fits", std::move(fits)},
                {"warnings", rep.warnings}};
}

std::string convergence_paths_csv(const studies::ConvergenceReport& rep) {
    std::string out = "eps,path,t,scaled_err_norm\n";
    for (const auto& r : rep.path_records) {
        out += format_double(r.eps);
        out.push_back(',');
        out += std::to_string(r.path_index);
        out.push_back(',');
        out += format_double(r.t);
        out.push_back(',');
        out += format_double(r.value);
        out.push_back('\n');
    }
    return out;
}

Json forgetting_report_json(const studies::ForgettingReport& rep, const Json& config_echo) {
    Json norms = Json::array();
    for (std::size_t di = 0; di < rep.deltas.size(); ++di)
        for (std::size_t ti = 0; ti < rep.t_grid.size(); ++ti)
            norms.push_back(Json{{"delta", rep.deltas[di]},
                                 {"t", rep.t_grid[ti]},
                                 {"moment", moment_json(rep.norms[di][ti])}});
    Json fits = Json::array();
    for (const auto& f : rep.per_delta_fits)
        fits.push_back(Json{{"delta", f.delta},
                            {"c0_hat", f.c0_hat},
                            {"intercept", f.intercept},
                            {"r2", f.r2},
                            {"points_used", f.points_used},
                            {"points_dropped", f.points_dropped}});
    return Json{{"schema", "study-v1"},
                {"kind", "forgetting"},
                {"config", config_echo},
                {"status", rep.status},
                {"deltas", rep.deltas},
                {"t_grid", rep.t_grid},
                {"norms", std::move(norms)},
                {"per_delta_fits", std::move(fits)},
                {"c0_hat", rep.c0_hat},
                {"c0_ci_lo", rep.c0_ci_lo},
                {"c0_ci_hi", rep.c0_ci_hi},
                {"bound_constant", rep.bound_constant},
                {"bound_dominates", rep.bound_dominates},
                {"pilot", stability_witness_json(rep.pilot)},
                {"c0_from_pilot", diag::c0_from_stability(rep.pilot)},
                {"stability_probes",
                 [&] {
                     Json probes = Json::array();
                     for (const auto& [offset, c_hat] : rep.stability_probes)
                         probes.push_back(Json{{"xi_offset", offset}, {"c_hat", c_hat}});
                     return probes;
                 }()},
                {"failed_paths", rep.failed_paths},
                {"total_paths", rep.total_paths},
                {"warnings", rep.warnings}};
}

std::string forgetting_paths_csv(const studies::ForgettingReport& rep) {
    std::string out = "delta,path,t,err_norm\n";
    for (const auto& r : rep.path_records) {
        out += format_double(r.delta);
        out.push_back(',');
        out += std::to_string(r.path_index);
        out.push_back(',');
        out += format_double(r.t);
        out.push_back(',');
        out += format_double(r.value);
        out.push_back('\n');
    }
    return out;
}

Json oracle_comparison_json(const studies::OracleComparison& cmp, const Json& config_echo) {
    return Json{{"schema", "oracle-v1"},
                {"config", config_echo},
                {"n_seeds", cmp.n_seeds},
                {"rms_mean_diff", cmp.rms_mean_diff},
                {"max_cov_diff", cmp.max_cov_diff},
                {"projection_events", cmp.projection_events}};
}

}  // namespace smallnoise::io
