#include "smallnoise/cli.hpp"

#include "smallnoise/io.hpp"
#include "smallnoise/mc.hpp"
#include "smallnoise/studies.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>

namespace smallnoise::cli {

namespace fs = std::filesystem;

namespace {

int g_log_level = 1;  // 0 quiet, 1 info, 2 debug

void log_info(const std::string& msg) {
    if (g_log_level >= 1) std::fprintf(stderr, "[smallnoise] %s\n", msg.c_str());
}

struct ModelOptions {
    std::string kind = "linear";
    double lin_a = -1.0, lin_h = 1.0, lin_s = 1.0, lin_g = 0.5, lin_l = 1.0;
    models::SisParams sis;
    double sis_x0_iminus = 0.1, sis_x0_iplus = 0.05;

    models::SisParams sis_params() const {
        models::SisParams p = sis;
        p.x0 = {sis_x0_iminus, sis_x0_iplus};
        return p;
    }

    studies::ModelFamily family() const {
        if (kind == "linear")
            return studies::linear_family(
                models::LinearCoeffs::scalar(lin_a, lin_h, lin_s, lin_g, lin_l), Vec::Zero(1),
                Vec::Zero(1));
        if (kind == "sis") return studies::sis_family(sis_params());
        if (kind == "cubic")
            return [](double epsilon) {
                return studies::ModelInstance{models::cubic_observation_model(),
                                              {Vec::Zero(1), Vec::Zero(1)},
                                              epsilon};
            };
        throw ValidationError("unknown model kind: " + kind);
    }
};

void add_model_options(CLI::App* cmd, ModelOptions* opts, bool with_sis = true) {
    cmd->add_option("--model", opts->kind, "Model: linear | sis | cubic")
        ->check(CLI::IsMember({"linear", "sis", "cubic"}))
        ->capture_default_str();
    cmd->add_option("--linear-a", opts->lin_a, "Signal drift coefficient")
        ->capture_default_str();
    cmd->add_option("--linear-h", opts->lin_h, "Observation drift coefficient")
        ->capture_default_str();
    cmd->add_option("--linear-s", opts->lin_s, "Independent-channel diffusion")
        ->capture_default_str();
    cmd->add_option("--linear-g", opts->lin_g, "Correlated-channel diffusion")
        ->capture_default_str();
    cmd->add_option("--linear-l", opts->lin_l, "Observation diffusion")->capture_default_str();
    if (with_sis) {
        cmd->add_option("--sis-beta", opts->sis.beta, "Infection intensity")
            ->capture_default_str();
        cmd->add_option("--sis-alpha", opts->sis.alpha, "Detection rate")->capture_default_str();
        cmd->add_option("--sis-rho-minus", opts->sis.rho_minus, "Undetected recovery rate")
            ->capture_default_str();
        cmd->add_option("--sis-rho-plus", opts->sis.rho_plus, "Detected recovery rate")
            ->capture_default_str();
        cmd->add_option("--sis-population", opts->sis.N, "Population size N")
            ->capture_default_str();
        cmd->add_option("--sis-x0-iminus", opts->sis_x0_iminus,
                        "Initial undetected-infected fraction")
            ->capture_default_str();
        cmd->add_option("--sis-x0-iplus", opts->sis_x0_iplus,
                        "Initial detected-infected fraction")
            ->capture_default_str();
    }
}

io::Json model_echo(const ModelOptions& m) {
    io::Json j{{"model", m.kind}};
    if (m.kind == "linear")
        j["linear"] = {{"a", m.lin_a}, {"h", m.lin_h}, {"s", m.lin_s}, {"g", m.lin_g},
                       {"l", m.lin_l}};
    if (m.kind == "sis") {
        const auto p = m.sis_params();
        j["sis"] = {{"beta", p.beta},           {"alpha", p.alpha},
                    {"rho_minus", p.rho_minus}, {"rho_plus", p.rho_plus},
                    {"population", p.N},        {"x0_iminus", p.x0[0]},
                    {"x0_iplus", p.x0[1]}};
    }
    return j;
}

// SI+-S derives epsilon from the population size; other models take the
// --epsilon flag.
double resolve_epsilon(const ModelOptions& m, double epsilon_flag) {
    if (m.kind == "sis") return m.sis_params().epsilon();
    return epsilon_flag;
}

Mat scalar_q0(double q0) {
    if (!(q0 > 0.0)) throw ValidationError("q0 must be > 0");
    Mat q(1, 1);
    q(0, 0) = q0;
    return q;
}

struct CommonOpts {
    std::string output_dir = ".";
    std::uint64_t seed = 0;
    double dt = 0.0;  // 0 = model default
    bool serial = false;
};

void add_common(CLI::App* cmd, CommonOpts* c) {
    cmd->add_option("--output-dir", c->output_dir, "Directory for output files")
        ->capture_default_str();
    cmd->add_option("--seed", c->seed, "Master RNG seed")
        ->envname("SMALLNOISE_SEED")
        ->capture_default_str();
    cmd->add_option("--dt", c->dt, "Step size (0 = model default)")->capture_default_str();
    cmd->add_flag("--serial", c->serial, "Use the serial reference batch runner");
}

double resolve_dt(const ModelOptions& m, double dt_flag) {
    if (dt_flag > 0.0) return dt_flag;
    if (m.kind == "sis") return models::default_dt(m.sis_params());
    return 1e-3;
}

int guarded(const std::string& output_dir, const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const NumericalError& e) {
        io::Json diag{{"schema", "error-v1"}, {"error", e.what()}, {"step", e.step_index}};
        try {
            io::atomic_write_text(fs::path(output_dir) / "error.json", diag.dump(2) + "\n");
        } catch (...) {
        }
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "invalid configuration: %s\n", e.what());
        return 1;
    }
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Continuous-time extended Kalman filter with small state-dependent noise: "
                 "simulator, filter, and Monte Carlo studies"};
    app.require_subcommand(1);
    app.fallthrough(true);
    app.set_config("--config", "",
                   "Config file: key = value, one [section] per subcommand. CLI flags override "
                   "file values.");
    app.allow_config_extras(CLI::config_extras_mode::error);

    int threads = 0;
    std::string log_level = "info";
    std::string schema = "runcfg-v1";
    app.add_option("--threads", threads, "OpenMP thread cap (0 = default)")
        ->capture_default_str();
    app.add_option("--log-level", log_level, "quiet | info | debug")
        ->check(CLI::IsMember({"quiet", "info", "debug"}))
        ->capture_default_str();
    app.add_option("--schema", schema, "Config schema version")
        ->check(CLI::IsMember({"runcfg-v1"}));

    // ---- simulate ----------------------------------------------------
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate one trajectory to CSV");
    ModelOptions sim_model;
    CommonOpts sim_common;
    double sim_eps = 1e-2, sim_t_end = 1.0;
    std::string sim_out = "trajectory.csv";
    add_model_options(sim_cmd, &sim_model);
    add_common(sim_cmd, &sim_common);
    sim_cmd->add_option("--epsilon", sim_eps, "Noise scale (ignored for sis)")
        ->capture_default_str();
    sim_cmd->add_option("--t-end", sim_t_end, "Horizon")->capture_default_str();
    sim_cmd->add_option("--out", sim_out, "Output CSV name")->capture_default_str();

    // ---- filter ------------------------------------------------------
    auto* flt_cmd = app.add_subcommand("filter", "Simulate and filter; CSV + JSON summary");
    ModelOptions flt_model;
    CommonOpts flt_common;
    double flt_eps = 1e-2, flt_t_end = 1.0, flt_q0 = 1.0, flt_m0_offset = 0.0;
    add_model_options(flt_cmd, &flt_model);
    add_common(flt_cmd, &flt_common);
    flt_cmd->add_option("--epsilon", flt_eps, "Noise scale (ignored for sis)")
        ->capture_default_str();
    flt_cmd->add_option("--t-end", flt_t_end, "Horizon")->capture_default_str();
    flt_cmd->add_option("--q0", flt_q0, "Initial scaled covariance")->capture_default_str();
    flt_cmd->add_option("--m0-offset", flt_m0_offset, "M(0) = Y(0) + offset")
        ->capture_default_str();

    // ---- convergence -------------------------------------------------
    auto* cnv_cmd = app.add_subcommand("convergence", "Error-order Monte Carlo study");
    ModelOptions cnv_model;
    CommonOpts cnv_common;
    std::vector<double> cnv_eps_grid{1e-1, 1e-2, 1e-3, 1e-4};
    std::vector<double> cnv_n_grid;
    std::vector<double> cnv_q_orders{2.0};
    std::vector<double> cnv_checkpoints{2.0};
    int cnv_n_paths = 100;
    double cnv_q0 = 1.0;
    bool cnv_zero_noise = false;
    add_model_options(cnv_cmd, &cnv_model);
    add_common(cnv_cmd, &cnv_common);
    cnv_cmd->add_option("--eps-grid", cnv_eps_grid, "Noise scales, strictly decreasing")
        ->capture_default_str();
    cnv_cmd->add_option("--population-grid", cnv_n_grid,
                        "SI+-S population sizes (eps = 1/sqrt(N))");
    cnv_cmd->add_option("--n-paths", cnv_n_paths, "Paths per grid point")->capture_default_str();
    cnv_cmd->add_option("--q-orders", cnv_q_orders, "Moment orders")->capture_default_str();
    cnv_cmd->add_option("--checkpoints", cnv_checkpoints, "Measurement times")
        ->capture_default_str();
    cnv_cmd->add_option("--q0", cnv_q0, "Initial scaled covariance")->capture_default_str();
    cnv_cmd->add_flag("--zero-noise", cnv_zero_noise,
                      "Diagnostics: zero all Brownian increments");

    // ---- forgetting ----------------------------------------------------
    auto* fgt_cmd = app.add_subcommand("forgetting", "Initial-error decay Monte Carlo study");
    ModelOptions fgt_model;
    CommonOpts fgt_common;
    std::vector<double> fgt_deltas{0.5, 1.0, 2.0};
    std::vector<double> fgt_t_grid;
    double fgt_eps = 1e-4, fgt_q0 = 1.0, fgt_q_order = 2.0, fgt_cutoff = 4.0;
    int fgt_n_paths = 100;
    add_model_options(fgt_cmd, &fgt_model);
    add_common(fgt_cmd, &fgt_common);
    fgt_cmd->add_option("--epsilon", fgt_eps, "Noise scale (ignored for sis)")
        ->capture_default_str();
    fgt_cmd->add_option("--deltas", fgt_deltas, "Initial-error magnitudes")
        ->capture_default_str();
    fgt_cmd->add_option("--t-grid", fgt_t_grid, "Measurement times")->required();
    fgt_cmd->add_option("--n-paths", fgt_n_paths, "Paths")->capture_default_str();
    fgt_cmd->add_option("--q-order", fgt_q_order, "Moment order")->capture_default_str();
    fgt_cmd->add_option("--q0", fgt_q0, "Initial scaled covariance")->capture_default_str();
    fgt_cmd->add_option("--cutoff-ratio", fgt_cutoff,
                        "Keep fit points while norm-floor > ratio*floor")
        ->capture_default_str();

    // ---- check-assumptions -------------------------------------------
    auto* chk_cmd = app.add_subcommand("check-assumptions",
                                       "Sample-based verdicts on the structural hypotheses");
    ModelOptions chk_model;
    CommonOpts chk_common;
    double chk_eps = 1e-2, chk_box_y = 2.0, chk_box_z = 2.0, chk_q0 = 1.0;
    int chk_n_pairs = 2000, chk_n_z = 8;
    diag::AssumptionThresholds chk_thresholds;
    std::string chk_out = "assumptions.json";
    add_model_options(chk_cmd, &chk_model);
    add_common(chk_cmd, &chk_common);
    chk_cmd->add_option("--epsilon", chk_eps, "Noise scale (ignored for sis)")
        ->capture_default_str();
    chk_cmd->add_option("--box-y", chk_box_y, "Signal box half-width")->capture_default_str();
    chk_cmd->add_option("--box-z", chk_box_z, "Observation box half-width")
        ->capture_default_str();
    chk_cmd->add_option("--n-pairs", chk_n_pairs, "Sampled pairs per estimate")
        ->capture_default_str();
    chk_cmd->add_option("--n-z", chk_n_z, "Sampled observation values")->capture_default_str();
    chk_cmd->add_option("--q0", chk_q0, "Initial scaled covariance")->capture_default_str();
    chk_cmd->add_option("--injectivity-min", chk_thresholds.injectivity_min,
                        "Strong-injectivity verdict threshold")
        ->capture_default_str();
    chk_cmd->add_option("--ellipticity-min", chk_thresholds.ellipticity_min,
                        "Uniform-ellipticity verdict threshold")
        ->capture_default_str();
    chk_cmd->add_option("--almost-linear-max", chk_thresholds.almost_linear_max,
                        "Almost-linearity verdict threshold")
        ->capture_default_str();
    chk_cmd->add_option("--out", chk_out, "Output JSON name")->capture_default_str();

    // ---- oracle-compare ------------------------------------------------
    auto* orc_cmd = app.add_subcommand(
        "oracle-compare", "EKF vs discrete Kalman recursion on the linear benchmark");
    ModelOptions orc_model;
    CommonOpts orc_common;
    double orc_eps = 1e-2, orc_t_end = 2.0, orc_q0 = 1.0;
    int orc_n_seeds = 50;
    std::string orc_out = "oracle.json";
    add_model_options(orc_cmd, &orc_model, /*with_sis=*/false);
    add_common(orc_cmd, &orc_common);
    orc_cmd->add_option("--epsilon", orc_eps, "Noise scale")->capture_default_str();
    orc_cmd->add_option("--t-end", orc_t_end, "Horizon")->capture_default_str();
    orc_cmd->add_option("--n-seeds", orc_n_seeds, "Independent seeds")->capture_default_str();
    orc_cmd->add_option("--q0", orc_q0, "Initial scaled covariance")->capture_default_str();
    orc_cmd->add_option("--out", orc_out, "Output JSON name")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    g_log_level = log_level == "quiet" ? 0 : log_level == "debug" ? 2 : 1;
    mc::set_threads(threads);

    if (sim_cmd->parsed()) {
        return guarded(sim_common.output_dir, [&] {
            const double eps = resolve_epsilon(sim_model, sim_eps);
            const auto inst = sim_model.family()(eps);
            const double dt = resolve_dt(sim_model, sim_common.dt);
            sde::SimConfig cfg{eps, dt, sim_t_end, sim_common.seed};
            const auto traj = sde::simulate(inst.model, inst.ic, cfg);
            io::atomic_write_text(fs::path(sim_common.output_dir) / sim_out,
                                  io::trajectory_csv(traj));
            log_info("simulate: wrote " + sim_out + " (" + std::to_string(traj.steps()) +
                     " steps)");
        });
    }

    if (flt_cmd->parsed()) {
        return guarded(flt_common.output_dir, [&] {
            const double eps = resolve_epsilon(flt_model, flt_eps);
            const auto inst = flt_model.family()(eps);
            const double dt = resolve_dt(flt_model, flt_common.dt);
            sde::SimConfig cfg{eps, dt, flt_t_end, flt_common.seed};
            const auto traj = sde::simulate(inst.model, inst.ic, cfg);
            const Vec m0 = inst.ic.y0.array() + flt_m0_offset;
            const auto run = ekf::filter_run(inst.model, traj, m0, scalar_q0(flt_q0), eps);
            io::atomic_write_text(fs::path(flt_common.output_dir) / "filter_run.csv",
                                  io::filter_run_csv(run));
            io::atomic_write_text(fs::path(flt_common.output_dir) / "filter_summary.json",
                                  io::filter_summary_json(run, eps).dump(2) + "\n");
            log_info("filter: wrote filter_run.csv and filter_summary.json");
        });
    }

    if (cnv_cmd->parsed()) {
        return guarded(cnv_common.output_dir, [&] {
            studies::ConvergenceStudySpec spec;
            spec.family = cnv_model.family();
            spec.family_label = cnv_model.kind;
            if (cnv_model.kind == "sis") {
                if (cnv_n_grid.empty())
                    throw ValidationError("convergence on sis requires --population-grid");
                for (double N : cnv_n_grid) spec.eps_grid.push_back(1.0 / std::sqrt(N));
            } else {
                spec.eps_grid = cnv_eps_grid;
            }
            spec.n_paths = cnv_n_paths;
            spec.q_orders = cnv_q_orders;
            spec.t_checkpoints = cnv_checkpoints;
            spec.dt = resolve_dt(cnv_model, cnv_common.dt);
            spec.master_seed = cnv_common.seed;
            spec.q0 = scalar_q0(cnv_q0);
            spec.zero_noise = cnv_zero_noise;
            spec.force_serial = cnv_common.serial;

            const auto rep = studies::run_convergence_study(spec);
            io::Json echo = model_echo(cnv_model);
            echo["eps_grid"] = spec.eps_grid;
            echo["n_paths"] = spec.n_paths;
            echo["q_orders"] = spec.q_orders;
            echo["checkpoints"] = spec.t_checkpoints;
            echo["dt"] = spec.dt;
            echo["seed"] = spec.master_seed;
            echo["q0"] = cnv_q0;
            echo["zero_noise"] = spec.zero_noise;
            io::atomic_write_text(fs::path(cnv_common.output_dir) / "report.json",
                                  io::convergence_report_json(rep, echo).dump(2) + "\n");
            io::atomic_write_text(fs::path(cnv_common.output_dir) / "paths.csv",
                                  io::convergence_paths_csv(rep));
            log_info("convergence: status " + rep.status + ", wall " +
                     std::to_string(rep.wall_seconds) + " s");
        });
    }

    if (fgt_cmd->parsed()) {
        return guarded(fgt_common.output_dir, [&] {
            studies::ForgettingStudySpec spec;
            spec.family = fgt_model.family();
            spec.family_label = fgt_model.kind;
            spec.epsilon = resolve_epsilon(fgt_model, fgt_eps);
            spec.initial_error_magnitudes = fgt_deltas;
            spec.n_paths = fgt_n_paths;
            spec.t_grid = fgt_t_grid;
            spec.q_order = fgt_q_order;
            spec.dt = resolve_dt(fgt_model, fgt_common.dt);
            spec.master_seed = fgt_common.seed;
            spec.q0 = scalar_q0(fgt_q0);
            spec.direction = Vec::Ones(1);
            spec.fit_cutoff_ratio = fgt_cutoff;
            spec.force_serial = fgt_common.serial;

            const auto rep = studies::run_forgetting_study(spec);
            io::Json echo = model_echo(fgt_model);
            echo["epsilon"] = spec.epsilon;
            echo["deltas"] = spec.initial_error_magnitudes;
            echo["t_grid"] = spec.t_grid;
            echo["n_paths"] = spec.n_paths;
            echo["q_order"] = spec.q_order;
            echo["dt"] = spec.dt;
            echo["seed"] = spec.master_seed;
            echo["q0"] = fgt_q0;
            echo["cutoff_ratio"] = spec.fit_cutoff_ratio;
            io::atomic_write_text(fs::path(fgt_common.output_dir) / "report.json",
                                  io::forgetting_report_json(rep, echo).dump(2) + "\n");
            io::atomic_write_text(fs::path(fgt_common.output_dir) / "paths.csv",
                                  io::forgetting_paths_csv(rep));
            log_info("forgetting: status " + rep.status + ", c0_hat " +
                     std::to_string(rep.c0_hat) + ", wall " +
                     std::to_string(rep.wall_seconds) + " s");
        });
    }

    if (chk_cmd->parsed()) {
        return guarded(chk_common.output_dir, [&] {
            const double eps = resolve_epsilon(chk_model, chk_eps);
            const auto inst = chk_model.family()(eps);
            const diag::BoxDomain y_box(Vec::Constant(inst.model.n, -chk_box_y),
                                        Vec::Constant(inst.model.n, chk_box_y));
            const diag::BoxDomain z_box(Vec::Constant(inst.model.d, -chk_box_z),
                                        Vec::Constant(inst.model.d, chk_box_z));
            const auto rep =
                diag::check_assumptions(inst.model, y_box, z_box, scalar_q0(chk_q0),
                                        chk_n_pairs, chk_n_z, chk_common.seed, chk_thresholds);
            io::Json j = io::assumption_report_json(rep);
            j["config"] = model_echo(chk_model);
            j["config"]["epsilon"] = eps;
            io::atomic_write_text(fs::path(chk_common.output_dir) / chk_out, j.dump(2) + "\n");
            log_info("check-assumptions: wrote " + chk_out);
        });
    }

    if (orc_cmd->parsed()) {
        return guarded(orc_common.output_dir, [&] {
            const auto lm = models::LinearCoeffs::scalar(orc_model.lin_a, orc_model.lin_h,
                                                         orc_model.lin_s, orc_model.lin_g,
                                                         orc_model.lin_l);
            const double dt = resolve_dt(orc_model, orc_common.dt);
            const auto cmp =
                studies::oracle_compare(lm, orc_eps, dt, orc_t_end, orc_n_seeds,
                                        orc_common.seed, scalar_q0(orc_q0), orc_common.serial);
            io::Json echo = model_echo(orc_model);
            echo["epsilon"] = orc_eps;
            echo["dt"] = dt;
            echo["t_end"] = orc_t_end;
            echo["n_seeds"] = orc_n_seeds;
            echo["seed"] = orc_common.seed;
            echo["q0"] = orc_q0;
            io::atomic_write_text(fs::path(orc_common.output_dir) / orc_out,
                                  io::oracle_comparison_json(cmp, echo).dump(2) + "\n");
            log_info("oracle-compare: rms mean diff " + std::to_string(cmp.rms_mean_diff) +
                     ", max cov diff " + std::to_string(cmp.max_cov_diff));
        });
    }

    return 0;
}

}  // namespace smallnoise::cli
