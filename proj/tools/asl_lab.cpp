// asl_lab: experiment driver for the adaptive social learning laboratory.
//
// Subcommands: simulate | steady-state | exponents | transient |
// nonstationary | sweep.  Every command loads a JSON experiment config,
// applies the command-line overrides, and writes CSV artifacts plus a JSON
// sidecar into the output directory.  Outputs carry a provenance line
// (tool version, config hash, base seed) and contain no timestamps, so
// re-running a command with the same effective config reproduces the files
// byte for byte.
//
// Exit codes: 0 success, 2 configuration/validation error, 3 numerical
// failure, 4 I/O failure.
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "asl/asl.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct cli_options {
    std::string config_path;
    std::string out_dir = ".";
    std::string axis = "delta";
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<double> delta;
    std::optional<long> reps;
};

struct context {
    asl::io::experiment_config cfg;
    std::string hash;
    asl::graph::network net;
    Eigen::MatrixXd a;
    asl::graph::network_analysis na;
    asl::models::laplace_family model;
    asl::engine::strategy strat;
};

Eigen::MatrixXd matrix_for_policy(const asl::graph::network& net, const std::string& policy) {
    return policy == "laplacian" ? asl::graph::build_laplacian(net)
                                 : asl::graph::build_averaging(net);
}

asl::engine::strategy strategy_from(const asl::io::experiment_config& cfg) {
    using asl::engine::strategy;
    using asl::engine::strategy_kind;
    if (cfg.strategy == "traditional") return strategy{strategy_kind::traditional, cfg.delta};
    if (cfg.strategy == "flattened") return strategy{strategy_kind::adaptive_flattened, cfg.delta};
    return strategy{strategy_kind::adaptive, cfg.delta};
}

context make_context(const cli_options& opt) {
    asl::io::experiment_config cfg = asl::io::load_config(opt.config_path);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.workers) cfg.workers = *opt.workers;
    if (opt.delta) cfg.delta = *opt.delta;
    if (opt.reps) cfg.reps = *opt.reps;
    cfg.validate();

    asl::graph::network net = asl::io::load_network(cfg.network);
    Eigen::MatrixXd a = matrix_for_policy(net, cfg.policy);
    asl::graph::network_analysis na = asl::graph::analyze(a);
    Eigen::MatrixXd loc = asl::io::load_model_table(cfg.model, net.agents);
    asl::models::laplace_family model(loc);
    if (cfg.theta0 > model.hypotheses()) {
        throw asl::config_error("config: theta0 exceeds the model's hypothesis count");
    }
    for (const auto& [at, th] : cfg.schedule) {
        if (th > model.hypotheses()) {
            throw asl::config_error("config: schedule hypothesis exceeds the model");
        }
    }
    std::string hash = asl::io::config_hash(cfg);
    asl::engine::strategy strat = strategy_from(cfg);
    return context{std::move(cfg), std::move(hash), std::move(net), std::move(a),
                   std::move(na), std::move(model), strat};
}

fs::path out_file(const cli_options& opt, const context& ctx, const std::string& stem,
                  const std::string& ext) {
    fs::create_directories(opt.out_dir);
    return fs::path(opt.out_dir) / (stem + "_" + ctx.hash + ext);
}

std::vector<double> log_spaced(double lo, double hi, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    const double a = std::log10(lo), b = std::log10(hi);
    for (int i = 0; i < n; ++i) {
        v[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (n - 1));
    }
    return v;
}

// Default grid for exponent work: evenly spaced in 1/delta, where the decay
// law is linear.
std::vector<double> inverse_spaced(double inv_lo, double inv_hi, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        v[static_cast<std::size_t>(i)] = 1.0 / (inv_lo + (inv_hi - inv_lo) * i / (n - 1));
    }
    return v;
}

json descriptor_json(const asl::analysis::steady_state_descriptors& d) {
    json rows = json::array();
    for (std::size_t j = 0; j < d.wrong.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        rows.push_back({{"theta", d.wrong[j]},
                        {"m_ave", d.m_ave(i)},
                        {"t_star", d.t_star(i)},
                        {"phi_theta", d.phi_theta(i)}});
    }
    json c = json::array();
    for (Eigen::Index r = 0; r < d.c_ave.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index s = 0; s < d.c_ave.cols(); ++s) row.push_back(d.c_ave(r, s));
        c.push_back(row);
    }
    return json{{"per_theta", rows}, {"c_ave", c}, {"phi", d.phi}};
}

int cmd_simulate(const cli_options& opt, const context& ctx) {
    const auto& cfg = ctx.cfg;
    if (cfg.horizon < 1) throw asl::config_error("simulate: horizon must be >= 1");
    asl::engine::truth_schedule schedule = cfg.schedule.empty()
                                               ? asl::engine::truth_schedule{{1, cfg.theta0}}
                                               : asl::engine::truth_schedule(cfg.schedule.begin(),
                                                                             cfg.schedule.end());
    const auto rec = asl::engine::run_trajectory(ctx.model, ctx.a, ctx.strat, schedule,
                                                 static_cast<int>(cfg.horizon), cfg.seed,
                                                 cfg.belief_stride);

    std::vector<std::string> cols = {"step", "truth"};
    for (int k = 1; k <= rec.agents; ++k) cols.push_back("decision_" + std::to_string(k));
    const fs::path csv_path = out_file(opt, ctx, "simulate", ".csv");
    asl::io::csv_writer csv(csv_path, cols, ctx.hash, cfg.seed);
    for (std::size_t i = 0; i < rec.decisions.size(); ++i) {
        std::vector<asl::io::csv_cell> row = {static_cast<long>(i) + 1,
                                              static_cast<long>(rec.regimes[i][0])};
        for (int d : rec.decisions[i]) row.emplace_back(static_cast<long>(d));
        csv.row(row);
    }
    csv.close();

    json files = json::array({csv_path.filename().string()});
    if (cfg.belief_stride > 0) {
        std::vector<std::string> bcols = {"step", "agent"};
        for (int th = 1; th <= rec.hypotheses; ++th) bcols.push_back("belief_" + std::to_string(th));
        const fs::path bpath = out_file(opt, ctx, "simulate_beliefs", ".csv");
        asl::io::csv_writer bcsv(bpath, bcols, ctx.hash, cfg.seed);
        for (std::size_t s = 0; s < rec.belief_steps.size(); ++s) {
            for (int k = 0; k < rec.agents; ++k) {
                std::vector<asl::io::csv_cell> row = {static_cast<long>(rec.belief_steps[s]),
                                                      static_cast<long>(k) + 1};
                for (int th = 0; th < rec.hypotheses; ++th) row.emplace_back(rec.beliefs[s](k, th));
                bcsv.row(row);
            }
        }
        bcsv.close();
        files.push_back(bpath.filename().string());
    }

    json summary{{"strategy", asl::engine::strategy_name(ctx.strat.kind)},
                 {"delta", cfg.delta},
                 {"horizon", cfg.horizon},
                 {"agents", rec.agents},
                 {"files", files}};
    if (schedule.size() > 1) {
        const auto stats = asl::nonstationary::recovery_time_statistics(rec);
        json events = json::array();
        for (const auto& ev : stats.events) {
            events.push_back({{"change_step", ev.change_step},
                              {"new_truth", ev.new_truth},
                              {"recovery", ev.recovery},
                              {"sojourn", ev.sojourn}});
        }
        summary["recovery"] = {{"events", events},
                               {"recovered", stats.recovered},
                               {"censored", stats.censored},
                               {"mean_recovery", stats.mean_recovery}};
    }
    asl::io::write_sidecar(out_file(opt, ctx, "simulate", ".json"), summary, ctx.hash, cfg.seed,
                           "simulate");
    return 0;
}

int cmd_steady_state(const cli_options& opt, const context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto d = asl::analysis::compute_descriptors(ctx.model, ctx.na.pi, cfg.theta0);
    const auto refined = asl::analysis::refined_moments(ctx.model, ctx.a, cfg.delta, cfg.theta0);
    const int w = static_cast<int>(d.wrong.size());

    // Per-hypothesis descriptor table.
    const fs::path dpath = out_file(opt, ctx, "steady_state", ".csv");
    asl::io::csv_writer dcsv(dpath, {"theta", "m_ave", "t_star", "phi_theta"}, ctx.hash, cfg.seed);
    for (int j = 0; j < w; ++j) {
        dcsv.row({static_cast<long>(d.wrong[static_cast<std::size_t>(j)]), d.m_ave(j), d.t_star(j),
                  d.phi_theta(j)});
    }
    dcsv.close();

    // Concentration sweep: one trajectory per step size, final log-ratios of
    // agent 1 against the m_ave +- 5 sd band of the small-step limit.
    const long sweep_horizon = cfg.horizon > 0 ? cfg.horizon : 8000;
    const auto sweep_deltas = log_spaced(1e-3, 1.0, 50);
    std::vector<std::string> scols = {"delta"};
    for (int j = 0; j < w; ++j) {
        const std::string t = std::to_string(d.wrong[static_cast<std::size_t>(j)]);
        scols.push_back("lambda_" + t);
        scols.push_back("band_lo_" + t);
        scols.push_back("band_hi_" + t);
    }
    const fs::path spath = out_file(opt, ctx, "steady_state_sweep", ".csv");
    asl::io::csv_writer scsv(spath, scols, ctx.hash, cfg.seed);
    for (std::size_t i = 0; i < sweep_deltas.size(); ++i) {
        const double dl = sweep_deltas[i];
        asl::montecarlo::mc_plan plan;
        plan.deltas = {dl};
        plan.reps = 1;
        plan.horizon = sweep_horizon;
        plan.base_seed = asl::rng::derive_seed(cfg.seed, 1000 + i, 0);
        plan.store_finals = true;
        const auto est = asl::montecarlo::estimate_error_probability(ctx.model, ctx.a, dl,
                                                                     cfg.theta0, plan);
        std::vector<asl::io::csv_cell> row = {dl};
        for (int j = 0; j < w; ++j) {
            const double sd = std::sqrt(dl * d.c_ave(j, j) / 2.0);
            row.emplace_back(est.finals.front()(0, j));
            row.emplace_back(d.m_ave(j) - 5.0 * sd);
            row.emplace_back(d.m_ave(j) + 5.0 * sd);
        }
        scsv.row(row);
    }
    scsv.close();

    // Fluctuation data: empirical moments over 100 repetitions against the
    // small-step and refined approximations, at four step sizes.
    std::vector<double> clt_deltas = cfg.deltas.empty()
                                         ? std::vector<double>{0.1, 0.05, 0.02, 0.01}
                                         : cfg.deltas;
    const fs::path cpath = out_file(opt, ctx, "steady_state_clt", ".csv");
    asl::io::csv_writer ccsv(cpath,
                             {"delta", "agent", "kind", "theta_a", "theta_b", "empirical",
                              "refined", "asymptotic"},
                             ctx.hash, cfg.seed);
    for (std::size_t i = 0; i < clt_deltas.size(); ++i) {
        const double dl = clt_deltas[i];
        asl::montecarlo::mc_plan plan;
        plan.deltas = {dl};
        plan.reps = 100;
        plan.base_seed = asl::rng::derive_seed(cfg.seed, 2000 + i, 0);
        plan.workers = cfg.workers;
        plan.store_finals = true;
        const auto est = asl::montecarlo::estimate_error_probability(ctx.model, ctx.a, dl,
                                                                     cfg.theta0, plan);
        const auto emp = asl::montecarlo::empirical_steady_state_moments(est.finals);
        const auto ref = asl::analysis::refined_moments(ctx.model, ctx.a, dl, cfg.theta0);
        for (int k = 0; k < ctx.net.agents; ++k) {
            for (int ja = 0; ja < w; ++ja) {
                const long ta = d.wrong[static_cast<std::size_t>(ja)];
                ccsv.row({dl, static_cast<long>(k) + 1, std::string("mean"), ta, ta,
                          emp.mean(k, ja), ref.mean(k, ja), d.m_ave(ja)});
                for (int jb = ja; jb < w; ++jb) {
                    const long tb = d.wrong[static_cast<std::size_t>(jb)];
                    ccsv.row({dl, static_cast<long>(k) + 1, std::string("cov"), ta, tb,
                              emp.cov[static_cast<std::size_t>(k)](ja, jb),
                              ref.cov[static_cast<std::size_t>(k)](ja, jb),
                              dl * d.c_ave(ja, jb) / 2.0});
                }
            }
        }
    }
    ccsv.close();

    json refined_json{{"truncation", refined.truncation}};
    json summary{{"descriptors", descriptor_json(d)},
                 {"refined", refined_json},
                 {"files", json::array({dpath.filename().string(), spath.filename().string(),
                                        cpath.filename().string()})}};
    asl::io::write_sidecar(out_file(opt, ctx, "steady_state", ".json"), summary, ctx.hash,
                           cfg.seed, "steady-state");
    return 0;
}

int cmd_exponents(const cli_options& opt, const context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto ex = asl::analysis::error_exponent(ctx.model, ctx.na.pi, cfg.theta0);
    const int w = static_cast<int>(ex.wrong.size());

    const fs::path tpath = out_file(opt, ctx, "exponents", ".csv");
    asl::io::csv_writer tcsv(tpath, {"theta", "t_star", "phi_theta"}, ctx.hash, cfg.seed);
    for (int j = 0; j < w; ++j) {
        tcsv.row({static_cast<long>(ex.wrong[static_cast<std::size_t>(j)]), ex.t_star(j),
                  ex.phi_theta(j)});
    }
    tcsv.close();

    const std::vector<double> deltas =
        cfg.deltas.empty() ? inverse_spaced(10.0, 150.0, 10) : cfg.deltas;

    // Gaussian-approximation curve from the refined moments.
    const fs::path gpath = out_file(opt, ctx, "exponents_gauss", ".csv");
    asl::io::csv_writer gcsv(gpath, {"delta", "inv_delta", "p_gauss", "p_ref"}, ctx.hash,
                             cfg.seed);
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        const double dl = deltas[i];
        const auto ref = asl::analysis::refined_moments(ctx.model, ctx.a, dl, cfg.theta0);
        double mean_p = 0;
        for (int k = 0; k < ctx.net.agents; ++k) {
            const auto gp = asl::analysis::gaussian_error_probability(
                ref.mean.row(k).transpose(), ref.cov[static_cast<std::size_t>(k)], 100000,
                asl::rng::derive_seed(cfg.seed, 3000 + i, static_cast<std::uint64_t>(k)));
            mean_p += gp.p;
        }
        mean_p /= ctx.net.agents;
        gcsv.row({dl, 1.0 / dl, mean_p, std::exp(-ex.phi / dl)});
    }
    gcsv.close();

    json files = json::array({tpath.filename().string(), gpath.filename().string()});
    json summary{{"phi", ex.phi}, {"files", files}};

    // Optional simulation-side slope check.
    if (cfg.reps > 0) {
        const fs::path mpath = out_file(opt, ctx, "exponents_mc", ".csv");
        asl::io::csv_writer mcsv(mpath, {"delta", "inv_delta", "p_mc", "se", "events"}, ctx.hash,
                                 cfg.seed);
        std::vector<asl::montecarlo::slope_point> pts;
        for (std::size_t i = 0; i < deltas.size(); ++i) {
            asl::montecarlo::mc_plan plan;
            plan.deltas = {deltas[i]};
            plan.reps = cfg.reps;
            plan.base_seed = asl::rng::derive_seed(cfg.seed, 4000 + i, 0);
            plan.workers = cfg.workers;
            const auto est = asl::montecarlo::estimate_error_probability(ctx.model, ctx.a,
                                                                         deltas[i], cfg.theta0,
                                                                         plan);
            mcsv.row({deltas[i], 1.0 / deltas[i], est.pooled_p, est.pooled_se,
                      est.pooled_events});
            pts.push_back({deltas[i], est.pooled_p, est.pooled_events});
        }
        mcsv.close();
        const auto fit = asl::montecarlo::fit_exponent_slope(pts);
        summary["slope_fit"] = {{"slope", fit.slope},
                                {"phi_hat", fit.phi_hat},
                                {"r2", fit.r2},
                                {"points_used", fit.points_used}};
        summary["files"].push_back(mpath.filename().string());
    }
    asl::io::write_sidecar(out_file(opt, ctx, "exponents", ".json"), summary, ctx.hash, cfg.seed,
                           "exponents");
    return 0;
}

int cmd_transient(const cli_options& opt, const context& ctx) {
    const auto& cfg = ctx.cfg;
    const std::vector<double> deltas =
        cfg.deltas.empty() ? std::vector<double>{0.1, 0.05, 0.01} : cfg.deltas;

    const fs::path tpath = out_file(opt, ctx, "transient", ".csv");
    asl::io::csv_writer tcsv(tpath, {"delta", "case", "eps", "k1", "k2", "t_steps", "c"},
                             ctx.hash, cfg.seed);
    const fs::path bpath = out_file(opt, ctx, "transient_bound", ".csv");
    asl::io::csv_writer bcsv(bpath, {"delta", "step", "bound"}, ctx.hash, cfg.seed);

    json per_delta = json::array();
    for (double dl : deltas) {
        // Worst regime change for this policy: scan hypothesis pairs.
        const auto scan = asl::analysis::worst_case_adaptation(ctx.model, {ctx.na.pi}, dl,
                                                               cfg.eps);
        const auto ex = asl::analysis::error_exponent(ctx.model, ctx.na.pi, scan.theta0);
        const Eigen::MatrixXd lam0 = asl::analysis::worst_case_initial_ratios(
            ctx.model, ctx.na.pi, scan.theta_prev, scan.theta0);
        const auto tc = asl::analysis::transient_constants(ctx.model, ctx.na.pi, ctx.na.kappa,
                                                           lam0, scan.theta0);
        tcsv.row({dl, std::string("unfavorable"), cfg.eps, tc.k1, tc.k2, scan.steps, scan.c});

        // Favorable case: a run already at its steady-state mean only has to
        // wash out the network-disagreement term.
        const Eigen::MatrixXd lam0_fav =
            asl::analysis::divergence_means(ctx.model, ctx.na.pi, scan.theta0)
                .transpose()
                .replicate(ctx.net.agents, 1);
        const auto tc_fav = asl::analysis::transient_constants(ctx.model, ctx.na.pi, ctx.na.kappa,
                                                               lam0_fav, scan.theta0);
        const auto at_fav = asl::analysis::adaptation_time(tc_fav, ex.phi, ctx.na.beta, dl,
                                                           cfg.eps);
        tcsv.row({dl, std::string("favorable"), cfg.eps, tc_fav.k1, tc_fav.k2, at_fav.steps,
                  at_fav.steps * dl});

        // Instantaneous envelope along the unfavorable trajectory.
        const long t_end = static_cast<long>(std::ceil(3.0 * scan.steps));
        const long stride = std::max<long>(1, t_end / 200);
        for (long i = 0; i <= t_end; i += stride) {
            bcsv.row({dl, i,
                      asl::analysis::instantaneous_bound(tc.k1_theta, tc.k2_theta, ex.phi_theta,
                                                         dl, ctx.na.beta, static_cast<int>(i))});
        }
        per_delta.push_back({{"delta", dl},
                             {"theta_prev", scan.theta_prev},
                             {"theta0", scan.theta0},
                             {"phi", scan.phi},
                             {"t_unfavorable", scan.steps},
                             {"t_favorable", at_fav.steps}});
    }
    tcsv.close();
    bcsv.close();

    json summary{{"eps", cfg.eps},
                 {"beta", ctx.na.beta},
                 {"kappa", ctx.na.kappa},
                 {"per_delta", per_delta},
                 {"files", json::array({tpath.filename().string(), bpath.filename().string()})}};
    asl::io::write_sidecar(out_file(opt, ctx, "transient", ".json"), summary, ctx.hash, cfg.seed,
                           "transient");
    return 0;
}

int cmd_nonstationary(const cli_options& opt, const context& ctx) {
    const auto& cfg = ctx.cfg;
    std::vector<Eigen::MatrixXd> matrices = {asl::graph::build_averaging(ctx.net)};
    if (ctx.net.symmetric()) matrices.push_back(asl::graph::build_laplacian(ctx.net));

    asl::nonstationary::environment env;
    env.rates = {cfg.q_hyp, cfg.q_mat, cfg.q_fun};
    env.sigma_perturbed = cfg.sigma_perturbed;
    env.sigma_bad = cfg.sigma_bad;
    env.init = {cfg.theta0, 0, asl::nonstationary::kNominal};

    const int horizon = static_cast<int>(cfg.horizon > 0 ? cfg.horizon : 200000);
    using asl::engine::strategy;
    using asl::engine::strategy_kind;
    const auto rec_asl = asl::nonstationary::run_nonstationary(
        ctx.model, matrices, strategy{strategy_kind::adaptive, cfg.delta}, env, horizon,
        cfg.seed);
    const auto rec_trad = asl::nonstationary::run_nonstationary(
        ctx.model, matrices, strategy{strategy_kind::traditional, cfg.delta}, env, horizon,
        cfg.seed);

    const fs::path tpath = out_file(opt, ctx, "nonstationary", ".csv");
    asl::io::csv_writer tcsv(
        tpath, {"step", "truth", "matrix", "functioning", "majority_adaptive",
                "majority_traditional"},
        ctx.hash, cfg.seed);
    for (std::size_t i = 0; i < rec_asl.regimes.size(); ++i) {
        tcsv.row({static_cast<long>(i) + 1, static_cast<long>(rec_asl.regimes[i][0]),
                  static_cast<long>(rec_asl.regimes[i][1]),
                  static_cast<long>(rec_asl.regimes[i][2]),
                  static_cast<long>(asl::nonstationary::majority_decision(rec_asl.decisions[i],
                                                                          rec_asl.hypotheses)),
                  static_cast<long>(asl::nonstationary::majority_decision(rec_trad.decisions[i],
                                                                          rec_trad.hypotheses))});
    }
    tcsv.close();

    const auto stats_asl = asl::nonstationary::recovery_time_statistics(rec_asl);
    const auto stats_trad = asl::nonstationary::recovery_time_statistics(rec_trad);
    const fs::path rpath = out_file(opt, ctx, "nonstationary_recovery", ".csv");
    asl::io::csv_writer rcsv(rpath,
                             {"change_step", "new_truth", "sojourn", "excluded_bad",
                              "recovery_adaptive", "recovery_traditional"},
                             ctx.hash, cfg.seed);
    for (std::size_t i = 0; i < stats_asl.events.size(); ++i) {
        const auto& ea = stats_asl.events[i];
        const auto& et = stats_trad.events[i]; // change points coincide: shared seed
        rcsv.row({static_cast<long>(ea.change_step), static_cast<long>(ea.new_truth), ea.sojourn,
                  static_cast<long>(ea.excluded_bad ? 1 : 0), ea.recovery, et.recovery});
    }
    rcsv.close();

    json summary{{"files",
                  json::array({tpath.filename().string(), rpath.filename().string()})},
                 {"adaptive",
                  {{"recovered", stats_asl.recovered},
                   {"censored", stats_asl.censored},
                   {"excluded", stats_asl.excluded},
                   {"mean_recovery", stats_asl.mean_recovery}}},
                 {"traditional",
                  {{"recovered", stats_trad.recovered},
                   {"censored", stats_trad.censored},
                   {"excluded", stats_trad.excluded},
                   {"mean_recovery", stats_trad.mean_recovery}}}};
    if (cfg.q_hyp > 0.0 || cfg.q_mat > 0.0 || cfg.q_fun > 0.0) {
        const auto cycle = asl::nonstationary::worst_case_cycle_stats(env.rates);
        summary["t_lc"] = cycle.t_lc;
        summary["q_star"] = cycle.q_star;
        if (ctx.model.hypotheses() >= 3 && cfg.q_hyp > 0.0 && cfg.q_fun > 0.0) {
            const auto soj = asl::nonstationary::measure_worst_case_sojourns(
                env.rates, ctx.model.hypotheses(), 100000,
                asl::rng::derive_seed(cfg.seed, 5000, 0));
            summary["sojourns"] = {{"count", soj.count},
                                   {"mean", soj.mean},
                                   {"steps", soj.steps_simulated}};
        }
    }
    asl::io::write_sidecar(out_file(opt, ctx, "nonstationary", ".json"), summary, ctx.hash,
                           cfg.seed, "nonstationary");
    return 0;
}

int cmd_sweep(const cli_options& opt, const context& ctx) {
    const auto& cfg = ctx.cfg;
    if (opt.axis != "delta" && opt.axis != "policy") {
        throw asl::config_error("sweep: axis must be 'delta' or 'policy'");
    }
    const fs::path cache_dir = fs::path(opt.out_dir) / "cache";
    fs::create_directories(cache_dir);

    // One cached record per grid point, keyed by the hash of the derived
    // config, so repeated sweeps (and overlapping grids) reuse results.
    auto point_rows = [&](const asl::io::experiment_config& derived) -> json {
        const std::string h = asl::io::config_hash(derived);
        const fs::path cache_file = cache_dir / (h + ".json");
        if (fs::exists(cache_file)) {
            std::ifstream in(cache_file);
            json j;
            in >> j;
            if (!in.fail()) return j;
            throw asl::io_error("sweep: unreadable cache entry " + cache_file.string());
        }
        const Eigen::MatrixXd a = matrix_for_policy(ctx.net, derived.policy);
        const Eigen::VectorXd pi = asl::graph::analyze(a).pi;
        const auto d = asl::analysis::compute_descriptors(ctx.model, pi, derived.theta0);
        const auto ref = asl::analysis::refined_moments(ctx.model, a, derived.delta,
                                                        derived.theta0);
        json rows = json::array();
        for (std::size_t j = 0; j < d.wrong.size(); ++j) {
            const auto i = static_cast<Eigen::Index>(j);
            rows.push_back({{"policy", derived.policy},
                            {"delta", derived.delta},
                            {"theta", d.wrong[j]},
                            {"m_ave", d.m_ave(i)},
                            {"t_star", d.t_star(i)},
                            {"phi_theta", d.phi_theta(i)},
                            {"phi", d.phi},
                            {"refined_mean_1", ref.mean(0, i)},
                            {"refined_var_1", ref.cov[0](i, i)}});
        }
        std::ofstream outf(cache_file);
        if (!outf) throw asl::io_error("sweep: cannot write cache entry " + cache_file.string());
        outf << rows.dump(2) << "\n";
        return rows;
    };

    std::vector<asl::io::experiment_config> grid;
    if (opt.axis == "delta") {
        const std::vector<double> deltas =
            cfg.deltas.empty() ? log_spaced(0.01, 0.3, 10) : cfg.deltas;
        for (double dl : deltas) {
            asl::io::experiment_config c = cfg;
            c.delta = dl;
            c.deltas.clear();
            grid.push_back(std::move(c));
        }
    } else {
        for (const char* p : {"averaging", "laplacian"}) {
            asl::io::experiment_config c = cfg;
            c.policy = p;
            grid.push_back(std::move(c));
        }
    }

    const fs::path spath = out_file(opt, ctx, "sweep", ".csv");
    asl::io::csv_writer scsv(spath,
                             {"policy", "delta", "theta", "m_ave", "t_star", "phi_theta", "phi",
                              "refined_mean_1", "refined_var_1"},
                             ctx.hash, cfg.seed);
    json keys = json::array();
    for (const auto& derived : grid) {
        keys.push_back(asl::io::config_hash(derived));
        for (const auto& r : point_rows(derived)) {
            scsv.row({r.at("policy").get<std::string>(), r.at("delta").get<double>(),
                      static_cast<long>(r.at("theta").get<int>()), r.at("m_ave").get<double>(),
                      r.at("t_star").get<double>(), r.at("phi_theta").get<double>(),
                      r.at("phi").get<double>(), r.at("refined_mean_1").get<double>(),
                      r.at("refined_var_1").get<double>()});
        }
    }
    scsv.close();

    json summary{{"axis", opt.axis},
                 {"points", keys},
                 {"files", json::array({spath.filename().string()})}};
    asl::io::write_sidecar(out_file(opt, ctx, "sweep", ".json"), summary, ctx.hash, cfg.seed,
                           "sweep");
    return 0;
}

void add_common(CLI::App* sub, cli_options& opt) {
    sub->add_option("--config", opt.config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "override the base seed");
    sub->add_option("--workers", opt.workers, "override the worker count");
    sub->add_option("--delta", opt.delta, "override the step size");
    sub->add_option("--reps", opt.reps, "override the repetition count");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive social learning laboratory"};
    app.require_subcommand(1);
    cli_options opt;

    CLI::App* sim = app.add_subcommand("simulate", "one seeded trajectory");
    CLI::App* ss = app.add_subcommand("steady-state", "descriptors and concentration data");
    CLI::App* ex = app.add_subcommand("exponents", "error exponents and decay curves");
    CLI::App* tr = app.add_subcommand("transient", "adaptation times and envelopes");
    CLI::App* ns = app.add_subcommand("nonstationary", "Markov-modulated environment runs");
    CLI::App* sw = app.add_subcommand("sweep", "grid sweep with cached descriptors");
    for (CLI::App* sub : {sim, ss, ex, tr, ns, sw}) add_common(sub, opt);
    sw->add_option("--axis", opt.axis, "sweep axis: delta | policy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const context ctx = make_context(opt);
        if (sim->parsed()) return cmd_simulate(opt, ctx);
        if (ss->parsed()) return cmd_steady_state(opt, ctx);
        if (ex->parsed()) return cmd_exponents(opt, ctx);
        if (tr->parsed()) return cmd_transient(opt, ctx);
        if (ns->parsed()) return cmd_nonstationary(opt, ctx);
        if (sw->parsed()) return cmd_sweep(opt, ctx);
        std::cerr << "asl_lab: no subcommand\n";
        return 2;
    } catch (const asl::io_error& e) {
        std::cerr << "asl_lab: " << e.what() << "\n";
        return 4;
    } catch (const asl::numerical_error& e) {
        std::cerr << "asl_lab: " << e.what() << "\n";
        return 3;
    } catch (const asl::config_error& e) {
        std::cerr << "asl_lab: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "asl_lab: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "asl_lab: unexpected error: " << e.what() << "\n";
        return 1;
    }
}
