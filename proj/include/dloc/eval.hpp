#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dloc/channel.hpp"
#include "dloc/common.hpp"
#include "dloc/config.hpp"
#include "dloc/daun.hpp"
#include "dloc/parallel.hpp"
#include "dloc/refine.hpp"
#include "dloc/scene.hpp"
#include "dloc/solver.hpp"

namespace dloc {

enum class SolverKind
{
    padmm, // fixed parameters, `iterations` rounds
    daun   // trained unfolded network, one round per layer
};

struct MethodSpec
{
    std::string name;
    SolverKind solver = SolverKind::padmm;
    bool refine = false;
    int min_active = 3;
    AdmmParams params;                       // padmm
    std::shared_ptr<const DaunModel> model;  // daun
    std::string model_path;                  // informational
};

struct ExperimentConfig
{
    Scene scene;
    ChannelConfig channel;
    std::vector<double> snr_db{-5.0, 0.0, 5.0, 10.0, 15.0, 20.0};
    int trials = 200;
    int iterations = 10;
    std::uint64_t seed = 1;
    bool on_grid = false;
    double submeter_radius = 1.0;
    std::vector<MethodSpec> methods;
    int jobs = 1;

    void validate() const
    {
        scene.validate();
        channel.validate();
        if (trials < 1)
            throw ConfigError("experiment: trials must be >= 1");
        if (iterations < 1)
            throw ConfigError("experiment: iterations must be >= 1");
        if (methods.empty())
            throw ConfigError("experiment: at least one method required");
        if (snr_db.empty())
            throw ConfigError("experiment: snr_db list is empty");
        for (const auto& m : methods) {
            if (m.solver == SolverKind::padmm)
                m.params.validate(scene.num_stations());
            else if (!m.model)
                throw ConfigError("experiment: method " + m.name + " needs a model");
        }
    }
};

struct MethodOutcome
{
    PositionEstimate estimate;
    double squared_error = 0.0;
    bool cell_hit = false;
    bool sub_meter = false;
    std::vector<double> nmse;
    double solve_seconds = 0.0;
};

struct TrialResult
{
    int trial = 0;
    double snr_db = 0.0;
    Point2 true_position;
    double y_energy = 0.0; // ||y||^2, used for ratio-of-means NMSE curves
    std::vector<MethodOutcome> methods; // same order as ExperimentConfig::methods
};

struct ReportRow
{
    std::string method;
    double snr_db = 0.0;
    int trials = 0;
    double mse = 0.0;
    double cell_hit_prob = 0.0;
    std::optional<double> sub_meter_prob; // only when grid spacing <= 1 m
    double median_final_nmse = 0.0;
    double mean_solve_seconds = 0.0;
    std::vector<double> nmse_curve; // E||y - Ax - Bz||^2 / E||y||^2 per iteration
};

struct McReport
{
    std::vector<ReportRow> rows; // method-major, then snr in config order
    std::vector<TrialResult> trials;
    std::vector<std::string> method_names;
    std::string config_fingerprint;
    double grid_spacing = 0.0;

    const ReportRow& row(const std::string& method, double snr_db) const
    {
        for (const auto& r : rows)
            if (r.method == method && r.snr_db == snr_db)
                return r;
        throw ConfigError("report: no row for " + method);
    }
};

inline double compute_mse(std::span<const double> errors_m)
{
    if (errors_m.empty())
        return 0.0;
    double s = 0.0;
    for (double e : errors_m)
        s += e * e;
    return s / double(errors_m.size());
}

/// Fraction of errors at or below radius_m.
inline double compute_hit_prob(std::span<const double> errors_m, double radius_m)
{
    if (errors_m.empty())
        return 0.0;
    const auto hits = std::count_if(errors_m.begin(), errors_m.end(), [&](double e) { return e <= radius_m; });
    return double(hits) / double(errors_m.size());
}

/// Position-error samples of one method at one SNR.
inline std::vector<double> errors_of(const McReport& rep, std::size_t method, double snr_db)
{
    std::vector<double> out;
    for (const auto& t : rep.trials)
        if (t.snr_db == snr_db)
            out.push_back(std::sqrt(t.methods[method].squared_error));
    return out;
}

namespace detail {

inline bool same_solver(const MethodSpec& a, const MethodSpec& b)
{
    if (a.solver != b.solver)
        return false;
    if (a.solver == SolverKind::daun)
        return a.model == b.model;
    return a.params.rho == b.params.rho && a.params.tau1 == b.params.tau1 && a.params.tau2 == b.params.tau2
        && a.params.weights == b.params.weights;
}

inline Point2 draw_position(const TargetArea& area, bool on_grid, Rng& rng)
{
    if (on_grid) {
        std::uniform_int_distribution<Index> k(0, area.num_cells() - 1);
        return area.point(k(rng));
    }
    std::uniform_real_distribution<double> ux(area.x_min, area.x_max);
    std::uniform_real_distribution<double> uy(area.y_min, area.y_max);
    const double x = ux(rng);
    return {x, uy(rng)};
}

inline double median(std::vector<double> v)
{
    if (v.empty())
        return std::nan("");
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(mid), v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1)
        return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + std::ptrdiff_t(mid));
    return 0.5 * (lo + hi);
}

} // namespace detail

inline json experiment_to_json(const ExperimentConfig& cfg)
{
    json methods = json::array();
    for (const auto& m : cfg.methods) {
        json jm{{"name", m.name},
                {"solver", m.solver == SolverKind::padmm ? "padmm" : "daun"},
                {"refine", m.refine},
                {"min_active", m.min_active}};
        if (m.solver == SolverKind::padmm)
            jm["params"] = params_to_json(m.params);
        else
            jm["model"] = model_to_json(*m.model);
        methods.push_back(jm);
    }
    return {{"scene", scene_to_json(cfg.scene)},
            {"channel", channel_to_json(cfg.channel)},
            {"snr_db", cfg.snr_db},
            {"trials", cfg.trials},
            {"iterations", cfg.iterations},
            {"seed", cfg.seed},
            {"on_grid", cfg.on_grid},
            {"submeter_radius", cfg.submeter_radius},
            {"methods", methods}};
}

/// Paired Monte Carlo: every method sees the same snapshot within a trial.
/// Trial t draws its position and channel from seed (master, t) and its noise
/// from (master, t, snr index), so the geometry is shared across SNR values.
inline McReport run_monte_carlo(const ExperimentConfig& cfg)
{
    cfg.validate();
    const std::string scene_fp = scene_fingerprint(cfg.scene);
    for (const auto& m : cfg.methods) {
        if (m.solver != SolverKind::daun)
            continue;
        if (m.model->scene_fingerprint != scene_fp)
            throw ConfigError("method " + m.name + ": model scene fingerprint " + m.model->scene_fingerprint
                              + " does not match experiment scene fingerprint " + scene_fp);
        if (m.model->num_stations() != cfg.scene.num_stations() || m.model->num_layers() < 1)
            throw ConfigError("method " + m.name + ": model does not fit the scene");
    }

    const Dictionary dict = build_dictionary(cfg.scene).normalized();
    const auto nsnr = cfg.snr_db.size();
    const auto nmethods = cfg.methods.size();

    // Methods that share a solver reuse its output within a trial.
    std::vector<std::size_t> source(nmethods);
    for (std::size_t i = 0; i < nmethods; ++i) {
        source[i] = i;
        for (std::size_t j = 0; j < i; ++j)
            if (detail::same_solver(cfg.methods[i], cfg.methods[j])) {
                source[i] = source[j];
                break;
            }
    }

    McReport rep;
    rep.grid_spacing = cfg.scene.area.spacing();
    rep.config_fingerprint = fingerprint(experiment_to_json(cfg));
    for (const auto& m : cfg.methods)
        rep.method_names.push_back(m.name);
    rep.trials.resize(nsnr * std::size_t(cfg.trials));

    parallel_for(rep.trials.size(), cfg.jobs, [&](std::size_t idx) {
        const std::size_t s = idx / std::size_t(cfg.trials);
        const int t = int(idx % std::size_t(cfg.trials));
        Rng geo(derive_seed(cfg.seed, std::uint64_t(t), 0));
        const Point2 p = detail::draw_position(cfg.scene.area, cfg.on_grid, geo);
        const auto ch = sample_channel(cfg.scene, p, cfg.channel, geo);
        Rng noise(derive_seed(cfg.seed, std::uint64_t(t), s + 1));
        const auto sig = synthesize(ch, cfg.scene, cfg.snr_db[s], noise);

        TrialResult tr;
        tr.trial = t;
        tr.snr_db = cfg.snr_db[s];
        tr.true_position = p;
        tr.y_energy = sig.y.squaredNorm();
        tr.methods.resize(nmethods);
        std::vector<std::optional<SolveResult>> solved(nmethods);
        std::vector<double> seconds(nmethods, 0.0);
        for (std::size_t i = 0; i < nmethods; ++i) {
            const auto& m = cfg.methods[i];
            const std::size_t src = source[i];
            if (!solved[src]) {
                const auto t0 = std::chrono::steady_clock::now();
                SolveOptions opt;
                opt.divergence_threshold = std::numeric_limits<double>::infinity();
                solved[src] = m.solver == SolverKind::padmm ? solve(sig, dict, m.params, cfg.iterations, opt)
                                                            : forward(*m.model, sig, dict, opt);
                seconds[src] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            }
            const auto& res = *solved[src];
            const auto X = res.state.X(dict.num_cells());
            auto& out = tr.methods[i];
            out.estimate = m.refine ? select_refined(X, cfg.scene.area, m.min_active) : select_naive(X, cfg.scene.area);
            const double err = distance(out.estimate.position, p);
            out.squared_error = err * err;
            out.cell_hit = err <= rep.grid_spacing;
            out.sub_meter = err <= cfg.submeter_radius;
            out.nmse = res.trace.nmse;
            out.solve_seconds = seconds[src];
        }
        rep.trials[idx] = std::move(tr);
    });

    const bool report_submeter = rep.grid_spacing <= 1.0;
    for (std::size_t i = 0; i < nmethods; ++i) {
        for (std::size_t s = 0; s < nsnr; ++s) {
            ReportRow row;
            row.method = cfg.methods[i].name;
            row.snr_db = cfg.snr_db[s];
            std::vector<double> errs, finals;
            std::vector<double> num;
            double den = 0.0, secs = 0.0;
            for (std::size_t t = 0; t < std::size_t(cfg.trials); ++t) {
                const auto& tr = rep.trials[s * std::size_t(cfg.trials) + t];
                const auto& mo = tr.methods[i];
                errs.push_back(std::sqrt(mo.squared_error));
                finals.push_back(mo.nmse.empty() ? std::nan("") : mo.nmse.back());
                if (num.size() < mo.nmse.size())
                    num.resize(mo.nmse.size(), 0.0);
                for (std::size_t k = 0; k < mo.nmse.size(); ++k)
                    num[k] += mo.nmse[k] * tr.y_energy;
                den += tr.y_energy;
                secs += mo.solve_seconds;
            }
            row.trials = cfg.trials;
            row.mse = compute_mse(errs);
            row.cell_hit_prob = compute_hit_prob(errs, rep.grid_spacing);
            if (report_submeter)
                row.sub_meter_prob = compute_hit_prob(errs, cfg.submeter_radius);
            row.median_final_nmse = detail::median(finals);
            row.mean_solve_seconds = secs / cfg.trials;
            for (double v : num)
                row.nmse_curve.push_back(den > 0.0 ? v / den : 0.0);
            rep.rows.push_back(std::move(row));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Report files. Timing columns are always last.
// ---------------------------------------------------------------------------

inline void write_report_csv(const McReport& rep, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << std::setprecision(12);
    out << "method,snr_db,trials,mse_m2,cell_hit_prob,sub_meter_prob,median_final_nmse,mean_solve_seconds\n";
    for (const auto& r : rep.rows) {
        out << r.method << ',' << r.snr_db << ',' << r.trials << ',' << r.mse << ',' << r.cell_hit_prob << ',';
        if (r.sub_meter_prob)
            out << *r.sub_meter_prob;
        out << ',' << r.median_final_nmse << ',' << r.mean_solve_seconds << '\n';
    }
}

inline void write_nmse_csv(const McReport& rep, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << std::setprecision(12) << "method,snr_db,iteration,nmse\n";
    for (const auto& r : rep.rows)
        for (std::size_t k = 0; k < r.nmse_curve.size(); ++k)
            out << r.method << ',' << r.snr_db << ',' << k + 1 << ',' << r.nmse_curve[k] << '\n';
}

inline void write_trials_csv(const McReport& rep, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << std::setprecision(12)
        << "trial,snr_db,true_x,true_y,method,index,est_x,est_y,squared_error,cell_hit,sub_meter,fallback,final_nmse,"
           "solve_seconds\n";
    for (const auto& t : rep.trials)
        for (std::size_t i = 0; i < t.methods.size(); ++i) {
            const auto& m = t.methods[i];
            out << t.trial << ',' << t.snr_db << ',' << t.true_position.x << ',' << t.true_position.y << ','
                << rep.method_names[i] << ',' << m.estimate.index << ',' << m.estimate.position.x << ','
                << m.estimate.position.y << ',' << m.squared_error << ',' << int(m.cell_hit) << ','
                << int(m.sub_meter) << ',' << int(m.estimate.fallback) << ','
                << (m.nmse.empty() ? 0.0 : m.nmse.back()) << ',' << m.solve_seconds << '\n';
        }
}

inline json report_to_json(const McReport& rep)
{
    json rows = json::array();
    for (const auto& r : rep.rows) {
        json jr{{"method", r.method},
                {"snr_db", r.snr_db},
                {"trials", r.trials},
                {"mse_m2", r.mse},
                {"cell_hit_prob", r.cell_hit_prob},
                {"median_final_nmse", r.median_final_nmse},
                {"mean_solve_seconds", r.mean_solve_seconds}};
        jr["sub_meter_prob"] = r.sub_meter_prob ? json(*r.sub_meter_prob) : json(nullptr);
        rows.push_back(jr);
    }
    return {{"config_fingerprint", rep.config_fingerprint},
            {"grid_spacing_m", rep.grid_spacing},
            {"sub_meter_reported", rep.grid_spacing <= 1.0},
            {"rows", rows}};
}

// ---------------------------------------------------------------------------
// Per-iteration timing scaling
// ---------------------------------------------------------------------------

struct BenchConfig
{
    Scene scene;                              // stations and area bounds; grid and angles are overridden
    std::vector<int> grid_sizes{12, 16, 20, 24, 28, 32};
    std::vector<int> angle_counts{32};
    std::vector<int> antenna_counts{16, 32};
    int repeats = 5;
    int rounds = 2;                           // ADMM rounds per timed repeat
    std::vector<ApplyMode> modes{ApplyMode::normal_equations, ApplyMode::matrix_free};
    std::uint64_t seed = 1;
};

inline const char* to_string(ApplyMode m) { return m == ApplyMode::matrix_free ? "matrix_free" : "normal_equations"; }

struct BenchRow
{
    std::string mode;
    int grid = 0;
    Index cells = 0;
    int angles = 0;
    int antennas = 0;
    Index total_antennas = 0;
    double median_seconds = 0.0; // per ADMM round
};

struct BenchReport
{
    std::vector<BenchRow> rows;
    double k_exponent = 0.0;             // normal_equations, first angle / antenna setting
    double k_exponent_matrix_free = 0.0;
    double antenna_doubling_ratio = 0.0; // normal_equations, largest grid, N vs 2N (when both are present)
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y)
{
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n)
        return std::nan("");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= double(n);
    my /= double(n);
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

inline BenchReport bench_iteration_scaling(const BenchConfig& cfg)
{
    BenchReport rep;
    Rng rng(cfg.seed);
    for (auto mode : cfg.modes)
        for (int N : cfg.antenna_counts)
            for (int L : cfg.angle_counts)
                for (int g : cfg.grid_sizes) {
                    Scene s = cfg.scene;
                    s.area.grid_x = s.area.grid_y = g;
                    for (std::size_t m = 0; m < s.stations.size(); ++m) {
                        s.stations[m].num_antennas = N;
                        s.angle_grids[m] = AngleGrid::uniform(s.stations[m].id, L);
                    }
                    const Dictionary dict = build_dictionary(s).normalized();
                    std::uniform_real_distribution<double> ux(s.area.x_min, s.area.x_max);
                    const auto ch = sample_channel(s, {ux(rng), ux(rng)}, ChannelConfig{}, rng);
                    const auto sig = synthesize(ch, s, 10.0, rng);
                    const auto params = AdmmParams::defaults(s.num_stations());
                    SolveOptions opt;
                    opt.mode = mode;
                    AdmmState st = AdmmState::zeros(dict);
                    admm_round(st, params, dict, sig.y, opt); // warm-up
                    std::vector<double> times;
                    for (int r = 0; r < cfg.repeats; ++r) {
                        const auto t0 = std::chrono::steady_clock::now();
                        for (int i = 0; i < cfg.rounds; ++i)
                            admm_round(st, params, dict, sig.y, opt);
                        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                                        / cfg.rounds);
                    }
                    rep.rows.push_back({to_string(mode), g, dict.num_cells(), L, N, dict.total_antennas(),
                                        detail::median(times)});
                }

    auto fit = [&](const char* mode) {
        std::vector<double> ks, ts;
        for (const auto& r : rep.rows)
            if (r.mode == mode && r.angles == cfg.angle_counts.front() && r.antennas == cfg.antenna_counts.front()) {
                ks.push_back(double(r.cells));
                ts.push_back(r.median_seconds);
            }
        return loglog_slope(ks, ts);
    };
    rep.k_exponent = fit("normal_equations");
    rep.k_exponent_matrix_free = fit("matrix_free");

    const int n0 = cfg.antenna_counts.front();
    const int gmax = *std::max_element(cfg.grid_sizes.begin(), cfg.grid_sizes.end());
    double t1 = 0, t2 = 0;
    for (const auto& r : rep.rows)
        if (r.mode == "normal_equations" && r.grid == gmax && r.angles == cfg.angle_counts.front()) {
            if (r.antennas == n0)
                t1 = r.median_seconds;
            if (r.antennas == 2 * n0)
                t2 = r.median_seconds;
        }
    rep.antenna_doubling_ratio = (t1 > 0 && t2 > 0) ? t2 / t1 : std::nan("");
    return rep;
}

inline void write_bench_csv(const BenchReport& rep, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << std::setprecision(8) << "mode,grid,K,L_m,N_m,sum_N,median_seconds_per_round\n";
    for (const auto& r : rep.rows)
        out << r.mode << ',' << r.grid << ',' << r.cells << ',' << r.angles << ',' << r.antennas << ','
            << r.total_antennas << ',' << r.median_seconds << '\n';
}

} // namespace dloc
