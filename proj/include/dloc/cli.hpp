#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dloc/channel.hpp"
#include "dloc/config.hpp"
#include "dloc/daun.hpp"
#include "dloc/eval.hpp"
#include "dloc/parallel.hpp"
#include "dloc/refine.hpp"
#include "dloc/scene.hpp"
#include "dloc/snapshot_io.hpp"
#include "dloc/solver.hpp"

#ifndef DLOC_VERSION
#define DLOC_VERSION "0.1.0"
#endif

namespace dloc::cli {

namespace fs = std::filesystem;

/// What a run was asked to do; written to <out>/manifest.json before any
/// long computation starts.
struct RunManifest
{
    std::string subcommand;
    std::vector<std::pair<std::string, std::string>> config_paths;
    std::uint64_t seed = 0;
    fs::path output_dir;
    std::string tool_version = DLOC_VERSION;
    std::string config_fingerprint;

    json to_json() const
    {
        json paths = json::object();
        for (const auto& [k, v] : config_paths)
            paths[k] = v;
        return {{"subcommand", subcommand},
                {"config_paths", paths},
                {"seed", seed},
                {"output_dir", output_dir.string()},
                {"tool_version", tool_version},
                {"config_fingerprint", config_fingerprint}};
    }

    void write() const
    {
        fs::create_directories(output_dir);
        write_json_file(to_json(), output_dir / "manifest.json");
    }
};

/// Experiment file: see README for the schema. Relative paths resolve
/// against the experiment file's directory.
inline ExperimentConfig experiment_from_json(const json& j, const fs::path& base_dir)
{
    return detail::with_context("experiment", [&] {
        ExperimentConfig cfg;
        const auto& js = j.at("scene");
        json scene_json = js.is_string() ? read_json_file(base_dir / js.get<std::string>()) : js;
        cfg.scene = scene_from_json(scene_json);
        if (j.contains("channel"))
            cfg.channel = channel_from_json(j.at("channel"));
        else if (scene_json.contains("channel"))
            cfg.channel = channel_from_json(scene_json.at("channel"));
        cfg.snr_db = detail::get_or(j, "snr_db", cfg.snr_db);
        cfg.trials = detail::get_or(j, "trials", cfg.trials);
        cfg.iterations = detail::get_or(j, "iterations", cfg.iterations);
        cfg.seed = detail::get_or(j, "seed", cfg.seed);
        cfg.on_grid = detail::get_or(j, "on_grid", cfg.on_grid);
        cfg.submeter_radius = detail::get_or(j, "submeter_radius", cfg.submeter_radius);
        const int M = cfg.scene.num_stations();
        for (const auto& jm : j.at("methods")) {
            MethodSpec m;
            const auto solver = jm.at("solver").get<std::string>();
            if (solver == "padmm") {
                m.solver = SolverKind::padmm;
                if (jm.contains("params_file"))
                    m.params = params_from_json(read_json_file(base_dir / jm.at("params_file").get<std::string>()), M);
                else
                    m.params = params_from_json(jm.value("params", json::object()), M);
            } else if (solver == "daun") {
                m.solver = SolverKind::daun;
                m.model_path = jm.at("model").get<std::string>();
                m.model = std::make_shared<DaunModel>(load_model(base_dir / m.model_path, {}, nullptr));
            } else {
                throw ConfigError("experiment: unknown solver '" + solver + "'");
            }
            m.refine = detail::get_or(jm, "refine", false);
            m.min_active = detail::get_or(jm, "min_active", 3);
            m.name = detail::get_or(jm, "name", solver + (m.refine ? std::string("-r") : std::string()));
            cfg.methods.push_back(std::move(m));
        }
        return cfg;
    });
}

inline ChannelConfig resolve_channel(const std::string& channel_path, const json& scene_json)
{
    if (!channel_path.empty())
        return channel_from_json(read_json_file(channel_path));
    if (scene_json.contains("channel"))
        return channel_from_json(scene_json.at("channel"));
    return {};
}

inline std::vector<int> parse_int_list(const std::string& s)
{
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) {
            try {
                out.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                throw ConfigError("bad integer list '" + s + "'");
            }
        }
    if (out.empty())
        throw ConfigError("empty integer list");
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct SceneValidateArgs
{
    std::string scene;
    std::string out;
};

inline int cmd_scene_validate(const SceneValidateArgs& a, std::ostream& out)
{
    const json sj = read_json_file(a.scene);
    const Scene scene = scene_from_json(sj);
    if (!a.out.empty())
        RunManifest{"scene validate", {{"scene", a.scene}}, 0, a.out, DLOC_VERSION, fingerprint(scene_to_json(scene))}
            .write();
    out << "stations: " << scene.num_stations() << '\n';
    out << "grid: " << scene.area.grid_x << " x " << scene.area.grid_y << " (K = " << scene.area.num_cells()
        << ", spacing " << scene.area.spacing_x() << " x " << scene.area.spacing_y() << " m)\n";
    bool ok = true;
    for (std::size_t m = 0; m < scene.stations.size(); ++m) {
        const auto& bs = scene.stations[m];
        out << "station " << bs.id << ": N = " << bs.num_antennas << ", L = " << scene.angle_grids[m].angles.size()
            << ", A " << bs.num_antennas << "x" << scene.area.num_cells() << ", B " << bs.num_antennas << "x"
            << scene.angle_grids[m].angles.size() << ", broadside " << bs.broadside << " rad, field of view: ";
        try {
            build_location_dictionary(bs, scene.area);
            out << "ok\n";
        } catch (const OutOfFieldError& e) {
            out << "FAIL (" << e.what() << ")\n";
            ok = false;
        }
    }
    out << "fingerprint: " << scene_fingerprint(scene) << '\n';
    if (!ok)
        throw ConfigError("scene has grid points outside a station's field of view");
    return 0;
}

struct SimulateArgs
{
    std::string scene, channel, out = ".", format = "bin";
    double snr_db = 10.0;
    int count = 1;
    std::uint64_t seed = 1;
    bool noiseless = false;
    bool on_grid = false;
};

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out)
{
    const json sj = read_json_file(a.scene);
    const Scene scene = scene_from_json(sj);
    const ChannelConfig ch = resolve_channel(a.channel, sj);
    if (a.count < 1)
        throw ConfigError("simulate: --count must be >= 1");
    if (a.format != "bin" && a.format != "csv")
        throw ConfigError("simulate: --format must be bin or csv");
    const json cfg{{"scene", scene_to_json(scene)}, {"channel", channel_to_json(ch)}, {"snr_db", a.snr_db},
                   {"count", a.count}, {"noiseless", a.noiseless}, {"on_grid", a.on_grid}, {"format", a.format}};
    RunManifest man{"simulate", {{"scene", a.scene}}, a.seed, a.out, DLOC_VERSION, fingerprint(cfg)};
    if (!a.channel.empty())
        man.config_paths.emplace_back("channel", a.channel);
    man.write();

    SnapshotSet set;
    for (const auto& bs : scene.stations)
        set.antennas.push_back(bs.num_antennas);
    for (int r = 0; r < a.count; ++r) {
        Rng rng(derive_seed(a.seed, std::uint64_t(r)));
        const Point2 p = detail::draw_position(scene.area, a.on_grid, rng);
        const auto real = sample_channel(scene, p, ch, rng);
        set.records.push_back({synthesize(real, scene, a.snr_db, rng, a.noiseless), p});
    }
    const fs::path file = fs::path(a.out) / (a.format == "bin" ? "snapshots.bin" : "snapshots.csv");
    if (a.format == "bin")
        write_snapshots_binary(set, file);
    else
        write_snapshots_csv(set, file);
    out << "wrote " << set.records.size() << " snapshots to " << file.string() << '\n';
    return 0;
}

struct SolveArgs
{
    std::string scene, input, params, model, out = ".";
    int iters = 100;
    int record = -1; // all
    bool refine = false;
    int min_active = 3;
};

inline int cmd_solve(const SolveArgs& a, std::ostream& out)
{
    const json sj = read_json_file(a.scene);
    const Scene scene = scene_from_json(sj);
    const std::string scene_fp = scene_fingerprint(scene);
    const int M = scene.num_stations();
    if (!a.params.empty() && !a.model.empty())
        throw ConfigError("solve: give either --params or --model, not both");
    if (a.iters < 1)
        throw ConfigError("solve: --iters must be >= 1");

    AdmmParams params = AdmmParams::defaults(M);
    std::optional<DaunModel> model;
    json cfg{{"scene", scene_to_json(scene)}, {"refine", a.refine}, {"min_active", a.min_active}, {"record", a.record}};
    if (!a.model.empty()) {
        model = load_model(a.model, scene_fp);
        cfg["model"] = model_to_json(*model);
    } else {
        if (!a.params.empty())
            params = params_from_json(read_json_file(a.params), M);
        cfg["params"] = params_to_json(params);
        cfg["iterations"] = a.iters;
    }
    RunManifest man{"solve", {{"scene", a.scene}, {"input", a.input}}, 0, a.out, DLOC_VERSION, fingerprint(cfg)};
    if (!a.params.empty())
        man.config_paths.emplace_back("params", a.params);
    if (!a.model.empty())
        man.config_paths.emplace_back("model", a.model);
    man.write();

    const SnapshotSet set = read_snapshots(a.input);
    if (int(set.antennas.size()) != M)
        throw ConfigError("solve: snapshot file has " + std::to_string(set.antennas.size()) + " stations, scene has "
                          + std::to_string(M));
    for (int m = 0; m < M; ++m)
        if (set.antennas[std::size_t(m)] != scene.stations[std::size_t(m)].num_antennas)
            throw ConfigError("solve: antenna counts in the snapshot file do not match the scene");
    std::vector<std::size_t> records;
    if (a.record < 0)
        for (std::size_t r = 0; r < set.records.size(); ++r)
            records.push_back(r);
    else if (std::size_t(a.record) < set.records.size())
        records.push_back(std::size_t(a.record));
    else
        throw ConfigError("solve: --record out of range");

    const Dictionary dict = build_dictionary(scene).normalized();
    const fs::path dir(a.out);
    std::ofstream est(dir / "estimate.csv"), nm(dir / "nmse.csv"), rows(dir / "row_norms.csv");
    std::ofstream clusters;
    if (a.refine)
        clusters.open(dir / "clusters.csv");
    for (auto* f : {&est, &nm, &rows})
        *f << std::setprecision(12);
    est << "record,method,index,x,y,true_x,true_y,error_m,in_active_set,fallback\n";
    nm << "record,iteration,nmse,primal_residual\n";
    rows << "record,index,x,y,row_norm\n";
    if (a.refine)
        clusters << std::setprecision(12) << "record,index,high,low,high_mean,low_mean,sweeps\n";

    for (std::size_t r : records) {
        const auto& rec = set.records[r];
        const SolveResult res = model ? forward(*model, rec.signal, dict) : solve(rec.signal, dict, params, a.iters);
        const auto X = res.state.X(dict.num_cells());
        const auto e = a.refine ? select_refined(X, scene.area, a.min_active) : select_naive(X, scene.area);
        est << r << ',' << to_string(e.method) << ',' << e.index << ',' << e.position.x << ',' << e.position.y << ','
            << rec.true_position.x << ',' << rec.true_position.y << ',' << distance(e.position, rec.true_position)
            << ',' << int(e.in_active_set) << ',' << int(e.fallback) << '\n';
        for (std::size_t i = 0; i < res.trace.size(); ++i)
            nm << r << ',' << i + 1 << ',' << res.trace.nmse[i] << ',' << res.trace.primal_residual[i] << '\n';
        for (Index k = 0; k < X.rows(); ++k) {
            const Point2 p = scene.area.point(k);
            rows << r << ',' << k << ',' << p.x << ',' << p.y << ',' << X.row(k).norm() << '\n';
        }
        if (a.refine) {
            const auto cs = cluster_rows(X);
            for (std::size_t k = 0; k < cs.size(); ++k) {
                auto ids = [](const std::vector<int>& v) {
                    std::string s;
                    for (int i : v)
                        s += (s.empty() ? "" : ";") + std::to_string(i + 1);
                    return s;
                };
                clusters << r << ',' << k << ',' << ids(cs[k].high) << ',' << ids(cs[k].low) << ','
                         << cs[k].high_mean << ',' << cs[k].low_mean << ',' << cs[k].sweeps << '\n';
            }
        }
        out << "record " << r << ": index " << e.index << " at (" << e.position.x << ", " << e.position.y
            << "), error " << distance(e.position, rec.true_position) << " m, final NMSE "
            << (res.trace.size() ? res.trace.nmse.back() : 0.0) << '\n';
    }
    return 0;
}

struct TrainArgs
{
    std::string scene, channel, train_config, init_model, out = ".";
    int layers = 10;
    int jobs = 1;
    bool quiet = false;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out)
{
    const json sj = read_json_file(a.scene);
    const Scene scene = scene_from_json(sj);
    const ChannelConfig ch = resolve_channel(a.channel, sj);
    TrainConfig tc = a.train_config.empty() ? TrainConfig{} : train_config_from_json(read_json_file(a.train_config));
    tc.jobs = a.jobs;
    if (a.layers < 1)
        throw ConfigError("train: --layers must be >= 1");

    DaunModel init;
    if (!a.init_model.empty())
        init = load_model(a.init_model, scene_fingerprint(scene));
    const json cfg{{"scene", scene_to_json(scene)}, {"channel", channel_to_json(ch)}, {"train", train_config_to_json(tc)},
                   {"layers", a.layers}, {"init_model", a.init_model.empty() ? json(nullptr) : model_to_json(init)}};
    RunManifest man{"train", {{"scene", a.scene}}, tc.seed, a.out, DLOC_VERSION, fingerprint(cfg)};
    if (!a.channel.empty())
        man.config_paths.emplace_back("channel", a.channel);
    if (!a.train_config.empty())
        man.config_paths.emplace_back("train_config", a.train_config);
    man.write();

    const Dictionary dict = build_dictionary(scene).normalized();
    const auto gen = make_sample_generator(scene, ch, tc.snr_db_min, tc.snr_db_max);
    std::ofstream curve(fs::path(a.out) / "training.csv");
    curve << std::setprecision(12) << "layers,epoch,train_loss,validation_loss\n";
    DaunModel model = train_incremental(init, gen, dict, a.layers, tc, [&](int layers, int epoch, double tl, double vl) {
        curve << layers << ',' << epoch << ',' << tl << ',' << vl << '\n';
        if (!a.quiet)
            out << "layers " << layers << " epoch " << epoch << ": train " << tl << ", validation " << vl << '\n';
    });
    model.scene_fingerprint = scene_fingerprint(scene);
    save_model(model, fs::path(a.out) / "model.json");
    out << "saved " << model.num_layers() << "-layer model (" << model.num_parameters() << " parameters) to "
        << (fs::path(a.out) / "model.json").string() << '\n';
    return 0;
}

struct EvalArgs
{
    std::string experiment, out = ".";
    int jobs = 0; // 0: all cores
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out)
{
    const fs::path exp_path(a.experiment);
    const json ej = read_json_file(exp_path);
    ExperimentConfig cfg = experiment_from_json(ej, exp_path.parent_path());
    cfg.jobs = a.jobs > 0 ? a.jobs : default_jobs();

    // Fail before any trial runs (and before the manifest) on a model/scene mismatch.
    const std::string scene_fp = scene_fingerprint(cfg.scene);
    for (const auto& m : cfg.methods)
        if (m.solver == SolverKind::daun && m.model->scene_fingerprint != scene_fp)
            throw ConfigError("method " + m.name + ": model fingerprint " + m.model->scene_fingerprint
                              + " does not match scene fingerprint " + scene_fp);

    RunManifest{"eval", {{"experiment", a.experiment}}, cfg.seed, a.out, DLOC_VERSION,
                fingerprint(experiment_to_json(cfg))}
        .write();
    const McReport rep = run_monte_carlo(cfg);
    const fs::path dir(a.out);
    write_report_csv(rep, dir / "report.csv");
    write_nmse_csv(rep, dir / "nmse.csv");
    write_trials_csv(rep, dir / "trials.csv");
    write_json_file(report_to_json(rep), dir / "report.json");
    out << std::setprecision(4);
    for (const auto& r : rep.rows)
        out << r.method << " @ " << r.snr_db << " dB: MSE " << r.mse << " m^2, cell-hit " << r.cell_hit_prob
            << ", median final NMSE " << r.median_final_nmse << '\n';
    return 0;
}

struct BenchArgs
{
    std::string scene, out = ".", grids = "12,16,20,24,28,32", angles = "32", antennas = "16,32", mode = "both";
    int repeats = 5;
    int rounds = 2;
    std::uint64_t seed = 1;
};

inline int cmd_bench(const BenchArgs& a, std::ostream& out)
{
    BenchConfig bc;
    bc.scene = scene_from_json(read_json_file(a.scene));
    bc.grid_sizes = parse_int_list(a.grids);
    bc.angle_counts = parse_int_list(a.angles);
    bc.antenna_counts = parse_int_list(a.antennas);
    bc.repeats = a.repeats;
    bc.rounds = a.rounds;
    bc.seed = a.seed;
    if (a.mode == "normal_equations")
        bc.modes = {ApplyMode::normal_equations};
    else if (a.mode == "matrix_free")
        bc.modes = {ApplyMode::matrix_free};
    else if (a.mode != "both")
        throw ConfigError("bench: --mode must be both, normal_equations or matrix_free");
    if (bc.repeats < 1 || bc.rounds < 1)
        throw ConfigError("bench: --repeats and --rounds must be >= 1");

    const json cfg{{"scene", scene_to_json(bc.scene)}, {"grids", bc.grid_sizes}, {"angles", bc.angle_counts},
                   {"antennas", bc.antenna_counts}, {"repeats", bc.repeats}, {"rounds", bc.rounds}, {"mode", a.mode}};
    RunManifest{"bench", {{"scene", a.scene}}, a.seed, a.out, DLOC_VERSION, fingerprint(cfg)}.write();
    const BenchReport rep = bench_iteration_scaling(bc);
    write_bench_csv(rep, fs::path(a.out) / "bench.csv");
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    write_json_file({{"k_exponent_normal_equations", num(rep.k_exponent)},
                     {"k_exponent_matrix_free", num(rep.k_exponent_matrix_free)},
                     {"antenna_doubling_ratio", num(rep.antenna_doubling_ratio)}},
                    fs::path(a.out) / "bench.json");
    out << "per-round time ~ K^" << rep.k_exponent << " (normal equations), K^" << rep.k_exponent_matrix_free
        << " (matrix free); doubling N scales time by " << rep.antenna_doubling_ratio << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Exit codes: 0 success, 1 usage error, 2 runtime or configuration error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Grid-based direct localization: scene checks, simulation, ADMM / unfolded-ADMM solving, training "
                 "and Monte Carlo evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", DLOC_VERSION);

    SceneValidateArgs sv;
    auto* scene_cmd = app.add_subcommand("scene", "Scene utilities");
    scene_cmd->require_subcommand(1);
    auto* validate = scene_cmd->add_subcommand("validate", "Print derived sizes and field-of-view checks");
    validate->add_option("--scene", sv.scene, "Scene file (JSON)")->required()->check(CLI::ExistingFile);
    validate->add_option("--out", sv.out, "Optional output directory for the run manifest");

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Generate noisy snapshots");
    sim->add_option("--scene", sa.scene, "Scene file")->required()->check(CLI::ExistingFile);
    sim->add_option("--channel", sa.channel, "Channel config (defaults to the scene's channel block)")
        ->check(CLI::ExistingFile);
    sim->add_option("--snr-db", sa.snr_db, "SNR in dB");
    sim->add_option("--count", sa.count, "Number of snapshots");
    sim->add_option("--seed", sa.seed, "Master seed");
    sim->add_option("--out", sa.out, "Output directory");
    sim->add_option("--format", sa.format, "bin or csv")->check(CLI::IsMember({"bin", "csv"}));
    sim->add_flag("--noiseless", sa.noiseless, "Suppress receiver noise");
    sim->add_flag("--on-grid", sa.on_grid, "Draw positions from grid points");

    SolveArgs so;
    auto* sol = app.add_subcommand("solve", "Run P-ADMM or a trained model on snapshots");
    sol->add_option("--scene", so.scene, "Scene file")->required()->check(CLI::ExistingFile);
    sol->add_option("--input", so.input, "Snapshot file (binary or CSV)")->required()->check(CLI::ExistingFile);
    sol->add_option("--params", so.params, "ADMM parameter file")->check(CLI::ExistingFile);
    sol->add_option("--model", so.model, "Trained model file (replaces --params/--iters)")->check(CLI::ExistingFile);
    sol->add_option("--iters", so.iters, "ADMM iterations");
    sol->add_option("--record", so.record, "Record index (default: all)");
    sol->add_flag("--refine", so.refine, "Use position refinement");
    sol->add_option("--min-active", so.min_active, "Minimum active stations for refinement");
    sol->add_option("--out", so.out, "Output directory");

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "Incrementally train an unfolded network");
    tr->add_option("--scene", ta.scene, "Scene file")->required()->check(CLI::ExistingFile);
    tr->add_option("--channel", ta.channel, "Channel config")->check(CLI::ExistingFile);
    tr->add_option("--train-config", ta.train_config, "Training config")->check(CLI::ExistingFile);
    tr->add_option("--init-model", ta.init_model, "Warm-start model")->check(CLI::ExistingFile);
    tr->add_option("--layers", ta.layers, "Target number of layers");
    tr->add_option("--jobs", ta.jobs, "Threads for gradient probes");
    tr->add_option("--out", ta.out, "Output directory");
    tr->add_flag("--quiet", ta.quiet, "No per-epoch progress");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Monte Carlo evaluation");
    ev->add_option("--experiment", ea.experiment, "Experiment file")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", ea.out, "Output directory");
    ev->add_option("--jobs", ea.jobs, "Worker threads (default: all cores)");

    BenchArgs ba;
    auto* be = app.add_subcommand("bench", "Per-iteration timing scaling");
    be->add_option("--scene", ba.scene, "Scene file (stations and area bounds)")->required()->check(CLI::ExistingFile);
    be->add_option("--grids", ba.grids, "Comma-separated grid sizes (grid x grid)");
    be->add_option("--angles", ba.angles, "Comma-separated angle-grid sizes");
    be->add_option("--antennas", ba.antennas, "Comma-separated antenna counts");
    be->add_option("--repeats", ba.repeats, "Timed repeats (median is reported)");
    be->add_option("--rounds", ba.rounds, "ADMM rounds per repeat");
    be->add_option("--mode", ba.mode, "both, normal_equations or matrix_free");
    be->add_option("--seed", ba.seed, "Seed");
    be->add_option("--out", ba.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << DLOC_VERSION << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        if (validate->parsed())
            return cmd_scene_validate(sv, out);
        if (sim->parsed())
            return cmd_simulate(sa, out);
        if (sol->parsed())
            return cmd_solve(so, out);
        if (tr->parsed())
            return cmd_train(ta, out);
        if (ev->parsed())
            return cmd_eval(ea, out);
        if (be->parsed())
            return cmd_bench(ba, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    err << app.help();
    return 1;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    std::vector<const char*> argv{"dloc"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return run(int(argv.size()), argv.data(), out, err);
}

} // namespace dloc::cli
