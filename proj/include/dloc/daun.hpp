#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dloc/channel.hpp"
#include "dloc/common.hpp"
#include "dloc/parallel.hpp"
#include "dloc/scene.hpp"
#include "dloc/solver.hpp"

namespace dloc {

/// Per-layer (rho, tau1, tau2), stored as logarithms so the realized values
/// are positive for any parameter vector.
struct LayerParams
{
    double log_rho = std::log(5.0);
    double log_tau1 = std::log(0.5);
    double log_tau2 = std::log(0.5);

    double rho() const { return std::exp(log_rho); }
    double tau1() const { return std::exp(log_tau1); }
    double tau2() const { return std::exp(log_tau2); }

    static LayerParams from(double rho, double tau1, double tau2)
    {
        return {std::log(rho), std::log(tau1), std::log(tau2)};
    }

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Summary of one incremental training stage.
struct StageRecord
{
    int layers = 0;
    int epochs = 0;
    double learning_rate = 0.0;
    double initial_validation_loss = 0.0;
    double final_validation_loss = 0.0;
    bool improved = false;
    std::string init; // how the appended layer was seeded: default, copy, small or identity
    std::vector<double> validation_curve; // after each epoch
    std::vector<double> train_curve;      // mean batch loss per epoch
};

/// I unrolled ADMM rounds with untied (rho, tau1, tau2) and shared w_m.
/// Parameter vector order: layer 0 (log_rho, log_tau1, log_tau2), layer 1, ...,
/// then log_w_1..log_w_M. Its length is 3 I + M.
struct DaunModel
{
    std::vector<LayerParams> layers;
    std::vector<double> log_w;
    std::string scene_fingerprint;
    std::vector<StageRecord> history;

    int num_layers() const { return int(layers.size()); }
    int num_stations() const { return int(log_w.size()); }
    Index num_parameters() const { return 3 * Index(layers.size()) + Index(log_w.size()); }

    std::vector<double> weights() const
    {
        std::vector<double> w(log_w.size());
        std::transform(log_w.begin(), log_w.end(), w.begin(), [](double v) { return std::exp(v); });
        return w;
    }

    AdmmParams layer_params(int i) const
    {
        const auto& l = layers[std::size_t(i)];
        return {l.rho(), l.tau1(), l.tau2(), weights()};
    }

    RVec parameters() const
    {
        RVec p(num_parameters());
        Index j = 0;
        for (const auto& l : layers) {
            p[j++] = l.log_rho;
            p[j++] = l.log_tau1;
            p[j++] = l.log_tau2;
        }
        for (double w : log_w)
            p[j++] = w;
        return p;
    }

    void set_parameters(const RVec& p)
    {
        if (p.size() != num_parameters())
            throw ConfigError("daun: parameter vector has wrong length");
        Index j = 0;
        for (auto& l : layers) {
            l.log_rho = p[j++];
            l.log_tau1 = p[j++];
            l.log_tau2 = p[j++];
        }
        for (auto& w : log_w)
            w = p[j++];
    }

    std::string parameter_name(Index j) const
    {
        static const char* names[] = {"log_rho", "log_tau1", "log_tau2"};
        const Index layer_params = 3 * Index(layers.size());
        if (j < layer_params)
            return "layer" + std::to_string(j / 3 + 1) + "." + names[j % 3];
        return "log_w" + std::to_string(j - layer_params + 1);
    }

    /// Every layer set to the same fixed parameters.
    static DaunModel tied(const AdmmParams& p, int num_layers)
    {
        DaunModel m;
        m.layers.assign(std::size_t(num_layers), LayerParams::from(p.rho, p.tau1, p.tau2));
        for (double w : p.weights)
            m.log_w.push_back(std::log(w));
        return m;
    }
};

/// Runs one ADMM round per layer from the zero state. Zero layers yields the
/// zero state and an empty trace.
inline SolveResult forward(const DaunModel& model, const ReceivedSignal& sig, const Dictionary& dict,
                           const SolveOptions& opt = {})
{
    if (model.num_stations() != dict.num_stations())
        throw ConfigError("daun forward: model has " + std::to_string(model.num_stations()) + " station weights, scene has "
                          + std::to_string(dict.num_stations()));
    SolveResult res{AdmmState::zeros(dict), {}};
    for (int i = 0; i < model.num_layers(); ++i) {
        try {
            admm_round(res.state, model.layer_params(i), dict, sig.y, opt, &res.trace);
        } catch (const NumericalError& e) {
            throw NumericalError("daun layer " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return res;
}

/// 1 + sigmoid(-snr_db): low-SNR samples weigh up to twice as much.
inline double snr_weight(double snr_db)
{
    if (snr_db >= 0.0)
        return 1.0 + std::exp(-snr_db) / (1.0 + std::exp(-snr_db));
    return 1.0 + 1.0 / (1.0 + std::exp(snr_db));
}

/// SNR-weighted residual energy (1 + sigmoid(-snr_db)) ||y - A x - B z||^2.
inline double loss(const CVec& y, const CVec& x, const CVec& z, double snr_db, const Dictionary& dict)
{
    return snr_weight(snr_db) * (y - apply_location(dict, x) - apply_angle(dict, z)).squaredNorm();
}

inline double sample_loss(const DaunModel& model, const ReceivedSignal& sig, const Dictionary& dict)
{
    // Training evaluates the loss directly, so the divergence guard is left off.
    SolveOptions opt;
    opt.divergence_threshold = std::numeric_limits<double>::infinity();
    const auto res = forward(model, sig, dict, opt);
    return loss(sig.y, res.state.x, res.state.z, sig.snr_db, dict);
}

inline double batch_loss(const DaunModel& model, std::span<const ReceivedSignal> batch, const Dictionary& dict)
{
    if (batch.empty())
        throw ConfigError("batch_loss: empty batch");
    double sum = 0.0;
    for (const auto& s : batch)
        sum += sample_loss(model, s, dict);
    return sum / double(batch.size());
}

/// Central finite differences of the batch-mean loss with respect to every
/// log-parameter. Probes may run on `jobs` threads; the result does not
/// depend on the thread count.
inline RVec grad_fd(const DaunModel& model, std::span<const ReceivedSignal> batch, const Dictionary& dict,
                    double fd_step = 1e-3, int jobs = 1)
{
    if (!(fd_step > 0.0))
        throw ConfigError("grad_fd: fd_step must be positive");
    if (batch.empty())
        throw ConfigError("grad_fd: empty batch");
    const RVec theta = model.parameters();
    RVec grad(theta.size());
    parallel_for(std::size_t(theta.size()), jobs, [&](std::size_t j) {
        DaunModel probe = model;
        probe.history.clear();
        RVec t = theta;
        auto eval = [&](double delta) {
            t[Index(j)] = theta[Index(j)] + delta;
            probe.set_parameters(t);
            double v;
            try {
                v = batch_loss(probe, batch, dict);
            } catch (const NumericalError& e) {
                throw NumericalError("grad_fd: probe on " + model.parameter_name(Index(j)) + " failed: " + e.what());
            }
            if (!std::isfinite(v))
                throw NumericalError("grad_fd: non-finite loss when probing " + model.parameter_name(Index(j)));
            return v;
        };
        const double up = eval(fd_step);
        const double down = eval(-fd_step);
        grad[Index(j)] = (up - down) / (2.0 * fd_step);
    });
    return grad;
}

/// Adam on a flat parameter vector.
class Adam
{
public:
    Adam(Index n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : m_(RVec::Zero(n)), v_(RVec::Zero(n)), beta1_(beta1), beta2_(beta2), eps_(eps)
    {
    }

    void step(RVec& theta, const RVec& grad, double lr)
    {
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1_, double(t_));
        const double c2 = 1.0 - std::pow(beta2_, double(t_));
        theta.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    }

    int steps() const { return t_; }

private:
    RVec m_, v_;
    double beta1_, beta2_, eps_;
    int t_ = 0;
};

struct TrainConfig
{
    int samples_per_layer = 700;
    int batch_size = 7;
    double learning_rate = 0.05;
    double learning_rate_late = 0.01;
    int lr_drop_after_layers = 5; // late rate once the network has more layers than this
    int validation_size = 200;
    double fd_step = 1e-3;
    int max_epochs = 20;
    int patience = 2;
    double snr_db_min = -5.0;
    double snr_db_max = 20.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 1;
    int jobs = 1;

    void validate() const
    {
        if (samples_per_layer < 1 || batch_size < 1 || validation_size < 1 || max_epochs < 1 || patience < 1)
            throw ConfigError("train config: counts must be positive");
        if (batch_size > samples_per_layer)
            throw ConfigError("train config: batch_size must not exceed samples_per_layer");
        if (!(learning_rate > 0) || !(learning_rate_late > 0) || !(fd_step > 0) || !(beta1 > 0 && beta1 < 1)
            || !(beta2 > 0 && beta2 < 1) || !(eps > 0))
            throw ConfigError("train config: rates, step and moment coefficients must be positive (moments < 1)");
        if (!(snr_db_min <= snr_db_max))
            throw ConfigError("train config: snr_db_min must not exceed snr_db_max");
    }

    double rate_for(int layers) const { return layers > lr_drop_after_layers ? learning_rate_late : learning_rate; }
};

/// Draws one training sample.
using SampleGenerator = std::function<ReceivedSignal(Rng&)>;

/// Positions uniform over the area, SNR uniform over [snr_min, snr_max].
inline SampleGenerator make_sample_generator(const Scene& scene, const ChannelConfig& channel, double snr_db_min,
                                             double snr_db_max)
{
    return [scene, channel, snr_db_min, snr_db_max](Rng& rng) {
        std::uniform_real_distribution<double> ux(scene.area.x_min, scene.area.x_max);
        std::uniform_real_distribution<double> uy(scene.area.y_min, scene.area.y_max);
        std::uniform_real_distribution<double> usnr(snr_db_min, snr_db_max);
        const Point2 p{ux(rng), uy(rng)};
        const double snr = snr_db_min == snr_db_max ? snr_db_min : usnr(rng);
        const auto ch = sample_channel(scene, p, channel, rng);
        return synthesize(ch, scene, snr, rng);
    };
}

inline std::vector<ReceivedSignal> draw_samples(const SampleGenerator& gen, int count, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<ReceivedSignal> out;
    out.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i)
        out.push_back(gen(rng));
    return out;
}

/// Optional per-epoch progress hook: (layers, epoch, train_loss, validation_loss).
using TrainProgress = std::function<void(int, int, double, double)>;

/// Runs one stage: Adam on grad_fd over `data`, early-stopped on the
/// validation loss. Returns the best parameters seen (the initial ones
/// included), so the final validation loss never exceeds the initial one.
inline DaunModel train_stage(DaunModel model, std::span<const ReceivedSignal> data,
                             std::span<const ReceivedSignal> validation, const Dictionary& dict, const TrainConfig& cfg,
                             double learning_rate, Rng& rng, StageRecord& record, const TrainProgress& progress = {})
{
    RVec theta = model.parameters();
    RVec best_theta = theta;
    double best_val = batch_loss(model, validation, dict);
    record.initial_validation_loss = best_val;
    record.learning_rate = learning_rate;

    Adam adam(theta.size(), cfg.beta1, cfg.beta2, cfg.eps);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    int stale = 0;
    std::vector<ReceivedSignal> batch;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double train_sum = 0.0;
        int train_batches = 0;
        for (std::size_t start = 0; start + std::size_t(cfg.batch_size) <= order.size();
             start += std::size_t(cfg.batch_size)) {
            batch.clear();
            for (std::size_t b = 0; b < std::size_t(cfg.batch_size); ++b)
                batch.push_back(data[order[start + b]]);
            model.set_parameters(theta);
            try {
                const RVec g = grad_fd(model, batch, dict, cfg.fd_step, cfg.jobs);
                adam.step(theta, g, learning_rate);
                train_sum += batch_loss(model, batch, dict);
                ++train_batches;
            } catch (const NumericalError& e) {
                std::cerr << "warning: skipped training step: " << e.what() << '\n';
            }
        }
        model.set_parameters(theta);
        double val;
        try {
            val = batch_loss(model, validation, dict);
        } catch (const NumericalError&) {
            val = std::numeric_limits<double>::infinity();
        }
        if (!std::isfinite(val)) {
            // Diverged: restart from the best point.
            theta = best_theta;
            val = std::numeric_limits<double>::infinity();
        }
        record.validation_curve.push_back(val);
        record.train_curve.push_back(train_batches ? train_sum / train_batches : std::nan(""));
        record.epochs = epoch;
        if (progress)
            progress(model.num_layers(), epoch, record.train_curve.back(), val);
        if (val < best_val) {
            best_val = val;
            best_theta = theta;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    model.set_parameters(best_theta);
    record.final_validation_loss = best_val;
    record.improved = best_val < record.initial_validation_loss;
    return model;
}

/// Incremental layer-wise training: grows `initial` one layer at a time up to
/// `target_layers`, re-training all parameters at every stage with the
/// previously trained values as the starting point. A fresh first layer starts
/// at rho = 5, tau1 = tau2 = 0.5. A later layer starts from the best of a few
/// candidates; if training cannot beat an appended no-op round (tau ~ e^-30),
/// the no-op is kept, so stage losses are non-increasing.
inline DaunModel train_incremental(DaunModel model, const SampleGenerator& gen, const Dictionary& dict,
                                   int target_layers, const TrainConfig& cfg, const TrainProgress& progress = {})
{
    cfg.validate();
    if (model.num_stations() == 0)
        model.log_w.assign(std::size_t(dict.num_stations()), 0.0);
    if (model.num_stations() != dict.num_stations())
        throw ConfigError("train: model station count does not match the scene");
    if (target_layers < model.num_layers())
        throw ConfigError("train: target layer count below the current model size");

    const auto validation = draw_samples(gen, cfg.validation_size, derive_seed(cfg.seed, 0xfa11da7e));
    Rng shuffle_rng(derive_seed(cfg.seed, 0x5eed));

    while (model.num_layers() < target_layers) {
        const int layers = model.num_layers() + 1;
        StageRecord record;
        record.layers = layers;
        DaunModel grown = model;
        DaunModel noop = model;
        if (model.layers.empty()) {
            grown.layers.push_back(LayerParams{});
            record.init = "default";
        } else {
            // Candidates for the appended layer: a copy of the last layer, a
            // default layer, and a copy with small steps (close to a no-op but
            // still trainable). The lowest validation loss wins.
            noop.layers.push_back(model.layers.back());
            noop.layers.back().log_tau1 -= 30.0;
            noop.layers.back().log_tau2 -= 30.0;
            LayerParams small = model.layers.back();
            small.log_tau1 -= 6.0;
            small.log_tau2 -= 6.0;
            const std::pair<const char*, LayerParams> candidates[] = {
                {"copy", model.layers.back()}, {"default", LayerParams{}}, {"small", small}};
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [name, layer] : candidates) {
                DaunModel trial = model;
                trial.layers.push_back(layer);
                const double l = batch_loss(trial, validation, dict);
                if (l < best) {
                    best = l;
                    grown = std::move(trial);
                    record.init = name;
                }
            }
            if (!std::isfinite(best)) {
                grown = noop;
                record.init = "identity";
            }
        }
        const double previous = model.layers.empty() ? std::numeric_limits<double>::infinity()
                                                     : batch_loss(noop, validation, dict);
        const auto data = draw_samples(gen, cfg.samples_per_layer, derive_seed(cfg.seed, 0xda7a, std::uint64_t(layers)));
        model = train_stage(std::move(grown), data, validation, dict, cfg, cfg.rate_for(layers), shuffle_rng, record,
                            progress);
        if (record.final_validation_loss > previous) {
            // Training did not reach the no-op level: append the no-op instead.
            model = std::move(noop);
            record.init = "identity";
            record.final_validation_loss = previous;
            record.improved = previous < record.initial_validation_loss;
        }
        if (!record.improved)
            std::cerr << "warning: stage " << layers << " did not improve the validation loss; keeping warm start\n";
        model.history.push_back(std::move(record));
    }
    return model;
}

// ---------------------------------------------------------------------------
// Model files: versioned JSON with explicit parameter names.
// ---------------------------------------------------------------------------

inline constexpr int model_format_version = 1;

inline nlohmann::json model_to_json(const DaunModel& model)
{
    nlohmann::json j;
    j["format"] = "dloc-daun-model";
    j["version"] = model_format_version;
    j["scene_fingerprint"] = model.scene_fingerprint;
    j["num_layers"] = model.num_layers();
    j["num_stations"] = model.num_stations();
    j["layers"] = nlohmann::json::array();
    for (const auto& l : model.layers)
        j["layers"].push_back({{"log_rho", l.log_rho}, {"log_tau1", l.log_tau1}, {"log_tau2", l.log_tau2}});
    j["log_w"] = model.log_w;
    j["history"] = nlohmann::json::array();
    for (const auto& h : model.history)
        j["history"].push_back({{"layers", h.layers},
                                {"epochs", h.epochs},
                                {"learning_rate", h.learning_rate},
                                {"initial_validation_loss", h.initial_validation_loss},
                                {"final_validation_loss", h.final_validation_loss},
                                {"improved", h.improved},
                                {"init", h.init},
                                {"validation_curve", h.validation_curve},
                                {"train_curve", h.train_curve}});
    return j;
}

inline DaunModel model_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format").get<std::string>() != "dloc-daun-model")
            throw ParseError("model file: unexpected format tag");
        if (j.at("version").get<int>() != model_format_version)
            throw ParseError("model file: unsupported version " + std::to_string(j.at("version").get<int>()));
        DaunModel m;
        m.scene_fingerprint = j.at("scene_fingerprint").get<std::string>();
        for (const auto& l : j.at("layers"))
            m.layers.push_back({l.at("log_rho").get<double>(), l.at("log_tau1").get<double>(), l.at("log_tau2").get<double>()});
        m.log_w = j.at("log_w").get<std::vector<double>>();
        if (j.at("num_layers").get<int>() != m.num_layers() || j.at("num_stations").get<int>() != m.num_stations())
            throw ParseError("model file: declared sizes do not match the parameter lists");
        for (double v : m.parameters())
            if (!std::isfinite(v))
                throw ParseError("model file: non-finite parameter");
        if (j.contains("history")) {
            for (const auto& h : j.at("history")) {
                StageRecord r;
                r.layers = h.at("layers").get<int>();
                r.epochs = h.at("epochs").get<int>();
                r.learning_rate = h.at("learning_rate").get<double>();
                r.initial_validation_loss = h.at("initial_validation_loss").get<double>();
                r.final_validation_loss = h.at("final_validation_loss").get<double>();
                r.improved = h.at("improved").get<bool>();
                r.init = h.value("init", std::string{});
                for (const auto& v : h.at("validation_curve"))
                    r.validation_curve.push_back(v.is_number() ? v.get<double>() : std::nan(""));
                for (const auto& v : h.at("train_curve"))
                    r.train_curve.push_back(v.is_number() ? v.get<double>() : std::nan(""));
                m.history.push_back(std::move(r));
            }
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
}

inline void save_model(const DaunModel& model, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write model file " + path.string());
    out << model_to_json(model).dump(2) << '\n';
    if (!out)
        throw ConfigError("failed writing model file " + path.string());
}

/// Loads a model. A non-empty `expected_fingerprint` that differs from the
/// stored one produces a warning (appended to `warnings`, else printed).
inline DaunModel load_model(const std::filesystem::path& path, std::string_view expected_fingerprint = {},
                            std::vector<std::string>* warnings = nullptr)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open model file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("model file " + path.string() + ": " + e.what());
    }
    DaunModel m = model_from_json(j);
    if (!expected_fingerprint.empty() && m.scene_fingerprint != expected_fingerprint) {
        const std::string msg = "model " + path.string() + " was trained for scene " + m.scene_fingerprint
                              + ", current scene is " + std::string(expected_fingerprint);
        if (warnings)
            warnings->push_back(msg);
        else
            std::cerr << "warning: " << msg << '\n';
    }
    return m;
}

} // namespace dloc
