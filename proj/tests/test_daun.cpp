#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "dloc/config.hpp"
#include "dloc/daun.hpp"
#include "dloc/scene.hpp"
#include "dloc/solver.hpp"

using namespace dloc;

namespace {

Scene small_scene()
{
    return make_scene({{-30, -30}, {-30, 30}, {30, 0}}, 4, {-10, 10, -10, 10, 5, 5}, 8);
}

struct Fixture
{
    Scene scene = small_scene();
    Dictionary dict = build_dictionary(scene).normalized();
    ChannelConfig channel{};

    std::vector<ReceivedSignal> samples(int n, std::uint64_t seed, double snr_lo = 0.0, double snr_hi = 20.0) const
    {
        return draw_samples(make_sample_generator(scene, channel, snr_lo, snr_hi), n, seed);
    }
};

std::filesystem::path temp_file(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("dloc_test_daun_" + name);
}

DaunModel random_model(std::mt19937_64& rng, int layers, int stations)
{
    std::uniform_real_distribution<double> rho(std::log(1.0), std::log(20.0)), tau(std::log(0.05), std::log(0.9)),
        w(-0.5, 0.5);
    DaunModel m;
    for (int i = 0; i < layers; ++i)
        m.layers.push_back({rho(rng), tau(rng), tau(rng)});
    for (int s = 0; s < stations; ++s)
        m.log_w.push_back(w(rng));
    return m;
}

} // namespace

TEST(Daun, TiedModelMatchesFixedParameterSolver)
{
    Fixture f;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> rho(1.0, 20.0), tau(0.05, 0.9), w(0.5, 2.0);
    const auto sigs = f.samples(20, 2);
    for (int t = 0; t < 20; ++t) {
        AdmmParams p{rho(rng), tau(rng), tau(rng), {w(rng), w(rng), w(rng)}};
        const int iters = 1 + t % 12;
        const auto a = forward(DaunModel::tied(p, iters), sigs[std::size_t(t)], f.dict);
        const auto b = solve(sigs[std::size_t(t)], f.dict, p, iters);
        EXPECT_LE((a.state.x - b.state.x).norm(), 1e-12 * std::max(1.0, b.state.x.norm()));
        EXPECT_LE((a.state.z - b.state.z).norm(), 1e-12 * std::max(1.0, b.state.z.norm()));
        EXPECT_EQ(a.trace.nmse.size(), std::size_t(iters));
    }
}

TEST(Daun, ZeroLayersGivesZeroStateAndWeightedSignalEnergy)
{
    Fixture f;
    DaunModel m;
    m.log_w.assign(3, 0.0);
    const auto sig = f.samples(1, 3, 7.0, 7.0).front();
    const auto res = forward(m, sig, f.dict);
    EXPECT_EQ(res.state.x.norm(), 0.0);
    EXPECT_EQ(res.state.z.norm(), 0.0);
    EXPECT_TRUE(res.trace.nmse.empty());
    EXPECT_NEAR(sample_loss(m, sig, f.dict), snr_weight(7.0) * sig.y.squaredNorm(), 1e-12 * sig.y.squaredNorm());
    // No layer parameters: the loss is flat in log_w.
    const RVec g = grad_fd(m, f.samples(3, 4), f.dict);
    EXPECT_EQ(g.size(), 3);
    EXPECT_EQ(g.norm(), 0.0);
}

TEST(Daun, ParameterLayoutAndNames)
{
    DaunModel m = DaunModel::tied(AdmmParams::defaults(4), 10);
    EXPECT_EQ(m.num_parameters(), 34);
    EXPECT_EQ(m.parameter_name(0), "layer1.log_rho");
    EXPECT_EQ(m.parameter_name(4), "layer2.log_tau1");
    EXPECT_EQ(m.parameter_name(29), "layer10.log_tau2");
    EXPECT_EQ(m.parameter_name(30), "log_w1");
    EXPECT_EQ(m.parameter_name(33), "log_w4");

    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    RVec p(34);
    for (Index j = 0; j < 34; ++j)
        p[j] = g(rng);
    m.set_parameters(p);
    EXPECT_EQ(m.parameters(), p);
    EXPECT_EQ(m.layers[1].log_tau1, p[4]);
    EXPECT_EQ(m.log_w[3], p[33]);
    EXPECT_NEAR(m.layer_params(2).rho, std::exp(p[6]), 1e-15 * std::exp(p[6]));
    EXPECT_THROW(m.set_parameters(RVec::Zero(33)), ConfigError);
}

TEST(Daun, StationCountMismatchThrows)
{
    Fixture f;
    const auto sig = f.samples(1, 6).front();
    EXPECT_THROW(forward(DaunModel::tied(AdmmParams::defaults(4), 2), sig, f.dict), ConfigError);
}

TEST(SnrWeight, ReferenceValues)
{
    EXPECT_NEAR(snr_weight(-10.0), 1.99995, 5e-6);
    EXPECT_EQ(snr_weight(0.0), 1.5);
    EXPECT_NEAR(snr_weight(10.0), 1.00005, 5e-6);
    EXPECT_EQ(snr_weight(1000.0), 1.0);
    EXPECT_EQ(snr_weight(-1000.0), 2.0);
    double prev = 2.0;
    for (double s = -40.0; s <= 40.0; s += 0.5) {
        const double w = snr_weight(s);
        EXPECT_LE(w, prev);
        EXPECT_GE(w, 1.0);
        EXPECT_NEAR(w + snr_weight(-s), 3.0, 1e-15);
        prev = w;
    }
}

TEST(GradFd, DeterministicAndThreadIndependent)
{
    Fixture f;
    std::mt19937_64 rng(7);
    const DaunModel m = random_model(rng, 3, 3);
    const auto batch = f.samples(4, 8);
    const RVec a = grad_fd(m, batch, f.dict, 1e-3, 1);
    const RVec b = grad_fd(m, batch, f.dict, 1e-3, 1);
    const RVec c = grad_fd(m, batch, f.dict, 1e-3, 3);
    EXPECT_EQ(a.size(), 12);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_GT(a.norm(), 0.0);
}

TEST(GradFd, MatchesDirectCentralDifference)
{
    Fixture f;
    std::mt19937_64 rng(9);
    const DaunModel m = random_model(rng, 2, 3);
    const auto batch = f.samples(3, 10);
    const double h = 1e-3;
    const RVec g = grad_fd(m, batch, f.dict, h);
    const RVec theta = m.parameters();
    for (Index j = 0; j < theta.size(); ++j) {
        DaunModel up = m, down = m;
        RVec t = theta;
        t[j] += h;
        up.set_parameters(t);
        t[j] = theta[j] - h;
        down.set_parameters(t);
        const double expect = (batch_loss(up, batch, f.dict) - batch_loss(down, batch, f.dict)) / (2 * h);
        EXPECT_NEAR(g[j], expect, 1e-12 * std::max(1.0, std::abs(expect))) << m.parameter_name(j);
    }
}

TEST(GradFd, RichardsonConsistencyOnRandomProbes)
{
    // Halving h should shrink the central-difference error by about 4.
    Fixture f;
    std::mt19937_64 rng(11);
    int passed = 0, probes = 0;
    for (int t = 0; t < 10; ++t) {
        const DaunModel m = random_model(rng, 3, 3);
        const auto batch = f.samples(2, 100 + std::uint64_t(t));
        const double h = 1e-3;
        const RVec g1 = grad_fd(m, batch, f.dict, h), g2 = grad_fd(m, batch, f.dict, h / 2);
        const double scale = std::max(g2.cwiseAbs().maxCoeff(), 1e-12);
        bool ok = true;
        for (Index j = 0; j < g1.size(); ++j)
            ok = ok && std::abs(g1[j] - g2[j]) <= 10.0 * h * h * std::max(std::abs(g2[j]), scale);
        passed += ok;
        ++probes;
    }
    EXPECT_GE(passed, 9) << passed << " of " << probes;
}

TEST(GradFd, RejectsBadArguments)
{
    Fixture f;
    const DaunModel m = DaunModel::tied(AdmmParams::defaults(3), 1);
    EXPECT_THROW(grad_fd(m, f.samples(1, 1), f.dict, 0.0), ConfigError);
    EXPECT_THROW(grad_fd(m, std::span<const ReceivedSignal>{}, f.dict), ConfigError);
    EXPECT_THROW(batch_loss(m, std::span<const ReceivedSignal>{}, f.dict), ConfigError);
}

TEST(AdamOptimizer, FirstStepIsLearningRateTimesSign)
{
    Adam adam(3);
    RVec theta = RVec::Zero(3);
    RVec g(3);
    g << 4.0, -0.01, 250.0;
    adam.step(theta, g, 0.1);
    EXPECT_NEAR(theta[0], -0.1, 1e-8);
    EXPECT_NEAR(theta[1], 0.1, 1e-6);
    EXPECT_NEAR(theta[2], -0.1, 1e-8);
    EXPECT_EQ(adam.steps(), 1);
}

TEST(AdamOptimizer, MinimizesAQuadratic)
{
    Adam adam(2);
    RVec theta(2);
    theta << 3.0, -2.0;
    for (int i = 0; i < 3000; ++i) {
        RVec g(2);
        g << 2.0 * (theta[0] - 1.0), 20.0 * (theta[1] + 0.5);
        adam.step(theta, g, 0.01);
    }
    EXPECT_NEAR(theta[0], 1.0, 1e-2);
    EXPECT_NEAR(theta[1], -0.5, 1e-2);
}

TEST(ModelFile, RoundTripIsExact)
{
    std::mt19937_64 rng(12);
    DaunModel m = random_model(rng, 4, 3);
    m.scene_fingerprint = "0123456789abcdef";
    StageRecord r;
    r.layers = 1;
    r.epochs = 2;
    r.learning_rate = 0.05;
    r.initial_validation_loss = 3.25;
    r.final_validation_loss = 1.0 / 3.0;
    r.improved = true;
    r.init = "default";
    r.validation_curve = {0.5, 1.0 / 3.0};
    r.train_curve = {0.7, 0.4};
    m.history.push_back(r);
    const auto path = temp_file("roundtrip.json");
    save_model(m, path);
    const DaunModel back = load_model(path);
    EXPECT_EQ(back.parameters(), m.parameters());
    EXPECT_EQ(back.layers, m.layers);
    EXPECT_EQ(back.scene_fingerprint, m.scene_fingerprint);
    ASSERT_EQ(back.history.size(), 1u);
    EXPECT_EQ(back.history[0].final_validation_loss, r.final_validation_loss);
    EXPECT_EQ(back.history[0].validation_curve, r.validation_curve);
    EXPECT_EQ(back.history[0].init, "default");
    std::filesystem::remove(path);
}

TEST(ModelFile, CorruptedFilesAreParseErrors)
{
    const auto path = temp_file("corrupt.json");
    const DaunModel m = DaunModel::tied(AdmmParams::defaults(2), 2);
    json good = model_to_json(m);

    auto write = [&](const std::string& text) {
        std::ofstream out(path);
        out << text;
    };
    write("{\"format\": \"dloc-daun-model\", \"version\": 1, ");
    EXPECT_THROW(load_model(path), ParseError);

    json j = good;
    j["version"] = 99;
    write(j.dump());
    EXPECT_THROW(load_model(path), ParseError);

    j = good;
    j["format"] = "something-else";
    write(j.dump());
    EXPECT_THROW(load_model(path), ParseError);

    j = good;
    j["num_layers"] = 3;
    write(j.dump());
    EXPECT_THROW(load_model(path), ParseError);

    j = good;
    j["layers"][0].erase("log_tau2");
    write(j.dump());
    EXPECT_THROW(load_model(path), ParseError);

    j = good;
    j["log_w"] = "abc";
    write(j.dump());
    EXPECT_THROW(load_model(path), ParseError);

    std::filesystem::remove(path);
    EXPECT_THROW(load_model(path), ConfigError);
}

TEST(ModelFile, FingerprintMismatchWarns)
{
    DaunModel m = DaunModel::tied(AdmmParams::defaults(2), 1);
    m.scene_fingerprint = "aaaaaaaaaaaaaaaa";
    const auto path = temp_file("fp.json");
    save_model(m, path);
    std::vector<std::string> warnings;
    load_model(path, "aaaaaaaaaaaaaaaa", &warnings);
    EXPECT_TRUE(warnings.empty());
    load_model(path, "bbbbbbbbbbbbbbbb", &warnings);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("aaaaaaaaaaaaaaaa"), std::string::npos);
    EXPECT_NE(warnings[0].find("bbbbbbbbbbbbbbbb"), std::string::npos);
    std::filesystem::remove(path);
}

TEST(TrainConfigTest, ValidationRejectsBadValues)
{
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.batch_size = c.samples_per_layer + 1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.beta1 = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.snr_db_min = 30;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    EXPECT_EQ(c.rate_for(5), c.learning_rate);
    EXPECT_EQ(c.rate_for(6), c.learning_rate_late);
}

namespace {

TrainConfig tiny_config()
{
    TrainConfig c;
    c.samples_per_layer = 14;
    c.batch_size = 7;
    c.validation_size = 10;
    c.max_epochs = 3;
    c.patience = 1;
    c.seed = 3;
    return c;
}

} // namespace

TEST(TrainStage, NeverReturnsWorseThanItsStart)
{
    Fixture f;
    const auto data = f.samples(14, 20), val = f.samples(10, 21);
    const TrainConfig cfg = tiny_config();
    for (double lr : {0.05, 5.0}) {
        DaunModel m = DaunModel::tied(AdmmParams::defaults(3), 2);
        Rng rng(1);
        StageRecord rec;
        const DaunModel out = train_stage(m, data, val, f.dict, cfg, lr, rng, rec);
        EXPECT_LE(rec.final_validation_loss, rec.initial_validation_loss);
        EXPECT_NEAR(batch_loss(out, val, f.dict), rec.final_validation_loss, 1e-12 * rec.final_validation_loss);
        EXPECT_GE(rec.epochs, 1);
        EXPECT_LE(rec.epochs, cfg.max_epochs);
        EXPECT_EQ(rec.validation_curve.size(), std::size_t(rec.epochs));
        EXPECT_EQ(rec.train_curve.size(), std::size_t(rec.epochs));
        EXPECT_EQ(rec.learning_rate, lr);
    }
}

TEST(TrainStage, EarlyStopsAfterPatienceEpochsWithoutGain)
{
    Fixture f;
    const auto data = f.samples(14, 22), val = f.samples(10, 23);
    TrainConfig cfg = tiny_config();
    cfg.max_epochs = 10;
    cfg.patience = 2;
    // A vanishing learning rate cannot improve the validation loss.
    DaunModel m = DaunModel::tied(AdmmParams::defaults(3), 1);
    Rng rng(2);
    StageRecord rec;
    train_stage(m, data, val, f.dict, cfg, 1e-300, rng, rec);
    EXPECT_EQ(rec.epochs, 2);
    EXPECT_FALSE(rec.improved);
}

TEST(TrainIncremental, StageLossesAreNonIncreasing)
{
    Fixture f;
    const TrainConfig cfg = tiny_config();
    DaunModel m;
    const auto gen = make_sample_generator(f.scene, f.channel, cfg.snr_db_min, cfg.snr_db_max);
    const DaunModel out = train_incremental(m, gen, f.dict, 4, cfg);
    ASSERT_EQ(out.num_layers(), 4);
    ASSERT_EQ(out.history.size(), 4u);
    EXPECT_EQ(out.num_stations(), 3);
    EXPECT_EQ(out.history[0].init, "default");
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(out.history[i].layers, int(i) + 1);
        EXPECT_LE(out.history[i].final_validation_loss, out.history[i].initial_validation_loss);
        if (i > 0)
            EXPECT_LE(out.history[i].final_validation_loss, out.history[i - 1].final_validation_loss * (1 + 1e-9));
    }
}

TEST(TrainIncremental, WarmStartKeepsHistoryAndGrows)
{
    Fixture f;
    const TrainConfig cfg = tiny_config();
    const auto gen = make_sample_generator(f.scene, f.channel, cfg.snr_db_min, cfg.snr_db_max);
    const DaunModel two = train_incremental(DaunModel{}, gen, f.dict, 2, cfg);
    const DaunModel three = train_incremental(two, gen, f.dict, 3, cfg);
    ASSERT_EQ(three.num_layers(), 3);
    ASSERT_EQ(three.history.size(), 3u);
    EXPECT_EQ(three.history[0].final_validation_loss, two.history[0].final_validation_loss);
    EXPECT_EQ(three.history[1].final_validation_loss, two.history[1].final_validation_loss);
    EXPECT_EQ(train_incremental(two, gen, f.dict, 2, cfg).parameters(), two.parameters());
    EXPECT_THROW(train_incremental(three, gen, f.dict, 2, cfg), ConfigError);
    // Same config and seed: training is reproducible.
    EXPECT_EQ(train_incremental(DaunModel{}, gen, f.dict, 2, cfg).parameters(), two.parameters());
}
