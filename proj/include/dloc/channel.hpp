#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "dloc/common.hpp"
#include "dloc/scene.hpp"

namespace dloc {

using Rng = std::mt19937_64;

/// Parametric LoS + NLoS channel statistics.
///
/// LoS gain: unit magnitude, uniform phase. NLoS path count P_m is uniform on
/// [nlos_min, nlos_max], independently per station; each NLoS gain is circular
/// Gaussian with variance nlos_power_ratio / E[P_m], so the mean total NLoS
/// power relative to LoS equals nlos_power_ratio. NLoS AoAs are uniform over
/// the station's field of view.
struct ChannelConfig
{
    int nlos_min = 1;
    int nlos_max = 3;
    double nlos_power_ratio = 0.1;
    double los_block_prob = 0.0; // probability that a station's LoS path is absent

    void validate() const
    {
        if (nlos_min < 0 || nlos_max < nlos_min)
            throw ConfigError("channel: need 0 <= nlos_min <= nlos_max");
        if (!(nlos_power_ratio >= 0.0) || !std::isfinite(nlos_power_ratio))
            throw ConfigError("channel: nlos_power_ratio must be >= 0");
        if (!(los_block_prob >= 0.0 && los_block_prob <= 1.0))
            throw ConfigError("channel: los_block_prob must lie in [0, 1]");
    }

    double mean_path_count() const { return 0.5 * (nlos_min + nlos_max); }
};

struct Path
{
    cplx gain;
    double aoa = 0.0; // global, radians
};

struct StationChannel
{
    cplx los_gain;
    double los_aoa = 0.0;
    bool los_blocked = false;
    std::vector<Path> nlos;
};

struct ChannelRealization
{
    Point2 position;
    std::vector<StationChannel> stations;
};

/// Stacked snapshot y = [y_1; ...; y_M] with its SNR.
struct ReceivedSignal
{
    CVec y;
    std::vector<Index> offsets; // size M + 1
    double snr_db = 0.0;

    double snr_linear() const { return std::pow(10.0, snr_db / 10.0); }
    int num_stations() const { return int(offsets.size()) - 1; }
    auto station(int m) const { return y.segment(offsets[std::size_t(m)], offsets[std::size_t(m) + 1] - offsets[std::size_t(m)]); }
};

inline cplx complex_normal(Rng& rng, double variance)
{
    std::normal_distribution<double> n(0.0, std::sqrt(0.5 * variance));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

inline ChannelRealization sample_channel(const Scene& scene, const Point2& p, const ChannelConfig& cfg, Rng& rng)
{
    cfg.validate();
    if (!scene.area.contains(p))
        throw DomainError("sample_channel: position outside the target area");
    std::uniform_real_distribution<double> phase(-pi, pi);
    std::uniform_real_distribution<double> fov(-0.5 * pi, 0.5 * pi);
    std::uniform_int_distribution<int> count(cfg.nlos_min, cfg.nlos_max);
    std::bernoulli_distribution blocked(cfg.los_block_prob);
    const double mean_paths = cfg.mean_path_count();
    const double path_var = mean_paths > 0.0 ? cfg.nlos_power_ratio / mean_paths : 0.0;

    ChannelRealization ch;
    ch.position = p;
    for (const auto& bs : scene.stations) {
        StationChannel sc;
        sc.los_aoa = aoa(p, bs);
        sc.los_gain = std::polar(1.0, phase(rng));
        sc.los_blocked = blocked(rng);
        if (sc.los_blocked)
            sc.los_gain = 0.0;
        const int paths = count(rng);
        for (int i = 0; i < paths; ++i) {
            // open interval: reject the (measure-zero) endpoint draw
            double local = fov(rng);
            while (!(std::abs(local) < 0.5 * pi))
                local = fov(rng);
            const cplx g = complex_normal(rng, path_var);
            sc.nlos.push_back({g, wrap_angle(bs.broadside + local)});
        }
        ch.stations.push_back(std::move(sc));
    }
    return ch;
}

/// Noise-free channel vector h_m of station m.
inline CVec channel_vector(const ChannelRealization& ch, const Scene& scene, int m)
{
    const auto& bs = scene.stations[std::size_t(m)];
    const auto& sc = ch.stations[std::size_t(m)];
    CVec h = CVec::Zero(bs.num_antennas);
    if (!sc.los_blocked)
        h += sc.los_gain * steering(bs, sc.los_aoa);
    for (const auto& path : sc.nlos)
        h += path.gain * steering(bs, path.aoa);
    return h;
}

/// y_m = sqrt(omega) h_m + n_m with n_m ~ CN(0, I); the pilot is fixed to 1.
inline ReceivedSignal synthesize(const ChannelRealization& ch, const Scene& scene, double snr_db, Rng& rng,
                                 bool noiseless = false)
{
    if (ch.stations.size() != scene.stations.size())
        throw ConfigError("synthesize: realization does not match the scene");
    ReceivedSignal out;
    out.snr_db = snr_db;
    out.offsets.push_back(0);
    for (const auto& bs : scene.stations)
        out.offsets.push_back(out.offsets.back() + bs.num_antennas);
    out.y.resize(out.offsets.back());
    const double amp = std::sqrt(out.snr_linear());
    for (int m = 0; m < scene.num_stations(); ++m) {
        CVec ym = amp * channel_vector(ch, scene, m);
        if (!noiseless)
            for (Index n = 0; n < ym.size(); ++n)
                ym[n] += complex_normal(rng, 1.0);
        out.y.segment(out.offsets[std::size_t(m)], ym.size()) = ym;
    }
    return out;
}

} // namespace dloc
