#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dloc/channel.hpp"
#include "dloc/common.hpp"
#include "dloc/daun.hpp"
#include "dloc/scene.hpp"
#include "dloc/solver.hpp"

namespace dloc {

using json = nlohmann::json;

inline json read_json_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

inline void write_json_file(const json& j, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// FNV-1a 64-bit, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Hash of the canonical dump. json objects keep keys sorted, so the
/// fingerprint does not depend on key order in the source file.
inline std::string fingerprint(const json& j) { return fnv1a_hex(j.dump()); }

namespace detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback)
{
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

template <typename Fn>
auto with_context(const char* what, Fn&& fn)
{
    try {
        return fn();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Scene
// ---------------------------------------------------------------------------

/// Scene file:
///   { "area": {x_min, x_max, y_min, y_max, grid_x, grid_y},
///     "num_angles": L (default for every station),
///     "carrier_ghz": 30,
///     "stations": [ {"id", "position": [x, y], "num_antennas",
///                    "element_spacing"?, "broadside"?, "num_angles"?, "angles"?} ],
///     "channel": {...}? }
/// A missing broadside points the array at the area centroid.
inline Scene scene_from_json(const json& j)
{
    return detail::with_context("scene", [&] {
        Scene s;
        const auto& a = j.at("area");
        s.area = {a.at("x_min").get<double>(), a.at("x_max").get<double>(), a.at("y_min").get<double>(),
                  a.at("y_max").get<double>(), a.at("grid_x").get<int>(), a.at("grid_y").get<int>()};
        s.area.validate();
        s.carrier_ghz = detail::get_or(j, "carrier_ghz", 30.0);
        const int default_angles = detail::get_or(j, "num_angles", 32);
        int next_id = 1;
        for (const auto& st : j.at("stations")) {
            BaseStation bs;
            bs.id = detail::get_or(st, "id", next_id);
            next_id = bs.id + 1;
            const auto pos = st.at("position").get<std::vector<double>>();
            if (pos.size() != 2)
                throw ConfigError("scene: station position must have two coordinates");
            bs.position = {pos[0], pos[1]};
            bs.num_antennas = st.at("num_antennas").get<int>();
            bs.element_spacing = detail::get_or(st, "element_spacing", 0.5);
            bs.broadside = st.contains("broadside") ? st.at("broadside").get<double>()
                                                    : broadside_towards(bs.position, s.area.centroid());
            s.stations.push_back(bs);
            if (st.contains("angles"))
                s.angle_grids.push_back({bs.id, st.at("angles").get<std::vector<double>>()});
            else
                s.angle_grids.push_back(AngleGrid::uniform(bs.id, detail::get_or(st, "num_angles", default_angles)));
        }
        s.validate();
        return s;
    });
}

/// Canonical form with every derived value resolved.
inline json scene_to_json(const Scene& s)
{
    json j;
    j["area"] = {{"x_min", s.area.x_min}, {"x_max", s.area.x_max}, {"y_min", s.area.y_min},
                 {"y_max", s.area.y_max}, {"grid_x", s.area.grid_x}, {"grid_y", s.area.grid_y}};
    j["carrier_ghz"] = s.carrier_ghz;
    j["stations"] = json::array();
    for (std::size_t m = 0; m < s.stations.size(); ++m) {
        const auto& bs = s.stations[m];
        j["stations"].push_back({{"id", bs.id},
                                 {"position", {bs.position.x, bs.position.y}},
                                 {"num_antennas", bs.num_antennas},
                                 {"element_spacing", bs.element_spacing},
                                 {"broadside", bs.broadside},
                                 {"angles", s.angle_grids[m].angles}});
    }
    return j;
}

inline std::string scene_fingerprint(const Scene& s) { return fingerprint(scene_to_json(s)); }

// ---------------------------------------------------------------------------
// Channel / params / training
// ---------------------------------------------------------------------------

inline ChannelConfig channel_from_json(const json& j)
{
    return detail::with_context("channel", [&] {
        ChannelConfig c;
        c.nlos_min = detail::get_or(j, "nlos_min", c.nlos_min);
        c.nlos_max = detail::get_or(j, "nlos_max", c.nlos_max);
        c.nlos_power_ratio = detail::get_or(j, "nlos_power_ratio", c.nlos_power_ratio);
        c.los_block_prob = detail::get_or(j, "los_block_prob", c.los_block_prob);
        c.validate();
        return c;
    });
}

inline json channel_to_json(const ChannelConfig& c)
{
    return {{"nlos_min", c.nlos_min},
            {"nlos_max", c.nlos_max},
            {"nlos_power_ratio", c.nlos_power_ratio},
            {"los_block_prob", c.los_block_prob}};
}

/// {"rho", "tau1", "tau2", "weights"?}; missing weights default to 1.
inline AdmmParams params_from_json(const json& j, int num_stations)
{
    return detail::with_context("params", [&] {
        AdmmParams p = AdmmParams::defaults(num_stations);
        p.rho = detail::get_or(j, "rho", p.rho);
        p.tau1 = detail::get_or(j, "tau1", p.tau1);
        p.tau2 = detail::get_or(j, "tau2", p.tau2);
        if (j.contains("weights"))
            p.weights = j.at("weights").get<std::vector<double>>();
        p.validate(num_stations);
        return p;
    });
}

inline json params_to_json(const AdmmParams& p)
{
    return {{"rho", p.rho}, {"tau1", p.tau1}, {"tau2", p.tau2}, {"weights", p.weights}};
}

inline TrainConfig train_config_from_json(const json& j)
{
    return detail::with_context("train config", [&] {
        TrainConfig c;
        c.samples_per_layer = detail::get_or(j, "samples_per_layer", c.samples_per_layer);
        c.batch_size = detail::get_or(j, "batch_size", c.batch_size);
        c.learning_rate = detail::get_or(j, "learning_rate", c.learning_rate);
        c.learning_rate_late = detail::get_or(j, "learning_rate_late", c.learning_rate_late);
        c.lr_drop_after_layers = detail::get_or(j, "lr_drop_after_layers", c.lr_drop_after_layers);
        c.validation_size = detail::get_or(j, "validation_size", c.validation_size);
        c.fd_step = detail::get_or(j, "fd_step", c.fd_step);
        c.max_epochs = detail::get_or(j, "max_epochs", c.max_epochs);
        c.patience = detail::get_or(j, "patience", c.patience);
        c.snr_db_min = detail::get_or(j, "snr_db_min", c.snr_db_min);
        c.snr_db_max = detail::get_or(j, "snr_db_max", c.snr_db_max);
        c.beta1 = detail::get_or(j, "beta1", c.beta1);
        c.beta2 = detail::get_or(j, "beta2", c.beta2);
        c.eps = detail::get_or(j, "eps", c.eps);
        c.seed = detail::get_or(j, "seed", c.seed);
        c.jobs = detail::get_or(j, "jobs", c.jobs);
        c.validate();
        return c;
    });
}

inline json train_config_to_json(const TrainConfig& c)
{
    return {{"samples_per_layer", c.samples_per_layer},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"learning_rate_late", c.learning_rate_late},
            {"lr_drop_after_layers", c.lr_drop_after_layers},
            {"validation_size", c.validation_size},
            {"fd_step", c.fd_step},
            {"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"snr_db_min", c.snr_db_min},
            {"snr_db_max", c.snr_db_max},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps},
            {"seed", c.seed}};
}

} // namespace dloc
