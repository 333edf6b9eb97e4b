#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "dloc/common.hpp"

namespace dloc {

/// Uniform linear array at a known position. `broadside` is the global
/// direction (radians) of the array normal; local angles are measured from it.
struct BaseStation
{
    int id = 0;
    Point2 position;
    int num_antennas = 1;
    double element_spacing = 0.5; // in wavelengths
    double broadside = 0.0;

    void validate() const
    {
        if (num_antennas < 1)
            throw ConfigError("station " + std::to_string(id) + ": num_antennas must be >= 1");
        if (!(element_spacing > 0.0) || !std::isfinite(element_spacing))
            throw ConfigError("station " + std::to_string(id) + ": element_spacing must be > 0");
        if (!(broadside > -pi && broadside <= pi))
            throw ConfigError("station " + std::to_string(id) + ": broadside must lie in (-pi, pi]");
    }
};

/// Rectangular target area sampled at cell centers.
///
/// Grid index k (0-based) maps to cell (ix, iy) with k = ix * grid_y + iy,
/// i.e. row-major over (x, y): y varies fastest. Index 0 is the
/// (x_min, y_min) corner cell.
struct TargetArea
{
    double x_min = -20.0;
    double x_max = 20.0;
    double y_min = -20.0;
    double y_max = 20.0;
    int grid_x = 15;
    int grid_y = 15;

    void validate() const
    {
        if (!(x_min < x_max) || !(y_min < y_max))
            throw ConfigError("target area: bounds must satisfy min < max");
        if (grid_x < 1 || grid_y < 1)
            throw ConfigError("target area: grid_x and grid_y must be >= 1");
    }

    Index num_cells() const { return Index(grid_x) * grid_y; }
    double spacing_x() const { return (x_max - x_min) / grid_x; }
    double spacing_y() const { return (y_max - y_min) / grid_y; }
    double spacing() const { return std::max(spacing_x(), spacing_y()); }
    Point2 centroid() const { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }

    bool contains(const Point2& p) const
    {
        return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
    }

    Point2 point(Index k) const
    {
        if (k < 0 || k >= num_cells())
            throw DomainError("grid index " + std::to_string(k) + " out of range");
        const auto ix = k / grid_y;
        const auto iy = k % grid_y;
        return {x_min + (double(ix) + 0.5) * spacing_x(), y_min + (double(iy) + 0.5) * spacing_y()};
    }

    /// Index of the cell containing p (points on the boundary clamp inward).
    Index nearest_index(const Point2& p) const
    {
        auto cell = [](double v, double lo, double step, int n) {
            const auto i = static_cast<long>(std::floor((v - lo) / step));
            return std::clamp<long>(i, 0, n - 1);
        };
        return cell(p.x, x_min, spacing_x(), grid_x) * grid_y + cell(p.y, y_min, spacing_y(), grid_y);
    }
};

/// Uniform grid of local angles over the open field of view (-pi/2, pi/2).
struct AngleGrid
{
    int station_id = 0;
    std::vector<double> angles;

    /// Cell-centered grid: symmetric about 0, contains 0 iff `count` is odd.
    static AngleGrid uniform(int station_id, int count)
    {
        if (count < 1)
            throw ConfigError("angle grid: count must be >= 1");
        AngleGrid g{station_id, std::vector<double>(std::size_t(count))};
        for (int l = 0; l < count; ++l)
            g.angles[std::size_t(l)] = -0.5 * pi + (l + 0.5) * pi / count;
        return g;
    }

    void validate() const
    {
        if (angles.empty())
            throw ConfigError("angle grid: needs at least one angle");
        for (std::size_t l = 0; l < angles.size(); ++l) {
            if (!(std::abs(angles[l]) < 0.5 * pi))
                throw ConfigError("angle grid: angle outside the field of view");
            if (l > 0 && !(angles[l] > angles[l - 1]))
                throw ConfigError("angle grid: angles must be strictly increasing");
        }
    }
};

/// Stations, area and angle grids; immutable once built.
struct Scene
{
    std::vector<BaseStation> stations;
    TargetArea area;
    std::vector<AngleGrid> angle_grids; // one per station, same order
    double carrier_ghz = 30.0;          // metadata only

    int num_stations() const { return int(stations.size()); }

    void validate() const
    {
        if (stations.empty())
            throw ConfigError("scene: at least one station required");
        if (angle_grids.size() != stations.size())
            throw ConfigError("scene: one angle grid per station required");
        area.validate();
        for (std::size_t m = 0; m < stations.size(); ++m) {
            stations[m].validate();
            angle_grids[m].validate();
        }
    }
};

/// Four-quadrant direction of p as seen from the station, in (-pi, pi].
inline double aoa(const Point2& p, const BaseStation& bs)
{
    const double dx = p.x - bs.position.x;
    const double dy = p.y - bs.position.y;
    if (dx == 0.0 && dy == 0.0)
        throw DomainError("aoa: point coincides with station " + std::to_string(bs.id));
    return wrap_angle(std::atan2(dy, dx));
}

/// Broadside that points the array normal at `target`.
inline double broadside_towards(const Point2& station, const Point2& target)
{
    return wrap_angle(std::atan2(target.y - station.y, target.x - station.x));
}

inline CVec steering_local(const BaseStation& bs, double local)
{
    if (!(std::abs(local) < 0.5 * pi))
        throw OutOfFieldError("steering: local angle " + std::to_string(local) + " outside field of view of station "
                              + std::to_string(bs.id));
    const double phase = 2.0 * pi * bs.element_spacing * std::sin(local);
    CVec a(bs.num_antennas);
    for (int n = 0; n < bs.num_antennas; ++n)
        a[n] = std::polar(1.0, phase * n);
    return a;
}

/// ULA response exp(j 2 pi d n sin(global_aoa - broadside)), n = 0..N-1.
inline CVec steering(const BaseStation& bs, double global_aoa)
{
    return steering_local(bs, wrap_angle(global_aoa - bs.broadside));
}

inline CMat build_location_dictionary(const BaseStation& bs, const TargetArea& area)
{
    const Index K = area.num_cells();
    std::vector<Index> offending;
    CMat A(bs.num_antennas, K);
    for (Index k = 0; k < K; ++k) {
        const double local = wrap_angle(aoa(area.point(k), bs) - bs.broadside);
        if (!(std::abs(local) < 0.5 * pi)) {
            offending.push_back(k);
            continue;
        }
        A.col(k) = steering_local(bs, local);
    }
    if (!offending.empty()) {
        std::ostringstream os;
        os << "station " << bs.id << ": grid points outside field of view:";
        for (auto k : offending)
            os << ' ' << k;
        throw OutOfFieldError(os.str());
    }
    return A;
}

inline CMat build_angle_dictionary(const BaseStation& bs, const AngleGrid& grid)
{
    CMat B(bs.num_antennas, Index(grid.angles.size()));
    for (std::size_t l = 0; l < grid.angles.size(); ++l)
        B.col(Index(l)) = steering_local(bs, grid.angles[l]);
    return B;
}

/// Per-station blocks of A = blkdiag(A_1..A_M) and B = blkdiag(B_1..B_M).
/// The block-diagonal operators are never materialized.
struct Dictionary
{
    std::vector<CMat> location; // N_m x K
    std::vector<CMat> angle;    // N_m x L_m

    int num_stations() const { return int(location.size()); }
    Index num_cells() const { return location.empty() ? 0 : location.front().cols(); }
    Index antennas(int m) const { return location[std::size_t(m)].rows(); }
    Index angles(int m) const { return angle[std::size_t(m)].cols(); }

    Index total_antennas() const
    {
        Index n = 0;
        for (const auto& a : location)
            n += a.rows();
        return n;
    }
    Index total_angles() const
    {
        Index n = 0;
        for (const auto& b : angle)
            n += b.cols();
        return n;
    }

    /// Offsets into the stacked measurement vector; size M + 1.
    std::vector<Index> antenna_offsets() const
    {
        std::vector<Index> off{0};
        for (const auto& a : location)
            off.push_back(off.back() + a.rows());
        return off;
    }
    std::vector<Index> angle_offsets() const
    {
        std::vector<Index> off{0};
        for (const auto& b : angle)
            off.push_back(off.back() + b.cols());
        return off;
    }

    /// Copy with A and B each scaled to unit spectral norm. The solver's step
    /// sizes are stable for tau < 1 only on normalized operators.
    Dictionary normalized() const
    {
        auto spectral = [](const std::vector<CMat>& blocks) {
            double s = 0.0;
            for (const auto& b : blocks) {
                const CMat gram = b * b.adjoint();
                Eigen::SelfAdjointEigenSolver<CMat> es(gram, Eigen::EigenvaluesOnly);
                s = std::max(s, std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff())));
            }
            return s;
        };
        Dictionary out = *this;
        const double sa = spectral(location);
        const double sb = spectral(angle);
        for (auto& a : out.location)
            a /= sa;
        for (auto& b : out.angle)
            b /= sb;
        return out;
    }
};

inline Dictionary build_dictionary(const Scene& scene)
{
    scene.validate();
    Dictionary d;
    for (std::size_t m = 0; m < scene.stations.size(); ++m) {
        d.location.push_back(build_location_dictionary(scene.stations[m], scene.area));
        d.angle.push_back(build_angle_dictionary(scene.stations[m], scene.angle_grids[m]));
    }
    return d;
}

/// Square-grid scene with stations facing the area centroid.
inline Scene make_scene(const std::vector<Point2>& positions, int num_antennas, const TargetArea& area, int num_angles,
                        double element_spacing = 0.5)
{
    Scene s;
    s.area = area;
    for (std::size_t m = 0; m < positions.size(); ++m) {
        BaseStation bs;
        bs.id = int(m) + 1;
        bs.position = positions[m];
        bs.num_antennas = num_antennas;
        bs.element_spacing = element_spacing;
        bs.broadside = broadside_towards(positions[m], area.centroid());
        s.stations.push_back(bs);
        s.angle_grids.push_back(AngleGrid::uniform(bs.id, num_angles));
    }
    s.validate();
    return s;
}

/// Four stations at (+-50, +-50) m around a 40 x 40 m area.
inline Scene desk_scene(int num_antennas = 16, int grid = 15, int num_angles = 32)
{
    TargetArea area{-20.0, 20.0, -20.0, 20.0, grid, grid};
    return make_scene({{-50.0, -50.0}, {-50.0, 50.0}, {50.0, 50.0}, {50.0, -50.0}}, num_antennas, area, num_angles);
}

} // namespace dloc
