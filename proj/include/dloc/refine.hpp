#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "dloc/common.hpp"
#include "dloc/scene.hpp"

namespace dloc {

/// Two-means split of one row's per-station magnitudes.
/// `high` / `low` hold 0-based station indices; high_mean >= low_mean.
struct RowClusters
{
    std::vector<int> high;
    std::vector<int> low;
    double high_mean = 0.0;
    double low_mean = 0.0;
    int sweeps = 0;
};

enum class SelectionMethod
{
    naive,
    refined
};

inline const char* to_string(SelectionMethod m) { return m == SelectionMethod::naive ? "naive" : "refined"; }

struct PositionEstimate
{
    Index index = 0; // 0-based grid index
    Point2 position;
    SelectionMethod method = SelectionMethod::naive;
    bool in_active_set = false; // refined: index belongs to F
    bool fallback = false;      // refined: F was empty, naive rule used
    bool degenerate = false;    // all-zero input
};

inline Point2 index_to_position(Index k, const TargetArea& area) { return area.point(k); }

/// argmax_k ||X_k,:||_2 with ties going to the smallest index.
template <typename Derived>
PositionEstimate select_naive(const Eigen::MatrixBase<Derived>& X, const TargetArea& area)
{
    if (X.rows() != area.num_cells())
        throw ConfigError("select_naive: row count does not match the grid");
    PositionEstimate est;
    double best = -1.0;
    for (Index k = 0; k < X.rows(); ++k) {
        const double n = X.row(k).squaredNorm();
        if (n > best) {
            best = n;
            est.index = k;
        }
    }
    est.degenerate = best <= 0.0;
    est.position = index_to_position(est.index, area);
    return est;
}

/// Lloyd two-means on magnitudes, starting from means (max, 0). Assignment is
/// nearest-mean (ties go to the high cluster); means are updated after a full
/// sweep and an empty cluster keeps its previous mean. Stops when the
/// assignment repeats.
inline RowClusters cluster_row(std::span<const double> magnitudes)
{
    if (magnitudes.empty())
        throw ConfigError("cluster_row: empty row");
    const int M = int(magnitudes.size());
    RowClusters rc;
    rc.high_mean = *std::max_element(magnitudes.begin(), magnitudes.end());
    rc.low_mean = 0.0;

    std::vector<char> assign(std::size_t(M), 2), prev;
    // Bounded by the number of assignment configurations; in practice a few sweeps.
    const int max_sweeps = M < 30 ? (1 << M) + 1 : 1 << 30;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        prev = assign;
        for (int i = 0; i < M; ++i) {
            const double v = magnitudes[std::size_t(i)];
            assign[std::size_t(i)] = std::abs(v - rc.high_mean) <= std::abs(v - rc.low_mean) ? 1 : 2;
        }
        ++rc.sweeps;
        double sum1 = 0.0, sum2 = 0.0;
        int n1 = 0, n2 = 0;
        for (int i = 0; i < M; ++i) {
            if (assign[std::size_t(i)] == 1) {
                sum1 += magnitudes[std::size_t(i)];
                ++n1;
            } else {
                sum2 += magnitudes[std::size_t(i)];
                ++n2;
            }
        }
        if (n1 > 0)
            rc.high_mean = sum1 / n1;
        if (n2 > 0)
            rc.low_mean = sum2 / n2;
        if (assign == prev)
            break;
    }
    for (int i = 0; i < M; ++i)
        (assign[std::size_t(i)] == 1 ? rc.high : rc.low).push_back(i);
    if (rc.high_mean < rc.low_mean) {
        std::swap(rc.high, rc.low);
        std::swap(rc.high_mean, rc.low_mean);
    }
    return rc;
}

template <typename Derived>
std::vector<RowClusters> cluster_rows(const Eigen::MatrixBase<Derived>& X)
{
    std::vector<RowClusters> out;
    out.reserve(std::size_t(X.rows()));
    std::vector<double> mags(std::size_t(X.cols()));
    for (Index k = 0; k < X.rows(); ++k) {
        for (Index m = 0; m < X.cols(); ++m)
            mags[std::size_t(m)] = std::abs(X(k, m));
        out.push_back(cluster_row(mags));
    }
    return out;
}

/// Position refinement: rows whose high cluster has at least `min_active`
/// stations form F; the estimate maximizes the row norm restricted to the
/// high cluster over F. Falls back to select_naive (flagged) when F is empty.
template <typename Derived>
PositionEstimate select_refined(const Eigen::MatrixBase<Derived>& X, const TargetArea& area, int min_active = 3)
{
    if (X.rows() != area.num_cells())
        throw ConfigError("select_refined: row count does not match the grid");
    const auto clusters = cluster_rows(X);
    PositionEstimate est;
    est.method = SelectionMethod::refined;
    double best = -1.0;
    bool any = false;
    for (Index k = 0; k < X.rows(); ++k) {
        const auto& rc = clusters[std::size_t(k)];
        if (int(rc.high.size()) < min_active)
            continue;
        double n = 0.0;
        for (int m : rc.high)
            n += std::norm(X(k, m));
        if (n > best) {
            best = n;
            est.index = k;
            any = true;
        }
    }
    if (!any) {
        auto naive = select_naive(X, area);
        naive.method = SelectionMethod::refined;
        naive.fallback = true;
        return naive;
    }
    est.in_active_set = true;
    est.degenerate = best <= 0.0;
    est.position = index_to_position(est.index, area);
    return est;
}

} // namespace dloc
