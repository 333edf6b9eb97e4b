#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dloc/channel.hpp"
#include "dloc/common.hpp"
#include "dloc/scene.hpp"

namespace dloc {

/// Tunables of the linearized ADMM. lambda1 = tau1 / rho and
/// lambda2 = tau2 / rho are the thresholds of the two proximal steps.
struct AdmmParams
{
    double rho = 5.0;
    double tau1 = 0.5;
    double tau2 = 0.5;
    std::vector<double> weights; // w_m, one per station

    double lambda1() const { return tau1 / rho; }
    double lambda2() const { return tau2 / rho; }

    static AdmmParams defaults(int num_stations) { return {5.0, 0.5, 0.5, std::vector<double>(std::size_t(num_stations), 1.0)}; }

    void validate(int num_stations) const
    {
        auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
        if (!positive(rho) || !positive(tau1) || !positive(tau2))
            throw ConfigError("admm params: rho, tau1 and tau2 must be positive and finite");
        if (int(weights.size()) != num_stations)
            throw ConfigError("admm params: expected " + std::to_string(num_stations) + " weights, got "
                              + std::to_string(weights.size()));
        for (double w : weights)
            if (!positive(w))
                throw ConfigError("admm params: weights must be positive and finite");
    }
};

/// Iterates. x is vec(X) with station-major blocks of length K, so the
/// K x M matrix X is a column-major view of x.
struct AdmmState
{
    CVec x;
    CVec z;
    CVec s;
    int iteration = 0;

    static AdmmState zeros(const Dictionary& dict)
    {
        return {CVec::Zero(dict.num_cells() * dict.num_stations()), CVec::Zero(dict.total_angles()),
                CVec::Zero(dict.total_antennas()), 0};
    }

    Eigen::Map<const CMat> X(Index num_cells) const { return {x.data(), num_cells, x.size() / num_cells}; }
};

struct SolveTrace
{
    std::vector<double> nmse;
    std::vector<double> primal_residual; // ||A x + B z - y||_2
    std::vector<CVec> g1;                // only with keep_diagnostics
    std::vector<CVec> g2;

    std::size_t size() const { return nmse.size(); }
};

/// How the gradient terms A^H(...) and B^H(...) are evaluated.
///  - matrix_free: per-station products, O(K N_m + L_m N_m) per station.
///  - normal_equations: forms A_m^H A_m and B_m^H B_m every round and applies
///    them; O((K^2 + L_m^2) N_m). Same iterates, kept as a timing reference.
enum class ApplyMode
{
    matrix_free,
    normal_equations
};

struct SolveOptions
{
    double divergence_threshold = 1e6;
    bool keep_diagnostics = false;
    ApplyMode mode = ApplyMode::matrix_free;
};

struct SolveResult
{
    AdmmState state;
    SolveTrace trace;
};

// ---------------------------------------------------------------------------
// Block-diagonal operators
// ---------------------------------------------------------------------------

inline CVec apply_location(const Dictionary& dict, const CVec& x)
{
    const Index K = dict.num_cells();
    CVec out(dict.total_antennas());
    Index row = 0;
    for (int m = 0; m < dict.num_stations(); ++m) {
        const auto& A = dict.location[std::size_t(m)];
        out.segment(row, A.rows()).noalias() = A * x.segment(Index(m) * K, K);
        row += A.rows();
    }
    return out;
}

inline CVec apply_location_adjoint(const Dictionary& dict, const CVec& r)
{
    const Index K = dict.num_cells();
    CVec out(K * dict.num_stations());
    Index row = 0;
    for (int m = 0; m < dict.num_stations(); ++m) {
        const auto& A = dict.location[std::size_t(m)];
        out.segment(Index(m) * K, K).noalias() = A.adjoint() * r.segment(row, A.rows());
        row += A.rows();
    }
    return out;
}

inline CVec apply_angle(const Dictionary& dict, const CVec& z)
{
    CVec out(dict.total_antennas());
    Index row = 0, col = 0;
    for (const auto& B : dict.angle) {
        out.segment(row, B.rows()).noalias() = B * z.segment(col, B.cols());
        row += B.rows();
        col += B.cols();
    }
    return out;
}

inline CVec apply_angle_adjoint(const Dictionary& dict, const CVec& r)
{
    CVec out(dict.total_angles());
    Index row = 0, col = 0;
    for (const auto& B : dict.angle) {
        out.segment(col, B.cols()).noalias() = B.adjoint() * r.segment(row, B.rows());
        row += B.rows();
        col += B.cols();
    }
    return out;
}

/// Per-entry weights: w_m repeated over station m's angle segment.
inline RVec expand_weights(const Dictionary& dict, const std::vector<double>& weights)
{
    RVec out(dict.total_angles());
    Index col = 0;
    for (int m = 0; m < dict.num_stations(); ++m) {
        out.segment(col, dict.angles(m)).setConstant(weights[std::size_t(m)]);
        col += dict.angles(m);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Proximal operators
// ---------------------------------------------------------------------------

/// Group soft-threshold on rows: row k is scaled by (||C_k|| - lambda1) / ||C_k||
/// when ||C_k|| > lambda1 and zeroed otherwise.
template <typename Derived>
CMat prox_group_rows(const Eigen::MatrixBase<Derived>& C, double lambda1)
{
    CMat out(C.rows(), C.cols());
    for (Index k = 0; k < C.rows(); ++k) {
        const double norm = C.row(k).norm();
        if (norm > lambda1)
            out.row(k) = ((norm - lambda1) / norm) * C.row(k);
        else
            out.row(k).setZero();
    }
    return out;
}

/// Complex magnitude soft-threshold: max(|d| - lambda2 w, 0) d / |d|.
/// On real inputs this is the usual three-branch soft-threshold.
inline CVec prox_l1_weighted(const CVec& d, double lambda2, const RVec& entry_weights)
{
    if (entry_weights.size() != d.size())
        throw ConfigError("prox_l1_weighted: weight layout does not match the vector");
    CVec out(d.size());
    for (Index i = 0; i < d.size(); ++i) {
        const double mag = std::abs(d[i]);
        const double t = lambda2 * entry_weights[i];
        out[i] = mag > t ? d[i] * ((mag - t) / mag) : cplx(0.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// ADMM updates
// ---------------------------------------------------------------------------

namespace detail {

inline void require_finite(const CVec& v, const char* what, int iteration)
{
    if (!v.allFinite()) {
        std::ostringstream os;
        os << what << ": non-finite value at iteration " << iteration;
        throw NumericalError(os.str());
    }
}

inline void check_dimensions(const AdmmState& st, const Dictionary& dict, const CVec& y)
{
    if (st.x.size() != dict.num_cells() * dict.num_stations() || st.z.size() != dict.total_angles()
        || st.s.size() != dict.total_antennas() || y.size() != dict.total_antennas())
        throw ConfigError("admm: state / measurement dimensions do not match the dictionary");
}

// g1 = A^H (Ax + Bz - y + s/rho), with Ax and Bz supplied.
inline CVec location_gradient(const Dictionary& dict, const AdmmState& st, const CVec& Ax, const CVec& Bz,
                              const CVec& y, double rho, ApplyMode mode)
{
    if (mode == ApplyMode::matrix_free)
        return apply_location_adjoint(dict, CVec(Ax + Bz - y + st.s / rho));
    const Index K = dict.num_cells();
    const CVec rest = Bz - y + st.s / rho;
    CVec g(K * dict.num_stations());
    Index row = 0;
    for (int m = 0; m < dict.num_stations(); ++m) {
        const auto& A = dict.location[std::size_t(m)];
        const CMat gram = A.adjoint() * A;
        g.segment(Index(m) * K, K).noalias() = gram * st.x.segment(Index(m) * K, K);
        g.segment(Index(m) * K, K).noalias() += A.adjoint() * rest.segment(row, A.rows());
        row += A.rows();
    }
    return g;
}

inline CVec angle_gradient(const Dictionary& dict, const AdmmState& st, const CVec& Ax, const CVec& Bz, const CVec& y,
                           double rho, ApplyMode mode)
{
    if (mode == ApplyMode::matrix_free)
        return apply_angle_adjoint(dict, CVec(Bz + Ax - y + st.s / rho));
    const CVec rest = Ax - y + st.s / rho;
    CVec g(dict.total_angles());
    Index row = 0, col = 0;
    for (const auto& B : dict.angle) {
        const CMat gram = B.adjoint() * B;
        g.segment(col, B.cols()).noalias() = gram * st.z.segment(col, B.cols());
        g.segment(col, B.cols()).noalias() += B.adjoint() * rest.segment(row, B.rows());
        row += B.rows();
        col += B.cols();
    }
    return g;
}

inline CVec x_step(const Dictionary& dict, const AdmmState& st, const CVec& g1, double tau1, double lambda1)
{
    const Index K = dict.num_cells();
    const CVec c = st.x - tau1 * g1;
    const CMat X = prox_group_rows(Eigen::Map<const CMat>(c.data(), K, dict.num_stations()), lambda1);
    return Eigen::Map<const CVec>(X.data(), X.size());
}

inline CVec z_step(const Dictionary& dict, const AdmmState& st, const CVec& g2, const AdmmParams& p)
{
    const CVec d = st.z - p.tau2 * g2;
    return prox_l1_weighted(d, p.lambda2(), expand_weights(dict, p.weights));
}

} // namespace detail

/// x-subproblem: c = x - tau1 g1, reshaped to K x M and group-thresholded
/// with lambda1 = tau1 / rho.
inline CVec x_update(const AdmmState& st, const AdmmParams& p, const Dictionary& dict, const CVec& y,
                     ApplyMode mode = ApplyMode::matrix_free, CVec* g1_out = nullptr)
{
    detail::check_dimensions(st, dict, y);
    const CVec g1 = detail::location_gradient(dict, st, apply_location(dict, st.x), apply_angle(dict, st.z), y, p.rho, mode);
    detail::require_finite(g1, "x_update", st.iteration);
    if (g1_out)
        *g1_out = g1;
    return detail::x_step(dict, st, g1, p.tau1, p.lambda1());
}

/// z-subproblem; `st.x` must already hold this round's x.
inline CVec z_update(const AdmmState& st, const AdmmParams& p, const Dictionary& dict, const CVec& y,
                     ApplyMode mode = ApplyMode::matrix_free, CVec* g2_out = nullptr)
{
    detail::check_dimensions(st, dict, y);
    const CVec g2 = detail::angle_gradient(dict, st, apply_location(dict, st.x), apply_angle(dict, st.z), y, p.rho, mode);
    detail::require_finite(g2, "z_update", st.iteration);
    if (g2_out)
        *g2_out = g2;
    return detail::z_step(dict, st, g2, p);
}

/// s + rho (A x + B z - y), with x and z already updated.
inline CVec dual_update(const AdmmState& st, const AdmmParams& p, const Dictionary& dict, const CVec& y)
{
    detail::check_dimensions(st, dict, y);
    return st.s + p.rho * (apply_location(dict, st.x) + apply_angle(dict, st.z) - y);
}

inline double nmse(const CVec& y, const CVec& x, const CVec& z, const Dictionary& dict)
{
    const double num = (y - apply_location(dict, x) - apply_angle(dict, z)).squaredNorm();
    const double den = y.squaredNorm();
    if (den == 0.0)
        return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

/// One x / z / dual round in Gauss-Seidel order. Matches the composition of
/// x_update, z_update and dual_update exactly; products are shared between
/// the three steps.
inline void admm_round(AdmmState& st, const AdmmParams& p, const Dictionary& dict, const CVec& y,
                       const SolveOptions& opt = {}, SolveTrace* trace = nullptr)
{
    detail::check_dimensions(st, dict, y);
    const CVec Bz = apply_angle(dict, st.z);
    const CVec g1 = detail::location_gradient(dict, st, apply_location(dict, st.x), Bz, y, p.rho, opt.mode);
    detail::require_finite(g1, "x_update", st.iteration);
    st.x = detail::x_step(dict, st, g1, p.tau1, p.lambda1());

    const CVec Ax = apply_location(dict, st.x);
    const CVec g2 = detail::angle_gradient(dict, st, Ax, Bz, y, p.rho, opt.mode);
    detail::require_finite(g2, "z_update", st.iteration);
    st.z = detail::z_step(dict, st, g2, p);

    const CVec r = Ax + apply_angle(dict, st.z) - y;
    st.s += p.rho * r;
    ++st.iteration;

    if (trace) {
        const double den = y.squaredNorm();
        const double num = r.squaredNorm();
        trace->nmse.push_back(den == 0.0 ? (num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity()) : num / den);
        trace->primal_residual.push_back(std::sqrt(num));
        if (opt.keep_diagnostics) {
            trace->g1.push_back(g1);
            trace->g2.push_back(g2);
        }
        const double last = trace->nmse.back();
        if (!std::isfinite(last) && den != 0.0)
            throw NumericalError("admm diverged: non-finite NMSE at iteration " + std::to_string(st.iteration));
        if (last > opt.divergence_threshold)
            throw NumericalError("admm diverged at iteration " + std::to_string(st.iteration) + ": NMSE "
                                 + std::to_string(last) + " exceeds " + std::to_string(opt.divergence_threshold));
    }
}

/// Fixed-parameter ADMM for `iterations` rounds from a zero (or supplied) state.
inline SolveResult solve(const ReceivedSignal& sig, const Dictionary& dict, const AdmmParams& params, int iterations,
                         const SolveOptions& opt = {}, std::optional<AdmmState> warm_start = std::nullopt)
{
    if (iterations < 1)
        throw ConfigError("solve: iterations must be >= 1");
    params.validate(dict.num_stations());
    SolveResult res{warm_start ? std::move(*warm_start) : AdmmState::zeros(dict), {}};
    for (int i = 0; i < iterations; ++i)
        admm_round(res.state, params, dict, sig.y, opt, &res.trace);
    return res;
}

} // namespace dloc
