#pragma once

// Adaptive integration of the pole-locus ODE along polyline paths in complex
// time, branch-point detection (cube-root type), Puiseux-data extraction, and
// analytic continuation around branch points.

#include "pi21/laxpair.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>

namespace pi21 {

struct FlowState {
    cplx t;
    std::array<cplx, 4> y;  // (a, a', a'', a''')
};

struct BranchEvent {
    cplx b_est;
    cplx a0_est;
    double exponent_est = 0.0;
    double fit_residual = 0.0;
};

struct PathSample {
    FlowState state;
    double err_est = 0.0;  // local error estimate of the accepting step
};

struct PathSolution {
    std::vector<PathSample> samples;
    std::vector<BranchEvent> events;
    std::vector<cplx> path;
    double rtol = 1e-10, atol = 1e-12;
};

inline std::array<cplx, 4> p21_rhs(const FlowState& s) {
    const cplx a = s.y[0], a1 = s.y[1], a2 = s.y[2], a3 = s.y[3];
    cplx a4 = -120.0 * a1 * a1 * a1 * a2 + 120.0 * a1 * a2 * s.t +
              200.0 / 3.0 * a1 * a1 + 40.0 / 3.0 * a * a2 - 200.0 / 9.0 * s.t;
    return {a1, a2, a3, a4};
}

namespace detail {

using Vec4 = std::array<cplx, 4>;

inline Vec4 axpy(const Vec4& x, const Vec4& y, cplx a) {
    return {x[0] + a * y[0], x[1] + a * y[1], x[2] + a * y[2], x[3] + a * y[3]};
}

inline bool finite4(const Vec4& v) {
    return finite(v[0]) && finite(v[1]) && finite(v[2]) && finite(v[3]);
}

// Dormand-Prince 5(4) tableau
struct DP45 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                            a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 35.0 / 384 - 5179.0 / 57600,
                            e3 = 500.0 / 1113 - 7571.0 / 16695,
                            e4 = 125.0 / 192 - 393.0 / 640,
                            e5 = -2187.0 / 6784 + 92097.0 / 339200,
                            e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;
};

// tail diagnostics: monotone step collapse plus a growing derivative with the
// cube-root curvature ratio
inline bool blowup_suspected(const std::vector<PathSample>& ss) {
    size_t n = ss.size();
    if (n < 10) return false;
    double prev = 1e300;
    for (size_t i = n - 8; i < n; ++i) {
        double h = std::abs(ss[i].state.t - ss[i - 1].state.t);
        if (h > prev * 1.000001) return false;
        prev = h;
    }
    double g0 = std::abs(ss.front().state.y[1]);
    double g1 = std::abs(ss[n - 1].state.y[1]);
    if (!(g1 > 10.0 * std::max(g0, 1.0))) return false;
    int ok = 0;
    for (size_t i = n - 4; i < n; ++i) {
        const auto& y = ss[i].state.y;
        cplx ratio = y[2] * y[2] / (y[1] * y[3]);
        if (std::abs(ratio - 0.4) < 0.08) ++ok;
    }
    return ok == 4;
}

}  // namespace detail

inline BranchEvent detect_branch(const PathSolution& sol) {
    const auto& ss = sol.samples;
    size_t n = ss.size();
    if (n < 9) throw NoBlowup("detect_branch: too few samples");
    double prev = 1e300;
    for (size_t i = n - 8; i < n; ++i) {
        double h = std::abs(ss[i].state.t - ss[i - 1].state.t);
        if (h > prev * 1.000001) throw NoBlowup("detect_branch: steps not collapsing");
        prev = h;
    }
    // per-sample predictor b_i = t + (2/3) a'/a''; Richardson against the
    // distance to the current branch estimate removes the subleading drift
    size_t m = std::min<size_t>(6, n);
    cplx b = ss[n - 1].state.t +
             (2.0 / 3.0) * ss[n - 1].state.y[1] / ss[n - 1].state.y[2];
    double resid = 0.0;
    for (int it = 0; it < 3; ++it) {
        // linear LS of b_i = b + c * s_i with s_i = t_i - b_prev
        cplx S0 = 0, Ss = 0, Sss = 0, Sb = 0, Ssb = 0;
        for (size_t i = n - m; i < n; ++i) {
            cplx t = ss[i].state.t;
            cplx bi = t + (2.0 / 3.0) * ss[i].state.y[1] / ss[i].state.y[2];
            cplx si = t - b;
            S0 += 1.0;
            Ss += si;
            Sss += si * si;
            Sb += bi;
            Ssb += si * bi;
        }
        cplx det = S0 * Sss - Ss * Ss;
        cplx b_new = (Sb * Sss - Ss * Ssb) / det;
        cplx slope = (S0 * Ssb - Ss * Sb) / det;
        resid = 0.0;
        for (size_t i = n - m; i < n; ++i) {
            cplx t = ss[i].state.t;
            cplx bi = t + (2.0 / 3.0) * ss[i].state.y[1] / ss[i].state.y[2];
            resid += std::norm(bi - b_new - slope * (t - b));
        }
        resid = std::sqrt(resid / double(m));
        b = b_new;
    }
    BranchEvent ev;
    ev.b_est = b;
    ev.fit_residual = resid / std::max(1.0, std::abs(b));
    // log-log fit of |a'| against |t - b|
    double Sx = 0, Sxx = 0, Sy = 0, Sxy = 0;
    for (size_t i = n - m; i < n; ++i) {
        double lx = std::log(std::abs(ss[i].state.t - b));
        double ly = std::log(std::abs(ss[i].state.y[1]));
        Sx += lx;
        Sxx += lx * lx;
        Sy += ly;
        Sxy += lx * ly;
    }
    double slope = (double(m) * Sxy - Sx * Sy) / (double(m) * Sxx - Sx * Sx);
    ev.exponent_est = 1.0 + slope;
    ev.a0_est = ss[n - 1].state.y[0] + std::pow(ss[n - 1].state.t - b, 1.0 / 3.0);
    return ev;
}

inline PathSolution integrate_path(const FlowState& initial, const std::vector<cplx>& path,
                                   double rtol = 1e-10, double atol = 1e-12,
                                   int max_steps = 200000, bool detect_events = true) {
    using detail::Vec4;
    using T = detail::DP45;
    if (path.size() < 2) throw std::invalid_argument("integrate_path: need >= 2 vertices");
    if (std::abs(initial.t - path.front()) > 1e-12 * std::max(1.0, std::abs(path.front())))
        throw std::invalid_argument("integrate_path: initial.t not at path start");

    PathSolution sol;
    sol.path = path;
    sol.rtol = rtol;
    sol.atol = atol;

    double path_scale = 1.0;
    for (size_t i = 1; i < path.size(); ++i)
        path_scale = std::max(path_scale, std::abs(path[i] - path[i - 1]));

    Vec4 y = initial.y;
    cplx t = initial.t;
    sol.samples.push_back({FlowState{t, y}, 0.0});

    auto f = [&](cplx tt, const Vec4& yy) { return p21_rhs(FlowState{tt, yy}); };

    int steps = 0;
    double err_prev = 1.0;
    for (size_t seg = 1; seg < path.size(); ++seg) {
        cplx t1 = path[seg];
        cplx dirv = t1 - t;
        double len = std::abs(dirv);
        if (len == 0.0) continue;
        cplx dir = dirv / len;
        double s = 0.0;  // arclength along the segment
        double h = std::min(1e-2 * len, 1e-2);
        while (s < len) {
            if (++steps > max_steps) throw MaxStepsExceeded("integrate_path");
            bool clipped = false;
            if (h > len - s) {
                h = len - s;
                clipped = true;
            }
            cplx hd = h * dir;
            Vec4 k1 = f(t, y);
            Vec4 y2 = detail::axpy(y, k1, T::a21 * hd);
            Vec4 k2 = f(t + T::c2 * hd, y2);
            Vec4 y3 = y;
            y3 = detail::axpy(y3, k1, T::a31 * hd);
            y3 = detail::axpy(y3, k2, T::a32 * hd);
            Vec4 k3 = f(t + T::c3 * hd, y3);
            Vec4 y4 = y;
            y4 = detail::axpy(y4, k1, T::a41 * hd);
            y4 = detail::axpy(y4, k2, T::a42 * hd);
            y4 = detail::axpy(y4, k3, T::a43 * hd);
            Vec4 k4 = f(t + T::c4 * hd, y4);
            Vec4 y5 = y;
            y5 = detail::axpy(y5, k1, T::a51 * hd);
            y5 = detail::axpy(y5, k2, T::a52 * hd);
            y5 = detail::axpy(y5, k3, T::a53 * hd);
            y5 = detail::axpy(y5, k4, T::a54 * hd);
            Vec4 k5 = f(t + T::c5 * hd, y5);
            Vec4 y6 = y;
            y6 = detail::axpy(y6, k1, T::a61 * hd);
            y6 = detail::axpy(y6, k2, T::a62 * hd);
            y6 = detail::axpy(y6, k3, T::a63 * hd);
            y6 = detail::axpy(y6, k4, T::a64 * hd);
            y6 = detail::axpy(y6, k5, T::a65 * hd);
            Vec4 k6 = f(t + hd, y6);
            Vec4 ynew = y;
            ynew = detail::axpy(ynew, k1, T::b1 * hd);
            ynew = detail::axpy(ynew, k3, T::b3 * hd);
            ynew = detail::axpy(ynew, k4, T::b4 * hd);
            ynew = detail::axpy(ynew, k5, T::b5 * hd);
            ynew = detail::axpy(ynew, k6, T::b6 * hd);
            Vec4 k7 = f(t + hd, ynew);
            if (!detail::finite4(ynew)) throw NonFiniteState("integrate_path");
            double err = 0.0;
            for (int i = 0; i < 4; ++i) {
                cplx e = hd * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] +
                               T::e5 * k5[i] + T::e6 * k6[i] + T::e7 * k7[i]);
                double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                err += std::norm(std::abs(e) / sc);
            }
            err = std::sqrt(err / 4.0);
            if (err <= 1.0) {
                s += h;
                t += hd;
                y = ynew;
                sol.samples.push_back({FlowState{t, y}, err});
                // branch trigger: collapsed accepted step and a blown-up jet
                if (detect_events && !clipped && h < 1e-12 * path_scale &&
                    std::abs(y[1]) > 1e6) {
                    sol.events.push_back(detect_branch(sol));
                    return sol;
                }
                double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2) *
                             std::pow(err_prev, 0.04);
                err_prev = std::max(err, 1e-10);
                h *= std::min(5.0, std::max(0.2, fac));
            } else {
                h *= std::max(0.2, 0.9 * std::pow(err, -0.25));
            }
            if (h < 1e-15 * path_scale && std::abs(y[1]) <= 1e6)
                throw IntegrationFailed("integrate_path: step collapse without blowup");
        }
    }
    if (detect_events && detail::blowup_suspected(sol.samples)) {
        try {
            sol.events.push_back(detect_branch(sol));
        } catch (const NoBlowup&) {
        }
    }
    return sol;
}

inline OscillatorParams puiseux_fit(const PathSolution& sol, const BranchEvent& ev,
                                    int order) {
    // collect tail samples inside the series trust region
    std::vector<const PathSample*> data;
    for (const auto& s : sol.samples) {
        double d = std::abs(s.state.t - ev.b_est);
        if (d > 1e-8 && d < 0.45) data.push_back(&s);
    }
    size_t need = static_cast<size_t>(2 * order);
    if (data.size() > need) data.erase(data.begin(), data.end() - std::ptrdiff_t(need));
    if (data.size() < 8) throw FitDiverged("puiseux_fit: too few samples in trust region");

    const size_t m = 2 * data.size();  // residuals on a and a'
    using CVec = Eigen::VectorXcd;
    using CMat = Eigen::MatrixXcd;

    auto residual = [&](const std::array<cplx, 4>& p) {
        CVec r(m);
        PuiseuxSeriesA S = puiseux_a(p[0], p[1], p[2], p[3], order);
        for (size_t i = 0; i < data.size(); ++i) {
            const FlowState& st = data[i]->state;
            cplx off = st.t - p[0];
            cplx a = series_eval(S, off, 0);
            cplx a1 = series_eval(S, off, 1);
            r(2 * static_cast<Eigen::Index>(i)) =
                (a - st.y[0]) / (1.0 + std::abs(st.y[0]));
            r(2 * static_cast<Eigen::Index>(i) + 1) =
                (a1 - st.y[1]) / (1.0 + std::abs(st.y[1]));
        }
        return r;
    };

    std::array<cplx, 4> p{ev.b_est, ev.a0_est, 0.0, 0.0};
    CVec r = residual(p);
    double cost = r.squaredNorm();
    double lambda = 1e-6;
    for (int it = 0; it < 60; ++it) {
        CMat J(m, 4);
        for (int j = 0; j < 4; ++j) {
            double h = 1e-7 * std::max(1.0, std::abs(p[static_cast<size_t>(j)]));
            auto ph = p;
            ph[static_cast<size_t>(j)] += h;
            J.col(j) = (residual(ph) - r) / h;
        }
        CMat A = J.adjoint() * J;
        CVec g = J.adjoint() * r;
        bool improved = false;
        for (int tries = 0; tries < 12; ++tries) {
            CMat Ad = A;
            for (int j = 0; j < 4; ++j) Ad(j, j) += lambda * (1.0 + std::abs(A(j, j)));
            CVec dp = Ad.fullPivLu().solve(-g);
            auto pn = p;
            for (int j = 0; j < 4; ++j) pn[static_cast<size_t>(j)] += dp(j);
            CVec rn = residual(pn);
            double cn = rn.squaredNorm();
            if (cn < cost) {
                p = pn;
                r = rn;
                cost = cn;
                lambda = std::max(1e-12, lambda * 0.3);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) break;
        if (std::sqrt(cost / double(m)) < 1e-13) break;
    }
    if (std::sqrt(cost / double(m)) > 1e-6) throw FitDiverged("puiseux_fit: residual too large");
    return OscillatorParams{p[0], p[1], p[2], p[3]};
}

inline FlowState continue_around_branch(const FlowState& state, cplx b, double radius,
                                        int turns, double rtol = 1e-10,
                                        double atol = 1e-12) {
    if (turns == 0) return state;
    cplx rel = state.t - b;
    if (std::abs(std::abs(rel) - radius) > 1e-9 * std::max(1.0, radius))
        throw std::invalid_argument("continue_around_branch: state not on the circle");
    const int per_turn = 48;
    int n = per_turn * std::abs(turns);
    double sgn = turns > 0 ? 1.0 : -1.0;
    double th0 = std::arg(rel);
    std::vector<cplx> path;
    path.reserve(static_cast<size_t>(n) + 1);
    for (int k = 0; k <= n; ++k)
        path.push_back(b + radius * std::exp(cplx(0.0, th0 + sgn * 2.0 * PI * k / per_turn)));
    // chords of the circle shrink the apparent radius; start exactly at state.t
    path.front() = state.t;
    path.back() = state.t;
    PathSolution ps = integrate_path(state, path, rtol, atol, 200000, false);
    return ps.samples.back().state;
}

}  // namespace pi21
