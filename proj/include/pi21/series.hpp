#pragma once

// Formal series solutions of the pole-dynamics ODE and of the underlying
// fourth-order PDE reduction:
//   * Laurent expansion of u at a double pole (4 free parameters),
//   * degenerate Laurent expansion at a triple-weight pole (3 free parameters),
//   * Puiseux expansion of a(t) at a cube-root branch point (4 free parameters),
//   * quasi-stationary large-t log-series (2 free parameters).
// All recurrences are solved numerically order by order: the ODE residual is
// affine in the highest undetermined coefficient, so two residual evaluations
// (coefficient 0 and 1) determine it.

#include "pi21/common.hpp"

namespace pi21 {

// F(u) = u'''' + 10 (u')^2 + 20 u u'' + 40 (u^3 - 6 t u + 6 x), x = a + s.
// u is a series in s = x - a.
inline FracSeries residual_u_ode(const FracSeries& u, cplx a, cplx t, int hi_cap) {
    FracSeries u1 = fs_deriv(u), u2 = fs_deriv(u1), u4 = fs_deriv(fs_deriv(u2));
    FracSeries r = u4;
    r = fs_add(r, fs_scale(fs_mul(u1, u1, hi_cap), 10.0));
    r = fs_add(r, fs_scale(fs_mul(u, u2, hi_cap), 20.0));
    // inner square must keep indices up to hi_cap - u.lo, or the cube loses
    // cross terms re-lowered by the pole factor
    FracSeries uu = fs_mul(u, u, hi_cap - std::min(0, u.lo));
    r = fs_add(r, fs_scale(fs_mul(uu, u, hi_cap), 40.0));
    r = fs_add(r, fs_scale(u, -240.0 * t));
    FracSeries x = fs_make(u.den, 0, u.den);
    x.set(0, a);
    x.set(u.den, 1.0);  // s term (den=1 for Laurent series)
    r = fs_add(r, fs_scale(x, 240.0));
    return r;
}

// G(a) = a'''' + 120 (a')^3 a'' - 120 a' a'' t - (200/3)(a')^2 - (40/3) a a''
//        + (200/9) t,  with t = t0 + s, a a series in s (or in w = s^{1/3}).
inline FracSeries residual_a_ode(const FracSeries& a, cplx t0, int hi_cap) {
    FracSeries a1 = fs_deriv(a), a2 = fs_deriv(a1), a3 = fs_deriv(a2), a4 = fs_deriv(a3);
    FracSeries tser = fs_make(a.den, 0, a.den);
    tser.set(0, t0);
    tser.set(a.den, 1.0);
    FracSeries r = a4;
    // partial products need extra headroom above hi_cap: the factor they are
    // multiplied with next can carry negative indices
    int lo11 = 2 * a1.lo, lo12 = a1.lo + a2.lo;
    FracSeries a1a2 = fs_mul(a1, a2, hi_cap - std::min(0, lo11));
    FracSeries a1a1 = fs_mul(a1, a1, hi_cap - std::min(0, lo12));
    r = fs_add(r, fs_scale(fs_mul(a1a1, a1a2, hi_cap), 120.0));
    r = fs_add(r, fs_scale(fs_mul(a1a2, tser, hi_cap), -120.0));
    r = fs_add(r, fs_scale(fs_mul(a1, a1, hi_cap), -200.0 / 3.0));
    r = fs_add(r, fs_scale(fs_mul(a, a2, hi_cap), -40.0 / 3.0));
    r = fs_add(r, fs_scale(tser, 200.0 / 9.0));
    return r;
}

namespace detail {

// Solve the undetermined coefficient at series index k given that the ODE
// residual coefficient at index k + shift is affine in it.
template <class Residual>
void solve_order(FracSeries& s, int k, int shift, const Residual& res) {
    int target = k + shift;
    s.set(k, 0.0);
    cplx r0 = res(s, target).at(target);
    s.set(k, 1.0);
    cplx r1 = res(s, target).at(target);
    cplx lam = r1 - r0;
    if (std::abs(lam) < 1e-10)
        throw std::runtime_error("series recurrence: vanishing linear factor at order " +
                                 std::to_string(k));
    s.set(k, -r0 / lam);
}

}  // namespace detail

// ---- Laurent series of u at a movable double pole ---------------------------

struct LaurentSeriesP12 {
    cplx a, t;
    cplx c0, c3, c6;
    int order = 0;               // coefficients c_k for k = 0..order
    std::vector<cplx> c;         // c[k] = c_k
    FracSeries u;                // full series incl. the -s^{-2} pole term
    double trust_radius = 0.5;
};

inline LaurentSeriesP12 laurent_p12(cplx a, cplx c0, cplx c3, cplx c6, cplx t, int order) {
    if (order < 2) throw std::invalid_argument("laurent_p12: order >= 2 required");
    LaurentSeriesP12 S;
    S.a = a; S.t = t; S.c0 = c0; S.c3 = c3; S.c6 = c6; S.order = order;
    FracSeries u = fs_make(1, -2, order);
    u.set(-2, -1.0);
    u.set(0, c0);
    auto res = [&](const FracSeries& v, int target) {
        return residual_u_ode(v, a, t, target);
    };
    for (int k = -1; k <= order; ++k) {
        if (k == 0) continue;
        if (k == 3) { u.set(3, c3); continue; }
        if (k == 6) { u.set(6, c6); continue; }
        detail::solve_order(u, k, -4, res);
    }
    S.u = u;
    S.c.assign(static_cast<size_t>(order + 1), 0.0);
    for (int k = 0; k <= order; ++k) S.c[static_cast<size_t>(k)] = u.at(k);
    return S;
}

inline std::array<cplx, 3> kdv_constrain(cplx a1, cplx a2, cplx a3, cplx t) {
    cplx c0 = a1;
    cplx c3 = 2.0 * a2;
    cplx c6 = -a3 / 3.0 - 3.0 * a1 * a1 * a1 * a1 + 12.0 * a1 * a1 * t - 12.0 * t * t;
    return {c0, c3, c6};
}

// ---- degenerate Laurent series (leading coefficient -3) ---------------------

struct DegenerateLaurentP12 {
    cplx a, t;
    cplx c6, c8;
    int order = 0;
    std::vector<cplx> c;
    FracSeries u;
    double trust_radius = 0.5;
};

inline DegenerateLaurentP12 laurent_p12_degenerate(cplx a, cplx c6, cplx c8, cplx t, int order) {
    if (order < 2) throw std::invalid_argument("laurent_p12_degenerate: order >= 2 required");
    DegenerateLaurentP12 S;
    S.a = a; S.t = t; S.c6 = c6; S.c8 = c8; S.order = order;
    FracSeries u = fs_make(1, -2, order);
    u.set(-2, -3.0);
    auto res = [&](const FracSeries& v, int target) {
        return residual_u_ode(v, a, t, target);
    };
    for (int k = -1; k <= order; ++k) {
        if (k == 6) { u.set(6, c6); continue; }
        if (k == 8) { u.set(8, c8); continue; }
        detail::solve_order(u, k, -4, res);
    }
    S.u = u;
    S.c.assign(static_cast<size_t>(order + 1), 0.0);
    for (int k = 0; k <= order; ++k) S.c[static_cast<size_t>(k)] = u.at(k);
    return S;
}

// ---- Puiseux series of a(t) at a branch point --------------------------------

struct PuiseuxSeriesA {
    cplx b;
    cplx a0, a9, a11;
    int order = 0;               // coefficients a_k over (t-b)^{k/3}, k = 0..order
    std::vector<cplx> a;
    FracSeries s;                // den = 3
    double trust_radius = 0.5;
};

inline PuiseuxSeriesA puiseux_a(cplx b, cplx a0, cplx a9, cplx a11, int order) {
    if (order < 5) throw std::invalid_argument("puiseux_a: order >= 5 required");
    PuiseuxSeriesA S;
    S.b = b; S.a0 = a0; S.a9 = a9; S.a11 = a11; S.order = order;
    FracSeries a = fs_make(3, 0, order);
    a.set(0, a0);
    a.set(1, -1.0);  // fixed by the nonlinear leading balance; defines the branch family
    auto res = [&](const FracSeries& v, int target) {
        return residual_a_ode(v, b, target);
    };
    for (int k = 2; k <= order; ++k) {
        if (k == 9) { a.set(9, a9); continue; }
        if (k == 11) { a.set(11, a11); continue; }
        detail::solve_order(a, k, -12, res);
    }
    S.s = a;
    S.a.assign(static_cast<size_t>(order + 1), 0.0);
    for (int k = 0; k <= order; ++k) S.a[static_cast<size_t>(k)] = a.at(k);
    return S;
}

// ---- quasi-stationary log-series ---------------------------------------------
// a(t) = t^{3/2} sum_{k,l >= 0} (t^{-7/4} ln t^{-7/4})^k t^{-7l/4} a_kl.
// Internally: a = sum C_{m,k} t^{(6-7m)/4} (ln t)^k with grade m = k + l and
// C_{m,k} = (-7/4)^k a_{k, m-k}.

struct LogGrid {
    // c[e][k] multiplies t^{(qlo+e)/4} (ln t)^k
    int qlo = 0;
    std::vector<std::vector<cplx>> c;

    int qhi() const { return qlo + static_cast<int>(c.size()) - 1; }
    cplx at(int q, int k) const {
        if (q < qlo || q > qhi()) return 0.0;
        const auto& row = c[static_cast<size_t>(q - qlo)];
        if (k < 0 || k >= static_cast<int>(row.size())) return 0.0;
        return row[static_cast<size_t>(k)];
    }
    void add_to(int q, int k, cplx v) {
        if (q < qlo || q > qhi()) throw std::out_of_range("LogGrid::add_to q");
        auto& row = c[static_cast<size_t>(q - qlo)];
        if (k >= static_cast<int>(row.size())) row.resize(static_cast<size_t>(k + 1), 0.0);
        row[static_cast<size_t>(k)] += v;
    }
};

inline LogGrid lg_make(int qlo, int qhi) {
    LogGrid g;
    g.qlo = qlo;
    g.c.assign(static_cast<size_t>(qhi - qlo + 1), {});
    return g;
}

inline LogGrid lg_add(const LogGrid& x, const LogGrid& y) {
    LogGrid r = lg_make(std::min(x.qlo, y.qlo), std::max(x.qhi(), y.qhi()));
    for (const LogGrid* s : {&x, &y})
        for (int q = s->qlo; q <= s->qhi(); ++q)
            for (int k = 0; k < static_cast<int>(s->c[static_cast<size_t>(q - s->qlo)].size()); ++k)
                r.add_to(q, k, s->at(q, k));
    return r;
}

inline LogGrid lg_scale(const LogGrid& x, cplx s) {
    LogGrid r = x;
    for (auto& row : r.c)
        for (auto& v : row) v *= s;
    return r;
}

// product, dropping terms with quarter-exponent below q_floor
inline LogGrid lg_mul(const LogGrid& x, const LogGrid& y, int q_floor) {
    LogGrid r = lg_make(std::max(x.qlo + y.qlo, q_floor), x.qhi() + y.qhi());
    for (int qx = x.qlo; qx <= x.qhi(); ++qx)
        for (int kx = 0; kx < static_cast<int>(x.c[static_cast<size_t>(qx - x.qlo)].size()); ++kx) {
            cplx vx = x.at(qx, kx);
            if (std::abs(vx) == 0.0) continue;
            for (int qy = std::max(y.qlo, q_floor - qx); qy <= y.qhi(); ++qy)
                for (int ky = 0; ky < static_cast<int>(y.c[static_cast<size_t>(qy - y.qlo)].size()); ++ky) {
                    cplx vy = y.at(qy, ky);
                    if (std::abs(vy) == 0.0) continue;
                    r.add_to(qx + qy, kx + ky, vx * vy);
                }
        }
    return r;
}

// d/dt: t^{q/4} L^k -> (q/4) t^{q/4-1} L^k + k t^{q/4-1} L^{k-1}
inline LogGrid lg_dt(const LogGrid& x) {
    LogGrid r = lg_make(x.qlo - 4, x.qhi() - 4);
    for (int q = x.qlo; q <= x.qhi(); ++q)
        for (int k = 0; k < static_cast<int>(x.c[static_cast<size_t>(q - x.qlo)].size()); ++k) {
            cplx v = x.at(q, k);
            if (std::abs(v) == 0.0) continue;
            r.add_to(q - 4, k, v * (double(q) / 4.0));
            if (k > 0) r.add_to(q - 4, k - 1, v * double(k));
        }
    return r;
}

// multiply by t (shift exponent by one)
inline LogGrid lg_tshift(const LogGrid& x) {
    LogGrid r = lg_make(x.qlo + 4, x.qhi() + 4);
    for (int q = x.qlo; q <= x.qhi(); ++q)
        for (int k = 0; k < static_cast<int>(x.c[static_cast<size_t>(q - x.qlo)].size()); ++k)
            r.add_to(q + 4, k, x.at(q, k));
    return r;
}

inline cplx lg_eval(const LogGrid& x, cplx t) {
    cplx L = std::log(t), sum = 0.0;
    for (int q = x.qlo; q <= x.qhi(); ++q)
        for (int k = 0; k < static_cast<int>(x.c[static_cast<size_t>(q - x.qlo)].size()); ++k) {
            cplx v = x.at(q, k);
            if (std::abs(v) == 0.0) continue;
            sum += v * std::pow(t, double(q) / 4.0) * std::pow(L, double(k));
        }
    return sum;
}

inline LogGrid residual_a_ode_log(const LogGrid& a, int q_floor) {
    LogGrid a1 = lg_dt(a), a2 = lg_dt(a1), a4 = lg_dt(lg_dt(a2));
    LogGrid r = a4;
    // mirrored headroom rule: truncation drops low exponents here, and the
    // next factor can carry positive exponents
    int hi11 = 2 * a1.qhi(), hi12 = a1.qhi() + a2.qhi();
    LogGrid a1a2 = lg_mul(a1, a2, q_floor - std::max(4, hi11));
    LogGrid a1a1 = lg_mul(a1, a1, q_floor - std::max(0, hi12));
    r = lg_add(r, lg_scale(lg_mul(a1a1, a1a2, q_floor), 120.0));
    r = lg_add(r, lg_scale(lg_tshift(a1a2), -120.0));
    r = lg_add(r, lg_scale(lg_mul(a1, a1, q_floor), -200.0 / 3.0));
    r = lg_add(r, lg_scale(lg_mul(a, a2, q_floor), -40.0 / 3.0));
    LogGrid tt = lg_make(4, 4);
    tt.add_to(4, 0, 200.0 / 9.0);
    r = lg_add(r, tt);
    return r;
}

struct QuasiStatSeries {
    cplx a10, a01;
    int K = 0, L = 0;
    std::vector<std::vector<cplx>> akl;  // akl[k][l], k = 0..K, l = 0..L
    LogGrid grid;                        // internal representation of a(t)
    double trust_t_min = 4.0;
};

inline cplx quasistat_leading_coeff() {
    return 2.0 * std::sqrt(5.0) / (9.0 * std::sqrt(3.0));
}

inline QuasiStatSeries quasistat_series(cplx a10, cplx a01, int K, int L) {
    if (K < 1 || L < 1) throw std::invalid_argument("quasistat_series: K, L >= 1 required");
    int M = K + L;  // highest grade
    QuasiStatSeries S;
    S.a10 = a10; S.a01 = a01; S.K = K; S.L = L;
    // grade m lives at quarter-exponent 6 - 7m
    LogGrid a = lg_make(6 - 7 * M, 6);
    a.add_to(6, 0, quasistat_leading_coeff());
    a.add_to(6 - 7, 1, a10 * (-7.0 / 4.0));
    a.add_to(6 - 7, 0, a01);
    int q_floor = 4 - 7 * M;  // lowest residual exponent we need
    for (int m = 2; m <= M; ++m) {
        int qa = 6 - 7 * m;      // exponent of the grade-m coefficients of a
        int qr = 4 - 7 * m;      // exponent of the grade-m residual equation
        for (int k = m; k >= 0; --k) {
            a.add_to(qa, k, -a.at(qa, k));  // zero the slot
            cplx r0 = residual_a_ode_log(a, q_floor).at(qr, k);
            a.add_to(qa, k, 1.0);
            cplx r1 = residual_a_ode_log(a, q_floor).at(qr, k);
            cplx lam = r1 - r0;
            if (std::abs(lam) < 1e-10)
                throw std::runtime_error("quasistat recurrence: vanishing linear factor");
            a.add_to(qa, k, -r0 / lam - 1.0);
        }
    }
    S.grid = a;
    S.akl.assign(static_cast<size_t>(K + 1), std::vector<cplx>(static_cast<size_t>(L + 1), 0.0));
    for (int k = 0; k <= K; ++k)
        for (int l = 0; l <= L; ++l) {
            int m = k + l;
            S.akl[static_cast<size_t>(k)][static_cast<size_t>(l)] =
                a.at(6 - 7 * m, k) / std::pow(cplx(-7.0 / 4.0), double(k));
        }
    return S;
}

// ---- evaluation ---------------------------------------------------------------

inline cplx series_eval(const LaurentSeriesP12& s, cplx offset, int deriv = 0) {
    if (std::abs(offset) > s.trust_radius)
        throw TrustRadiusExceeded("laurent eval: |offset| over trust radius");
    return fs_eval(s.u, offset, deriv);
}

inline cplx series_eval(const DegenerateLaurentP12& s, cplx offset, int deriv = 0) {
    if (std::abs(offset) > s.trust_radius)
        throw TrustRadiusExceeded("degenerate laurent eval: |offset| over trust radius");
    return fs_eval(s.u, offset, deriv);
}

inline cplx series_eval(const PuiseuxSeriesA& s, cplx offset, int deriv = 0) {
    if (std::abs(offset) > s.trust_radius)
        throw TrustRadiusExceeded("puiseux eval: |offset| over trust radius");
    return fs_eval(s.s, offset, deriv);
}

inline cplx series_eval(const QuasiStatSeries& s, cplx t, int deriv = 0) {
    if (std::abs(t) < s.trust_t_min)
        throw TrustRadiusExceeded("quasistat eval: |t| below trusted range");
    LogGrid g = s.grid;
    for (int d = 0; d < deriv; ++d) g = lg_dt(g);
    return lg_eval(g, t);
}

}  // namespace pi21
