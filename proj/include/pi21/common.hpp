#pragma once

// Shared numeric kernel: 2x2 complex matrices, matrix polynomials in the
// spectral variable, truncated fractional-power series arithmetic, and
// Gauss-Legendre quadrature rules.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace pi21 {

using cplx = std::complex<double>;
inline constexpr double PI = 3.141592653589793238462643383279502884;

// ---- error taxonomy -------------------------------------------------------

struct TrustRadiusExceeded : std::runtime_error { using std::runtime_error::runtime_error; };
struct GaugePole : std::runtime_error { using std::runtime_error::runtime_error; };
struct NonConvergence : std::runtime_error { using std::runtime_error::runtime_error; };
struct MaxStepsExceeded : std::runtime_error { using std::runtime_error::runtime_error; };
struct NonFiniteState : std::runtime_error { using std::runtime_error::runtime_error; };
struct NoBlowup : std::runtime_error { using std::runtime_error::runtime_error; };
struct FitDiverged : std::runtime_error { using std::runtime_error::runtime_error; };
struct AmbiguousRoot : std::runtime_error { using std::runtime_error::runtime_error; };
struct NewtonDiverged : std::runtime_error { using std::runtime_error::runtime_error; };
struct DegenerateCurve : std::runtime_error { using std::runtime_error::runtime_error; };
struct QuadratureNotConverged : std::runtime_error { using std::runtime_error::runtime_error; };
struct PathCrossesBranchPoint : std::runtime_error { using std::runtime_error::runtime_error; };
struct OnCut : std::runtime_error { using std::runtime_error::runtime_error; };
struct NearSpecialV : std::runtime_error { using std::runtime_error::runtime_error; };
struct AiryEvalOutOfRange : std::runtime_error { using std::runtime_error::runtime_error; };
struct SectorViolation : std::runtime_error { using std::runtime_error::runtime_error; };
struct IntegrationFailed : std::runtime_error { using std::runtime_error::runtime_error; };
struct StructureViolation : std::runtime_error { using std::runtime_error::runtime_error; };

// ---- 2x2 complex matrices --------------------------------------------------

struct Mat2 {
    cplx a, b, c, d;  // [[a, b], [c, d]]

    static Mat2 zero() { return {0.0, 0.0, 0.0, 0.0}; }
    static Mat2 id() { return {1.0, 0.0, 0.0, 1.0}; }

    Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
    Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d};
    }
    Mat2 operator*(cplx s) const { return {a * s, b * s, c * s, d * s}; }
    Mat2 operator-() const { return {-a, -b, -c, -d}; }

    cplx det() const { return a * d - b * c; }
    cplx tr() const { return a + d; }
    Mat2 inv() const {
        cplx dt = det();
        if (std::abs(dt) == 0.0) throw std::runtime_error("Mat2::inv singular matrix");
        return {d / dt, -b / dt, -c / dt, a / dt};
    }
    double norm() const {
        return std::max(std::max(std::abs(a), std::abs(b)),
                        std::max(std::abs(c), std::abs(d)));
    }
};

inline Mat2 operator*(cplx s, const Mat2& m) { return m * s; }
inline Mat2 commutator(const Mat2& x, const Mat2& y) { return x * y - y * x; }

inline Mat2 sigma1() { return {0.0, 1.0, 1.0, 0.0}; }
inline Mat2 sigma2() { return {0.0, cplx(0, -1), cplx(0, 1), 0.0}; }
inline Mat2 sigma3() { return {1.0, 0.0, 0.0, -1.0}; }
inline Mat2 sigma_plus() { return {0.0, 1.0, 0.0, 0.0}; }
inline Mat2 sigma_minus() { return {0.0, 0.0, 1.0, 0.0}; }

// diag(z^p, z^-p) on the principal branch
inline Mat2 diag_pow(cplx z, cplx p) {
    cplx w = std::pow(z, p);
    return {w, 0.0, 0.0, 1.0 / w};
}
inline Mat2 diag(cplx p, cplx q) { return {p, 0.0, 0.0, q}; }

// ---- matrix polynomials in lambda ------------------------------------------

struct PolyMat {
    std::vector<Mat2> c;  // c[j] multiplies lambda^j

    int degree() const { return static_cast<int>(c.size()) - 1; }
    Mat2 eval(cplx lam) const {
        Mat2 r = Mat2::zero();
        for (int j = degree(); j >= 0; --j) r = r * lam + c[static_cast<size_t>(j)];
        return r;
    }
    PolyMat deriv() const {
        PolyMat p;
        for (size_t j = 1; j < c.size(); ++j) p.c.push_back(c[j] * cplx(double(j)));
        if (p.c.empty()) p.c.push_back(Mat2::zero());
        return p;
    }
};

// ---- truncated fractional-power series --------------------------------------
// Represents sum_{k >= lo} c[k - lo] * w^k where w = s^(1/den); derivative is
// taken with respect to s.

struct FracSeries {
    int den = 1;
    int lo = 0;
    std::vector<cplx> c;

    int hi() const { return lo + static_cast<int>(c.size()) - 1; }
    cplx at(int k) const {
        if (k < lo || k > hi()) return 0.0;
        return c[static_cast<size_t>(k - lo)];
    }
    void set(int k, cplx v) {
        if (k < lo || k > hi()) throw std::out_of_range("FracSeries::set");
        c[static_cast<size_t>(k - lo)] = v;
    }
    void trim_lead(double eps = 0.0) {
        while (!c.empty() && std::abs(c.front()) <= eps) {
            c.erase(c.begin());
            ++lo;
        }
    }
};

inline FracSeries fs_make(int den, int lo, int hi_) {
    FracSeries f;
    f.den = den;
    f.lo = lo;
    f.c.assign(static_cast<size_t>(hi_ - lo + 1), 0.0);
    return f;
}

inline FracSeries fs_add(const FracSeries& x, const FracSeries& y) {
    int lo = std::min(x.lo, y.lo), hi_ = std::max(x.hi(), y.hi());
    FracSeries r = fs_make(x.den, lo, hi_);
    for (int k = lo; k <= hi_; ++k) r.set(k, x.at(k) + y.at(k));
    return r;
}

inline FracSeries fs_scale(const FracSeries& x, cplx s) {
    FracSeries r = x;
    for (auto& v : r.c) v *= s;
    return r;
}

inline FracSeries fs_sub(const FracSeries& x, const FracSeries& y) {
    return fs_add(x, fs_scale(y, -1.0));
}

// product truncated to indices <= hi_cap
inline FracSeries fs_mul(const FracSeries& x, const FracSeries& y, int hi_cap) {
    int lo = x.lo + y.lo;
    int hi_ = std::min(x.hi() + y.hi(), hi_cap);
    if (hi_ < lo) return fs_make(x.den, lo, lo);
    FracSeries r = fs_make(x.den, lo, hi_);
    for (int i = x.lo; i <= x.hi(); ++i) {
        if (std::abs(x.at(i)) == 0.0) continue;
        int jmax = std::min(y.hi(), hi_ - i);
        for (int j = y.lo; j <= jmax; ++j)
            r.c[static_cast<size_t>(i + j - lo)] += x.at(i) * y.at(j);
    }
    return r;
}

// d/ds of sum c_k s^{k/den}: term k -> (k/den) s^{k/den - 1}
inline FracSeries fs_deriv(const FracSeries& x) {
    FracSeries r = fs_make(x.den, x.lo - x.den, x.hi() - x.den);
    for (int k = x.lo; k <= x.hi(); ++k)
        r.set(k - x.den, x.at(k) * (double(k) / double(x.den)));
    r.trim_lead();
    return r;
}

inline cplx fs_eval(const FracSeries& x, cplx s, int deriv_order = 0) {
    FracSeries f = x;
    for (int d = 0; d < deriv_order; ++d) f = fs_deriv(f);
    cplx w = std::pow(s, 1.0 / double(f.den));
    cplx sum = 0.0;
    // Horner in w from the top index down to lo, then multiply by w^lo.
    for (int k = f.hi(); k >= f.lo; --k) sum = sum * w + f.at(k);
    if (f.lo != 0) sum *= std::pow(w, double(f.lo));
    return sum;
}

// ---- Gauss-Legendre ----------------------------------------------------------

struct QuadRule {
    std::vector<double> x, w;  // nodes/weights on [-1, 1]
};

inline const QuadRule& gauss_legendre(int n) {
    static std::vector<QuadRule> cache(1 << 12);
    if (n <= 0 || n >= (1 << 12)) throw std::invalid_argument("gauss_legendre order");
    QuadRule& r = cache[static_cast<size_t>(n)];
    if (!r.x.empty()) return r;
    r.x.resize(static_cast<size_t>(n));
    r.w.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        r.x[static_cast<size_t>(i)] = x;
        r.w[static_cast<size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

inline bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace pi21
