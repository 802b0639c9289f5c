#include "actangle/gauge.hpp"

#include <cmath>

#include "actangle/error.hpp"

namespace actangle {

namespace {

// Legendre values and derivatives P_0..P_d at t.
void legendre(int d, double t, double* p, double* dp) {
    p[0] = 1.0;
    dp[0] = 0.0;
    if (d == 0) return;
    p[1] = t;
    dp[1] = 1.0;
    for (int k = 1; k < d; ++k) {
        p[k + 1] = ((2 * k + 1) * t * p[k] - k * p[k - 1]) / (k + 1);
        dp[k + 1] = dp[k - 1] + (2 * k + 1) * p[k];
    }
}

}  // namespace

BoxPolynomialBasis::BoxPolynomialBasis(Box box, int degree) : box_(std::move(box)), degree_(degree) {
    if (degree < 0 || degree > 12) throw PreconditionError("gauge degree must lie in [0, 12]");
    size_ = 1;
    for (int k = 0; k < box_.dim(); ++k) size_ *= degree + 1;
}

Vec BoxPolynomialBasis::values(const Vec& j) const {
    const int n = box_.dim();
    const int d = degree_;
    std::vector<double> p((d + 1) * n), dp((d + 1) * n);
    for (int a = 0; a < n; ++a) {
        const double w = box_.hi[a] - box_.lo[a];
        const double t = w > 0.0 ? 2.0 * (j[a] - box_.lo[a]) / w - 1.0 : 0.0;
        legendre(d, t, &p[a * (d + 1)], &dp[a * (d + 1)]);
    }
    Vec out(size_);
    for (int k = 0; k < size_; ++k) {
        int rest = k;
        double v = 1.0;
        for (int a = 0; a < n; ++a) {
            v *= p[a * (d + 1) + rest % (d + 1)];
            rest /= d + 1;
        }
        out[k] = v;
    }
    return out;
}

Mat BoxPolynomialBasis::gradients(const Vec& j) const {
    const int n = box_.dim();
    const int d = degree_;
    std::vector<double> p((d + 1) * n), dp((d + 1) * n), scale(n);
    for (int a = 0; a < n; ++a) {
        const double w = box_.hi[a] - box_.lo[a];
        const double t = w > 0.0 ? 2.0 * (j[a] - box_.lo[a]) / w - 1.0 : 0.0;
        scale[a] = w > 0.0 ? 2.0 / w : 0.0;
        legendre(d, t, &p[a * (d + 1)], &dp[a * (d + 1)]);
    }
    Mat out(size_, n);
    std::vector<int> idx(n);
    for (int k = 0; k < size_; ++k) {
        int rest = k;
        for (int a = 0; a < n; ++a) {
            idx[a] = rest % (d + 1);
            rest /= d + 1;
        }
        for (int l = 0; l < n; ++l) {
            double v = 1.0;
            for (int a = 0; a < n; ++a)
                v *= a == l ? dp[a * (d + 1) + idx[a]] * scale[a] : p[a * (d + 1) + idx[a]];
            out(k, l) = v;
        }
    }
    return out;
}

GaugeCorrection GaugeCorrection::zero(const Box& box, int degree, int noncompact, int compact) {
    GaugeCorrection g;
    g.basis = BoxPolynomialBasis(box, degree);
    g.noncompact = noncompact;
    g.compact = compact;
    const Vec z = Vec::Zero(g.basis.size());
    g.d.assign(noncompact, z);
    g.dprime.assign(compact, z);
    g.b.assign(static_cast<std::size_t>(noncompact) * compact, z);
    return g;
}

bool GaugeCorrection::is_zero() const { return max_abs_coefficient() == 0.0; }

double GaugeCorrection::max_abs_coefficient() const {
    double m = 0.0;
    for (const auto* set : {&d, &dprime, &b})
        for (const Vec& c : *set)
            if (c.size()) m = std::max(m, c.cwiseAbs().maxCoeff());
    return m;
}

Vec GaugeCorrection::shift_x(const Vec& j) const {
    Vec out = Vec::Zero(noncompact);
    if (!noncompact) return out;
    const Vec psi = basis.values(j);
    for (int a = 0; a < noncompact; ++a) out[a] = d[a].dot(psi);
    return out;
}

Vec GaugeCorrection::shift_phi(const Vec& j) const {
    Vec out = Vec::Zero(compact);
    if (!compact) return out;
    const Vec psi = basis.values(j);
    for (int i = 0; i < compact; ++i) out[i] = dprime[i].dot(psi);
    return out;
}

Mat GaugeCorrection::skew(const Vec& j) const {
    Mat out = Mat::Zero(compact, noncompact);
    if (!compact || !noncompact) return out;
    const Vec psi = basis.values(j);
    for (int i = 0; i < compact; ++i)
        for (int a = 0; a < noncompact; ++a) out(i, a) = b[i * noncompact + a].dot(psi);
    return out;
}

}  // namespace actangle
