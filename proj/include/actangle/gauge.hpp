#pragma once

#include <vector>

#include "actangle/section.hpp"

namespace actangle {

/// Tensor-product Legendre polynomial in level values, normalized to [-1, 1] over a box.
class BoxPolynomialBasis {
public:
    BoxPolynomialBasis() = default;
    BoxPolynomialBasis(Box box, int degree);

    int degree() const { return degree_; }
    int size() const { return size_; }
    const Box& box() const { return box_; }

    /// Basis values at J.
    Vec values(const Vec& j) const;
    /// size x n matrix of derivatives d psi_k / d J_l.
    Mat gradients(const Vec& j) const;

private:
    Box box_;
    int degree_ = 0;
    int size_ = 0;
};

/// Gauge shifts of the fiber coordinates, all smooth functions of the level value J:
///   x^a   = xr^a - D^a(J)
///   phi^i = phir^i - D'^i(J) - B'^i_a(J) xr^a
/// where (xr, phir) are the raw coordinates measured from the section.
struct GaugeCorrection {
    BoxPolynomialBasis basis;
    int noncompact = 0;  // n - m
    int compact = 0;     // m
    std::vector<Vec> d;       // noncompact entries
    std::vector<Vec> dprime;  // compact entries
    std::vector<Vec> b;       // compact * noncompact entries, index i * noncompact + a

    static GaugeCorrection zero(const Box& box, int degree, int noncompact, int compact);

    bool is_zero() const;
    double max_abs_coefficient() const;

    Vec shift_x(const Vec& j) const;       // D(J)
    Vec shift_phi(const Vec& j) const;     // D'(J)
    Mat skew(const Vec& j) const;          // B'(J), compact x noncompact
};

}  // namespace actangle
