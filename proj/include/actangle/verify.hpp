#pragma once

#include <cstdint>
#include <vector>

#include "actangle/chart.hpp"

namespace actangle {

/// Flattens a chart point as u = (I, x, phi).
Vec pack(const ChartPoint& c);
ChartPoint unpack(const Vec& u, int dof, int rank);

/// Canonical form in (I, theta) ordering, theta = (x, phi): [[0, Id], [-Id, 0]].
/// With the phase-space form sum dp ^ dq this is sum dI ^ dtheta.
Mat canonical_form(int dof);

/// P = T^T Omega_0 T with T the central-difference Jacobian of from_action_angle at c.
/// The step on coordinate u_k is fd_step * max(1, |u_k|).
Mat pullback_form(ChartEvaluator& ev, const ChartPoint& c, double fd_step);

/// Same pullback in the intermediate coordinates (J, xr, yr), yr the lattice-dual fiber components.
Mat raw_pullback_form(ChartEvaluator& ev, const Vec& j, const Vec& xr, const Vec& yr, double fd_step);

/// Rejects steps outside [1e-9, 1e-2].
void validate_fd_step(double fd_step);

struct VerificationReport {
    double fd_step = 0.0;
    int samples = 0;
    double canonical_residual = 0.0;  // max |P - Omega_can|
    // Bracket residuals under {q, p} = 1, so the canonical values are {phi, I} = {x, I} = identity.
    double bracket_action_action = 0.0;
    double bracket_angle_action = 0.0;  // |{phi^i, I_j} - delta|
    double bracket_line_action = 0.0;   // |{x^a, I_b} - delta|
    double bracket_line_angle = 0.0;
    double bracket_angle_angle = 0.0;
    double bracket_line_line = 0.0;
    // Structure of dJ ^ ds in the intermediate coordinates.
    double line_block_residual = 0.0;   // |Omega^a_b - delta|
    double mixed_block = 0.0;           // |Omega^a_k|
    double compact_block_sigma_min = 0.0;  // smallest singular value of Omega^j_k (min over samples)
    std::vector<ChartPoint> locations;
    std::vector<double> sample_residuals;
};

VerificationReport verify_canonical(const Chart& chart, const std::vector<ChartPoint>& samples, double fd_step,
                                    Execution exec = Execution::parallel);

/// Samples with J uniform in the box shrunk by `margin` on each side, x uniform in
/// [-fiber_extent, fiber_extent], phi uniform in [0, 2pi). Deterministic in `seed`.
std::vector<ChartPoint> sample_chart(const Chart& chart, int count, std::uint64_t seed, double fiber_extent,
                                     double margin = 0.05, Execution exec = Execution::parallel);

struct IntegralsCheck {
    bool pass = false;
    double max_deviation = 0.0;  // max |F(from_action_angle(I, x, phi)) - J(I)|
};

IntegralsCheck check_integrals_of_actions(const Chart& chart, const std::vector<ChartPoint>& samples, double tol,
                                          Execution exec = Execution::parallel);

struct GaugeFitReport {
    int degree = 0;
    int samples = 0;
    int skew_rows = 0;
    int skew_unknowns = 0;
    int shift_rows = 0;
    int shift_unknowns = 0;
    double pre_residual = 0.0;   // max off-canonical entry before the fit
    double post_residual = 0.0;  // same after
    double max_coefficient = 0.0;
};

struct GaugeFit {
    Chart chart;
    GaugeFitReport report;
};

/// Fits D, D', B' by linear least squares so the pulled-back form becomes canonical.
/// Stage one fits B' from the action/line block; stage two fits D and D' from the
/// action/action block. Samples are raw fiber coordinates of the ungauged chart.
GaugeFit gauge_fix(const Chart& chart, const std::vector<ChartPoint>& samples, int degree, double fd_step,
                   Execution exec = Execution::parallel);

}  // namespace actangle
