#pragma once

#include <span>
#include <vector>

#include "actangle/symplectic.hpp"

namespace actangle {

/// Error control and escape box for trajectory integration.
struct IntegratorOptions {
    double rtol = 1e-12;
    double atol = 1e-12;
    long max_steps = 2'000'000;
    /// Per-coordinate escape box. Empty vectors mean [-box_half_width, box_half_width]^{2n}.
    Vec box_lo;
    Vec box_hi;
    double box_half_width = 50.0;

    void validate(int dim) const;
    double lo(int c) const { return box_lo.size() ? box_lo[c] : -box_half_width; }
    double hi(int c) const { return box_hi.size() ? box_hi[c] : box_half_width; }
};

/// Point reached by following the field of F_k for time t (negative t runs backward).
/// Dormand-Prince 5(4) with dense output; throws EscapeError when the box is left.
Vec flow(const IntegrableSystem& sys, int k, const Vec& z0, double t, const IntegratorOptions& opts);

/// R^n action: flows of F_1..F_n applied in order with times s_1..s_n.
Vec joint_flow(const IntegrableSystem& sys, const Vec& z0, const Vec& s, const IntegratorOptions& opts);

/// Same action with an explicit application order (a permutation of 0..n-1).
Vec joint_flow(const IntegrableSystem& sys, const Vec& z0, const Vec& s, std::span<const int> order,
               const IntegratorOptions& opts);

struct FlowAction {
    Vec z;
    double action = 0.0;  // integral of sum_a p_a dq_a along the path
};

/// Flow augmented with the quadrature channel dA/dt = sum_a p_a dq_a/dt.
FlowAction flow_with_action(const IntegrableSystem& sys, int k, const Vec& z0, double t,
                            const IntegratorOptions& opts);

/// Joint flow accumulating the Liouville integral over all segments.
FlowAction joint_flow_with_action(const IntegrableSystem& sys, const Vec& z0, const Vec& s,
                                  const IntegratorOptions& opts);

/// States of the F_k trajectory through z0 at the given times (any sign, any order).
/// With `stop_at_escape`, times beyond a box exit come back as NaN instead of throwing.
std::vector<Vec> sample_flow(const IntegrableSystem& sys, int k, const Vec& z0, std::span<const double> times,
                             const IntegratorOptions& opts, bool stop_at_escape = false);

struct ProbeResult {
    bool escaped = false;
    int field = -1;     // index of the first field that escaped
    double time = 0.0;  // signed escape time
};

/// Integrates every field forward and backward to +-t_max inside the box.
/// No escape is evidence of completeness, never a proof.
ProbeResult completeness_probe(const IntegrableSystem& sys, const Vec& z0, double t_max,
                               const IntegratorOptions& opts);

}  // namespace actangle
