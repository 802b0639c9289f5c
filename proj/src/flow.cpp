#include "actangle/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/numeric/odeint.hpp>

#include "actangle/error.hpp"

namespace actangle {

namespace odeint = boost::numeric::odeint;

namespace {

using State = std::vector<double>;

// Right-hand side of z' = X_k(z), optionally with the Liouville channel appended.
struct FieldRhs {
    const Expression* f;
    int n;
    bool with_action;

    void operator()(const State& x, State& dxdt, double /*t*/) const {
        hamiltonian_vector_field(*f, x.data(), dxdt.data());
        if (with_action) {
            double a = 0.0;
            for (int i = 0; i < n; ++i) a += x[n + i] * dxdt[i];
            dxdt[2 * n] = a;
        }
    }
};

bool inside(const State& x, int dim, const IntegratorOptions& opts) {
    for (int c = 0; c < dim; ++c)
        if (!(x[c] >= opts.lo(c) && x[c] <= opts.hi(c))) return false;
    return true;
}

// Integrates from t=0 to t_end. `visit(t0, t1, stepper)` is called after every accepted step
// so callers can read dense output on [t0, t1].
template <class Visit>
State integrate(const FieldRhs& rhs, int field, State x0, double t_end, const IntegratorOptions& opts,
                Visit&& visit) {
    const int dim = 2 * rhs.n;
    if (!inside(x0, dim, opts)) throw EscapeError(field, 0.0);
    if (t_end == 0.0) return x0;
    if (!std::isfinite(t_end)) throw PreconditionError("flow time must be finite");

    auto stepper = odeint::make_dense_output(opts.atol, opts.rtol, odeint::runge_kutta_dopri5<State>());
    const double dir = t_end > 0.0 ? 1.0 : -1.0;
    stepper.initialize(x0, 0.0, dir * std::min(std::abs(t_end), 1e-2));
    const double eps = 1e-14 * std::max(1.0, std::abs(t_end));
    long steps = 0;
    State probe(x0.size());
    try {
        for (;;) {
            const double rem = t_end - stepper.current_time();
            if (dir * rem <= eps) break;
            if (std::abs(stepper.current_time_step()) > std::abs(rem))
                stepper.initialize(stepper.current_state(), stepper.current_time(), rem);
            if (++steps > opts.max_steps)
                throw NumericalError("integration step budget (" + std::to_string(opts.max_steps) +
                                     ") exhausted at t=" + std::to_string(stepper.current_time()));
            const auto [t0, t1] = stepper.do_step(rhs);
            if (!inside(stepper.current_state(), dim, opts)) {
                // Locate the first exit on the dense interpolant.
                double a = t0, b = t1;
                for (int it = 0; it < 60; ++it) {
                    const double m = 0.5 * (a + b);
                    stepper.calc_state(m, probe);
                    (inside(probe, dim, opts) ? a : b) = m;
                }
                throw EscapeError(field, 0.5 * (a + b));
            }
            visit(t0, t1, stepper);
        }
    } catch (const odeint::step_adjustment_error& e) {
        throw NumericalError(std::string("step size adjustment failed: ") + e.what());
    }
    State out = stepper.current_state();
    return out;
}

struct NoVisit {
    template <class S>
    void operator()(double, double, const S&) const {}
};

void check_point(const IntegrableSystem& sys, const Vec& z) {
    if (z.size() != sys.dim()) throw PreconditionError("phase-space point has wrong dimension");
}

}  // namespace

void IntegratorOptions::validate(int dim) const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw PreconditionError("integrator tolerances must be positive");
    if (max_steps < 1) throw PreconditionError("max_steps must be at least 1");
    if (box_lo.size() != box_hi.size()) throw PreconditionError("box bounds disagree in size");
    if (box_lo.size() && box_lo.size() != dim) throw PreconditionError("box has wrong dimension");
    if (!box_lo.size() && !(box_half_width > 0.0)) throw PreconditionError("box half width must be positive");
}

Vec flow(const IntegrableSystem& sys, int k, const Vec& z0, double t, const IntegratorOptions& opts) {
    check_point(sys, z0);
    opts.validate(sys.dim());
    const FieldRhs rhs{&sys.integral(k), sys.dof(), false};
    State x(z0.data(), z0.data() + z0.size());
    State r = integrate(rhs, k, std::move(x), t, opts, NoVisit{});
    return Eigen::Map<const Vec>(r.data(), sys.dim());
}

Vec joint_flow(const IntegrableSystem& sys, const Vec& z0, const Vec& s, std::span<const int> order,
               const IntegratorOptions& opts) {
    if (s.size() != sys.dof() || static_cast<int>(order.size()) != sys.dof())
        throw PreconditionError("flow parameters have wrong dimension");
    Vec z = z0;
    for (int k : order)
        if (s[k] != 0.0) z = flow(sys, k, z, s[k], opts);
    return z;
}

Vec joint_flow(const IntegrableSystem& sys, const Vec& z0, const Vec& s, const IntegratorOptions& opts) {
    std::vector<int> order(sys.dof());
    std::iota(order.begin(), order.end(), 0);
    return joint_flow(sys, z0, s, order, opts);
}

FlowAction flow_with_action(const IntegrableSystem& sys, int k, const Vec& z0, double t,
                            const IntegratorOptions& opts) {
    check_point(sys, z0);
    opts.validate(sys.dim());
    const FieldRhs rhs{&sys.integral(k), sys.dof(), true};
    State x(z0.data(), z0.data() + z0.size());
    x.push_back(0.0);
    State r = integrate(rhs, k, std::move(x), t, opts, NoVisit{});
    return {Eigen::Map<const Vec>(r.data(), sys.dim()), r.back()};
}

FlowAction joint_flow_with_action(const IntegrableSystem& sys, const Vec& z0, const Vec& s,
                                  const IntegratorOptions& opts) {
    if (s.size() != sys.dof()) throw PreconditionError("flow parameters have wrong dimension");
    FlowAction acc{z0, 0.0};
    for (int k = 0; k < sys.dof(); ++k) {
        if (s[k] == 0.0) continue;
        FlowAction seg = flow_with_action(sys, k, acc.z, s[k], opts);
        acc.z = std::move(seg.z);
        acc.action += seg.action;
    }
    return acc;
}

std::vector<Vec> sample_flow(const IntegrableSystem& sys, int k, const Vec& z0, std::span<const double> times,
                             const IntegratorOptions& opts, bool stop_at_escape) {
    check_point(sys, z0);
    opts.validate(sys.dim());
    const int dim = sys.dim();
    std::vector<Vec> out(times.size(), Vec(dim));
    std::vector<std::size_t> fwd, bwd;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] > 0.0)
            fwd.push_back(i);
        else if (times[i] < 0.0)
            bwd.push_back(i);
        else
            out[i] = z0;
    }
    std::sort(fwd.begin(), fwd.end(), [&](auto a, auto b) { return times[a] < times[b]; });
    std::sort(bwd.begin(), bwd.end(), [&](auto a, auto b) { return times[a] > times[b]; });

    const FieldRhs rhs{&sys.integral(k), sys.dof(), false};
    State buf(dim);
    auto run = [&](const std::vector<std::size_t>& idx) {
        if (idx.empty()) return;
        const double t_end = times[idx.back()];
        std::size_t next = 0;
        auto visit = [&](double t0, double t1, const auto& stepper) {
            const double lo = std::min(t0, t1), hi = std::max(t0, t1);
            while (next < idx.size() && times[idx[next]] >= lo && times[idx[next]] <= hi) {
                stepper.calc_state(times[idx[next]], buf);
                out[idx[next]] = Eigen::Map<const Vec>(buf.data(), dim);
                ++next;
            }
        };
        try {
            State end = integrate(rhs, k, State(z0.data(), z0.data() + dim), t_end, opts, visit);
            for (; next < idx.size(); ++next) out[idx[next]] = Eigen::Map<const Vec>(end.data(), dim);
        } catch (const EscapeError&) {
            if (!stop_at_escape) throw;
            for (; next < idx.size(); ++next)
                out[idx[next]] = Vec::Constant(dim, std::numeric_limits<double>::quiet_NaN());
        }
    };
    run(fwd);
    run(bwd);
    return out;
}

ProbeResult completeness_probe(const IntegrableSystem& sys, const Vec& z0, double t_max,
                               const IntegratorOptions& opts) {
    if (!(t_max > 0.0)) throw PreconditionError("probe horizon must be positive");
    ProbeResult best;
    for (int k = 0; k < sys.dof(); ++k) {
        for (double dir : {1.0, -1.0}) {
            try {
                flow(sys, k, z0, dir * t_max, opts);
            } catch (const EscapeError& e) {
                if (!best.escaped) {
                    best = {true, e.field(), e.time()};
                }
            }
        }
        if (best.escaped) break;
    }
    return best;
}

}  // namespace actangle
