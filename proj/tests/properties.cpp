#include "properties.hpp"

#include <cstdio>
#include <exception>
#include <functional>
#include <memory>

#include "actangle/catalog.hpp"
#include "actangle/lattice.hpp"
#include "support.hpp"

namespace actangle::testing {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Recorder {
public:
    Recorder(std::string name, double tol) {
        out_.name = std::move(name);
        out_.tol = tol;
    }

    // Runs one case; `body` returns the observed error, exceptions count as failures.
    void run(const std::string& label, const std::function<double()>& body) {
        ++out_.cases;
        try {
            const double err = body();
            out_.worst = std::max(out_.worst, err);
            if (!(err <= out_.tol)) note(label + ": error " + num(err));
        } catch (const std::exception& e) {
            note(label + ": threw " + e.what());
        }
    }

    PropertyOutcome done() { return out_; }

private:
    void note(const std::string& what) {
        if (out_.failures++ == 0) out_.first_failure = what;
    }

    PropertyOutcome out_;
};

struct Sample {
    std::string label;
    IntegrableSystem sys;
};

// Random involutive system with random parameters.
Sample involutive_system(Gen& g) {
    switch (g.integer(0, 7)) {
    case 0: {
        const std::string w = num(g.uniform(0.5, 3.0));
        return {"sho(" + w + ")", IntegrableSystem::from_sources(1, {"(p1^2 + " + w + "^2*q1^2)/2"})};
    }
    case 1: {
        const std::string c = num(g.uniform(0.5, 2.0));
        return {"pendulum(" + c + ")", IntegrableSystem::from_sources(1, {"p1^2/2 - " + c + "*cos(q1)"})};
    }
    case 2:
        return {"cylinder", IntegrableSystem::from_sources(2, {"p1", "(p2^2 + q2^2)/2"})};
    case 3:
        return {"extended-time", IntegrableSystem::from_sources(2, {"p1 + (p2^2 + q2^2)/2", "(p2^2 + q2^2)/2"})};
    case 4: {
        const std::string a = num(g.uniform(0.5, 2.0)), b = num(g.uniform(0.5, 2.0));
        return {"sho2", IntegrableSystem::from_sources(2, {"(p1^2 + " + a + "^2*q1^2)/2", "(p2^2 + " + b + "^2*q2^2)/2"})};
    }
    case 5: {
        const std::string k = num(g.uniform(0.5, 2.0));
        return {"isotropic", IntegrableSystem::from_sources(
                                 2, {"(p1^2 + p2^2)/2 + " + k + "*(q1^2 + q2^2)/2", "q1*p2 - q2*p1"})};
    }
    case 6:
        return {"quartic", IntegrableSystem::from_sources(
                               2, {"(p1^2 + p2^2)/2 + (q1^2 + q2^2)^2/4", "q1*p2 - q2*p1"})};
    default:
        return {"free2", IntegrableSystem::from_sources(2, {"p1", "p2"})};
    }
}

// Random system whose integrals need not commute.
Sample generic_system(Gen& g) {
    const std::string a = num(g.uniform(-2.0, 2.0)), b = num(g.uniform(-2.0, 2.0));
    const std::string rate = num(g.uniform(-0.5, 0.5));
    switch (g.integer(0, 2)) {
    case 0:
        return {"canonical pair", IntegrableSystem::from_sources(2, {a + "*q1", "p1 + " + b + "*q2"})};
    case 1:
        return {"mixed", IntegrableSystem::from_sources(2, {"q1*p2 + " + a + "*p1^2", "sin(q2) + " + b + "*q1*p1"})};
    default:
        return {"exp", IntegrableSystem::from_sources(1, {"exp(" + rate + "*q1)*p1"})};
    }
}

double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

std::vector<PropertyOutcome> symplectic_properties(int cases, std::uint64_t seed) {
    Gen g(seed);
    std::vector<PropertyOutcome> out;

    Recorder identity("dF_mu(X_lambda) equals the bracket and vanishes on involutive systems", 1e-10);
    for (int c = 0; c < cases; ++c) {
        const bool involutive = c % 2 == 0;
        const Sample s = involutive ? involutive_system(g) : generic_system(g);
        const Vec z = g.vec(s.sys.dim(), -2.0, 2.0);
        identity.run(s.label, [&] {
            const Mat jac = s.sys.jacobian(z);
            double err = 0.0;
            for (int l = 0; l < s.sys.dof(); ++l) {
                const Vec field = hamiltonian_vector_field(s.sys, l, z);
                for (int m = 0; m < s.sys.dof(); ++m) {
                    const double d = jac.row(m).dot(field);
                    const double b = poisson_bracket(s.sys.integral(m), s.sys.integral(l), z);
                    err = std::max(err, std::abs(d - b) / std::max(1.0, std::abs(b)));
                    if (involutive) err = std::max(err, std::abs(d));
                }
            }
            return err;
        });
    }
    out.push_back(identity.done());

    Recorder contraction("X_F contracted with the symplectic form equals -dF", 1e-13);
    for (int c = 0; c < cases; ++c) {
        const Sample s = c % 2 ? involutive_system(g) : generic_system(g);
        const Vec z = g.vec(s.sys.dim(), -2.0, 2.0);
        contraction.run(s.label, [&] {
            const Mat omega = s.sys.space().omega();
            const Mat jac = s.sys.jacobian(z);
            double err = 0.0;
            for (int l = 0; l < s.sys.dof(); ++l) {
                const Vec field = hamiltonian_vector_field(s.sys, l, z);
                const Vec lhs = omega.transpose() * field + jac.row(l).transpose();
                err = std::max(err, lhs.cwiseAbs().maxCoeff() / std::max(1.0, jac.row(l).norm()));
            }
            return err;
        });
    }
    out.push_back(contraction.done());

    Recorder exterior("exterior derivative of the Liouville form equals the symplectic form", 1e-6);
    for (int c = 0; c < cases; ++c) {
        const int n = g.integer(1, 3);
        const Vec z = g.vec(2 * n, -5.0, 5.0);
        exterior.run("n=" + std::to_string(n), [&] {
            const double h = 1e-6;
            Mat jac(2 * n, 2 * n);  // jac(k, j) = d xi_k / d z_j
            for (int j = 0; j < 2 * n; ++j) {
                Vec zp = z, zm = z;
                zp[j] += h;
                zm[j] -= h;
                jac.col(j) = (liouville_form(zp) - liouville_form(zm)) / (2.0 * h);
            }
            const Mat d = jac.transpose() - jac;
            return max_abs(d - PhaseSpace(n).omega());
        });
    }
    out.push_back(exterior.done());

    Recorder involution("involutive systems pass check_involution", 1e-10);
    for (int c = 0; c < cases; ++c) {
        const Sample s = involutive_system(g);
        std::vector<Vec> points;
        for (int k = 0; k < 4; ++k) points.push_back(g.vec(s.sys.dim(), -2.0, 2.0));
        involution.run(s.label, [&] {
            const auto r = check_involution(s.sys, points, 1e-10);
            return r.pass ? r.max_bracket : 1.0;
        });
    }
    out.push_back(involution.done());

    Recorder scaling("regularity verdict and singular-value ratio are scale invariant", 1e-12);
    for (int c = 0; c < cases; ++c) {
        const Sample s = involutive_system(g);
        const Vec z = g.vec(s.sys.dim(), -2.0, 2.0);
        const double factor = std::pow(10.0, g.uniform(-3.0, 3.0));
        scaling.run(s.label, [&] {
            std::vector<std::string> scaled;
            for (const auto& e : s.sys.integrals()) scaled.push_back(num(factor) + "*(" + e.source() + ")");
            const auto sys2 = IntegrableSystem::from_sources(s.sys.dof(), scaled);
            const auto a = check_regular(s.sys, z, 1e-8);
            const auto b = check_regular(sys2, z, 1e-8);
            if (a.regular != b.regular || a.rank != b.rank) return 1.0;
            const double ra = a.sigma_max > 0 ? a.sigma_min / a.sigma_max : 0.0;
            const double rb = b.sigma_max > 0 ? b.sigma_min / b.sigma_max : 0.0;
            return std::abs(ra - rb);
        });
    }
    out.push_back(scaling.done());

    Recorder deficient("dependent differentials are reported as not regular", 0.0);
    for (int c = 0; c < cases; ++c) {
        const bool critical = c % 2 == 0;
        if (critical) {
            const std::string w = num(g.uniform(0.5, 3.0));
            const auto sys = IntegrableSystem::from_sources(1, {"(p1^2 + " + w + "^2*q1^2)/2"});
            const Vec z = Vec::Zero(2);
            deficient.run("oscillator origin", [&] {
                const auto r = check_regular(sys, z, 1e-8);
                return (!r.regular && r.rank == 0) ? 0.0 : 1.0;
            });
        } else {
            const Sample s = involutive_system(g);
            const std::string k = num(g.uniform(-3.0, 3.0));
            const std::string f = s.sys.integral(0).source();
            const int n = s.sys.dof();
            std::vector<std::string> srcs{f};
            for (int j = 1; j < std::max(n, 2); ++j) srcs.push_back(k + "*(" + f + ")");
            const int dof = std::max(n, 2);
            const Vec z = g.vec(2 * dof, 0.2, 2.0);
            deficient.run(s.label + " duplicated", [&] {
                const auto sys = IntegrableSystem::from_sources(dof, srcs);
                const auto r = check_regular(sys, z, 1e-8);
                return (!r.regular && r.rank <= 1) ? 0.0 : 1.0;
            });
        }
    }
    out.push_back(deficient.done());
    return out;
}

std::vector<PropertyOutcome> flow_properties(int cases, std::uint64_t seed) {
    Gen g(seed);
    std::vector<PropertyOutcome> out;
    const IntegratorOptions opts;

    Recorder conservation("every integral is conserved along every flow", 1e-8);
    for (int c = 0; c < cases; ++c) {
        const Sample s = involutive_system(g);
        const Vec z = g.vec(s.sys.dim(), -1.5, 1.5);
        const int l = g.integer(0, s.sys.dof() - 1);
        const double t = g.uniform(-3.0, 3.0);
        conservation.run(s.label, [&] {
            const Vec f0 = s.sys.values(z);
            const Vec f1 = s.sys.values(flow(s.sys, l, z, t, opts));
            return ((f1 - f0).cwiseAbs().array() / f0.cwiseAbs().array().max(1.0)).maxCoeff();
        });
    }
    out.push_back(conservation.done());

    Recorder group("joint flows compose additively", 1e-8);
    for (int c = 0; c < cases; ++c) {
        const Sample s = involutive_system(g);
        const Vec z = g.vec(s.sys.dim(), -1.5, 1.5);
        const Vec a = g.vec(s.sys.dof(), -2.0, 2.0), b = g.vec(s.sys.dof(), -2.0, 2.0);
        group.run(s.label, [&] {
            const Vec lhs = joint_flow(s.sys, joint_flow(s.sys, z, b, opts), a, opts);
            const Vec rhs = joint_flow(s.sys, z, a + b, opts);
            return (lhs - rhs).norm() / std::max(1.0, z.norm());
        });
    }
    out.push_back(group.done());

    Recorder reverse("flowing forward then backward returns to the start", 1e-8);
    for (int c = 0; c < cases; ++c) {
        const Sample s = c % 3 ? involutive_system(g) : generic_system(g);
        const Vec z = g.vec(s.sys.dim(), -1.0, 1.0);
        const int l = g.integer(0, s.sys.dof() - 1);
        const double t = g.uniform(-2.0, 2.0);
        reverse.run(s.label, [&] {
            const Vec back = flow(s.sys, l, flow(s.sys, l, z, t, opts), -t, opts);
            return (back - z).norm() / std::max(1.0, z.norm());
        });
    }
    out.push_back(reverse.done());
    return out;
}

std::vector<PropertyOutcome> lattice_properties(int cases, std::uint64_t seed) {
    Gen g(seed);
    std::vector<PropertyOutcome> out;
    const IntegratorOptions opts;
    const double tol = 1e-9;
    LatticeSearch search;
    search.s_max = 14.0;

    struct Periodic {
        std::string label;
        IntegrableSystem sys;
        Vec z0;
        double period = 0.0;  // closed form when known, else 0
    };
    auto periodic = [&](int c) -> Periodic {
        if (c % 2 == 0) {
            const double w = g.uniform(0.7, 3.0);
            Vec z0 = g.vec(2, -1.5, 1.5);
            if (z0.norm() < 0.3) z0 = vec_of({0.5, 0.5});
            return {"sho(" + num(w) + ")",
                    IntegrableSystem::from_sources(1, {"(p1^2 + " + num(w) + "^2*q1^2)/2"}), z0, 2.0 * kPi / w};
        }
        const double e = g.uniform(-0.8, 0.9);
        const double q = g.uniform(-0.5, 0.5) * std::acos(-e);
        const double p = std::sqrt(2.0 * (e + std::cos(q))) * (g.coin() ? 1.0 : -1.0);
        return {"pendulum(E=" + num(e) + ")", IntegrableSystem::from_sources(1, {"p1^2/2 - cos(q1)"}),
                vec_of({q, p}), 0.0};
    };

    Recorder returns("accepted periods and their doubles return to the base point", 1.0);
    Recorder minimal("no shorter grid vector returns", 1.0);
    for (int c = 0; c < cases; ++c) {
        const Periodic pc = periodic(c);
        std::shared_ptr<PeriodLattice> lat;
        returns.run(pc.label, [&] {
            lat = std::make_shared<PeriodLattice>(find_period_lattice(pc.sys, pc.z0, search, tol, opts));
            if (lat->rank != 1) return 1e9;
            const double e = lat->basis(0, 0);
            double err = 0.0;
            for (int k = 1; k <= 2; ++k) {
                const Vec back = flow(pc.sys, 0, pc.z0, k * e, opts);
                err = std::max(err, (back - pc.z0).norm() / (k * tol));
            }
            if (pc.period > 0.0 && std::abs(e - pc.period) > 1e-8) err = std::max(err, 1e9);
            return err;
        });
        minimal.run(pc.label, [&] {
            if (!lat || lat->rank != 1) return 1e9;
            const double e = lat->basis(0, 0);
            std::vector<double> times;
            for (double t = search.grid_step; t < e - 0.5 * search.grid_step; t += search.grid_step) {
                times.push_back(t);
                times.push_back(-t);
            }
            const auto pts = sample_flow(pc.sys, 0, pc.z0, times, opts);
            double closest = 1e300;
            for (const auto& p : pts) closest = std::min(closest, (p - pc.z0).norm());
            return tol / closest;
        });
    }
    out.push_back(returns.done());
    out.push_back(minimal.done());

    Recorder complement("declared noncompact directions have no hidden period", 1.0);
    for (int c = 0; c < cases; ++c) {
        IntegrableSystem sys = IntegrableSystem::from_sources(1, {"p1^2/2"});
        Vec z0;
        std::string label;
        if (c % 2 == 0) {
            z0 = vec_of({g.uniform(-1.0, 1.0), g.uniform(0.4, 2.0) * (g.coin() ? 1.0 : -1.0)});
            label = "free";
        } else {
            const double e = g.uniform(1.2, 3.0);
            sys = IntegrableSystem::from_sources(1, {"p1^2/2 - cos(q1)"});
            z0 = vec_of({0.0, std::sqrt(2.0 * (e + 1.0))});
            label = "rotation(E=" + num(e) + ")";
        }
        complement.run(label, [&] {
            LatticeSearch short_search = search;
            short_search.s_max = 10.0;
            const auto lat = find_period_lattice(sys, z0, short_search, tol, opts);
            if (lat.rank != 0 || lat.complement.cols() != 1) return 1e9;
            std::vector<double> times;
            for (int k = 1; k <= 400; ++k) {
                const double t = short_search.s_max * k / 400.0;
                times.push_back(t);
                times.push_back(-t);
            }
            IntegratorOptions wide = opts;
            wide.box_half_width = 1e3;
            const auto pts = sample_flow(sys, 0, z0, times, wide);
            double closest = 1e300;
            for (const auto& p : pts) closest = std::min(closest, (p - z0).norm());
            return 1e-3 / closest;
        });
    }
    out.push_back(complement.done());

    Recorder reduction("reduction preserves the lattice and returns shortest vectors", 1e-8);
    for (int c = 0; c < cases; ++c) {
        const int n = 2 + (c % 4 == 3 ? 1 : 0);
        Mat basis;
        do {
            basis = Mat::NullaryExpr(n, n, [&] { return g.uniform(-3.0, 3.0); });
        } while (std::abs(basis.determinant()) < 0.5);
        Mat u = Mat::Identity(n, n);
        for (int k = 0; k < 6; ++k) {
            const int i = g.integer(0, n - 1), j = (i + g.integer(1, n - 1)) % n;
            u.col(j) += g.integer(-2, 2) * u.col(i);
        }
        Mat gens(n, n + 1);
        gens.leftCols(n) = basis * u;
        Vec extra = Vec::Zero(n);
        for (int k = 0; k < n; ++k) extra += g.integer(-2, 2) * basis.col(k);
        gens.col(n) = extra;
        reduction.run("n=" + std::to_string(n), [&] {
            const Mat r = reduce_lattice_basis(gens);
            if (r.cols() != n) return 1.0;
            const double scale = basis.cwiseAbs().maxCoeff();
            double err = std::abs(std::abs(r.determinant()) - std::abs(basis.determinant())) /
                         std::abs(basis.determinant());
            for (int k = 0; k < n; ++k) {
                if (!in_lattice(basis, r.col(k), 1e-9 * scale)) err = std::max(err, 1.0);
                if (!in_lattice(r, basis.col(k), 1e-9 * scale)) err = std::max(err, 1.0);
            }
            if (n == 2) {
                // brute force over small coefficients: nothing shorter than the shortest basis vector
                const double shortest = std::min(r.col(0).norm(), r.col(1).norm());
                for (int a = -6; a <= 6; ++a)
                    for (int b = -6; b <= 6; ++b) {
                        if (a == 0 && b == 0) continue;
                        const double len = (a * r.col(0) + b * r.col(1)).norm();
                        err = std::max(err, (shortest - len) / shortest);
                    }
            }
            return err;
        });
    }
    out.push_back(reduction.done());
    return out;
}

namespace {

struct ChartCase {
    std::string label;
    std::unique_ptr<Chart> chart;
    std::unique_ptr<ChartEvaluator> ev;
};

std::vector<ChartCase>& suite_charts() {
    static std::vector<ChartCase> charts = [] {
        std::vector<ChartCase> v;
        for (const char* name : {"sho(2)", "pendulum", "cylinder", "free"}) {
            const CatalogEntry e = catalog_get(name);
            ChartCase c;
            c.label = e.name;
            c.chart = std::make_unique<Chart>(Chart::build(e.system, e.box, e.seed));
            c.ev = std::make_unique<ChartEvaluator>(*c.chart);
            v.push_back(std::move(c));
        }
        return v;
    }();
    return charts;
}

Vec random_level(Gen& g, const Box& box, double margin) {
    Vec j(box.dim());
    for (int k = 0; k < box.dim(); ++k) {
        const double w = box.hi[k] - box.lo[k];
        j[k] = g.uniform(box.lo[k] + margin * w, box.hi[k] - margin * w);
    }
    return j;
}

}  // namespace

std::vector<PropertyOutcome> chart_properties(int cases, std::uint64_t seed) {
    Gen g(seed);
    std::vector<PropertyOutcome> out;
    auto& charts = suite_charts();
    const double margin = 0.05;

    Recorder chart_trip("chart -> phase space -> chart is the identity", 1e-6);
    for (int c = 0; c < cases; ++c) {
        ChartCase& cc = charts[c % charts.size()];
        const Chart& chart = *cc.chart;
        const Vec j = random_level(g, chart.box(), margin);
        const Vec x = g.vec(chart.dof() - chart.rank(), -1.5, 1.5);
        const Vec phi = g.vec(chart.rank(), 0.0, 2.0 * kPi);
        chart_trip.run(cc.label, [&] {
            ChartPoint p{cc.ev->frame_at(j).actions, x, phi};
            const ChartPoint back = cc.ev->to_action_angle(cc.ev->from_action_angle(p));
            const double di = (back.I - p.I).cwiseAbs().maxCoeff() / std::max(1.0, p.I.norm());
            const double dx = x.size() ? (back.x - x).cwiseAbs().maxCoeff() : 0.0;
            return std::max({di, dx, max_angle_gap(back.phi, phi)});
        });
    }
    out.push_back(chart_trip.done());

    Recorder phase_trip("phase space -> chart -> phase space is the identity", 1e-6);
    for (int c = 0; c < cases; ++c) {
        ChartCase& cc = charts[c % charts.size()];
        const Chart& chart = *cc.chart;
        const Vec j = random_level(g, chart.box(), margin);
        const Vec s = g.vec(chart.dof(), -3.0, 3.0);
        phase_trip.run(cc.label, [&] {
            const Vec z = joint_flow(chart.system(), chart.section().base_point(j), s, chart.options().integrator);
            const Vec back = cc.ev->from_action_angle(cc.ev->to_action_angle(z));
            return (back - z).norm() / std::max(1.0, z.norm());
        });
    }
    out.push_back(phase_trip.done());

    Recorder duality("dual lattice pairs with action gradients to the identity", 1e-4);
    for (int c = 0; c < cases; ++c) {
        ChartCase& cc = charts[c % charts.size()];
        const Chart& chart = *cc.chart;
        const Vec j = random_level(g, chart.box(), 0.1);
        duality.run(cc.label, [&] {
            const int n = chart.dof();
            const int nc = n - chart.rank();
            const FiberFrame frame = chart.frame_at(j);
            Mat grad(n, n);  // grad(j, l) = d I_j / d J_l by central differences of loop integrals
            for (int l = 0; l < n; ++l) {
                const double h = 1e-4 * (chart.box().hi[l] - chart.box().lo[l]);
                Vec jp = j, jm = j;
                jp[l] += h;
                jm[l] -= h;
                const FiberFrame fp = chart.frame_at(jp, &frame), fm = chart.frame_at(jm, &frame);
                const Vec ip = compute_actions(chart.system(), fp.base, fp.basis, chart.noncompact_axes(), jp,
                                               chart.options().integrator);
                const Vec im = compute_actions(chart.system(), fm.base, fm.basis, chart.noncompact_axes(), jm,
                                               chart.options().integrator);
                grad.col(l) = (ip - im) / (2.0 * h);
            }
            const Mat dual = frame.generators.inverse();  // row k is the dual vector of generator k
            Mat pairing = dual * grad.transpose();
            for (int k = nc; k < n; ++k) pairing.col(k) *= 2.0 * kPi;
            return max_abs(pairing - Mat::Identity(n, n));
        });
    }
    out.push_back(duality.done());

    Recorder independence("actions do not depend on the base point within the fiber", 1e-7);
    for (int c = 0; c < cases; ++c) {
        ChartCase& cc = charts[c % charts.size()];
        const Chart& chart = *cc.chart;
        const Vec j = random_level(g, chart.box(), margin);
        const Vec s = g.vec(chart.dof(), -3.0, 3.0);
        independence.run(cc.label, [&] {
            const FiberFrame frame = chart.frame_at(j);
            const Vec moved = joint_flow(chart.system(), frame.base, s, chart.options().integrator);
            const Vec other = compute_actions(chart.system(), moved, frame.basis, chart.noncompact_axes(), j,
                                              chart.options().integrator);
            return (other - frame.actions).cwiseAbs().maxCoeff();
        });
    }
    out.push_back(independence.done());

    Recorder advance("the flow of each action shifts its conjugate coordinate linearly", 1e-5);
    for (int c = 0; c < cases; ++c) {
        ChartCase& cc = charts[c % charts.size()];
        const Chart& chart = *cc.chart;
        const int n = chart.dof(), nc = n - chart.rank();
        const Vec j = random_level(g, chart.box(), margin);
        const Vec x = g.vec(nc, -1.0, 1.0);
        const Vec phi = g.vec(chart.rank(), 0.0, 2.0 * kPi);
        const int k = g.integer(0, n - 1);
        const double t = g.uniform(-2.0, 2.0);
        advance.run(cc.label + " I" + std::to_string(k + 1), [&] {
            const FiberFrame& frame = cc.ev->frame_at(j);
            ChartPoint p{frame.actions, x, phi};
            const Vec s = t * frame.dI_dJ.row(k).transpose();
            const Vec z = joint_flow(chart.system(), cc.ev->from_action_angle(p), s, chart.options().integrator);
            ChartPoint want = p;
            if (k < nc)
                want.x[k] += t;
            else
                want.phi[k - nc] += t;
            const ChartPoint got = cc.ev->to_action_angle(z);
            const double di = (got.I - want.I).cwiseAbs().maxCoeff();
            const double dx = nc ? (got.x - want.x).cwiseAbs().maxCoeff() : 0.0;
            return std::max({di, dx, max_angle_gap(got.phi, want.phi)});
        });
    }
    out.push_back(advance.done());
    return out;
}

}  // namespace actangle::testing
