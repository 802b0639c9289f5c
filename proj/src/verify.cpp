#include "actangle/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "actangle/error.hpp"

namespace actangle {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <class Map>
Mat central_jacobian(const Vec& u, double fd_step, int dim, Map&& map) {
    Mat t(dim, u.size());
    for (int k = 0; k < u.size(); ++k) {
        const double h = fd_step * std::max(1.0, std::abs(u[k]));
        Vec up = u, um = u;
        up[k] += h;
        um[k] -= h;
        t.col(k) = (map(up) - map(um)) / (up[k] - um[k]);
    }
    return t;
}

double max_abs(const Mat& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

ChartPoint gauged(const GaugeCorrection& g, const Vec& j, const ChartPoint& raw) {
    ChartPoint c;
    c.I = raw.I;
    c.x = raw.x - g.shift_x(j);
    c.phi = (raw.phi - g.shift_phi(j) - g.skew(j) * raw.x).unaryExpr([](double v) { return wrap_angle(v); });
    return c;
}

}  // namespace

Vec pack(const ChartPoint& c) {
    Vec u(c.I.size() + c.x.size() + c.phi.size());
    u << c.I, c.x, c.phi;
    return u;
}

ChartPoint unpack(const Vec& u, int dof, int rank) {
    if (u.size() != 2 * dof) throw PreconditionError("packed chart point has wrong size");
    return {u.head(dof), u.segment(dof, dof - rank), u.tail(rank)};
}

Mat canonical_form(int dof) {
    Mat w = Mat::Zero(2 * dof, 2 * dof);
    w.topRightCorner(dof, dof).setIdentity();
    w.bottomLeftCorner(dof, dof) = -Mat::Identity(dof, dof);
    return w;
}

void validate_fd_step(double fd_step) {
    if (!(fd_step >= 1e-9 && fd_step <= 1e-2))
        throw PreconditionError("finite-difference step must lie in [1e-9, 1e-2]");
}

Mat pullback_form(ChartEvaluator& ev, const ChartPoint& c, double fd_step) {
    validate_fd_step(fd_step);
    const int n = ev.chart().dof();
    const int m = ev.chart().rank();
    const Mat t = central_jacobian(pack(c), fd_step, 2 * n,
                                   [&](const Vec& u) { return ev.from_action_angle(unpack(u, n, m)); });
    return t.transpose() * PhaseSpace(n).omega() * t;
}

Mat raw_pullback_form(ChartEvaluator& ev, const Vec& j, const Vec& xr, const Vec& yr, double fd_step) {
    validate_fd_step(fd_step);
    const int n = ev.chart().dof();
    const int nc = static_cast<int>(xr.size());
    Vec v(2 * n);
    v << j, xr, yr;
    const Mat t = central_jacobian(v, fd_step, 2 * n, [&](const Vec& w) {
        return ev.from_raw(w.head(n), w.segment(n, nc), w.tail(n - nc));
    });
    return t.transpose() * PhaseSpace(n).omega() * t;
}

namespace {

struct SampleResult {
    double canonical = 0.0;
    double aa = 0.0, phi_i = 0.0, x_i = 0.0, x_phi = 0.0, phi_phi = 0.0, x_x = 0.0;
    double line_block = 0.0, mixed = 0.0, sigma = std::numeric_limits<double>::infinity();
};

SampleResult verify_one(ChartEvaluator& ev, const ChartPoint& c, double fd_step) {
    const Chart& ch = ev.chart();
    const int n = ch.dof();
    const int m = ch.rank();
    const int nc = n - m;
    SampleResult r;
    const Mat p = pullback_form(ev, c, fd_step);
    r.canonical = max_abs(p - canonical_form(n));

    const Mat pi = p.partialPivLu().inverse();
    const int xo = n, fo = n + nc;  // offsets of x and phi
    r.aa = max_abs(pi.topLeftCorner(n, n));
    for (int i = 0; i < m; ++i)
        for (int b = 0; b < n; ++b) r.phi_i = std::max(r.phi_i, std::abs(pi(fo + i, b) - (b == nc + i ? 1.0 : 0.0)));
    for (int a = 0; a < nc; ++a)
        for (int b = 0; b < n; ++b) r.x_i = std::max(r.x_i, std::abs(pi(xo + a, b) - (b == a ? 1.0 : 0.0)));
    r.x_phi = max_abs(pi.block(xo, fo, nc, m));
    r.phi_phi = max_abs(pi.block(fo, fo, m, m));
    r.x_x = max_abs(pi.block(xo, xo, nc, nc));

    // intermediate coordinates (J, xr, yr)
    const Vec j = ev.frame_for_actions(c.I).J;
    const GaugeCorrection& g = ch.gauge();
    const Vec xr = c.x + g.shift_x(j);
    const Vec phir = c.phi + g.shift_phi(j) + g.skew(j) * xr;
    Vec yr(m);
    for (int i = 0; i < m; ++i) yr[i] = std::remainder(phir[i], kTwoPi) / kTwoPi;
    const Mat pr = raw_pullback_form(ev, j, xr, yr, fd_step);
    const auto& axes = ch.noncompact_axes();
    std::vector<int> compact_rows;
    for (int k = 0; k < n; ++k)
        if (std::find(axes.begin(), axes.end(), k) == axes.end()) compact_rows.push_back(k);
    for (int a = 0; a < nc; ++a) {
        for (int b = 0; b < nc; ++b)
            r.line_block = std::max(r.line_block, std::abs(pr(axes[a], n + b) - (a == b ? 1.0 : 0.0)));
        for (int k = 0; k < m; ++k) r.mixed = std::max(r.mixed, std::abs(pr(axes[a], n + nc + k)));
    }
    if (m > 0) {
        Mat blk(m, m);
        for (int jj = 0; jj < m; ++jj)
            for (int k = 0; k < m; ++k) blk(jj, k) = pr(compact_rows[jj], n + nc + k);
        r.sigma = Eigen::JacobiSVD<Mat>(blk).singularValues().minCoeff();
    }
    return r;
}

}  // namespace

VerificationReport verify_canonical(const Chart& chart, const std::vector<ChartPoint>& samples, double fd_step,
                                    Execution exec) {
    validate_fd_step(fd_step);
    std::vector<SampleResult> res(samples.size());
    for_each_index(exec, static_cast<long>(samples.size()), [&](long s) {
        ChartEvaluator ev(chart);
        res[s] = verify_one(ev, samples[s], fd_step);
    });
    VerificationReport rep;
    rep.fd_step = fd_step;
    rep.samples = static_cast<int>(samples.size());
    rep.locations = samples;
    rep.compact_block_sigma_min = chart.rank() > 0 && !samples.empty() ? std::numeric_limits<double>::infinity() : 0.0;
    for (const auto& r : res) {
        rep.canonical_residual = std::max(rep.canonical_residual, r.canonical);
        rep.bracket_action_action = std::max(rep.bracket_action_action, r.aa);
        rep.bracket_angle_action = std::max(rep.bracket_angle_action, r.phi_i);
        rep.bracket_line_action = std::max(rep.bracket_line_action, r.x_i);
        rep.bracket_line_angle = std::max(rep.bracket_line_angle, r.x_phi);
        rep.bracket_angle_angle = std::max(rep.bracket_angle_angle, r.phi_phi);
        rep.bracket_line_line = std::max(rep.bracket_line_line, r.x_x);
        rep.line_block_residual = std::max(rep.line_block_residual, r.line_block);
        rep.mixed_block = std::max(rep.mixed_block, r.mixed);
        if (chart.rank() > 0) rep.compact_block_sigma_min = std::min(rep.compact_block_sigma_min, r.sigma);
        rep.sample_residuals.push_back(r.canonical);
    }
    return rep;
}

std::vector<ChartPoint> sample_chart(const Chart& chart, int count, std::uint64_t seed, double fiber_extent,
                                     double margin, Execution exec) {
    if (count < 0) throw PreconditionError("sample count must be nonnegative");
    if (!(fiber_extent >= 0.0)) throw PreconditionError("fiber extent must be nonnegative");
    if (!(margin >= 0.0 && margin < 0.5)) throw PreconditionError("sample margin must lie in [0, 0.5)");
    const int n = chart.dof();
    const int m = chart.rank();
    const Box& box = chart.box();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vec> levels(count);
    std::vector<ChartPoint> out(count);
    for (int s = 0; s < count; ++s) {
        Vec j(n);
        for (int k = 0; k < n; ++k) {
            const double w = box.hi[k] - box.lo[k];
            j[k] = box.lo[k] + w * (margin + (1.0 - 2.0 * margin) * unit(rng));
        }
        levels[s] = j;
        out[s].x = Vec(n - m);
        for (int a = 0; a < n - m; ++a) out[s].x[a] = fiber_extent * (2.0 * unit(rng) - 1.0);
        out[s].phi = Vec(m);
        for (int i = 0; i < m; ++i) out[s].phi[i] = kTwoPi * unit(rng);
    }
    for_each_index(exec, count, [&](long s) { out[s].I = chart.frame_at(levels[s]).actions; });
    return out;
}

IntegralsCheck check_integrals_of_actions(const Chart& chart, const std::vector<ChartPoint>& samples, double tol,
                                          Execution exec) {
    std::vector<double> dev(samples.size(), 0.0);
    for_each_index(exec, static_cast<long>(samples.size()), [&](long s) {
        ChartEvaluator ev(chart);
        const Vec z = ev.from_action_angle(samples[s]);
        const Vec j = ev.frame_for_actions(samples[s].I).J;
        dev[s] = (chart.system().values(z) - j).cwiseAbs().maxCoeff();
    });
    IntegralsCheck out;
    for (double d : dev) out.max_deviation = std::max(out.max_deviation, d);
    out.pass = out.max_deviation <= tol;
    return out;
}

namespace {

struct RawSample {
    Mat p;      // pulled-back form in (I, xr, phir)
    Vec j;
    Mat dj_di;  // inverse of dI/dJ
    Vec xr;
};

Vec solve_min_norm(const Mat& a, const Vec& b, int unknowns, const char* stage) {
    if (unknowns == 0 || a.rows() == 0) return Vec::Zero(unknowns);
    if (a.rows() < unknowns)
        throw NumericalError(std::string("gauge fit ") + stage + " is rank-deficient: " + std::to_string(a.rows()) +
                             " equations for " + std::to_string(unknowns) +
                             " coefficients; lower the degree or add samples");
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(a.rows(), a.cols());
    // Directions the samples cannot see (gradient shifts of the angles, for instance) get zero weight.
    cod.setThreshold(1e-9);
    cod.compute(a);
    return cod.solve(b);
}

}  // namespace

GaugeFit gauge_fix(const Chart& chart, const std::vector<ChartPoint>& samples, int degree, double fd_step,
                   Execution exec) {
    validate_fd_step(fd_step);
    if (!chart.gauge().is_zero()) throw PreconditionError("gauge_fix needs a chart with zero gauge");
    if (samples.empty()) throw PreconditionError("gauge_fix needs samples");
    const int n = chart.dof();
    const int m = chart.rank();
    const int nc = n - m;
    const int count = static_cast<int>(samples.size());

    std::vector<RawSample> raw(count);
    for_each_index(exec, count, [&](long s) {
        ChartEvaluator ev(chart);
        const FiberFrame& f = ev.frame_for_actions(samples[s].I);
        raw[s].j = f.J;
        raw[s].dj_di = f.dI_dJ.inverse();
        raw[s].xr = samples[s].x;
        raw[s].p = pullback_form(ev, samples[s], fd_step);
    });

    GaugeFitReport rep;
    rep.degree = degree;
    rep.samples = count;
    const Mat can = canonical_form(n);
    for (const auto& r : raw) rep.pre_residual = std::max(rep.pre_residual, max_abs(r.p - can));

    GaugeCorrection g = GaugeCorrection::zero(chart.box(), degree, nc, m);
    const int kb = g.basis.size();
    std::vector<Vec> psi(count);
    std::vector<Mat> dpsi(count);  // kb x n, derivatives in I
    for (int s = 0; s < count; ++s) {
        psi[s] = g.basis.values(raw[s].j);
        dpsi[s] = g.basis.gradients(raw[s].j) * raw[s].dj_di;
    }

    // Stage one: M (Id + E) = Id on the action/line columns.
    const int u1 = m * nc * kb;
    const int rows1 = u1 > 0 ? count * n * nc : 0;
    Mat a1 = Mat::Zero(rows1, u1);
    Vec b1 = Vec::Zero(rows1);
    if (u1 > 0) {
        int row = 0;
        for (int s = 0; s < count; ++s) {
            const Mat mtr = raw[s].p.topRightCorner(n, n);
            for (int r = 0; r < n; ++r) {
                for (int a = 0; a < nc; ++a, ++row) {
                    for (int i = 0; i < m; ++i)
                        for (int k = 0; k < kb; ++k) a1(row, (i * nc + a) * kb + k) = mtr(r, nc + i) * psi[s][k];
                    b1[row] = (r == a ? 1.0 : 0.0) - mtr(r, a);
                }
            }
        }
    }
    const Vec beta = solve_min_norm(a1, b1, u1, "stage one");
    for (int i = 0; i < m; ++i)
        for (int a = 0; a < nc; ++a) g.b[i * nc + a] = beta.segment((i * nc + a) * kb, kb);
    rep.skew_rows = rows1;
    rep.skew_unknowns = u1;

    // Stage two: W + M G - G^T M^T = 0 on the action/action block.
    const int u2 = (nc + m) * kb;
    const int pairs = n * (n - 1) / 2;
    const int rows2 = count * pairs;
    Mat a2 = Mat::Zero(rows2, u2);
    Vec b2 = Vec::Zero(rows2);
    if (rows2 > 0) {
        int row = 0;
        for (int s = 0; s < count; ++s) {
            const Mat w = raw[s].p.topLeftCorner(n, n);
            const Mat mtr = raw[s].p.topRightCorner(n, n);
            const Mat bp = g.skew(raw[s].j);
            // known part of G from the fitted skew
            Mat g0 = Mat::Zero(n, n);
            for (int i = 0; i < m; ++i)
                for (int a = 0; a < nc; ++a)
                    g0.row(nc + i) += raw[s].xr[a] * (g.b[i * nc + a].transpose() * dpsi[s]);
            const Mat mg0 = mtr * g0;
            std::vector<Mat> mg(u2);
            for (int u = 0; u < u2; ++u) {
                const int k = u % kb;
                const int comp = u / kb;
                Mat gu = Mat::Zero(n, n);
                if (comp < nc) {
                    gu.row(comp) = dpsi[s].row(k);
                    for (int i = 0; i < m; ++i) gu.row(nc + i) += bp(i, comp) * dpsi[s].row(k);
                } else {
                    gu.row(comp) = dpsi[s].row(k);
                }
                mg[u] = mtr * gu;
            }
            for (int r = 0; r < n; ++r) {
                for (int c = r + 1; c < n; ++c, ++row) {
                    for (int u = 0; u < u2; ++u) a2(row, u) = mg[u](r, c) - mg[u](c, r);
                    b2[row] = -(w(r, c) + mg0(r, c) - mg0(c, r));
                }
            }
        }
    }
    const Vec delta = solve_min_norm(a2, b2, rows2 > 0 ? u2 : 0, "stage two");
    if (delta.size()) {
        for (int a = 0; a < nc; ++a) g.d[a] = delta.segment(a * kb, kb);
        for (int i = 0; i < m; ++i) g.dprime[i] = delta.segment((nc + i) * kb, kb);
    }
    rep.shift_rows = rows2;
    rep.shift_unknowns = u2;
    rep.max_coefficient = g.max_abs_coefficient();
    if (!std::isfinite(rep.max_coefficient)) throw NumericalError("gauge fit produced non-finite coefficients");

    GaugeFit fit{chart.with_gauge(std::move(g)), rep};
    std::vector<ChartPoint> moved(count);
    for (int s = 0; s < count; ++s) moved[s] = gauged(fit.chart.gauge(), raw[s].j, samples[s]);
    std::vector<double> post(count);
    for_each_index(exec, count, [&](long s) {
        ChartEvaluator ev(fit.chart);
        post[s] = max_abs(pullback_form(ev, moved[s], fd_step) - can);
    });
    for (double r : post) fit.report.post_residual = std::max(fit.report.post_residual, r);
    return fit;
}

}  // namespace actangle
