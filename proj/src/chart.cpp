#include "actangle/chart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "actangle/error.hpp"

namespace actangle {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFrameSlack = 0.05;  // internal evaluations may step slightly outside the box
constexpr std::size_t kFrameCache = 16;

Mat field_matrix(const IntegrableSystem& sys, const Vec& z) {
    Mat a(sys.dim(), sys.dof());
    for (int k = 0; k < sys.dof(); ++k) hamiltonian_vector_field(sys.integral(k), z.data(), a.col(k).data());
    return a;
}

std::string where(const Vec& j) {
    std::string s = "(";
    for (int k = 0; k < j.size(); ++k) s += (k ? ", " : "") + std::to_string(j[k]);
    return s + ")";
}

Mat action_jacobian(const Mat& basis, const std::vector<int>& axes) {
    const int n = static_cast<int>(basis.rows());
    const int nc = static_cast<int>(axes.size());
    Mat d(n, n);
    for (int a = 0; a < nc; ++a) d.row(a) = Vec::Unit(n, axes[a]).transpose();
    for (int i = 0; i < basis.cols(); ++i) d.row(nc + i) = basis.col(i).transpose() / kTwoPi;
    return d;
}

PeriodLattice lattice_guess(const Mat& basis, const std::vector<int>& axes, const Mat& complement) {
    PeriodLattice g;
    g.rank = static_cast<int>(basis.cols());
    g.basis = basis;
    g.complement = complement;
    g.noncompact_axes = axes;
    g.residuals = Vec::Zero(g.rank);
    return g;
}

}  // namespace

double wrap_angle(double phi) {
    double r = std::fmod(phi, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

Vec compute_actions(const IntegrableSystem& sys, const Vec& base, const Mat& basis,
                    const std::vector<int>& noncompact_axes, const Vec& j, const IntegratorOptions& opts) {
    const int n = sys.dof();
    const int nc = static_cast<int>(noncompact_axes.size());
    if (basis.rows() != n || nc + basis.cols() != n) throw PreconditionError("lattice and axes do not split R^n");
    Vec out(n);
    for (int a = 0; a < nc; ++a) out[a] = j[noncompact_axes[a]];
    const double closure = 1e-7 * std::max(1.0, base.norm());
    for (int i = 0; i < basis.cols(); ++i) {
        const FlowAction loop = joint_flow_with_action(sys, base, basis.col(i), opts);
        const double gap = (loop.z - base).norm();
        if (!(gap <= closure))
            throw NumericalError("loop " + std::to_string(i + 1) + " fails to close (gap " + std::to_string(gap) +
                                 "); lattice is stale at J=" + where(j));
        out[nc + i] = loop.action / kTwoPi;
    }
    return out;
}

Chart Chart::build(const IntegrableSystem& sys, const Box& box, const Vec& seed, const ChartOptions& opts) {
    if (seed.size() != sys.dim()) throw PreconditionError("seed has wrong dimension");
    // Refuse non-commuting integrals before any expensive stage.
    std::vector<Vec> probe{seed};
    for (int k = 0; k < sys.dim(); ++k)
        for (double d : {-0.05, 0.05}) probe.push_back(seed + d * Vec::Unit(sys.dim(), k));
    const auto inv = check_involution(sys, probe, opts.involution_tol);
    if (!inv.pass)
        throw PreconditionError("first integrals are not in involution: max |{F_i,F_j}| = " +
                                std::to_string(inv.max_bracket));
    SectionOptions so = opts.section;
    so.regularity_tol = opts.regularity_tol;
    return build(sys, Section::build(sys, box, seed, so), opts);
}

Chart Chart::build(const IntegrableSystem& sys, const Section& section, const ChartOptions& opts) {
    if (section.box().dim() != sys.dof()) throw PreconditionError("section belongs to a different system");
    if (opts.angle_seeds < 1) throw PreconditionError("angle_seeds must be positive");
    opts.integrator.validate(sys.dim());
    std::vector<Vec> nodes;
    for (int k = 0; k < section.node_count(); ++k) nodes.push_back(section.node_point(k));
    const auto inv = check_involution(sys, nodes, opts.involution_tol);
    if (!inv.pass)
        throw PreconditionError("first integrals are not in involution: max |{F_i,F_j}| = " +
                                std::to_string(inv.max_bracket));

    Chart c;
    c.sys_ = std::make_shared<const IntegrableSystem>(sys);
    c.section_ = section;
    c.opts_ = opts;
    const Vec z0 = section.node_point(section.seed_node());
    c.seed_lattice_ = find_period_lattice(sys, z0, opts.search, opts.lattice_tol, opts.integrator, opts.exec);
    c.rank_ = c.seed_lattice_.rank;
    c.axes_ = c.seed_lattice_.noncompact_axes;
    const int n = sys.dof();
    const int nc = n - c.rank_;
    if (opts.complement) {
        const Mat& cm = *opts.complement;
        if (cm.rows() != n || cm.cols() != nc)
            throw PreconditionError("complement override must be n x (n - m) = " + std::to_string(n) + " x " +
                                    std::to_string(nc));
        Mat full(n, n);
        full << cm, c.seed_lattice_.basis;
        if (std::abs(full.determinant()) <= 1e-10 * std::max(1.0, c.seed_lattice_.basis.norm()))
            throw PreconditionError("complement override does not complete the lattice to a basis of R^n");
        c.complement_ = cm;
    } else {
        c.complement_ = c.seed_lattice_.complement;
    }
    c.gauge_ = GaugeCorrection::zero(section.box(), 0, nc, c.rank_);
    c.fill_nodes();
    return c;
}

void Chart::fill_nodes() {
    const IntegrableSystem& sys = *sys_;
    const int count = section_.node_count();
    node_bases_.assign(count, Mat());
    node_actions_.assign(count, Vec());
    const auto& order = section_.fill_order();
    node_bases_[order.front()] = seed_lattice_.basis;
    for (std::size_t idx = 1; idx < order.size(); ++idx) {
        const int k = order[idx];
        const int p = section_.parents()[k];
        const PeriodLattice guess = lattice_guess(node_bases_[p], axes_, complement_);
        try {
            node_bases_[k] =
                refine_lattice(sys, guess, section_.node_point(k), opts_.lattice_tol, opts_.integrator).basis;
        } catch (const RankChangeError&) {
            // retry with a finer path from the parent level
            std::vector<Vec> path;
            const Vec& from = section_.node_level(p);
            const Vec& to = section_.node_level(k);
            for (int s = 1; s <= 8; ++s) path.push_back(from + (to - from) * (s / 8.0));
            node_bases_[k] =
                continue_lattice(sys, guess, path, section_, opts_.lattice_tol, opts_.integrator).basis;
        }
    }
    for_each_index(opts_.exec, count, [&](long k) {
        node_actions_[k] = compute_actions(sys, section_.node_point(k), node_bases_[k], axes_,
                                           section_.node_level(k), opts_.integrator);
    });
    double sign = 0.0;
    for (int k : order) {
        const Mat d = action_jacobian(node_bases_[k], axes_);
        const Eigen::JacobiSVD<Mat> svd(d);
        const Vec& sv = svd.singularValues();
        const double det = d.determinant();
        if (sv[sv.size() - 1] <= 1e-10 * sv[0] || det == 0.0)
            throw NumericalError("action map dI/dJ is singular near J=" + where(section_.node_level(k)));
        if (sign == 0.0) sign = det > 0 ? 1.0 : -1.0;
        if (det * sign < 0.0)
            throw NumericalError("dI/dJ changes orientation at J=" + where(section_.node_level(k)) +
                                 "; actions are not coordinates on this box");
    }
}

Chart Chart::restore(const IntegrableSystem& sys, Section section, const ChartOptions& opts,
                     std::vector<int> noncompact_axes, Mat complement, std::vector<Mat> node_bases,
                     std::vector<Vec> node_actions, GaugeCorrection gauge, PeriodLattice seed_lattice) {
    const int n = sys.dof();
    const int nc = static_cast<int>(noncompact_axes.size());
    if (static_cast<int>(node_bases.size()) != section.node_count() ||
        static_cast<int>(node_actions.size()) != section.node_count())
        throw PreconditionError("stored grid data does not match the section grid");
    if (complement.rows() != n || complement.cols() != nc) throw PreconditionError("stored complement has wrong shape");
    for (const Mat& b : node_bases)
        if (b.rows() != n || b.cols() != n - nc) throw PreconditionError("stored lattice basis has wrong shape");
    if (gauge.noncompact != nc || gauge.compact != n - nc) throw PreconditionError("stored gauge has wrong shape");
    Chart c;
    c.sys_ = std::make_shared<const IntegrableSystem>(sys);
    c.section_ = std::move(section);
    c.opts_ = opts;
    c.rank_ = n - nc;
    c.axes_ = std::move(noncompact_axes);
    c.complement_ = std::move(complement);
    c.node_bases_ = std::move(node_bases);
    c.node_actions_ = std::move(node_actions);
    c.gauge_ = std::move(gauge);
    c.seed_lattice_ = std::move(seed_lattice);
    return c;
}

Chart Chart::with_gauge(GaugeCorrection gauge) const {
    if (gauge.noncompact != dof() - rank_ || gauge.compact != rank_)
        throw PreconditionError("gauge correction does not match the chart's index split");
    Chart c = *this;
    c.gauge_ = std::move(gauge);
    return c;
}

FiberFrame Chart::frame_at(const Vec& j, const FiberFrame* hint) const {
    if (j.size() != dof()) throw PreconditionError("level value has wrong dimension");
    if (!box().contains(j, kFrameSlack)) throw PreconditionError("level value " + where(j) + " lies outside the box");
    FiberFrame f;
    f.J = j;
    f.base = section_.base_point(j);
    const int k = section_.nearest_node(j);
    const bool use_hint = hint && (hint->J - j).norm() < (section_.node_level(k) - j).norm();
    const PeriodLattice guess = lattice_guess(use_hint ? hint->basis : node_bases_[k], axes_, complement_);
    try {
        f.basis = refine_lattice(*sys_, guess, f.base, opts_.lattice_tol, opts_.integrator).basis;
    } catch (const RankChangeError&) {
        std::vector<Vec> path;
        const Vec& from = use_hint ? hint->J : section_.node_level(k);
        for (int s = 1; s <= 8; ++s) path.push_back(from + (j - from) * (s / 8.0));
        f.basis = continue_lattice(*sys_, guess, path, section_, opts_.lattice_tol, opts_.integrator).basis;
    }
    f.actions = compute_actions(*sys_, f.base, f.basis, axes_, j, opts_.integrator);
    f.dI_dJ = action_jacobian(f.basis, axes_);
    f.generators.resize(dof(), dof());
    f.generators << complement_, f.basis;
    return f;
}

Vec Chart::levels_for_actions(const Vec& actions) const {
    ChartEvaluator ev(*this);
    return ev.frame_for_actions(actions).J;
}

const FiberFrame& ChartEvaluator::frame_at(const Vec& j) {
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it)
        if (it->J.size() == j.size() && it->J == j) return *it;
    const FiberFrame* hint = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : frames_) {
        const double d = (f.J - j).norm();
        if (d < best) {
            best = d;
            hint = &f;
        }
    }
    FiberFrame next = chart_->frame_at(j, hint);
    if (frames_.size() >= kFrameCache) frames_.erase(frames_.begin());
    frames_.push_back(std::move(next));
    return frames_.back();
}

const FiberFrame& ChartEvaluator::frame_for_actions(const Vec& actions) {
    const Chart& c = *chart_;
    const int n = c.dof();
    if (actions.size() != n) throw PreconditionError("action vector has wrong dimension");
    if (!actions.allFinite()) throw PreconditionError("action vector is not finite");
    for (const auto& [key, j] : inverse_)
        if (key == actions) return frame_at(j);

    // start from the closest stored actions: cached frames first, then grid nodes
    Vec j;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& f : frames_) {
        const double d = (f.actions - actions).norm();
        if (d < best_d) {
            best_d = d;
            j = f.J;
        }
    }
    for (int k = 0; k < c.section().node_count(); ++k) {
        const double d = (c.node_actions()[k] - actions).norm();
        if (d < best_d) {
            best_d = d;
            j = c.section().node_level(k);
        }
    }
    const double scale = std::max(1.0, actions.cwiseAbs().maxCoeff());
    Vec best_j = j;
    double best_r = std::numeric_limits<double>::infinity();
    int stalls = 0;
    for (int it = 0; it < 40; ++it) {
        if (!c.box().contains(j, 0.25))
            throw PreconditionError("action values lie outside the image of the level box");
        const FiberFrame& f = frame_at(j);
        const Vec r = f.actions - actions;
        const double rn = r.cwiseAbs().maxCoeff();
        if (rn < best_r) {
            best_r = rn;
            best_j = j;
            stalls = 0;
        } else if (++stalls >= 2) {
            break;
        }
        if (rn <= 1e-15 * scale) break;
        const Vec step = f.dI_dJ.partialPivLu().solve(r);
        j = j - step;
        // dI/dJ is exact, so a step this small leaves an error far below the action noise
        if (rn <= 1e-9 * scale && step.cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, j.cwiseAbs().maxCoeff())) {
            if (!c.box().contains(j, c.options().domain_slack))
                throw PreconditionError("action values lie outside the image of the level box");
            best_j = j;
            best_r = rn;
            break;
        }
    }
    if (!(best_r <= 1e-9 * scale)) throw NumericalError("action inversion did not converge");
    if (!c.box().contains(best_j, c.options().domain_slack))
        throw PreconditionError("action values lie outside the image of the level box");
    if (inverse_.size() >= kFrameCache) inverse_.erase(inverse_.begin());
    inverse_.emplace_back(actions, best_j);
    return frame_at(best_j);
}

Vec ChartEvaluator::from_raw(const Vec& j, const Vec& xr, const Vec& yr) {
    const FiberFrame& f = frame_at(j);
    const Vec s = chart_->complement() * xr + f.basis * yr;
    return joint_flow(chart_->system(), f.base, s, chart_->options().integrator);
}

Vec ChartEvaluator::from_action_angle(const ChartPoint& c) {
    const Chart& ch = *chart_;
    const int m = ch.rank();
    const int nc = ch.dof() - m;
    if (c.x.size() != nc || c.phi.size() != m) throw PreconditionError("chart point has wrong shape");
    if (!c.x.allFinite() || !c.phi.allFinite()) throw PreconditionError("chart point is not finite");
    const Vec j = frame_for_actions(c.I).J;
    const GaugeCorrection& g = ch.gauge();
    const Vec xr = c.x + g.shift_x(j);
    const Vec phir = c.phi + g.shift_phi(j) + g.skew(j) * xr;
    Vec yr(m);
    for (int i = 0; i < m; ++i) yr[i] = std::remainder(phir[i], kTwoPi) / kTwoPi;
    return from_raw(j, xr, yr);
}

ChartPoint ChartEvaluator::to_action_angle(const Vec& z) {
    const Chart& ch = *chart_;
    const IntegrableSystem& sys = ch.system();
    if (z.size() != sys.dim()) throw PreconditionError("phase-space point has wrong dimension");
    const Vec j = sys.values(z);
    if (!ch.box().contains(j, ch.options().domain_slack))
        throw PreconditionError("level value F(z)=" + where(j) + " lies outside the chart box");
    const FiberFrame& f = frame_at(j);
    const int n = ch.dof();
    const int m = ch.rank();
    const int nc = n - m;
    const IntegratorOptions& io = ch.options().integrator;

    // seeds over one lattice cell, line coordinates at zero
    const int k = ch.options().angle_seeds;
    int count = 1;
    for (int i = 0; i < m; ++i) count *= k;
    std::vector<std::pair<double, Vec>> seeds;
    for (int idx = 0; idx < count; ++idx) {
        Vec y(m);
        int rest = idx;
        for (int i = 0; i < m; ++i) {
            y[i] = static_cast<double>(rest % k) / k;
            rest /= k;
        }
        const Vec s = f.basis * y;
        double d = std::numeric_limits<double>::infinity();
        try {
            d = (joint_flow(sys, f.base, s, io) - z).norm();
        } catch (const EscapeError&) {
        }
        seeds.emplace_back(d, s);
    }
    std::stable_sort(seeds.begin(), seeds.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    const double scale = std::max(1.0, z.norm());
    std::optional<Vec> solution;
    for (const auto& [d0, s0] : seeds) {
        Vec s = s0;
        Vec best_s = s;
        double best_r = std::numeric_limits<double>::infinity();
        Vec r;
        try {
            r = joint_flow(sys, f.base, s, io) - z;
        } catch (const EscapeError&) {
            continue;
        }
        for (int it = 0; it < 60; ++it) {
            const double rn = r.norm();
            if (rn < best_r) {
                best_r = rn;
                best_s = s;
            }
            if (rn <= 1e-14 * scale) break;
            const Vec end = r + z;
            const Vec step = field_matrix(sys, end).colPivHouseholderQr().solve(r);
            double damp = 1.0;
            bool moved = false;
            for (int h = 0; h < 12; ++h) {
                const Vec s_try = s - damp * step;
                try {
                    const Vec r_try = joint_flow(sys, f.base, s_try, io) - z;
                    if (r_try.norm() < rn) {
                        s = s_try;
                        r = r_try;
                        moved = true;
                        break;
                    }
                } catch (const EscapeError&) {
                }
                damp *= 0.5;
            }
            if (!moved) break;
        }
        if (best_r <= 1e-9 * scale) {
            solution = best_s;
            break;
        }
    }
    if (!solution)
        throw NumericalError("fiber Newton failed from every seed; z is not on the trivialized patch over J=" +
                             where(j));

    const Vec y = f.generators.partialPivLu().solve(*solution);
    const Vec xr = y.head(nc);
    const GaugeCorrection& g = ch.gauge();
    ChartPoint out;
    out.I = f.actions;
    out.x = xr - g.shift_x(j);
    const Vec phi = kTwoPi * y.tail(m) - g.shift_phi(j) - g.skew(j) * xr;
    out.phi = phi.unaryExpr([](double v) { return wrap_angle(v); });
    return out;
}

ChartPoint to_action_angle(const Chart& chart, const Vec& z) {
    ChartEvaluator ev(chart);
    return ev.to_action_angle(z);
}

Vec from_action_angle(const Chart& chart, const ChartPoint& c) {
    ChartEvaluator ev(chart);
    return ev.from_action_angle(c);
}

}  // namespace actangle
