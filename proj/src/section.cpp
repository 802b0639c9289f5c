#include "actangle/section.hpp"

#include <cmath>
#include <deque>

#include "actangle/error.hpp"

namespace actangle {

Box::Box(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size() || lo.size() == 0) throw PreconditionError("box bounds must be nonempty and agree");
    for (int k = 0; k < lo.size(); ++k)
        if (!(lo[k] <= hi[k]) || !std::isfinite(lo[k]) || !std::isfinite(hi[k]))
            throw PreconditionError("box must satisfy lo <= hi on every axis");
}

bool Box::contains(const Vec& j, double slack) const {
    if (j.size() != lo.size()) return false;
    for (int k = 0; k < j.size(); ++k) {
        const double pad = slack * (hi[k] - lo[k]) + 1e-12 * std::max(1.0, std::abs(j[k]));
        if (j[k] < lo[k] - pad || j[k] > hi[k] + pad) return false;
    }
    return true;
}

void Section::make_grid(int resolution) {
    if (resolution < 2) throw PreconditionError("section grid needs at least 2 nodes per axis");
    resolution_ = resolution;
    const int n = box_.dim();
    long count = 1;
    for (int k = 0; k < n; ++k) count *= resolution;
    node_levels_.assign(count, Vec(n));
    for (long idx = 0; idx < count; ++idx) {
        long rest = idx;
        for (int k = 0; k < n; ++k) {
            const int i = static_cast<int>(rest % resolution);
            rest /= resolution;
            node_levels_[idx][k] = box_.lo[k] + (box_.hi[k] - box_.lo[k]) * i / (resolution - 1);
        }
    }
}

std::vector<int> Section::node_multi_index(int k) const {
    std::vector<int> out(box_.dim());
    for (int a = 0; a < box_.dim(); ++a) {
        out[a] = k % resolution_;
        k /= resolution_;
    }
    return out;
}

int Section::nearest_node(const Vec& j) const {
    int idx = 0, stride = 1;
    for (int a = 0; a < box_.dim(); ++a) {
        const double w = box_.hi[a] - box_.lo[a];
        int i = 0;
        if (w > 0.0) i = static_cast<int>(std::lround((j[a] - box_.lo[a]) / w * (resolution_ - 1)));
        i = std::clamp(i, 0, resolution_ - 1);
        idx += i * stride;
        stride *= resolution_;
    }
    return idx;
}

bool Section::solve_slice(const Vec& j, Vec& mu) const {
    const IntegrableSystem& sys = *sys_;
    const double scale = std::max(1.0, j.norm());
    Vec z = seed_ + frame_ * mu;
    Vec r = sys.values(z) - j;
    double rn = r.norm();
    for (int it = 0; it < opts_.max_newton; ++it) {
        if (rn <= opts_.tol * scale) {
            // one polishing step once inside tolerance
            const Mat a = sys.jacobian(z) * frame_;
            const Vec mu2 = mu - a.partialPivLu().solve(r);
            const Vec z2 = seed_ + frame_ * mu2;
            const Vec r2 = sys.values(z2) - j;
            if (r2.norm() < rn) mu = mu2;
            return true;
        }
        const Mat a = sys.jacobian(z) * frame_;
        const Eigen::FullPivLU<Mat> lu(a);
        if (!lu.isInvertible()) return false;
        const Vec step = lu.solve(r);
        double damp = 1.0;
        bool improved = false;
        for (int h = 0; h < 30; ++h) {
            const Vec mu_try = mu - damp * step;
            const Vec z_try = seed_ + frame_ * mu_try;
            Vec r_try;
            try {
                r_try = sys.values(z_try) - j;
            } catch (const DomainError&) {
                damp *= 0.5;
                continue;
            }
            if (r_try.norm() < rn) {
                mu = mu_try;
                z = z_try;
                r = r_try;
                rn = r.norm();
                improved = true;
                break;
            }
            damp *= 0.5;
        }
        if (!improved) return rn <= 10 * opts_.tol * scale;
    }
    return rn <= opts_.tol * scale;
}

void Section::solve_nodes() {
    const int count = node_count();
    const int n = box_.dim();
    node_points_.assign(count, Vec());
    node_mu_.assign(count, Vec::Zero(n));
    parents_.assign(count, -1);
    fill_order_.clear();

    const Vec seed_level = sys_->values(seed_);
    const int start = nearest_node(seed_level);
    std::vector<char> seen(count, 0);
    std::deque<int> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
        const int k = queue.front();
        queue.pop_front();
        fill_order_.push_back(k);
        const auto mi = node_multi_index(k);
        int stride = 1;
        for (int a = 0; a < n; ++a) {
            for (int d : {-1, 1}) {
                const int i = mi[a] + d;
                if (i < 0 || i >= resolution_) continue;
                const int nb = k + d * stride;
                if (!seen[nb]) {
                    seen[nb] = 1;
                    parents_[nb] = k;
                    queue.push_back(nb);
                }
            }
            stride *= resolution_;
        }
    }

    max_residual_ = 0.0;
    for (int k : fill_order_) {
        const Vec& j = node_levels_[k];
        Vec z;
        if (rule_) {
            z = rule_(j);
            if (z.size() != sys_->dim() || !((sys_->values(z) - j).norm() <= 1e-8 * std::max(1.0, j.norm())))
                throw PreconditionError("section rule does not map J into its level set");
            node_mu_[k] = frame_.completeOrthogonalDecomposition().solve(z - seed_);
        } else {
            Vec mu = parents_[k] >= 0 ? node_mu_[parents_[k]] : Vec::Zero(n);
            bool ok = solve_slice(j, mu);
            if (!ok) {
                // continuation along the segment from the parent level
                mu = parents_[k] >= 0 ? node_mu_[parents_[k]] : Vec::Zero(n);
                const Vec from = parents_[k] >= 0 ? node_levels_[parents_[k]] : seed_level;
                ok = true;
                for (int step = 1; step <= 16 && ok; ++step) ok = solve_slice(from + (j - from) * (step / 16.0), mu);
            }
            if (!ok) {
                std::string where;
                for (int a = 0; a < n; ++a) where += (a ? ", " : "") + std::to_string(j[a]);
                throw NumericalError("section Newton diverged at grid node J=(" + where + "); shrink the box");
            }
            node_mu_[k] = mu;
            z = seed_ + frame_ * mu;
        }
        const auto reg = check_regular(*sys_, z, opts_.regularity_tol);
        if (!reg.regular) throw NumericalError("critical point encountered on the section (rank " +
                                               std::to_string(reg.rank) + ")");
        max_residual_ = std::max(max_residual_, (sys_->values(z) - j).norm() / std::max(1.0, j.norm()));
        node_points_[k] = std::move(z);
    }
}

Section Section::build(const IntegrableSystem& sys, const Box& box, const Vec& seed, const SectionOptions& opts) {
    if (box.dim() != sys.dof()) throw PreconditionError("level box has wrong dimension");
    if (seed.size() != sys.dim()) throw PreconditionError("seed has wrong dimension");
    const auto reg = check_regular(sys, seed, opts.regularity_tol);
    if (!reg.regular) throw PreconditionError("section seed is a critical point of the first integrals");
    if (!box.contains(sys.values(seed), 1e-9)) throw PreconditionError("seed level F(seed) lies outside the box");
    Section s;
    s.sys_ = std::make_shared<const IntegrableSystem>(sys);
    s.box_ = box;
    s.opts_ = opts;
    s.seed_ = seed;
    s.frame_ = sys.jacobian(seed).transpose();
    s.make_grid(opts.resolution);
    s.solve_nodes();
    return s;
}

Section Section::from_rule(const IntegrableSystem& sys, const Box& box, Rule rule, const SectionOptions& opts) {
    if (box.dim() != sys.dof()) throw PreconditionError("level box has wrong dimension");
    Section s;
    s.sys_ = std::make_shared<const IntegrableSystem>(sys);
    s.box_ = box;
    s.opts_ = opts;
    s.rule_ = std::move(rule);
    s.seed_ = s.rule_(box.center());
    s.frame_ = sys.jacobian(s.seed_).transpose();
    s.make_grid(opts.resolution);
    s.solve_nodes();
    return s;
}

Section::Data Section::data() const {
    if (rule_) throw PreconditionError("a section given by a custom rule cannot be serialized");
    return {seed_, resolution_, node_points_, node_mu_, fill_order_, parents_};
}

Section Section::restore(const IntegrableSystem& sys, const Box& box, Data data, const SectionOptions& opts) {
    if (box.dim() != sys.dof()) throw PreconditionError("level box has wrong dimension");
    if (data.seed.size() != sys.dim()) throw PreconditionError("serialized seed has wrong dimension");
    Section s;
    s.sys_ = std::make_shared<const IntegrableSystem>(sys);
    s.box_ = box;
    s.opts_ = opts;
    s.opts_.resolution = data.resolution;
    s.seed_ = data.seed;
    s.frame_ = sys.jacobian(data.seed).transpose();
    s.make_grid(data.resolution);
    const auto count = static_cast<std::size_t>(s.node_count());
    if (data.node_points.size() != count || data.node_mu.size() != count || data.fill_order.size() != count ||
        data.parents.size() != count)
        throw PreconditionError("serialized section has the wrong number of nodes");
    for (std::size_t k = 0; k < count; ++k) {
        if (data.node_points[k].size() != sys.dim() || data.node_mu[k].size() != sys.dof())
            throw PreconditionError("serialized section node has wrong dimension");
        if (data.fill_order[k] < 0 || data.fill_order[k] >= s.node_count() || data.parents[k] < -1 ||
            data.parents[k] >= s.node_count())
            throw PreconditionError("serialized section has an invalid node index");
    }
    s.node_points_ = std::move(data.node_points);
    s.node_mu_ = std::move(data.node_mu);
    s.fill_order_ = std::move(data.fill_order);
    s.parents_ = std::move(data.parents);
    for (int k = 0; k < s.node_count(); ++k)
        s.max_residual_ = std::max(s.max_residual_, (sys.values(s.node_points_[k]) - s.node_levels_[k]).norm() /
                                                        std::max(1.0, s.node_levels_[k].norm()));
    return s;
}

Vec Section::base_point(const Vec& j) const {
    if (j.size() != box_.dim()) throw PreconditionError("level value has wrong dimension");
    if (rule_) return rule_(j);
    const int k = nearest_node(j);
    Vec mu = node_mu_[k];
    if (solve_slice(j, mu)) return seed_ + frame_ * mu;
    mu = node_mu_[k];
    const Vec& from = node_levels_[k];
    for (int step = 1; step <= 32; ++step)
        if (!solve_slice(from + (j - from) * (step / 32.0), mu))
            throw NumericalError("section Newton failed off-grid; level value may lie outside the regular box");
    return seed_ + frame_ * mu;
}

}  // namespace actangle
