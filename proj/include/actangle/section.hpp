#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "actangle/symplectic.hpp"

namespace actangle {

/// Axis-aligned box of level values V.
struct Box {
    Vec lo;
    Vec hi;

    Box() = default;
    Box(Vec lo_, Vec hi_);

    int dim() const { return static_cast<int>(lo.size()); }
    Vec center() const { return 0.5 * (lo + hi); }
    Vec width() const { return hi - lo; }
    /// Membership with a relative slack of `slack` times the box width on each axis.
    bool contains(const Vec& j, double slack = 0.0) const;
};

struct SectionOptions {
    int resolution = 5;  // grid nodes per axis
    double tol = 1e-12;  // residual |F(chi(J)) - J| relative to max(1, |J|)
    int max_newton = 60;
    double regularity_tol = 1e-8;
};

/// A global section J -> chi(J) of the level-set bundle over a box V.
///
/// The default rule places chi(J) on the affine slice through the seed spanned by the
/// first-integral gradients at the seed: chi(J) = seed + N mu(J), with N = dF(seed)^T and
/// mu(J) the Newton solution of F(seed + N mu) = J. The slice is isotropic because the
/// gradients Poisson-commute at the seed, so this section pulls the symplectic form back to zero.
/// Grid nodes are solved by continuation from the seed node and serve as initial guesses
/// for off-grid evaluation, which is always solved to full accuracy.
class Section {
public:
    using Rule = std::function<Vec(const Vec&)>;

    Section() = default;

    static Section build(const IntegrableSystem& sys, const Box& box, const Vec& seed,
                         const SectionOptions& opts = {});

    /// Section given by an explicit rule (used to inject a known re-trivialization).
    static Section from_rule(const IntegrableSystem& sys, const Box& box, Rule rule,
                             const SectionOptions& opts = {});

    Vec base_point(const Vec& j) const;

    const Box& box() const { return box_; }
    int resolution() const { return resolution_; }
    int node_count() const { return static_cast<int>(node_levels_.size()); }
    const Vec& node_level(int k) const { return node_levels_[k]; }
    const Vec& node_point(int k) const { return node_points_[k]; }
    /// Node order in which continuation visited the grid; each node's parent precedes it.
    const std::vector<int>& fill_order() const { return fill_order_; }
    const std::vector<int>& parents() const { return parents_; }
    int seed_node() const { return fill_order_.front(); }
    int nearest_node(const Vec& j) const;
    std::vector<int> node_multi_index(int k) const;

    bool has_rule() const { return static_cast<bool>(rule_); }
    const Vec& seed() const { return seed_; }
    const Mat& normal_frame() const { return frame_; }
    double max_node_residual() const { return max_residual_; }

    /// Grid data sufficient to rebuild a slice section bit for bit.
    struct Data {
        Vec seed;
        int resolution = 0;
        std::vector<Vec> node_points;
        std::vector<Vec> node_mu;  // slice coordinates
        std::vector<int> fill_order;
        std::vector<int> parents;
    };
    Data data() const;
    /// Rebuild from serialized slice data without re-solving the grid.
    static Section restore(const IntegrableSystem& sys, const Box& box, Data data, const SectionOptions& opts = {});

private:
    void make_grid(int resolution);
    void solve_nodes();
    bool solve_slice(const Vec& j, Vec& mu) const;

    std::shared_ptr<const IntegrableSystem> sys_;
    Box box_;
    int resolution_ = 0;
    SectionOptions opts_;
    Vec seed_;
    Mat frame_;  // 2n x n
    Rule rule_;
    std::vector<Vec> node_levels_;
    std::vector<Vec> node_points_;
    std::vector<Vec> node_mu_;
    std::vector<int> fill_order_;
    std::vector<int> parents_;
    double max_residual_ = 0.0;
};

}  // namespace actangle
