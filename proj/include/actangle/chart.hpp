#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "actangle/flow.hpp"
#include "actangle/gauge.hpp"
#include "actangle/lattice.hpp"
#include "actangle/parallel.hpp"
#include "actangle/section.hpp"

namespace actangle {

struct ChartOptions {
    IntegratorOptions integrator;
    LatticeSearch search;
    SectionOptions section;
    double lattice_tol = 1e-9;      // return residual |Phi_e(z0) - z0| accepted for a period
    double involution_tol = 1e-10;  // refuse to build above this bracket size
    double regularity_tol = 1e-8;
    /// Relative slack on the box when accepting level values from callers.
    double domain_slack = 1e-6;
    /// Seeds per compact axis when inverting the fiber map.
    int angle_seeds = 6;
    /// Replaces the unit complement vectors (n x (n - m)); must complete the lattice to a basis.
    std::optional<Mat> complement;
    Execution exec = Execution::parallel;
};

/// Chart coordinates: actions (noncompact first, then compact), line coordinates x, angles phi.
struct ChartPoint {
    Vec I;
    Vec x;
    Vec phi;
};

/// Everything the fiber maps need at one level value.
struct FiberFrame {
    Vec J;
    Vec base;       // chi(J)
    Mat basis;      // n x m lattice basis at J
    Vec actions;    // I(J)
    Mat dI_dJ;      // exact: unit rows on noncompact axes, e_i^T / 2pi on compact rows
    Mat generators;  // [complement | basis], n x n
};

/// I_a = J_{k_a} on noncompact axes, I_i = (1/2pi) * loop integral of p dq along t -> Phi_{t e_i}(base).
/// Throws NumericalError when a loop fails to close (stale lattice).
Vec compute_actions(const IntegrableSystem& sys, const Vec& base, const Mat& basis,
                    const std::vector<int>& noncompact_axes, const Vec& j, const IntegratorOptions& opts);

class Chart {
public:
    /// Full pipeline: involution and regularity checks, section, lattice at the seed node,
    /// continuation over the section grid, actions on the grid.
    static Chart build(const IntegrableSystem& sys, const Box& box, const Vec& seed, const ChartOptions& opts = {});

    /// Same pipeline over a caller-supplied section.
    static Chart build(const IntegrableSystem& sys, const Section& section, const ChartOptions& opts = {});

    /// Reassembles a chart from stored grid data without rerunning the pipeline.
    static Chart restore(const IntegrableSystem& sys, Section section, const ChartOptions& opts,
                         std::vector<int> noncompact_axes, Mat complement, std::vector<Mat> node_bases,
                         std::vector<Vec> node_actions, GaugeCorrection gauge, PeriodLattice seed_lattice);

    Chart with_gauge(GaugeCorrection gauge) const;

    const IntegrableSystem& system() const { return *sys_; }
    const Section& section() const { return section_; }
    const Box& box() const { return section_.box(); }
    const ChartOptions& options() const { return opts_; }
    int dof() const { return sys_->dof(); }
    int rank() const { return rank_; }
    const std::vector<int>& noncompact_axes() const { return axes_; }
    const Mat& complement() const { return complement_; }
    const PeriodLattice& seed_lattice() const { return seed_lattice_; }
    const std::vector<Mat>& node_bases() const { return node_bases_; }
    const std::vector<Vec>& node_actions() const { return node_actions_; }
    const GaugeCorrection& gauge() const { return gauge_; }

    /// Lattice, base point and actions at an arbitrary J in the box. A nearby frame, when
    /// given, replaces the closest grid node as the starting guess for the lattice.
    FiberFrame frame_at(const Vec& j, const FiberFrame* hint = nullptr) const;

    /// Level value whose actions equal I (Newton on the exact action map).
    Vec levels_for_actions(const Vec& actions) const;

private:
    Chart() = default;
    void fill_nodes();

    std::shared_ptr<const IntegrableSystem> sys_;
    Section section_;
    ChartOptions opts_;
    int rank_ = 0;
    std::vector<int> axes_;
    Mat complement_;
    PeriodLattice seed_lattice_;
    std::vector<Mat> node_bases_;
    std::vector<Vec> node_actions_;
    GaugeCorrection gauge_;
};

/// Evaluates chart maps with a small per-instance frame cache. Not thread safe; use one per thread.
class ChartEvaluator {
public:
    explicit ChartEvaluator(const Chart& chart) : chart_(&chart) {}

    const Chart& chart() const { return *chart_; }
    const FiberFrame& frame_at(const Vec& j);
    const FiberFrame& frame_for_actions(const Vec& actions);

    ChartPoint to_action_angle(const Vec& z);
    Vec from_action_angle(const ChartPoint& c);
    /// Point reached from chi(J) with raw fiber coordinates: s = C xr + E yr (yr = phir / 2pi, unreduced).
    Vec from_raw(const Vec& j, const Vec& xr, const Vec& yr);

private:
    const Chart* chart_;
    std::vector<FiberFrame> frames_;  // most recent last
    std::vector<std::pair<Vec, Vec>> inverse_;  // actions -> J
};

ChartPoint to_action_angle(const Chart& chart, const Vec& z);
Vec from_action_angle(const Chart& chart, const ChartPoint& c);

/// Reduces angles to [0, 2pi).
double wrap_angle(double phi);

}  // namespace actangle
