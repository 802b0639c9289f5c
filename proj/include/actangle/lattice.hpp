#pragma once

#include <optional>
#include <string>
#include <vector>

#include "actangle/error.hpp"
#include "actangle/flow.hpp"
#include "actangle/parallel.hpp"
#include "actangle/section.hpp"

namespace actangle {

/// Grid over flow parameters scanned for near-returns Phi_s(z0) ~ z0.
struct LatticeSearch {
    double s_max = 50.0;
    double grid_step = 0.1;
    /// Cap on points of a full n-dimensional grid; the step is coarsened beyond it (n >= 3).
    long max_grid_points = 2'000'000;
    /// Candidates refined by Newton at most.
    int max_refinements = 400;
};

struct SearchCoverage {
    double s_max = 0.0;
    double grid_step = 0.0;
    long grid_points = 0;
    int candidates = 0;
    int refined = 0;
    int accepted = 0;
    bool returns_found = false;
    std::string strategy;
};

/// Isotropy lattice of the R^n action at a base point.
struct PeriodLattice {
    int rank = 0;
    Mat basis;       // n x m, columns e_i with Phi_{e_i}(z0) = z0
    Mat complement;  // n x (n-m), unit vectors on noncompact_axes
    std::vector<int> noncompact_axes;
    Vec base_point;
    Vec residuals;  // |Phi_{e_i}(z0) - z0|
    SearchCoverage coverage;

    int dof() const { return static_cast<int>(basis.rows()); }
};

struct ReturnCandidate {
    Vec s;
    double distance = 0.0;
};

/// Grid local minima of |Phi_s(z0) - z0| below `threshold`, sorted by |s| then lexicographically.
/// The origin is excluded. Points whose trajectory leaves the box are skipped.
std::vector<ReturnCandidate> scan_returns(const IntegrableSystem& sys, const Vec& z0, const LatticeSearch& search,
                                          double threshold, const IntegratorOptions& opts,
                                          Execution exec = Execution::parallel, SearchCoverage* coverage = nullptr);

struct RefinedPeriod {
    Vec s;
    double residual = 0.0;
    int iterations = 0;
};

/// Newton on r(s) = Phi_s(z0) - z0 with Jacobian columns X_k(Phi_s(z0)), solved in the
/// least-squares sense. Returns nothing if the residual does not fall below `tol` or the
/// iterate drifts more than `max_drift` from the initial guess.
std::optional<RefinedPeriod> refine_period(const IntegrableSystem& sys, const Vec& z0, const Vec& guess, double tol,
                                           const IntegratorOptions& opts, double max_drift);

/// Lattice basis of the lattice generated by the columns of `generators`, reduced
/// (Lagrange-Gauss for rank 2, greedy pairwise for rank 3), ordered by dominant axis with
/// the dominant component positive.
Mat reduce_lattice_basis(const Mat& generators, double zero_tol = 1e-8);

/// True if s lies within `tol` of an integer combination of the basis columns.
bool in_lattice(const Mat& basis, const Vec& s, double tol);

PeriodLattice find_period_lattice(const IntegrableSystem& sys, const Vec& z0, const LatticeSearch& search,
                                  double tol, const IntegratorOptions& opts, Execution exec = Execution::parallel);

/// Raised when continuation cannot carry the lattice to the next level value.
class RankChangeError : public NumericalError {
public:
    RankChangeError(const std::string& what, Vec where) : NumericalError(what), where_(std::move(where)) {}
    const Vec& where() const { return where_; }

private:
    Vec where_;
};

/// Re-solves each basis vector at a new base point starting from `basis`.
PeriodLattice refine_lattice(const IntegrableSystem& sys, const PeriodLattice& guess, const Vec& z0, double tol,
                             const IntegratorOptions& opts);

/// Tracks the lattice along a path of level values, using the section for base points.
/// The complement and rank are frozen; a basis vector that cannot be tracked raises RankChangeError.
PeriodLattice continue_lattice(const IntegrableSystem& sys, const PeriodLattice& start, const std::vector<Vec>& path,
                               const Section& section, double tol, const IntegratorOptions& opts);

/// Noncompact axes maximizing |det [basis | unit axes]|, lowest indices on ties.
std::vector<int> choose_noncompact_axes(const Mat& basis);

}  // namespace actangle
