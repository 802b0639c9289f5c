#include "actangle/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "actangle/error.hpp"

namespace actangle {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Field matrix [X_1 .. X_n] at z (2n x n).
Mat field_matrix(const IntegrableSystem& sys, const Vec& z) {
    Mat a(sys.dim(), sys.dof());
    for (int k = 0; k < sys.dof(); ++k) hamiltonian_vector_field(sys.integral(k), z.data(), a.col(k).data());
    return a;
}

struct Grid {
    int count = 0;       // points per axis
    int center = 0;      // index of s = 0
    double step = 0.0;
    double at(int i) const { return (i - center) * step; }
};

Grid make_grid(double s_max, double step) {
    Grid g;
    const long half = std::lround(s_max / step);
    g.count = static_cast<int>(2 * half + 1);
    g.center = static_cast<int>(half);
    g.step = step;
    return g;
}

// Distances on an axis-0-fastest grid over `axes` (the scanned parameter axes), with every
// other parameter held at zero.
std::vector<double> grid_distances(const IntegrableSystem& sys, const Vec& z0, const Grid& g,
                                   const std::vector<int>& axes, const IntegratorOptions& opts, Execution exec) {
    const int dims = static_cast<int>(axes.size());
    long rows = 1;
    for (int a = 1; a < dims; ++a) rows *= g.count;
    std::vector<double> dist(static_cast<std::size_t>(rows) * g.count, kNaN);
    std::vector<double> times(g.count);
    for (int i = 0; i < g.count; ++i) times[i] = g.at(i);

    for_each_index(exec, rows, [&](long row) {
        Vec w = z0;
        long rest = row;
        try {
            for (int a = 1; a < dims; ++a) {
                const double s = g.at(static_cast<int>(rest % g.count));
                rest /= g.count;
                if (s != 0.0) w = flow(sys, axes[a], w, s, opts);
            }
        } catch (const EscapeError&) {
            return;  // row stays NaN
        }
        const auto pts = sample_flow(sys, axes[0], w, times, opts, true);
        for (int i = 0; i < g.count; ++i) dist[row * g.count + i] = (pts[i] - z0).norm();
    });
    return dist;
}

// Local minima (3^d neighbourhood, NaN neighbours ignored) below threshold.
std::vector<std::vector<int>> local_minima(const std::vector<double>& dist, int count, int dims, double threshold,
                                           int center) {
    std::vector<std::vector<int>> out;
    const long total = static_cast<long>(dist.size());
    std::vector<int> idx(dims), nb(dims);
    for (long flat = 0; flat < total; ++flat) {
        const double d = dist[flat];
        if (!(d < threshold)) continue;
        long rest = flat;
        bool origin = true;
        for (int a = 0; a < dims; ++a) {
            idx[a] = static_cast<int>(rest % count);
            rest /= count;
            origin = origin && idx[a] == center;
        }
        if (origin) continue;
        bool is_min = true;
        long n_nb = 1;
        for (int a = 0; a < dims; ++a) n_nb *= 3;
        for (long code = 0; code < n_nb && is_min; ++code) {
            long c = code;
            long nflat = 0, stride = 1;
            bool self = true, valid = true;
            for (int a = 0; a < dims; ++a) {
                const int off = static_cast<int>(c % 3) - 1;
                c /= 3;
                self = self && off == 0;
                nb[a] = idx[a] + off;
                if (nb[a] < 0 || nb[a] >= count) valid = false;
                nflat += nb[a] * stride;
                stride *= count;
            }
            if (self || !valid) continue;
            const double dn = dist[nflat];
            if (std::isnan(dn)) continue;
            // strict on one side so plateaus yield a single candidate
            if (dn < d || (dn == d && nflat < flat)) is_min = false;
        }
        if (is_min) out.push_back(idx);
    }
    return out;
}

void sort_candidates(std::vector<ReturnCandidate>& c) {
    std::sort(c.begin(), c.end(), [](const ReturnCandidate& a, const ReturnCandidate& b) {
        const double na = a.s.norm(), nb = b.s.norm();
        if (std::abs(na - nb) > 1e-12 * std::max(1.0, na)) return na < nb;
        for (int k = 0; k < a.s.size(); ++k)
            if (a.s[k] != b.s[k]) return a.s[k] > b.s[k];
        return false;
    });
}

std::string where_string(const Vec& j) {
    std::string s = "(";
    for (int k = 0; k < j.size(); ++k) s += (k ? ", " : "") + std::to_string(j[k]);
    return s + ")";
}

}  // namespace

std::vector<ReturnCandidate> scan_returns(const IntegrableSystem& sys, const Vec& z0, const LatticeSearch& search,
                                          double threshold, const IntegratorOptions& opts, Execution exec,
                                          SearchCoverage* coverage) {
    if (!(search.s_max > 0.0) || !(search.grid_step > 0.0) || search.grid_step > search.s_max)
        throw PreconditionError("lattice search needs 0 < grid_step <= s_max");
    const int n = sys.dof();
    std::vector<ReturnCandidate> out;
    SearchCoverage cov;
    cov.s_max = search.s_max;
    cov.grid_step = search.grid_step;

    auto add = [&](const std::vector<std::vector<int>>& minima, const std::vector<double>& dist, const Grid& g,
                   const std::vector<int>& axes) {
        for (const auto& idx : minima) {
            ReturnCandidate c;
            c.s = Vec::Zero(n);
            long flat = 0, stride = 1;
            for (std::size_t a = 0; a < axes.size(); ++a) {
                c.s[axes[a]] = g.at(idx[a]);
                flat += idx[a] * stride;
                stride *= g.count;
            }
            c.distance = dist[flat];
            out.push_back(std::move(c));
        }
    };

    if (n <= 2) {
        const Grid g = make_grid(search.s_max, search.grid_step);
        std::vector<int> axes(n);
        std::iota(axes.begin(), axes.end(), 0);
        const auto dist = grid_distances(sys, z0, g, axes, opts, exec);
        add(local_minima(dist, g.count, n, threshold, g.center), dist, g, axes);
        cov.grid_points = static_cast<long>(dist.size());
        cov.strategy = n == 1 ? "line" : "full-grid";
    } else {
        // per-axis lines first, then a budgeted full grid
        const Grid g = make_grid(search.s_max, search.grid_step);
        for (int a = 0; a < n; ++a) {
            const std::vector<int> axes{a};
            const auto dist = grid_distances(sys, z0, g, axes, opts, exec);
            add(local_minima(dist, g.count, 1, threshold, g.center), dist, g, axes);
            cov.grid_points += static_cast<long>(dist.size());
        }
        double step = search.grid_step;
        const double per_axis = std::floor(std::pow(static_cast<double>(search.max_grid_points), 1.0 / n));
        if (2.0 * search.s_max / step + 1.0 > per_axis) step = 2.0 * search.s_max / std::max(2.0, per_axis - 1.0);
        const Grid gf = make_grid(search.s_max, step);
        std::vector<int> axes(n);
        std::iota(axes.begin(), axes.end(), 0);
        const auto dist = grid_distances(sys, z0, gf, axes, opts, exec);
        const double scaled = threshold * step / search.grid_step;
        add(local_minima(dist, gf.count, n, scaled, gf.center), dist, gf, axes);
        cov.grid_points += static_cast<long>(dist.size());
        cov.grid_step = step;
        cov.strategy = "axis-lines+full-grid";
    }
    sort_candidates(out);
    cov.candidates = static_cast<int>(out.size());
    if (coverage) *coverage = cov;
    return out;
}

std::optional<RefinedPeriod> refine_period(const IntegrableSystem& sys, const Vec& z0, const Vec& guess, double tol,
                                           const IntegratorOptions& opts, double max_drift) {
    Vec s = guess;
    Vec best_s = s;
    double best_r = std::numeric_limits<double>::infinity();
    int stalls = 0;
    int iterations = 0;
    for (int it = 0; it < 40; ++it) {
        Vec z;
        try {
            z = joint_flow(sys, z0, s, opts);
        } catch (const EscapeError&) {
            return std::nullopt;
        }
        const Vec r = z - z0;
        const double rn = r.norm();
        if (rn < best_r) {
            best_r = rn;
            best_s = s;
            stalls = 0;
        } else if (++stalls >= 2) {
            break;
        }
        if (rn < 1e-3 * tol) break;
        const Mat a = field_matrix(sys, z);
        const Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vec& sv = svd.singularValues();
        if (sv[sv.size() - 1] <= 1e-10 * sv[0])
            throw NumericalError("ill-conditioned Newton Jacobian in period refinement (near-degenerate direction)");
        const Vec delta = svd.solve(r);
        s -= delta;
        ++iterations;
        if ((s - guess).norm() > max_drift) return std::nullopt;
        // Quadratic convergence: once the correction is this small the corrected iterate is
        // accurate far below the integration floor, so skip the confirming flow.
        if (rn <= tol && delta.norm() <= 1e-9 * std::max(1.0, s.norm())) return RefinedPeriod{s, rn, iterations};
    }
    if (!(best_r <= tol)) return std::nullopt;
    return RefinedPeriod{best_s, best_r, iterations};
}

bool in_lattice(const Mat& basis, const Vec& s, double tol) {
    if (basis.cols() == 0) return s.norm() <= tol;
    const Vec k = basis.colPivHouseholderQr().solve(s);
    const Vec kr = k.array().round().matrix();
    return (basis * kr - s).norm() <= tol;
}

Mat reduce_lattice_basis(const Mat& generators, double zero_tol) {
    const int n = static_cast<int>(generators.rows());
    std::vector<Vec> v;
    for (int c = 0; c < generators.cols(); ++c)
        if (generators.col(c).norm() > zero_tol) v.push_back(generators.col(c));
    if (v.empty()) return Mat(n, 0);

    const int rank = static_cast<int>(Eigen::FullPivLU<Mat>(generators).setThreshold(1e-9).rank());
    auto shorter = [](const Vec& cand, const Vec& old) { return cand.squaredNorm() < old.squaredNorm() * (1.0 - 1e-12); };
    // Size reduction with restarts: near-zero vectors from exact relations are dropped before
    // they can act as reducers. When no pair reduces but the set is still dependent, a vector
    // is shortened by a small combination of two others (hexagonal-type configurations).
    for (int pass = 0; pass < 10000; ++pass) {
        v.erase(std::remove_if(v.begin(), v.end(), [&](const Vec& x) { return x.norm() <= zero_tol; }), v.end());
        std::sort(v.begin(), v.end(), [](const Vec& a, const Vec& b) { return a.squaredNorm() < b.squaredNorm(); });
        bool changed = false;
        for (std::size_t i = 0; i < v.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < v.size() && !changed; ++j) {
                const double mu = std::round(v[i].dot(v[j]) / v[i].squaredNorm());
                if (mu == 0.0) continue;
                const Vec cand = v[j] - mu * v[i];
                if (shorter(cand, v[j])) {
                    v[j] = cand;
                    changed = true;
                }
            }
        }
        if (!changed && static_cast<int>(v.size()) > rank) {
            for (std::size_t k = 2; k < v.size() && !changed; ++k)
                for (std::size_t i = 0; i < k && !changed; ++i)
                    for (std::size_t j = i + 1; j < k && !changed; ++j)
                        for (int a = -3; a <= 3 && !changed; ++a)
                            for (int b = -3; b <= 3 && !changed; ++b) {
                                if (a == 0 && b == 0) continue;
                                const Vec cand = v[k] + a * v[i] + b * v[j];
                                if (shorter(cand, v[k])) {
                                    v[k] = cand;
                                    changed = true;
                                }
                            }
        }
        if (!changed) break;
    }
    if (static_cast<int>(v.size()) > rank)
        throw NumericalError("could not reduce lattice generators to a basis");

    for (auto& x : v) {
        Eigen::Index arg = 0;
        x.cwiseAbs().maxCoeff(&arg);
        if (x[arg] < 0) x = -x;
    }
    std::stable_sort(v.begin(), v.end(), [](const Vec& a, const Vec& b) {
        Eigen::Index ia = 0, ib = 0;
        a.cwiseAbs().maxCoeff(&ia);
        b.cwiseAbs().maxCoeff(&ib);
        if (ia != ib) return ia < ib;
        return a.squaredNorm() < b.squaredNorm();
    });
    Mat out(n, static_cast<int>(v.size()));
    for (std::size_t c = 0; c < v.size(); ++c) out.col(c) = v[c];
    return out;
}

std::vector<int> choose_noncompact_axes(const Mat& basis) {
    const int n = static_cast<int>(basis.rows());
    const int m = static_cast<int>(basis.cols());
    const int need = n - m;
    std::vector<int> best;
    double best_det = -1.0;
    // enumerate subsets of size `need` in lexicographic order
    for (int mask = 0; mask < (1 << n); ++mask) {
        if (__builtin_popcount(mask) != need) continue;
        std::vector<int> axes;
        for (int a = 0; a < n; ++a)
            if (mask & (1 << a)) axes.push_back(a);
        Mat full(n, n);
        for (int k = 0; k < need; ++k) full.col(k) = Vec::Unit(n, axes[k]);
        full.rightCols(m) = basis;
        const double det = std::abs(full.determinant());
        if (det > best_det * (1.0 + 1e-12) ||
            (std::abs(det - best_det) <= 1e-12 * std::max(1.0, det) && axes < best)) {
            best_det = det;
            best = axes;
        }
    }
    if (need > 0 && best_det <= 1e-12) throw NumericalError("lattice basis is degenerate; no complement exists");
    return best;
}

PeriodLattice find_period_lattice(const IntegrableSystem& sys, const Vec& z0, const LatticeSearch& search,
                                  double tol, const IntegratorOptions& opts, Execution exec) {
    if (!(tol > 0.0)) throw PreconditionError("lattice tolerance must be positive");
    if (z0.size() != sys.dim()) throw PreconditionError("base point has wrong dimension");
    const int n = sys.dof();
    const Mat fields = field_matrix(sys, z0);
    double speed = 0.0;
    for (int k = 0; k < n; ++k) speed += fields.col(k).norm();
    const double threshold = std::max(1e3 * tol, search.grid_step * speed);

    PeriodLattice lat;
    lat.base_point = z0;
    auto candidates = scan_returns(sys, z0, search, threshold, opts, exec, &lat.coverage);

    const double cell = search.grid_step * std::sqrt(static_cast<double>(n));
    Mat gens(n, 0);
    Mat basis(n, 0);
    for (const auto& cand : candidates) {
        if (lat.coverage.refined >= search.max_refinements) break;
        // already explained by the accepted lattice up to grid resolution
        if (basis.cols() > 0 && in_lattice(basis, cand.s, 2.0 * cell)) continue;
        ++lat.coverage.refined;
        const auto ref = refine_period(sys, z0, cand.s, tol, opts, 2.0 * cell);
        if (!ref) continue;
        const Vec& s = ref->s;
        const double s_tol = 1e-6 * (1.0 + s.norm());
        if (s.norm() <= s_tol) continue;
        if (basis.cols() > 0 && in_lattice(basis, s, s_tol)) continue;
        gens.conservativeResize(Eigen::NoChange, gens.cols() + 1);
        gens.col(gens.cols() - 1) = s;
        basis = reduce_lattice_basis(gens, s_tol);
        gens = basis;
        ++lat.coverage.accepted;
    }
    lat.coverage.returns_found = basis.cols() > 0;
    lat.basis = basis;
    lat.rank = static_cast<int>(basis.cols());
    lat.noncompact_axes = choose_noncompact_axes(basis);
    lat.complement = Mat::Zero(n, n - lat.rank);
    for (int a = 0; a < n - lat.rank; ++a) lat.complement(lat.noncompact_axes[a], a) = 1.0;
    lat.residuals = Vec(lat.rank);
    for (int i = 0; i < lat.rank; ++i) lat.residuals[i] = (joint_flow(sys, z0, basis.col(i), opts) - z0).norm();
    return lat;
}

PeriodLattice refine_lattice(const IntegrableSystem& sys, const PeriodLattice& guess, const Vec& z0, double tol,
                             const IntegratorOptions& opts) {
    PeriodLattice out = guess;
    out.base_point = z0;
    for (int i = 0; i < guess.rank; ++i) {
        const Vec e = guess.basis.col(i);
        const auto ref = refine_period(sys, z0, e, tol, opts, 0.25 * e.norm());
        if (!ref) {
            throw RankChangeError("lattice vector " + std::to_string(i + 1) +
                                      " could not be continued; rank changes or the level set is singular",
                                  sys.values(z0));
        }
        out.basis.col(i) = ref->s;
        out.residuals[i] = ref->residual;
    }
    if (out.rank > 0) {
        const Eigen::JacobiSVD<Mat> svd(out.basis);
        const Vec& sv = svd.singularValues();
        if (sv[sv.size() - 1] <= 1e-8 * sv[0])
            throw RankChangeError("continued lattice basis became dependent", sys.values(z0));
    }
    return out;
}

PeriodLattice continue_lattice(const IntegrableSystem& sys, const PeriodLattice& start, const std::vector<Vec>& path,
                               const Section& section, double tol, const IntegratorOptions& opts) {
    PeriodLattice cur = start;
    for (const Vec& j : path) {
        const Vec z = section.base_point(j);
        try {
            cur = refine_lattice(sys, cur, z, tol, opts);
        } catch (const RankChangeError& e) {
            throw RankChangeError(std::string(e.what()) + " at J=" + where_string(j), j);
        }
    }
    return cur;
}

}  // namespace actangle
