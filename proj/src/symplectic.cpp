#include "actangle/symplectic.hpp"

#include <array>
#include <cmath>

#include "actangle/error.hpp"

namespace actangle {

PhaseSpace::PhaseSpace(int dof) : dof_(dof) {
    if (dof < 1 || dof > kMaxDof)
        throw PreconditionError("degrees of freedom must be in [1, " + std::to_string(kMaxDof) + "]");
}

Mat PhaseSpace::omega() const {
    const int n = dof_;
    Mat w = Mat::Zero(2 * n, 2 * n);
    w.block(0, n, n, n) = -Mat::Identity(n, n);
    w.block(n, 0, n, n) = Mat::Identity(n, n);
    return w;
}

IntegrableSystem::IntegrableSystem(int dof, std::vector<Expression> integrals, std::string name)
    : space_(dof), integrals_(std::move(integrals)), name_(std::move(name)) {
    if (static_cast<int>(integrals_.size()) != dof)
        throw PreconditionError("a completely integrable system on R^" + std::to_string(2 * dof) +
                                " needs exactly " + std::to_string(dof) + " first integrals, got " +
                                std::to_string(integrals_.size()));
    for (const auto& e : integrals_) {
        if (e.dimension() != dof) throw PreconditionError("first integral parsed in the wrong dimension");
        if (e.uses_time())
            throw PreconditionError("first integrals must be autonomous; lift time to an extra q/p pair");
    }
}

IntegrableSystem IntegrableSystem::from_sources(int dof, const std::vector<std::string>& sources,
                                                std::string name) {
    std::vector<Expression> exprs;
    exprs.reserve(sources.size());
    for (const auto& s : sources) exprs.push_back(parse(s, dof));
    return IntegrableSystem(dof, std::move(exprs), std::move(name));
}

Vec IntegrableSystem::values(const Vec& z) const {
    Vec j(dof());
    for (int k = 0; k < dof(); ++k) j[k] = integrals_[k].eval({z.data(), static_cast<std::size_t>(z.size())});
    return j;
}

Mat IntegrableSystem::jacobian(const Vec& z) const {
    const int n = dof();
    Mat jac(n, 2 * n);
    std::array<double, kMaxVars> g{};
    for (int k = 0; k < n; ++k) {
        integrals_[k].eval_with_gradient({z.data(), static_cast<std::size_t>(z.size())}, g);
        for (int c = 0; c < 2 * n; ++c) jac(k, c) = g[c];
    }
    return jac;
}

void hamiltonian_vector_field(const Expression& f, const double* z, double* out) {
    const int n = f.dimension();
    std::array<double, kMaxVars> g{};
    f.eval_with_gradient({z, static_cast<std::size_t>(2 * n)}, g);
    for (int a = 0; a < n; ++a) {
        out[a] = g[n + a];
        out[n + a] = -g[a];
    }
}

Vec hamiltonian_vector_field(const IntegrableSystem& sys, int k, const Vec& z) {
    if (z.size() != sys.dim()) throw PreconditionError("point has wrong dimension");
    Vec v(sys.dim());
    hamiltonian_vector_field(sys.integral(k), z.data(), v.data());
    return v;
}

double poisson_bracket(const Expression& f, const Expression& g, const Vec& z) {
    if (f.dimension() != g.dimension() || z.size() != f.num_vars())
        throw PreconditionError("bracket operands disagree on dimension");
    const int n = f.dimension();
    std::array<double, kMaxVars> df{}, dg{};
    const std::span<const double> zs{z.data(), static_cast<std::size_t>(z.size())};
    f.eval_with_gradient(zs, df);
    g.eval_with_gradient(zs, dg);
    double s = 0.0;
    for (int a = 0; a < n; ++a) s += df[a] * dg[n + a] - df[n + a] * dg[a];
    return s;
}

RegularityResult check_regular(const IntegrableSystem& sys, const Vec& z, double tol) {
    if (!(tol > 0.0)) throw PreconditionError("regularity tolerance must be positive");
    const Eigen::JacobiSVD<Mat> svd(sys.jacobian(z));
    const Vec& s = svd.singularValues();
    RegularityResult r;
    r.sigma_max = s.size() ? s[0] : 0.0;
    r.sigma_min = s.size() ? s[s.size() - 1] : 0.0;
    for (int k = 0; k < s.size(); ++k)
        if (s[k] > tol * r.sigma_max && s[k] > 0.0) ++r.rank;
    r.regular = r.sigma_max > 0.0 && r.sigma_min > tol * r.sigma_max;
    return r;
}

InvolutionReport check_involution(const IntegrableSystem& sys, const std::vector<Vec>& points, double tol) {
    if (points.empty()) throw PreconditionError("check_involution needs at least one sample point");
    InvolutionReport rep;
    const int n = sys.dof();
    for (std::size_t p = 0; p < points.size(); ++p) {
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double b = std::abs(poisson_bracket(sys.integral(i), sys.integral(j), points[p]));
                if (b > rep.max_bracket || rep.worst_point < 0) {
                    rep.max_bracket = std::max(rep.max_bracket, b);
                    rep.worst_i = i;
                    rep.worst_j = j;
                    rep.worst_point = static_cast<int>(p);
                }
            }
        }
    }
    if (rep.worst_point < 0) rep.worst_point = 0;
    rep.pass = rep.max_bracket < tol;
    return rep;
}

Vec liouville_form(const Vec& z) {
    const int n = static_cast<int>(z.size()) / 2;
    Vec xi = Vec::Zero(2 * n);
    xi.head(n) = z.tail(n);
    return xi;
}

}  // namespace actangle
