#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "actangle/expr.hpp"

namespace actangle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// R^{2n} with coordinates ordered (q1..qn, p1..pn) and symplectic form
/// Omega = sum_a dp_a ^ dq_a, whose matrix in that order is [[0, -Id], [Id, 0]].
/// Hamiltonian fields satisfy iota_X Omega = -dF, i.e. X_F = (dF/dp, -dF/dq).
class PhaseSpace {
public:
    explicit PhaseSpace(int dof);

    int dof() const { return dof_; }
    int dim() const { return 2 * dof_; }
    Mat omega() const;

private:
    int dof_;
};

/// n first integrals on R^{2n}. Construction checks arity and dimensions only;
/// involution is verified separately by check_involution.
class IntegrableSystem {
public:
    IntegrableSystem(int dof, std::vector<Expression> integrals, std::string name = {});

    /// Parses each source string in dimension `dof`.
    static IntegrableSystem from_sources(int dof, const std::vector<std::string>& sources,
                                         std::string name = {});

    const PhaseSpace& space() const { return space_; }
    int dof() const { return space_.dof(); }
    int dim() const { return space_.dim(); }
    const std::vector<Expression>& integrals() const { return integrals_; }
    const Expression& integral(int k) const { return integrals_.at(k); }
    const std::string& name() const { return name_; }

    /// Level value J = F(z).
    Vec values(const Vec& z) const;
    /// n x 2n matrix of first-integral gradients.
    Mat jacobian(const Vec& z) const;

private:
    PhaseSpace space_;
    std::vector<Expression> integrals_;
    std::string name_;
};

/// Hamiltonian vector field of F_k at z.
Vec hamiltonian_vector_field(const IntegrableSystem& sys, int k, const Vec& z);
/// Writes the field into `out` (size 2n) without allocating.
void hamiltonian_vector_field(const Expression& f, const double* z, double* out);

/// {f, g}(z) = sum_a (df/dq_a dg/dp_a - df/dp_a dg/dq_a).
double poisson_bracket(const Expression& f, const Expression& g, const Vec& z);

struct RegularityResult {
    bool regular = false;
    int rank = 0;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
};

/// Regular iff the smallest singular value of dF exceeds tol times the largest.
RegularityResult check_regular(const IntegrableSystem& sys, const Vec& z, double tol);

struct InvolutionReport {
    double max_bracket = 0.0;
    int worst_i = 0;
    int worst_j = 0;
    int worst_point = -1;
    bool pass = false;
};

InvolutionReport check_involution(const IntegrableSystem& sys, const std::vector<Vec>& points, double tol);

/// Liouville one-form sum_a p_a dq_a as a covector in (q, p) order.
Vec liouville_form(const Vec& z);

}  // namespace actangle
