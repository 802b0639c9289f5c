#include "actangle/catalog.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include <boost/math/special_functions/ellint_1.hpp>
#include <boost/math/special_functions/ellint_2.hpp>

#include "actangle/error.hpp"

namespace actangle {

namespace {

constexpr double kPi = std::numbers::pi;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    int i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

Box box1(double lo, double hi) { return Box(vec({lo}), vec({hi})); }

double constant_arg(const std::string& src) {
    const Expression e = parse(src, 1);
    const std::string printed = e.print();
    for (std::size_t i = 0; i + 1 < printed.size(); ++i)
        if ((printed[i] == 'q' || printed[i] == 'p') && std::isdigit(static_cast<unsigned char>(printed[i + 1])))
            throw PreconditionError("catalog argument '" + src + "' must be a constant");
    const double z[2] = {0.0, 0.0};
    return e.eval(std::span<const double>(z, 2));
}

CatalogEntry free_particle() {
    CatalogEntry e("free", "free",
                   IntegrableSystem::from_sources(1, {"p1"}, "free"),
                   box1(1.0, 2.0), vec({0.0, 1.5}), 0);
    e.actions = [](const Vec& j) { return j; };
    e.periods = [](const Vec&) { return Mat(1, 0); };
    e.reference = "translation q -> q + s: I = J, x = q";
    e.notes = "rank 0: every invariant line is noncompact";
    return e;
}

CatalogEntry oscillator(double w) {
    if (!(w > 0.0)) throw PreconditionError("sho frequency must be positive");
    const std::string ws = num(w);
    CatalogEntry e("sho(" + ws + ")", "sho",
                   IntegrableSystem::from_sources(1, {"(p1^2 + " + ws + "^2*q1^2)/2"}, "sho"),
                   box1(0.5, 2.0), vec({std::sqrt(2.0 * 1.25) / w, 0.0}), 1);
    e.actions = [w](const Vec& j) { return Vec(j / w); };
    e.periods = [w](const Vec&) { return Mat::Constant(1, 1, 2.0 * kPi / w); };
    e.reference = "ellipse area: loop integral of p dq = 2 pi E / w, period 2 pi / w";
    e.notes = "compact fibers (circles); origin is the critical point";
    return e;
}

CatalogEntry oscillators(double w1, double w2) {
    if (!(w1 > 0.0) || !(w2 > 0.0)) throw PreconditionError("sho2 frequencies must be positive");
    const std::string a = num(w1), b = num(w2);
    CatalogEntry e("sho2(" + a + "," + b + ")", "sho2",
                   IntegrableSystem::from_sources(
                       2, {"(p1^2 + " + a + "^2*q1^2)/2", "(p2^2 + " + b + "^2*q2^2)/2"}, "sho2"),
                   Box(vec({0.8, 0.8}), vec({1.2, 1.2})), vec({std::sqrt(2.0) / w1, std::sqrt(2.0) / w2, 0.0, 0.0}), 2);
    e.actions = [w1, w2](const Vec& j) { return vec({j[0] / w1, j[1] / w2}); };
    e.periods = [w1, w2](const Vec&) {
        Mat p = Mat::Zero(2, 2);
        p(0, 0) = 2.0 * kPi / w1;
        p(1, 1) = 2.0 * kPi / w2;
        return p;
    };
    e.reference = "per-mode ellipse areas";
    e.notes = "2-tori; incommensurate frequencies give dense orbits but a rank-2 lattice of the R^2 action";
    return e;
}

CatalogEntry cylinder() {
    CatalogEntry e("cylinder", "cylinder",
                   IntegrableSystem::from_sources(2, {"p1", "(p2^2 + q2^2)/2"}, "cylinder"),
                   Box(vec({0.5, 0.5}), vec({1.5, 1.5})), vec({0.0, std::sqrt(2.0), 1.0, 0.0}), 1);
    e.actions = [](const Vec& j) { return vec({j[0], j[1]}); };
    e.periods = [](const Vec&) { return Mat(vec({0.0, 2.0 * kPi})); };
    e.reference = "product of translation and unit oscillator";
    e.notes = "fiber R x T^1: one noncompact and one compact direction";
    return e;
}

// Complete elliptic integrals with modulus k, k^2 = (1 + E) / 2.
double pendulum_action(double energy) {
    const double k = std::sqrt((1.0 + energy) / 2.0);
    const double kk = boost::math::ellint_1(k), ek = boost::math::ellint_2(k);
    return 8.0 / kPi * (ek - (1.0 - k * k) * kk);
}

double pendulum_period(double energy) { return 4.0 * boost::math::ellint_1(std::sqrt((1.0 + energy) / 2.0)); }

CatalogEntry pendulum() {
    CatalogEntry e("pendulum", "pendulum",
                   IntegrableSystem::from_sources(1, {"p1^2/2 - cos(q1)"}, "pendulum"),
                   box1(0.3, 0.9), vec({0.0, std::sqrt(2.0 * (0.6 + 1.0))}), 1);
    e.actions = [](const Vec& j) { return vec({pendulum_action(j[0])}); };
    e.periods = [](const Vec& j) { return Mat::Constant(1, 1, pendulum_period(j[0])); };
    e.reference = "complete elliptic integrals: I = (8/pi)(E(k) - (1-k^2)K(k)), T = 4K(k), k^2 = (1+E)/2";
    e.notes = "libration below the separatrix E = 1: compact fibers of a nonlinear system";
    return e;
}

CatalogEntry pendulum_rotation() {
    CatalogEntry e("pendulum-rotation", "pendulum-rotation",
                   IntegrableSystem::from_sources(1, {"p1^2/2 - cos(q1)"}, "pendulum-rotation"),
                   box1(1.5, 2.5), vec({0.0, std::sqrt(2.0 * (2.0 + 1.0))}), 0);
    e.actions = [](const Vec& j) { return j; };
    e.periods = [](const Vec&) { return Mat(1, 0); };
    e.reference = "q is unbounded on R^2, so rotation orbits never return";
    e.notes = "rank 0 on a nonlinear system";
    return e;
}

CatalogEntry extended_time() {
    CatalogEntry e("extended-time", "extended-time",
                   IntegrableSystem::from_sources(2, {"p1 + (p2^2 + q2^2)/2", "(p2^2 + q2^2)/2"},
                                                            "extended-time"),
                   Box(vec({0.5, 0.5}), vec({1.5, 1.5})), vec({0.0, std::sqrt(2.0), 0.0, 0.0}), 1);
    e.actions = [](const Vec& j) { return vec({j[0], j[1]}); };
    e.periods = [](const Vec&) { return Mat(vec({0.0, 2.0 * kPi})); };
    e.reference = "q1 is time, p1 its conjugate energy; the oscillator closes after 2 pi in F2";
    e.notes = "time-dependent system lifted to R^4: invariant manifolds are never compact";
    return e;
}

CatalogEntry noninvolutive() {
    CatalogEntry e("noninvolutive", "noninvolutive",
                   IntegrableSystem::from_sources(2, {"q1", "p1"}, "noninvolutive"),
                   Box(vec({-1.0, -1.0}), vec({1.0, 1.0})), vec({0.0, 0.0, 0.0, 0.0}), 0);
    e.involutive = false;
    e.reference = "{q1, p1} = 1 everywhere";
    e.notes = "negative test: independent but not in involution";
    return e;
}

struct Call {
    std::string family;
    std::vector<double> args;
};

Call split(const std::string& name) {
    Call c;
    const auto open = name.find('(');
    if (open == std::string::npos) {
        c.family = name;
        return c;
    }
    if (name.back() != ')') throw PreconditionError("catalog name '" + name + "' is missing ')'");
    c.family = name.substr(0, open);
    const std::string inner = name.substr(open + 1, name.size() - open - 2);
    int depth = 0;
    std::string cur;
    for (char ch : inner) {
        if (ch == '(') ++depth;
        if (ch == ')') --depth;
        if (ch == ',' && depth == 0) {
            c.args.push_back(constant_arg(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) c.args.push_back(constant_arg(cur));
    return c;
}

void expect_args(const Call& c, std::size_t lo, std::size_t hi) {
    if (c.args.size() < lo || c.args.size() > hi)
        throw PreconditionError("catalog entry '" + c.family + "' takes " + std::to_string(lo) +
                                (lo == hi ? "" : " to " + std::to_string(hi)) + " arguments");
}

}  // namespace

std::vector<CatalogEntry> catalog_list() {
    return {free_particle(),     oscillator(1.0), oscillators(1.0, std::sqrt(2.0)), cylinder(), pendulum(),
            pendulum_rotation(), extended_time(), noninvolutive()};
}

CatalogEntry catalog_get(const std::string& name) {
    const Call c = split(name);
    if (c.family == "free") return expect_args(c, 0, 0), free_particle();
    if (c.family == "sho") return expect_args(c, 0, 1), oscillator(c.args.empty() ? 1.0 : c.args[0]);
    if (c.family == "sho2") {
        expect_args(c, 0, 2);
        if (c.args.size() == 1) throw PreconditionError("sho2 takes two frequencies");
        return c.args.empty() ? oscillators(1.0, std::sqrt(2.0)) : oscillators(c.args[0], c.args[1]);
    }
    if (c.family == "cylinder") return expect_args(c, 0, 0), cylinder();
    if (c.family == "pendulum") return expect_args(c, 0, 0), pendulum();
    if (c.family == "pendulum-rotation") return expect_args(c, 0, 0), pendulum_rotation();
    if (c.family == "extended-time") return expect_args(c, 0, 0), extended_time();
    if (c.family == "noninvolutive") return expect_args(c, 0, 0), noninvolutive();
    throw PreconditionError("unknown catalog entry '" + name + "'");
}

}  // namespace actangle
