#include "doctest.h"

#include "actangle/catalog.hpp"
#include "actangle/error.hpp"
#include "actangle/verify.hpp"
#include "support.hpp"

using namespace actangle;
using namespace actangle::testing;

namespace {

const Chart& oscillator_chart() {
    static const Chart chart = [] {
        const CatalogEntry e = catalog_get("sho(2)");
        return Chart::build(e.system, e.box, e.seed);
    }();
    return chart;
}

const Chart& free_chart() {
    static const Chart chart = [] {
        const CatalogEntry e = catalog_get("free");
        return Chart::build(e.system, e.box, e.seed);
    }();
    return chart;
}

}  // namespace

TEST_CASE("actions from loop integrals") {
    const IntegratorOptions opts;
    const auto free = IntegrableSystem::from_sources(1, {"p1"});
    CHECK(compute_actions(free, vec_of({0.0, 1.5}), Mat(1, 0), {0}, vec_of({1.5}), opts)[0] == 1.5);

    const auto sho = IntegrableSystem::from_sources(1, {"(p1^2 + 2^2*q1^2)/2"});
    const Mat period = Mat::Constant(1, 1, kPi);
    CHECK(compute_actions(sho, vec_of({std::sqrt(2.0) / 2.0, 0.0}), period, {}, vec_of({1.0}), opts)[0] ==
          doctest::Approx(0.5).epsilon(1e-10));

    const auto sho2 = IntegrableSystem::from_sources(2, {"(p1^2 + q1^2)/2", "(p2^2 + 2*q2^2)/2"});
    Mat basis = Mat::Zero(2, 2);
    basis(0, 0) = 2.0 * kPi;
    basis(1, 1) = 2.0 * kPi / std::sqrt(2.0);
    const Vec i2 = compute_actions(sho2, vec_of({std::sqrt(2.0), 1.0, 0.0, 0.0}), basis, {}, vec_of({1.0, 1.0}), opts);
    CHECK(i2[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(i2[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));

    // a basis vector that does not close the loop is reported
    CHECK_THROWS_AS(compute_actions(sho, vec_of({std::sqrt(2.0) / 2.0, 0.0}), Mat::Constant(1, 1, 3.0), {},
                                    vec_of({1.0}), opts),
                    NumericalError);
}

TEST_CASE("oscillator chart matches polar coordinates") {
    const Chart& chart = oscillator_chart();
    CHECK(chart.rank() == 1);
    CHECK(std::abs(chart.seed_lattice().basis(0, 0) - kPi) < 1e-8);
    for (std::size_t k = 0; k < chart.node_actions().size(); ++k) {
        const double j = chart.section().node_level(static_cast<int>(k))[0];
        CHECK(rel(chart.node_actions()[k][0], j / 2.0) < 1e-8);
    }
    ChartEvaluator ev(chart);
    for (double j : {0.6, 1.0, 1.37, 1.9}) {
        const FiberFrame& f = ev.frame_at(vec_of({j}));
        CHECK(rel(f.actions[0], j / 2.0) < 1e-8);
        CHECK(f.dI_dJ(0, 0) == doctest::Approx(0.5).epsilon(1e-8));
    }

    // the section point is the fiber origin
    const Vec j = vec_of({1.0});
    const Vec chi = chart.section().base_point(j);
    const ChartPoint at = ev.to_action_angle(chi);
    CHECK(at.I[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(angle_gap(at.phi[0], 0.0) < 1e-9);
    CHECK((ev.from_action_angle({vec_of({0.5}), Vec(0), vec_of({0.0})}) - chi).norm() < 1e-9);

    // a quarter period along the orbit is a quarter turn
    const Vec quarter = flow(chart.system(), 0, chi, kPi / 4.0, chart.options().integrator);
    CHECK(std::abs(ev.to_action_angle(quarter).phi[0] - kPi / 2.0) < 1e-8);

    // half a turn is the antipodal point
    const Vec half = ev.from_action_angle({vec_of({0.5}), Vec(0), vec_of({kPi})});
    CHECK((half + chi).norm() < 1e-8);

    // actions invert
    CHECK(chart.levels_for_actions(vec_of({0.7}))[0] == doctest::Approx(1.4).epsilon(1e-10));
}

TEST_CASE("free particle chart is (p, q)") {
    const Chart& chart = free_chart();
    CHECK(chart.rank() == 0);
    ChartEvaluator ev(chart);
    const ChartPoint c = ev.to_action_angle(vec_of({3.0, 1.5}));
    CHECK(c.I[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(c.x[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(c.phi.size() == 0);
    Gen g(41);
    for (int k = 0; k < 20; ++k) {
        const Vec z = vec_of({g.uniform(-5.0, 5.0), g.uniform(1.0, 2.0)});
        const ChartPoint p = ev.to_action_angle(z);
        CHECK(std::abs(p.I[0] - z[1]) < 1e-8);
        CHECK(std::abs(p.x[0] - z[0]) < 1e-8);
    }
}

TEST_CASE("points outside the level box are refused") {
    ChartEvaluator ev(oscillator_chart());
    CHECK_THROWS_AS(ev.to_action_angle(vec_of({0.0, 3.0})), PreconditionError);
    CHECK_THROWS_AS(ev.from_action_angle({vec_of({5.0}), Vec(0), vec_of({0.0})}), PreconditionError);
    CHECK_THROWS_AS(ev.from_action_angle({vec_of({0.5}), vec_of({1.0}), vec_of({0.0})}), PreconditionError);
}

TEST_CASE("chart pipeline refuses non-involutive and critical input") {
    const CatalogEntry bad = catalog_get("noninvolutive");
    CHECK_THROWS_AS(Chart::build(bad.system, bad.box, bad.seed), PreconditionError);

    const auto sho = IntegrableSystem::from_sources(1, {"(p1^2 + q1^2)/2"});
    CHECK_THROWS_AS(Chart::build(sho, Box(vec_of({0.0}), vec_of({1.0})), vec_of({0.0, 0.0})), Error);
}

TEST_CASE("cylinder chart and complement override") {
    const CatalogEntry e = catalog_get("cylinder");
    ChartOptions opts;
    opts.search.s_max = 12.0;
    const Chart chart = Chart::build(e.system, e.box, e.seed, opts);
    CHECK(chart.rank() == 1);
    CHECK(chart.noncompact_axes() == std::vector<int>{0});
    const Mat b = chart.seed_lattice().basis;
    CHECK(std::abs(b(0, 0)) < 1e-8);
    CHECK(std::abs(b(1, 0) - 2.0 * kPi) < 1e-8);
    ChartEvaluator ev(chart);
    const FiberFrame& f = ev.frame_at(vec_of({0.8, 1.2}));
    CHECK(f.actions[0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(f.actions[1] == doctest::Approx(1.2).epsilon(1e-9));

    ChartOptions skew = opts;
    skew.complement = (Mat(2, 1) << 1.0, 0.3).finished();
    const Chart other = Chart::build(e.system, e.box, e.seed, skew);
    CHECK((other.complement() - *skew.complement).norm() == 0.0);

    ChartOptions parallel = opts;
    parallel.complement = (Mat(2, 1) << 0.0, 1.0).finished();
    CHECK_THROWS_AS(Chart::build(e.system, e.box, e.seed, parallel), PreconditionError);
}

TEST_CASE("angles wrap into one turn") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(-kPi / 2.0) == doctest::Approx(1.5 * kPi));
    CHECK(wrap_angle(7.0 * kPi) == doctest::Approx(kPi));
    Gen g(42);
    for (int k = 0; k < 100; ++k) {
        const double w = wrap_angle(g.uniform(-100.0, 100.0));
        CHECK(w >= 0.0);
        CHECK(w < 2.0 * kPi);
    }
}

TEST_CASE("gauge replacement keeps the grid") {
    const Chart& chart = oscillator_chart();
    GaugeCorrection g = GaugeCorrection::zero(chart.box(), 1, 0, 1);
    g.dprime[0][1] = 0.25;
    const Chart shifted = chart.with_gauge(g);
    ChartEvaluator a(chart), b(shifted);
    const Vec z = chart.section().base_point(vec_of({1.2}));
    const double shift = g.shift_phi(vec_of({1.2}))[0];
    CHECK(angle_gap(b.to_action_angle(z).phi[0], a.to_action_angle(z).phi[0] - shift) < 1e-9);
    CHECK(shifted.node_actions() == chart.node_actions());
}
