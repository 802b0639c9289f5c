#include "doctest.h"

#include "properties.hpp"

using namespace actangle::testing;

namespace {

void require_clean(const std::vector<PropertyOutcome>& suite) {
    for (const auto& p : suite) {
        INFO(p.name << ": " << p.failures << "/" << p.cases << " failed, worst " << p.worst << " (tol " << p.tol
                    << ") " << p.first_failure);
        CHECK(p.cases >= 100);
        CHECK(p.failures == 0);
    }
}

}  // namespace

TEST_CASE("symplectic invariants on random systems and points") { require_clean(symplectic_properties(120, 11)); }

TEST_CASE("flow invariants on random systems, points and times") { require_clean(flow_properties(120, 12)); }

TEST_CASE("lattice invariants on random periodic and aperiodic orbits") { require_clean(lattice_properties(120, 13)); }

TEST_CASE("chart invariants on catalog charts") { require_clean(chart_properties(120, 14)); }
