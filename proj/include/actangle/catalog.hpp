#pragma once

#include <functional>
#include <string>
#include <vector>

#include "actangle/section.hpp"

namespace actangle {

/// A built-in reference system with its recommended level box, seed and expected data.
struct CatalogEntry {
    CatalogEntry(std::string name_, std::string family_, IntegrableSystem system_, Box box_, Vec seed_, int rank_)
        : name(std::move(name_)), family(std::move(family_)), system(std::move(system_)), box(std::move(box_)),
          seed(std::move(seed_)), rank(rank_) {}

    std::string name;    // canonical spelling including parameters, e.g. "sho(2)"
    std::string family;  // name without parameters
    IntegrableSystem system;
    Box box;
    Vec seed;
    int rank = 0;  // expected lattice rank
    bool involutive = true;
    /// Closed-form actions I(J) in chart order (noncompact first); empty when not available.
    std::function<Vec(const Vec&)> actions;
    /// Closed-form lattice basis at J (n x m); empty when not available.
    std::function<Mat(const Vec&)> periods;
    std::string reference;  // how the expected data is obtained
    std::string notes;      // which hypotheses of the construction it illustrates
};

/// Every family with default parameters, in a fixed order.
std::vector<CatalogEntry> catalog_list();

/// Looks up "family" or "family(arg, ...)"; arguments are constant expressions such as sqrt(2).
/// Throws PreconditionError for unknown names or bad arguments.
CatalogEntry catalog_get(const std::string& name);

}  // namespace actangle
