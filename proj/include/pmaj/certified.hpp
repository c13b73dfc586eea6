#pragma once

#include <cmath>
#include <string>

#include "pmaj/errors.hpp"

namespace pmaj {

enum class Provenance { exact, rigorous_bound, heuristic };

inline const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::exact: return "exact";
        case Provenance::rigorous_bound: return "rigorous_bound";
        case Provenance::heuristic: return "heuristic";
    }
    return "?";
}

/// Worse of two provenances (heuristic taints everything downstream).
inline Provenance worst(Provenance a, Provenance b) {
    return static_cast<Provenance>(std::max(static_cast<int>(a), static_cast<int>(b)));
}

/// A numeric constant with a validity tag. Majorants are only claimed as
/// guaranteed when every constant they use is exact or rigorous_bound.
struct CertifiedBound {
    double value = 0.0;
    Provenance provenance = Provenance::heuristic;
    std::string description;

    CertifiedBound() = default;
    CertifiedBound(double v, Provenance prov, std::string desc)
        : value(v), provenance(prov), description(std::move(desc)) {
        if (!(value > 0.0) || !std::isfinite(value))
            throw Error("CertifiedBound must be positive and finite: " + description);
    }

    bool certified() const { return provenance != Provenance::heuristic; }
};

enum class ConstantsMode { exact, rigorous };

}  // namespace pmaj
