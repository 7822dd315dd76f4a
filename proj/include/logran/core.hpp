#pragma once

#include <cmath>
#include <string>

#include "logran/common.hpp"

namespace logran {

// Default epsilon for clamping probabilities before they enter a log.
inline constexpr double kDefaultProbEps = 1e-7;

// Caption / phrase veracity label. Pristine is the "true" outcome of the
// two-valued veracity variable, Falsified the "false" one.
enum class Label : int { Pristine = 0, Falsified = 1 };

inline std::string to_string(Label l) {
    return l == Label::Pristine ? "pristine" : "falsified";
}

inline Label label_from_string(const std::string& s) {
    if (s == "pristine") return Label::Pristine;
    if (s == "falsified") return Label::Falsified;
    throw ValidationError("unknown label \"" + s + "\" (expected \"pristine\" or \"falsified\")");
}

// A two-outcome distribution over {Pristine, Falsified}. Only p_true is
// stored; p_false is always derived so the pair sums to 1 exactly.
struct VeracityDist {
    double p_true = 0.5;

    double p_false() const { return 1.0 - p_true; }

    // Probability of the given outcome.
    double prob(Label l) const { return l == Label::Pristine ? p_true : p_false(); }

    bool valid() const { return std::isfinite(p_true) && p_true >= 0.0 && p_true <= 1.0; }

    // Argmax with the stated tie policy: ties go to Pristine.
    Label threshold(double tie = 0.5) const {
        return p_true >= tie ? Label::Pristine : Label::Falsified;
    }

    bool operator==(const VeracityDist&) const = default;
};

inline VeracityDist make_dist(double p_true) {
    VeracityDist d{p_true};
    if (!d.valid()) {
        throw ValidationError("invalid probability " + std::to_string(p_true) +
                              " for VeracityDist");
    }
    return d;
}

// Clamp a probability into [eps, 1-eps]. Monotone and idempotent;
// identity on the interior of the band.
inline double clamp_prob(double x, double eps = kDefaultProbEps) {
    if (!(eps > 0.0 && eps < 0.5)) {
        throw ValidationError("clamp_prob: eps must lie in (0, 0.5)");
    }
    if (x < eps) return eps;
    if (x > 1.0 - eps) return 1.0 - eps;
    return x;
}

namespace detail {

// One term p*log(p/q) of a discrete KL divergence, with the 0*log(0) = 0
// convention. Positive mass against a zero-probability outcome is a
// support violation.
inline double kl_term(double p, double q, const char* outcome) {
    if (p == 0.0) return 0.0;
    if (q == 0.0) {
        throw ValidationError(std::string("kl_bernoulli: undefined support — p has mass on ") +
                              outcome + " where q is exactly zero");
    }
    return p * std::log(p / q);
}

}  // namespace detail

// D_KL(p || q) for two-outcome distributions. Non-negative, zero iff
// p == q. Throws when p places mass where q has none.
inline double kl_bernoulli(const VeracityDist& p, const VeracityDist& q) {
    if (!p.valid() || !q.valid()) {
        throw ValidationError("kl_bernoulli: invalid input distribution");
    }
    double kl = detail::kl_term(p.p_true, q.p_true, "Pristine") +
                detail::kl_term(p.p_false(), q.p_false(), "Falsified");
    // Guard against -1e-17 style rounding residue near p == q.
    return kl < 0.0 ? 0.0 : kl;
}

}  // namespace logran
