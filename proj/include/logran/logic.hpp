#pragma once

#include <span>
#include <vector>

#include "logran/common.hpp"
#include "logran/core.hpp"

namespace logran {

// Rule-aggregated caption distribution produced from phrase marginals;
// the teacher side of the distillation loss.
struct TeacherDist {
    VeracityDist dist;
    int n_real_phrases = 0;
};

// Hard aggregation rule: a caption is Falsified iff at least one phrase
// is Falsified.
inline Label hard_aggregate(std::span<const Label> z_labels) {
    if (z_labels.empty()) throw ValidationError("hard_aggregate: empty label list");
    for (Label l : z_labels) {
        if (l == Label::Falsified) return Label::Falsified;
    }
    return Label::Pristine;
}

// Soft conjunction under the product t-norm: the caption is Pristine
// with the product of the per-phrase Pristine probabilities. Masked
// slots are ignored (equivalently, they contribute a factor of 1).
inline TeacherDist aggregate(std::span<const VeracityDist> z_probs,
                             std::span<const uint8_t> mask = {}) {
    if (!mask.empty() && mask.size() != z_probs.size()) {
        throw ValidationError("aggregate: mask length does not match z_probs");
    }
    double product = 1.0;
    int n_real = 0;
    for (size_t i = 0; i < z_probs.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        if (!z_probs[i].valid()) throw ValidationError("aggregate: invalid phrase distribution");
        product *= z_probs[i].p_true;
        ++n_real;
    }
    if (n_real == 0) throw ValidationError("aggregate: all slots masked");
    return TeacherDist{VeracityDist{product}, n_real};
}

// Distillation loss D_KL(p_y || teacher). The teacher is a constant
// target: callers must not propagate gradients through it into the
// parameters that produced the phrase marginals.
inline double logic_loss(const VeracityDist& p_y, const TeacherDist& teacher,
                         double eps = kDefaultProbEps) {
    VeracityDist target{clamp_prob(teacher.dist.p_true, eps)};
    return kl_bernoulli(p_y, target);
}

}  // namespace logran
