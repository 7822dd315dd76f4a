#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "logran/common.hpp"
#include "logran/core.hpp"
#include "logran/synthgen.hpp"

namespace logran {

inline constexpr int kDefaultDim = 64;
inline constexpr int kDefaultHidden = 64;
inline constexpr int kDefaultMaxPhrases = 8;

// Offsets of every named tensor inside the flat parameter vector. The
// gradient vector produced by the trainer shares this layout.
struct TensorInfo {
    std::string name;
    std::vector<size_t> shape;  // [rows, cols] for weights, [n] for biases
    size_t offset = 0;
    size_t size = 0;
};

struct ParamLayout {
    int d = 0;
    int h = 0;
    int max_phrases = 0;

    size_t label_emb = 0, z_emb = 0;
    size_t prior_w1 = 0, prior_b1 = 0, prior_w2 = 0, prior_b2 = 0;
    size_t q_w1 = 0, q_b1 = 0, q_w2 = 0, q_b2 = 0;
    size_t p_w1 = 0, p_b1 = 0, p_w2 = 0, p_b2 = 0;
    size_t total = 0;

    int q_in() const { return 3 * d; }                  // [label emb ; local ; global]
    int p_in() const { return (max_phrases + 2) * d; }  // [z mixes... ; global ; mean local]

    static ParamLayout make(int d, int h, int max_phrases) {
        if (d < 1 || h < 1 || max_phrases < 1) {
            throw ValidationError("ParamLayout: dimensions must be positive");
        }
        ParamLayout L;
        L.d = d;
        L.h = h;
        L.max_phrases = max_phrases;
        size_t off = 0;
        auto place = [&](size_t& slot, size_t n) {
            slot = off;
            off += n;
        };
        place(L.label_emb, 2 * static_cast<size_t>(d));
        place(L.z_emb, 2 * static_cast<size_t>(d));
        place(L.prior_w1, static_cast<size_t>(h) * d);
        place(L.prior_b1, h);
        place(L.prior_w2, h);
        place(L.prior_b2, 1);
        place(L.q_w1, static_cast<size_t>(h) * L.q_in());
        place(L.q_b1, h);
        place(L.q_w2, h);
        place(L.q_b2, 1);
        place(L.p_w1, static_cast<size_t>(h) * L.p_in());
        place(L.p_b1, h);
        place(L.p_w2, 2 * static_cast<size_t>(h));
        place(L.p_b2, 2);
        L.total = off;
        return L;
    }

    std::vector<TensorInfo> tensor_infos() const {
        const size_t d_ = d, h_ = h;
        std::vector<TensorInfo> v = {
            {"label_emb", {2, d_}, label_emb, 2 * d_},
            {"z_emb", {2, d_}, z_emb, 2 * d_},
            {"prior_w1", {h_, d_}, prior_w1, h_ * d_},
            {"prior_b1", {h_}, prior_b1, h_},
            {"prior_w2", {1, h_}, prior_w2, h_},
            {"prior_b2", {1}, prior_b2, 1},
            {"q_w1", {h_, static_cast<size_t>(q_in())}, q_w1, h_ * q_in()},
            {"q_b1", {h_}, q_b1, h_},
            {"q_w2", {1, h_}, q_w2, h_},
            {"q_b2", {1}, q_b2, 1},
            {"p_w1", {h_, static_cast<size_t>(p_in())}, p_w1, h_ * p_in()},
            {"p_b1", {h_}, p_b1, h_},
            {"p_w2", {2, h_}, p_w2, 2 * h_},
            {"p_b2", {2}, p_b2, 2},
        };
        return v;
    }

    bool operator==(const ParamLayout&) const = default;
};

// Weights of the prior head p(z|x), variational head q(z|y,x), predictor
// head p(y|z,x), and the label / z-value embedding tables, stored flat.
struct ModelParams {
    ParamLayout layout;
    uint64_t seed = 0;
    std::vector<double> data;

    int d() const { return layout.d; }
    int h() const { return layout.h; }
    int max_phrases() const { return layout.max_phrases; }

    std::span<const double> tensor(std::string_view name) const {
        for (const TensorInfo& t : layout.tensor_infos()) {
            if (t.name == name) return {data.data() + t.offset, t.size};
        }
        throw ValidationError("unknown tensor name: " + std::string(name));
    }

    // Name of the first parameter block containing a non-finite entry,
    // or empty when all entries are finite.
    std::string first_nonfinite_block() const {
        for (const TensorInfo& t : layout.tensor_infos()) {
            if (!all_finite({data.data() + t.offset, t.size})) return t.name;
        }
        return "";
    }
};

// Xavier-uniform weights, zero biases; deterministic in the seed.
inline ModelParams init_params(uint64_t seed, int d = kDefaultDim, int h = kDefaultHidden,
                               int max_phrases = kDefaultMaxPhrases) {
    ModelParams p;
    p.layout = ParamLayout::make(d, h, max_phrases);
    p.seed = seed;
    p.data.assign(p.layout.total, 0.0);
    Rng rng(derive_seed(seed, "init_params"));
    for (const TensorInfo& t : p.layout.tensor_infos()) {
        if (t.shape.size() != 2) continue;  // biases stay zero
        const double a = std::sqrt(6.0 / static_cast<double>(t.shape[0] + t.shape[1]));
        for (size_t i = 0; i < t.size; ++i) {
            p.data[t.offset + i] = (2.0 * rng.uniform() - 1.0) * a;
        }
    }
    return p;
}

// Hadamard-product features of one instance. Local features beyond
// max_phrases are dropped (first-come truncation); padded rows are zero
// and masked, and no head ever reads a padded row.
struct FeatureBundle {
    int d = 0;
    int max_phrases = 0;
    int n_real = 0;
    std::vector<double> h_global;   // d
    std::vector<double> h_locals;   // max_phrases x d, row-major
    std::vector<uint8_t> mask;      // 1 = real slot

    std::span<const double> local(int i) const {
        return {h_locals.data() + static_cast<size_t>(i) * d, static_cast<size_t>(d)};
    }

    std::vector<double> mean_local() const {
        std::vector<double> m(d, 0.0);
        for (int i = 0; i < n_real; ++i) {
            auto row = local(i);
            for (int k = 0; k < d; ++k) m[k] += row[k];
        }
        for (double& x : m) x /= n_real;
        return m;
    }
};

inline FeatureBundle build_features(const Instance& inst, int max_phrases = kDefaultMaxPhrases) {
    if (max_phrases < 1) throw ValidationError("build_features: max_phrases must be >= 1");
    const int d = static_cast<int>(inst.dim());
    if (d == 0 || inst.caption_emb.size() != static_cast<size_t>(d)) {
        throw ValidationError("build_features: dimension mismatch between image and caption "
                              "embeddings in record " + inst.id);
    }
    if (inst.phrase_embs.empty()) {
        throw ValidationError("build_features: instance " + inst.id + " has no phrases");
    }
    FeatureBundle b;
    b.d = d;
    b.max_phrases = max_phrases;
    b.n_real = static_cast<int>(std::min<size_t>(inst.phrase_embs.size(), max_phrases));
    b.h_global.resize(d);
    for (int k = 0; k < d; ++k) b.h_global[k] = inst.caption_emb[k] * inst.image_emb[k];
    b.h_locals.assign(static_cast<size_t>(max_phrases) * d, 0.0);
    b.mask.assign(max_phrases, 0);
    for (int i = 0; i < b.n_real; ++i) {
        const auto& pe = inst.phrase_embs[i];
        if (pe.size() != static_cast<size_t>(d)) {
            throw ValidationError("build_features: dimension mismatch in phrase embedding " +
                                  std::to_string(i) + " of record " + inst.id);
        }
        for (int k = 0; k < d; ++k) b.h_locals[static_cast<size_t>(i) * d + k] = pe[k] * inst.image_emb[k];
        b.mask[i] = 1;
    }
    return b;
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// out = W x + b for a row-major [rows x cols] matrix.
inline void affine(const double* W, const double* b, const double* x, int rows, int cols,
                   double* out) {
    for (int r = 0; r < rows; ++r) {
        const double* wr = W + static_cast<size_t>(r) * cols;
        double s = b[r];
        for (int c = 0; c < cols; ++c) s += wr[c] * x[c];
        out[r] = s;
    }
}

// Two-layer tanh MLP with a single output logit.
inline double mlp_scalar(const double* w1, const double* b1, const double* w2, double b2,
                         const double* x, int in_dim, int hidden) {
    std::vector<double> a(hidden);
    affine(w1, b1, x, hidden, in_dim, a.data());
    double s = b2;
    for (int r = 0; r < hidden; ++r) s += w2[r] * std::tanh(a[r]);
    return s;
}

// y-conditioning embedding: soft mixture of the two label embedding rows.
inline std::vector<double> label_mix(const ModelParams& p, double p_true) {
    const double* E = p.data.data() + p.layout.label_emb;
    std::vector<double> e(p.d());
    for (int k = 0; k < p.d(); ++k) {
        e[k] = p_true * E[k] + (1.0 - p_true) * E[p.d() + k];
    }
    return e;
}

}  // namespace detail

// Prior p(z_i = Pristine | x, w_i) for one slot. Padded slots are pinned
// to exactly 1.0, which is neutral under the product aggregation.
inline VeracityDist prior_phrase(const ModelParams& p, const FeatureBundle& b, int slot,
                                 double eps = kDefaultProbEps) {
    if (b.d != p.d() || b.max_phrases != p.max_phrases()) {
        throw ValidationError("prior_phrase: feature bundle does not match model dimensions");
    }
    if (slot < 0 || slot >= b.max_phrases) throw ValidationError("prior_phrase: slot out of range");
    if (!b.mask[slot]) return VeracityDist{1.0};
    const double* base = p.data.data();
    const ParamLayout& L = p.layout;
    double logit = detail::mlp_scalar(base + L.prior_w1, base + L.prior_b1, base + L.prior_w2,
                                      base[L.prior_b2], b.local(slot).data(), L.d, L.h);
    return VeracityDist{clamp_prob(detail::sigmoid(logit), eps)};
}

// q(z_i = Pristine | y, x) for every slot. Soft conditioning mixes the
// label embeddings by y.p_true; a hard label is the degenerate mixture.
inline std::vector<VeracityDist> posterior_q(const ModelParams& p, const VeracityDist& y_cond,
                                             const FeatureBundle& b) {
    if (!y_cond.valid()) throw ValidationError("posterior_q: invalid conditioning distribution");
    if (b.d != p.d() || b.max_phrases != p.max_phrases()) {
        throw ValidationError("posterior_q: feature bundle does not match model dimensions");
    }
    const ParamLayout& L = p.layout;
    const double* base = p.data.data();
    const std::vector<double> e_y = detail::label_mix(p, y_cond.p_true);
    std::vector<double> u(L.q_in());
    std::copy(e_y.begin(), e_y.end(), u.begin());
    std::copy(b.h_global.begin(), b.h_global.end(), u.begin() + 2 * L.d);
    std::vector<VeracityDist> out(L.max_phrases, VeracityDist{1.0});
    for (int i = 0; i < b.n_real; ++i) {
        auto row = b.local(i);
        std::copy(row.begin(), row.end(), u.begin() + L.d);
        double logit = detail::mlp_scalar(base + L.q_w1, base + L.q_b1, base + L.q_w2,
                                          base[L.q_b2], u.data(), L.q_in(), L.h);
        out[i] = VeracityDist{detail::sigmoid(logit)};
    }
    return out;
}

inline std::vector<VeracityDist> posterior_q(const ModelParams& p, Label y_cond,
                                             const FeatureBundle& b) {
    return posterior_q(p, VeracityDist{y_cond == Label::Pristine ? 1.0 : 0.0}, b);
}

namespace detail {

// Predictor input: per-slot z-value embedding mixtures, then the global
// feature, then the mean local feature. Padded slots are forced to the
// Pristine embedding regardless of what the caller passed.
inline std::vector<double> predictor_input(const ModelParams& p,
                                           std::span<const VeracityDist> z_cond,
                                           const FeatureBundle& b) {
    const ParamLayout& L = p.layout;
    const double* Z = p.data.data() + L.z_emb;
    std::vector<double> x(L.p_in());
    for (int j = 0; j < L.max_phrases; ++j) {
        const double zp = b.mask[j] ? z_cond[j].p_true : 1.0;
        double* dst = x.data() + static_cast<size_t>(j) * L.d;
        for (int k = 0; k < L.d; ++k) {
            dst[k] = zp * Z[k] + (1.0 - zp) * Z[L.d + k];
        }
    }
    std::copy(b.h_global.begin(), b.h_global.end(),
              x.begin() + static_cast<size_t>(L.max_phrases) * L.d);
    const std::vector<double> mean = b.mean_local();
    std::copy(mean.begin(), mean.end(),
              x.begin() + static_cast<size_t>(L.max_phrases + 1) * L.d);
    return x;
}

inline std::array<double, 2> predictor_logits(const ModelParams& p,
                                              std::span<const VeracityDist> z_cond,
                                              const FeatureBundle& b) {
    const ParamLayout& L = p.layout;
    const double* base = p.data.data();
    const std::vector<double> x = predictor_input(p, z_cond, b);
    std::vector<double> a(L.h);
    affine(base + L.p_w1, base + L.p_b1, x.data(), L.h, L.p_in(), a.data());
    std::array<double, 2> logits = {base[L.p_b2], base[L.p_b2 + 1]};
    const double* W2 = base + L.p_w2;
    for (int r = 0; r < L.h; ++r) {
        const double t = std::tanh(a[r]);
        logits[0] += W2[r] * t;
        logits[1] += W2[L.h + r] * t;
    }
    return logits;
}

}  // namespace detail

// p(y | z, x): two logits through softmax. z_cond must supply one entry
// per slot (max_phrases of them).
inline VeracityDist predict_p(const ModelParams& p, std::span<const VeracityDist> z_cond,
                              const FeatureBundle& b) {
    if (static_cast<int>(z_cond.size()) != p.max_phrases()) {
        throw ValidationError("predict_p: z_cond must have max_phrases entries");
    }
    if (b.d != p.d() || b.max_phrases != p.max_phrases()) {
        throw ValidationError("predict_p: feature bundle does not match model dimensions");
    }
    for (const VeracityDist& z : z_cond) {
        if (!z.valid()) throw ValidationError("predict_p: invalid z conditioning distribution");
    }
    const auto logits = detail::predictor_logits(p, z_cond, b);
    // softmax over two outcomes reduces to a sigmoid of the logit gap
    return VeracityDist{detail::sigmoid(logits[0] - logits[1])};
}

// ── Checkpoint I/O ───────────────────────────────────────────────────
//
// Single JSON document; numbers round-trip bit-exactly through the
// shortest-representation serializer.

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::ordered_json params_to_json(const ModelParams& p) {
    if (std::string block = p.first_nonfinite_block(); !block.empty()) {
        throw ValidationError("refusing to serialize non-finite parameters in block " + block);
    }
    nlohmann::ordered_json j;
    j["meta"] = {{"d", p.d()},
                 {"h", p.h()},
                 {"max_phrases", p.max_phrases()},
                 {"seed", p.seed},
                 {"format_version", kCheckpointVersion}};
    nlohmann::ordered_json tensors;
    for (const TensorInfo& t : p.layout.tensor_infos()) {
        tensors[t.name] = {{"shape", t.shape},
                           {"data", std::vector<double>(p.data.begin() + t.offset,
                                                        p.data.begin() + t.offset + t.size)}};
    }
    j["tensors"] = std::move(tensors);
    return j;
}

inline ModelParams params_from_json(const nlohmann::ordered_json& j) {
    try {
        const auto& meta = j.at("meta");
        if (meta.at("format_version").get<int>() != kCheckpointVersion) {
            throw ValidationError("checkpoint: unsupported format_version");
        }
        ModelParams p;
        p.layout = ParamLayout::make(meta.at("d").get<int>(), meta.at("h").get<int>(),
                                     meta.at("max_phrases").get<int>());
        p.seed = meta.at("seed").get<uint64_t>();
        p.data.assign(p.layout.total, 0.0);
        const auto& tensors = j.at("tensors");
        for (const TensorInfo& t : p.layout.tensor_infos()) {
            const auto& tj = tensors.at(t.name);
            if (tj.at("shape").get<std::vector<size_t>>() != t.shape) {
                throw ValidationError("checkpoint: tensor " + t.name + " has wrong shape");
            }
            const auto values = tj.at("data").get<std::vector<double>>();
            if (values.size() != t.size) {
                throw ValidationError("checkpoint: tensor " + t.name + " has wrong size");
            }
            std::copy(values.begin(), values.end(), p.data.begin() + t.offset);
        }
        if (std::string block = p.first_nonfinite_block(); !block.empty()) {
            throw ValidationError("checkpoint: non-finite values in tensor " + block);
        }
        return p;
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ValidationError(std::string("checkpoint: malformed document: ") + e.what());
    }
}

inline void save_params(const ModelParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << params_to_json(p).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

inline ModelParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::ordered_json::exception& e) {
        throw ValidationError("checkpoint " + path + ": parse error: " + e.what());
    }
    return params_from_json(j);
}

}  // namespace logran
