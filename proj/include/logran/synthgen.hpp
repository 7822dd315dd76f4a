#pragma once

#include <array>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "logran/chunker.hpp"
#include "logran/common.hpp"
#include "logran/core.hpp"

namespace logran {

// One image/caption pair at embedding level. The image itself never
// appears; backbones are represented by their exported vectors.
struct Instance {
    std::string id;
    std::string caption;
    PhraseSet phrase_set;
    std::vector<double> image_emb;
    std::vector<double> caption_emb;
    std::vector<std::vector<double>> phrase_embs;  // one per phrase
    Label label = Label::Pristine;
    // Evaluation-only culprit annotations; training must never read them.
    std::optional<std::vector<Label>> gold_phrase_labels;

    size_t dim() const { return image_emb.size(); }
    size_t n_phrases() const { return phrase_set.phrases.size(); }

    void validate() const {
        const std::string at = "record " + (id.empty() ? std::string("<no id>") : id);
        if (id.empty()) throw ValidationError("schema violation in " + at + ": field id is empty");
        load_prechunked(caption, phrase_set.phrases, id);  // span invariants
        if (phrase_embs.size() != phrase_set.phrases.size()) {
            throw ValidationError("schema violation in " + at + ": field phrase_embs has " +
                                  std::to_string(phrase_embs.size()) + " entries for " +
                                  std::to_string(phrase_set.phrases.size()) + " phrases");
        }
        const size_t d = image_emb.size();
        if (d == 0) throw ValidationError("schema violation in " + at + ": field image_emb is empty");
        auto check_vec = [&](std::span<const double> v, const char* field) {
            if (v.size() != d) {
                throw ValidationError("schema violation in " + at + ": field " + field +
                                      " has dimension " + std::to_string(v.size()) +
                                      ", expected " + std::to_string(d));
            }
            if (!all_finite(v)) {
                throw ValidationError("schema violation in " + at + ": field " + field +
                                      " contains non-finite values");
            }
        };
        check_vec(image_emb, "image_emb");
        check_vec(caption_emb, "caption_emb");
        for (const auto& pe : phrase_embs) check_vec(pe, "phrase_embs");
        if (gold_phrase_labels) {
            if (gold_phrase_labels->size() != phrase_embs.size()) {
                throw ValidationError("schema violation in " + at +
                                      ": field gold_phrase_labels has " +
                                      std::to_string(gold_phrase_labels->size()) +
                                      " entries for " + std::to_string(phrase_embs.size()) +
                                      " phrases");
            }
            bool any_false = false;
            for (Label l : *gold_phrase_labels) any_false |= (l == Label::Falsified);
            if ((label == Label::Falsified) != any_false) {
                throw ValidationError("schema violation in " + at +
                                      ": field label disagrees with gold_phrase_labels "
                                      "(falsified iff some phrase is falsified)");
            }
        }
    }
};

struct SynthConfig {
    int d = 64;
    int n_train = 2000;
    int n_val = 500;
    int n_test = 1000;
    double falsified_fraction = 0.5;
    int culprits_per_falsified = 1;
    std::array<int, 2> phrase_count_range = {3, 6};
    double scene_noise_sigma = 0.1;
    uint64_t seed = 7;

    void validate() const {
        if (d < 1) throw ValidationError("SynthConfig: d must be >= 1");
        if (n_train < 0 || n_val < 0 || n_test < 0) {
            throw ValidationError("SynthConfig: split sizes must be non-negative");
        }
        if (!(falsified_fraction > 0.0 && falsified_fraction < 1.0)) {
            throw ValidationError("SynthConfig: falsified_fraction must lie in (0, 1)");
        }
        if (culprits_per_falsified < 1) {
            throw ValidationError("SynthConfig: culprits_per_falsified must be >= 1");
        }
        if (phrase_count_range[0] < 1 || phrase_count_range[1] < phrase_count_range[0]) {
            throw ValidationError("SynthConfig: invalid phrase_count_range");
        }
        if (phrase_count_range[1] > 8) {
            throw ValidationError("SynthConfig: phrase_count_range max exceeds the supported "
                                  "phrase slot count (8)");
        }
        if (culprits_per_falsified > phrase_count_range[0]) {
            throw ValidationError("SynthConfig: culprits_per_falsified exceeds the minimum "
                                  "phrase count, so exact culprit counts cannot be planted");
        }
        if (!(scene_noise_sigma >= 0.0)) {
            throw ValidationError("SynthConfig: scene_noise_sigma must be >= 0");
        }
    }
};

struct Dataset {
    std::vector<Instance> train, val, test;
};

namespace detail {

// Caption slot templates. Slot k of an n-phrase caption is joined to the
// previous text by connector[k]; the connector is not part of the span.
struct SlotPool {
    const char* connector;
    PhraseKind kind;
    std::vector<std::string> options;
};

inline const std::vector<SlotPool>& caption_slots() {
    static const std::vector<SlotPool> slots = {
        {"", PhraseKind::NP, {}},  // subject, assembled from two pools below
        {" ", PhraseKind::VP,
         {"fight", "celebrate", "march", "dance", "protest", "cheer", "gather", "race"}},
        {" ", PhraseKind::NP,
         {"the ball", "a trophy", "the flag", "a banner", "the crowd", "a medal", "the stage",
          "a kite"}},
        {" in ", PhraseKind::NE,
         {"Spain", "Angola", "Cairo", "Berlin", "Madrid", "Lisbon", "Vienna", "Prague"}},
        {" during ", PhraseKind::NP,
         {"a handball tournament", "a street festival", "a chess match", "a film premiere",
          "a trade fair"}},
        {" on ", PhraseKind::NE,
         {"Sunday", "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday"}},
        {" with ", PhraseKind::NP,
         {"a loud chant", "a bright banner", "a golden trophy", "a red scarf"}},
        {" under ", PhraseKind::NP,
         {"a cloudy sky", "a sunny sky", "a large tent", "a golden arch"}},
    };
    return slots;
}

inline const std::vector<std::string>& subject_nationalities() {
    static const std::vector<std::string> v = {"Tunisian", "Angolan", "German",  "French",
                                               "Brazilian", "Egyptian", "Spanish", "Italian",
                                               "Polish",   "Dutch",   "Mexican"};
    return v;
}

inline const std::vector<std::string>& subject_groups() {
    static const std::vector<std::string> v = {"players",  "dancers",  "students", "farmers",
                                               "tourists", "workers",  "athletes", "musicians"};
    return v;
}

inline std::vector<double> random_unit_vector(Rng& rng, int d) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    normalize_inplace(v);
    return v;
}

inline std::vector<double> noisy_normalized(Rng& rng, std::span<const double> base, double sigma) {
    std::vector<double> v(base.begin(), base.end());
    for (double& x : v) x += sigma * rng.normal();
    normalize_inplace(v);
    return v;
}

}  // namespace detail

// Deterministic label interleaving: instance idx of a split is Falsified
// exactly when the running count floor((idx+1)*f) advances, so a split of
// n instances carries exactly floor(n*f) Falsified labels.
inline bool interleaved_falsified(int idx, double fraction) {
    auto count = [&](int k) { return static_cast<long long>(std::floor(fraction * k)); };
    return count(idx + 1) > count(idx);
}

// Build one synthetic instance. Each instance runs on its own RNG stream
// keyed by (seed, split, index), so generation is order-independent.
inline Instance generate_instance(const SynthConfig& cfg, const std::string& split, int idx) {
    Rng rng(derive_seed(derive_seed(cfg.seed, split), static_cast<uint64_t>(idx)));

    const int n_phr = cfg.phrase_count_range[0] +
                      static_cast<int>(rng.below(static_cast<uint64_t>(
                          cfg.phrase_count_range[1] - cfg.phrase_count_range[0] + 1)));

    // Caption text and spans.
    const auto& slots = detail::caption_slots();
    std::string caption;
    std::vector<PhraseSpan> spans;
    for (int k = 0; k < n_phr; ++k) {
        std::string text;
        if (k == 0) {
            const auto& nat = detail::subject_nationalities();
            const auto& grp = detail::subject_groups();
            text = nat[rng.below(nat.size())] + " " + grp[rng.below(grp.size())];
        } else {
            const auto& opts = slots[k].options;
            text = opts[rng.below(opts.size())];
        }
        caption += slots[k].connector;
        PhraseSpan s;
        s.start = caption.size();
        caption += text;
        s.end = caption.size();
        s.text = std::move(text);
        s.kind = slots[k].kind;
        spans.push_back(std::move(s));
    }

    Instance inst;
    inst.id = split + "-" + [&] {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%05d", idx);
        return std::string(buf);
    }();
    inst.caption = caption;
    inst.phrase_set = PhraseSet{std::move(spans), caption};
    inst.label = interleaved_falsified(idx, cfg.falsified_fraction) ? Label::Falsified
                                                                    : Label::Pristine;

    // Latent scene and its embeddings.
    const std::vector<double> scene = detail::random_unit_vector(rng, cfg.d);

    std::vector<Label> phrase_labels(n_phr, Label::Pristine);
    std::vector<double> culprit_scene;
    if (inst.label == Label::Falsified) {
        // Choose distinct culprit positions (partial Fisher-Yates).
        std::vector<int> pos(n_phr);
        for (int i = 0; i < n_phr; ++i) pos[i] = i;
        for (int i = 0; i < cfg.culprits_per_falsified; ++i) {
            int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(n_phr - i)));
            std::swap(pos[i], pos[j]);
        }
        for (int i = 0; i < cfg.culprits_per_falsified; ++i) {
            phrase_labels[pos[i]] = Label::Falsified;
        }
        // Re-sample the off-scene direction until it is far from the true
        // scene, so the planted signal stays recoverable.
        do {
            culprit_scene = detail::random_unit_vector(rng, cfg.d);
        } while (std::abs(dot(scene, culprit_scene)) >= 0.3);
    }

    inst.image_emb = detail::noisy_normalized(rng, scene, cfg.scene_noise_sigma);
    inst.phrase_embs.reserve(n_phr);
    for (int i = 0; i < n_phr; ++i) {
        const auto& base = phrase_labels[i] == Label::Falsified ? culprit_scene : scene;
        inst.phrase_embs.push_back(detail::noisy_normalized(rng, base, cfg.scene_noise_sigma));
    }
    std::vector<double> mean(cfg.d, 0.0);
    for (const auto& pe : inst.phrase_embs) {
        for (int k = 0; k < cfg.d; ++k) mean[k] += pe[k];
    }
    for (double& x : mean) x /= n_phr;
    inst.caption_emb = detail::noisy_normalized(rng, mean, cfg.scene_noise_sigma);
    inst.gold_phrase_labels = std::move(phrase_labels);

    inst.validate();
    return inst;
}

inline Dataset generate_dataset(const SynthConfig& cfg) {
    cfg.validate();
    Dataset ds;
    auto fill = [&](std::vector<Instance>& out, const std::string& split, int count) {
        out.reserve(count);
        for (int i = 0; i < count; ++i) out.push_back(generate_instance(cfg, split, i));
    };
    fill(ds.train, "train", cfg.n_train);
    fill(ds.val, "val", cfg.n_val);
    fill(ds.test, "test", cfg.n_test);
    return ds;
}

// ── JSONL serialization ──────────────────────────────────────────────

using json = nlohmann::ordered_json;

inline json instance_to_json(const Instance& inst) {
    json j;
    j["id"] = inst.id;
    j["caption"] = inst.caption;
    json phrases = json::array();
    for (const PhraseSpan& s : inst.phrase_set.phrases) {
        phrases.push_back({{"text", s.text},
                           {"start", s.start},
                           {"end", s.end},
                           {"kind", to_string(s.kind)}});
    }
    j["phrases"] = std::move(phrases);
    j["image_emb"] = inst.image_emb;
    j["caption_emb"] = inst.caption_emb;
    j["phrase_embs"] = inst.phrase_embs;
    j["label"] = to_string(inst.label);
    if (inst.gold_phrase_labels) {
        json g = json::array();
        for (Label l : *inst.gold_phrase_labels) g.push_back(to_string(l));
        j["gold_phrase_labels"] = std::move(g);
    }
    return j;
}

namespace detail {

inline const json& require_field(const json& j, const char* field, const std::string& where) {
    auto it = j.find(field);
    if (it == j.end()) {
        throw ValidationError("schema violation in " + where + ": missing field " + field);
    }
    return *it;
}

}  // namespace detail

inline Instance instance_from_json(const json& j, const std::string& where) {
    Instance inst;
    try {
        inst.id = detail::require_field(j, "id", where).get<std::string>();
        const std::string at = "record " + inst.id;
        inst.caption = detail::require_field(j, "caption", at).get<std::string>();
        std::vector<PhraseSpan> spans;
        for (const json& pj : detail::require_field(j, "phrases", at)) {
            PhraseSpan s;
            s.text = detail::require_field(pj, "text", at).get<std::string>();
            s.start = detail::require_field(pj, "start", at).get<size_t>();
            s.end = detail::require_field(pj, "end", at).get<size_t>();
            s.kind = phrase_kind_from_string(detail::require_field(pj, "kind", at).get<std::string>());
            spans.push_back(std::move(s));
        }
        inst.phrase_set = PhraseSet{std::move(spans), inst.caption};
        inst.image_emb = detail::require_field(j, "image_emb", at).get<std::vector<double>>();
        inst.caption_emb = detail::require_field(j, "caption_emb", at).get<std::vector<double>>();
        inst.phrase_embs =
            detail::require_field(j, "phrase_embs", at).get<std::vector<std::vector<double>>>();
        inst.label = label_from_string(detail::require_field(j, "label", at).get<std::string>());
        if (auto it = j.find("gold_phrase_labels"); it != j.end() && !it->is_null()) {
            std::vector<Label> gold;
            for (const json& g : *it) gold.push_back(label_from_string(g.get<std::string>()));
            inst.gold_phrase_labels = std::move(gold);
        }
    } catch (const json::exception& e) {
        throw ValidationError("schema violation in " + where + ": " + e.what());
    }
    inst.validate();
    return inst;
}

// One compact JSON object per line, LF endings, UTF-8.
inline void write_dataset(const std::vector<Instance>& instances, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const Instance& inst : instances) {
        out << instance_to_json(inst).dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<Instance> read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset file: " + path);
    std::vector<Instance> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError("schema violation in " + path + ":" + std::to_string(lineno) +
                                  ": " + e.what());
        }
        out.push_back(instance_from_json(j, path + ":" + std::to_string(lineno)));
    }
    return out;
}

// ── SynthConfig JSON ─────────────────────────────────────────────────

inline void from_json_into(const json& j, SynthConfig& cfg) {
    if (auto it = j.find("d"); it != j.end()) cfg.d = it->get<int>();
    if (auto it = j.find("n_train"); it != j.end()) cfg.n_train = it->get<int>();
    if (auto it = j.find("n_val"); it != j.end()) cfg.n_val = it->get<int>();
    if (auto it = j.find("n_test"); it != j.end()) cfg.n_test = it->get<int>();
    if (auto it = j.find("falsified_fraction"); it != j.end()) {
        cfg.falsified_fraction = it->get<double>();
    }
    if (auto it = j.find("culprits_per_falsified"); it != j.end()) {
        cfg.culprits_per_falsified = it->get<int>();
    }
    if (auto it = j.find("phrase_count_range"); it != j.end()) {
        cfg.phrase_count_range = it->get<std::array<int, 2>>();
    }
    if (auto it = j.find("scene_noise_sigma"); it != j.end()) {
        cfg.scene_noise_sigma = it->get<double>();
    }
    if (auto it = j.find("seed"); it != j.end()) cfg.seed = it->get<uint64_t>();
}

inline json to_json(const SynthConfig& cfg) {
    return json{{"d", cfg.d},
                {"n_train", cfg.n_train},
                {"n_val", cfg.n_val},
                {"n_test", cfg.n_test},
                {"falsified_fraction", cfg.falsified_fraction},
                {"culprits_per_falsified", cfg.culprits_per_falsified},
                {"phrase_count_range", cfg.phrase_count_range},
                {"scene_noise_sigma", cfg.scene_noise_sigma},
                {"seed", cfg.seed}};
}

}  // namespace logran
