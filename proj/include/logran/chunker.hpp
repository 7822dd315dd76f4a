#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "logran/common.hpp"

namespace logran {

enum class PhraseKind : int { NE = 0, NP = 1, VP = 2, ADJ = 3 };

inline std::string to_string(PhraseKind k) {
    switch (k) {
        case PhraseKind::NE: return "NE";
        case PhraseKind::NP: return "NP";
        case PhraseKind::VP: return "VP";
        case PhraseKind::ADJ: return "ADJ";
    }
    throw ValidationError("unknown PhraseKind");
}

inline PhraseKind phrase_kind_from_string(const std::string& s) {
    if (s == "NE") return PhraseKind::NE;
    if (s == "NP") return PhraseKind::NP;
    if (s == "VP") return PhraseKind::VP;
    if (s == "ADJ") return PhraseKind::ADJ;
    throw ValidationError("unknown phrase kind \"" + s + "\"");
}

// A contiguous caption slice. Offsets are byte offsets into the UTF-8
// caption (identical to character offsets for ASCII text); end is
// exclusive and text must equal caption[start, end).
struct PhraseSpan {
    std::string text;
    size_t start = 0;
    size_t end = 0;
    PhraseKind kind = PhraseKind::NP;

    bool operator==(const PhraseSpan&) const = default;
};

struct PhraseSet {
    std::vector<PhraseSpan> phrases;  // non-overlapping, sorted by start
    std::string source_caption;
};

// Word lists driving the rule chunker. File format: one token per line,
// grouped under "[verbs]", "[adjectives]", "[determiners]", "[stopwords]"
// section headers; '#' starts a comment line.
class ChunkLexicon {
public:
    bool is_verb(const std::string& lower) const { return verbs_.count(lower) > 0; }
    bool is_adjective(const std::string& lower) const { return adjectives_.count(lower) > 0; }
    bool is_determiner(const std::string& lower) const { return determiners_.count(lower) > 0; }
    bool is_stopword(const std::string& lower) const { return stopwords_.count(lower) > 0; }

    // True when the token appears in any list.
    bool listed(const std::string& lower) const {
        return is_verb(lower) || is_adjective(lower) || is_determiner(lower) ||
               is_stopword(lower);
    }

    static ChunkLexicon parse(std::istream& in) {
        ChunkLexicon lex;
        std::unordered_set<std::string>* current = nullptr;
        std::string line;
        while (std::getline(in, line)) {
            // Tolerate CRLF input.
            if (!line.empty() && line.back() == '\r') line.pop_back();
            std::string t = trim(line);
            if (t.empty() || t[0] == '#') continue;
            if (t == "[verbs]") {
                current = &lex.verbs_;
            } else if (t == "[adjectives]") {
                current = &lex.adjectives_;
            } else if (t == "[determiners]") {
                current = &lex.determiners_;
            } else if (t == "[stopwords]") {
                current = &lex.stopwords_;
            } else if (t.front() == '[') {
                throw ValidationError("lexicon: unknown section header " + t);
            } else {
                if (current == nullptr) {
                    throw ValidationError("lexicon: token \"" + t + "\" before any section header");
                }
                current->insert(to_lower(t));
            }
        }
        return lex;
    }

    static ChunkLexicon load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open lexicon file: " + path);
        return parse(in);
    }

    // The bundled default lexicon (same content as data/lexicon.txt).
    static const ChunkLexicon& builtin();
    static std::string builtin_text();

    static std::string to_lower(std::string s) {
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    }

private:
    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t");
        if (a == std::string::npos) return "";
        size_t b = s.find_last_not_of(" \t");
        return s.substr(a, b - a + 1);
    }

    std::unordered_set<std::string> verbs_, adjectives_, determiners_, stopwords_;
};

inline std::string ChunkLexicon::builtin_text() {
    return R"([verbs]
arrive
carry
celebrate
cheer
dance
fight
gather
go
hold
jump
march
meet
perform
play
protest
race
ride
run
score
shout
sing
speak
stand
swim
throw
train
walk
watch
wave
win

[adjectives]
angolan
brazilian
bright
cloudy
colorful
crowded
dutch
egyptian
french
german
golden
happy
italian
jubilant
large
loud
mexican
old
polish
quiet
red
small
spanish
sunny
tunisian
young

[determiners]
a
an
each
every
her
his
its
no
our
several
some
that
the
their
these
this
those

[stopwords]
about
after
against
among
and
are
as
at
be
been
before
between
but
by
down
during
for
from
in
into
is
it
near
nor
of
on
or
over
so
than
then
there
through
to
under
until
up
was
were
while
with
yet
)";
}

inline const ChunkLexicon& ChunkLexicon::builtin() {
    static const ChunkLexicon lex = [] {
        std::istringstream in(builtin_text());
        return parse(in);
    }();
    return lex;
}

namespace detail {

struct Token {
    std::string text;   // punctuation-stripped surface form
    std::string lower;  // lowercased form used for lexicon lookup
    size_t start = 0;
    size_t end = 0;
    bool capitalized = false;
};

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_edge_punct(char c) {
    static const std::string punct = ".,;:!?'\"()[]{}";
    return punct.find(c) != std::string::npos;
}

inline std::vector<Token> tokenize(const std::string& caption) {
    std::vector<Token> out;
    size_t i = 0;
    const size_t n = caption.size();
    while (i < n) {
        while (i < n && is_ascii_space(caption[i])) ++i;
        if (i >= n) break;
        size_t j = i;
        while (j < n && !is_ascii_space(caption[j])) ++j;
        // Strip punctuation from the edges of the raw token.
        size_t a = i, b = j;
        while (a < b && is_edge_punct(caption[a])) ++a;
        while (b > a && is_edge_punct(caption[b - 1])) --b;
        if (a < b) {
            Token t;
            t.text = caption.substr(a, b - a);
            t.lower = ChunkLexicon::to_lower(t.text);
            t.start = a;
            t.end = b;
            t.capitalized = std::isupper(static_cast<unsigned char>(t.text[0])) != 0;
            out.push_back(std::move(t));
        }
        i = j;
    }
    return out;
}

}  // namespace detail

// Rule-based phrase extraction. Scans tokens left to right; each rule
// consumes the tokens it matches, so emitted spans never overlap:
//   NE : maximal run of capitalized tokens not listed in the lexicon
//        (a sentence-initial capitalized token qualifies only when the
//        following token is also NE-eligible);
//   VP : maximal run of verb-lexicon tokens;
//   NP : [determiner] adjectives ("and"-joined) followed by one or more
//        plain lowercase tokens; a matched prefix with no following
//        noun is emitted as ADJ when it contains adjectives.
// If nothing matches, the whole trimmed caption is one NP.
inline PhraseSet chunk(const std::string& caption, const ChunkLexicon& lex = ChunkLexicon::builtin()) {
    const auto tokens = detail::tokenize(caption);
    if (tokens.empty()) {
        throw ValidationError("chunk: caption is empty after trimming");
    }

    const size_t n = tokens.size();
    auto base_ne = [&](size_t i) {
        return tokens[i].capitalized && !lex.listed(tokens[i].lower);
    };
    auto ne_eligible = [&](size_t i) {
        if (!base_ne(i)) return false;
        if (i == 0) return n > 1 && base_ne(1);
        return true;
    };
    auto noun_like = [&](size_t i) {
        return !tokens[i].capitalized && !lex.listed(tokens[i].lower);
    };

    std::vector<PhraseSpan> spans;
    auto emit = [&](size_t first, size_t last, PhraseKind kind) {
        PhraseSpan s;
        s.start = tokens[first].start;
        s.end = tokens[last].end;
        s.text = caption.substr(s.start, s.end - s.start);
        s.kind = kind;
        spans.push_back(std::move(s));
    };

    size_t i = 0;
    while (i < n) {
        if (ne_eligible(i)) {
            size_t j = i;
            while (j + 1 < n && base_ne(j + 1)) ++j;
            emit(i, j, PhraseKind::NE);
            i = j + 1;
        } else if (lex.is_verb(tokens[i].lower)) {
            size_t j = i;
            while (j + 1 < n && lex.is_verb(tokens[j + 1].lower)) ++j;
            emit(i, j, PhraseKind::VP);
            i = j + 1;
        } else if (lex.is_determiner(tokens[i].lower) || lex.is_adjective(tokens[i].lower)) {
            size_t k = i;
            if (lex.is_determiner(tokens[k].lower)) ++k;
            size_t adj_first = k, adj_last = k;  // adjective group, if any
            size_t adj_count = 0;
            while (k < n) {
                if (lex.is_adjective(tokens[k].lower)) {
                    adj_last = k;
                    ++adj_count;
                    ++k;
                } else if (tokens[k].lower == "and" && k + 1 < n &&
                           lex.is_adjective(tokens[k + 1].lower) && adj_count > 0) {
                    ++k;  // conjunction inside the adjective group
                } else {
                    break;
                }
            }
            size_t noun_first = k;
            while (k < n && noun_like(k)) ++k;
            if (k > noun_first) {
                emit(i, k - 1, PhraseKind::NP);
                i = k;
            } else if (adj_count > 0) {
                emit(adj_first, adj_last, PhraseKind::ADJ);
                i = adj_last + 1;
            } else {
                ++i;  // lone determiner, nothing attached
            }
        } else {
            ++i;
        }
    }

    if (spans.empty()) {
        // Whole-caption fallback guarantees at least one phrase.
        PhraseSpan s;
        s.start = tokens.front().start;
        s.end = tokens.back().end;
        s.text = caption.substr(s.start, s.end - s.start);
        s.kind = PhraseKind::NP;
        spans.push_back(std::move(s));
    }

    return PhraseSet{std::move(spans), caption};
}

// Validate externally supplied spans (datasets may carry their own
// chunking) and wrap them unchanged. `where` names the record in errors.
inline PhraseSet load_prechunked(const std::string& caption, std::vector<PhraseSpan> spans,
                                 const std::string& where = "") {
    const std::string at = where.empty() ? "" : " in record " + where;
    if (spans.empty()) {
        throw ValidationError("prechunked phrases: empty span list" + at);
    }
    for (const PhraseSpan& s : spans) {
        if (s.start >= s.end || s.end > caption.size()) {
            throw ValidationError("span out of bounds [" + std::to_string(s.start) + ", " +
                                  std::to_string(s.end) + ") on caption of length " +
                                  std::to_string(caption.size()) + at);
        }
        if (caption.compare(s.start, s.end - s.start, s.text) != 0) {
            throw ValidationError("span text mismatch: \"" + s.text +
                                  "\" is not the caption slice at [" + std::to_string(s.start) +
                                  ", " + std::to_string(s.end) + ")" + at);
        }
    }
    for (size_t i = 1; i < spans.size(); ++i) {
        if (spans[i - 1].start > spans[i].start) {
            throw ValidationError("spans not sorted by start offset" + at);
        }
        if (spans[i - 1].end > spans[i].start) {
            throw ValidationError("overlapping spans at [" + std::to_string(spans[i - 1].start) +
                                  ", " + std::to_string(spans[i - 1].end) + ") and [" +
                                  std::to_string(spans[i].start) + ", " +
                                  std::to_string(spans[i].end) + ")" + at);
        }
    }
    return PhraseSet{std::move(spans), caption};
}

}  // namespace logran
