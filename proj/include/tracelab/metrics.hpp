#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "tracelab/judge.hpp"

namespace tracelab::metrics {

using judge::Big5;
using judge::IpaCounts;

/// flag = (count >= threshold); default threshold 1 so single occurrences
/// register. The threshold is a knob because reported marginal cases differ
/// on whether "more than once" means >= 1 or >= 2.
inline bool presence(int count, int threshold = 1) {
    if (threshold < 1) throw std::invalid_argument("presence threshold must be >= 1");
    return count >= threshold;
}

struct BehaviorPresence {
    bool question_and_answering = false;
    bool perspective_shift = false;
    bool conflict_of_perspectives = false;
    bool reconciliation = false;
};

inline BehaviorPresence presence(const judge::BehaviorCounts& c, int threshold = 1) {
    return BehaviorPresence{
        presence(c.question_and_answering, threshold),
        presence(c.perspective_shift, threshold),
        presence(c.conflict_of_perspectives, threshold),
        presence(c.reconciliation, threshold),
    };
}

struct CognitivePresence {
    bool verification = false;
    bool backtracking = false;
    bool subgoal_setting = false;
    bool backward_chaining = false;
};

inline CognitivePresence presence(const judge::CognitiveCounts& c, int threshold = 1) {
    return CognitivePresence{
        presence(c.verification, threshold),
        presence(c.backtracking, threshold),
        presence(c.subgoal_setting, threshold),
        presence(c.backward_chaining, threshold),
    };
}

/// The twelve roles rolled up: ask = 7+8+9, give = 4+5+6, positive = 1+2+3,
/// negative = 10+11+12.
struct IpaCategoryCounts {
    int ask = 0;
    int give = 0;
    int positive = 0;
    int negative = 0;

    int total() const { return ask + give + positive + negative; }
};

inline IpaCategoryCounts ipa_categories(const IpaCounts& c) {
    IpaCategoryCounts out;
    out.positive = c.at(1) + c.at(2) + c.at(3);
    out.give = c.at(4) + c.at(5) + c.at(6);
    out.ask = c.at(7) + c.at(8) + c.at(9);
    out.negative = c.at(10) + c.at(11) + c.at(12);
    return out;
}

/// Corpus-level Jaccard index of two per-trace presence vectors:
/// |both| / |either|, 0 when the union is empty.
inline double jaccard_corpus(std::span<const bool> flags_a, std::span<const bool> flags_b) {
    if (flags_a.size() != flags_b.size())
        throw std::invalid_argument("jaccard_corpus: flag vectors differ in length");
    std::size_t both = 0, either = 0;
    for (std::size_t i = 0; i < flags_a.size(); ++i) {
        both += flags_a[i] && flags_b[i];
        either += flags_a[i] || flags_b[i];
    }
    return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

/// Per-trace role balance: 1 if both roles present, 0 if exactly one, absent
/// when neither (such traces drop out of per-trace regressions).
inline std::optional<int> cooccurrence_flag(bool flag_a, bool flag_b) {
    if (flag_a && flag_b) return 1;
    if (flag_a || flag_b) return 0;
    return std::nullopt;
}

/// Population standard deviation of each trait across personas. A single
/// persona has zero diversity by convention.
inline std::array<double, 5> personality_diversity(std::span<const Big5> personas) {
    if (personas.empty()) throw std::invalid_argument("personality_diversity: no personas");
    auto dims = [](const Big5& p) {
        return std::array<double, 5>{p.extraversion, p.agreeableness, p.conscientiousness,
                                     p.neuroticism, p.openness};
    };
    const double n = static_cast<double>(personas.size());
    std::array<double, 5> mean{};
    for (const Big5& p : personas) {
        auto d = dims(p);
        for (int j = 0; j < 5; ++j) mean[j] += d[j] / n;
    }
    std::array<double, 5> out{};
    for (const Big5& p : personas) {
        auto d = dims(p);
        for (int j = 0; j < 5; ++j) out[j] += (d[j] - mean[j]) * (d[j] - mean[j]) / n;
    }
    for (int j = 0; j < 5; ++j) out[j] = std::sqrt(out[j]);
    return out;
}

struct PersonaEmbedding {
    int persona_index = 0;
    std::vector<double> vec;
};

/// sqrt of the mean cosine distance between each embedding and the centroid.
/// Zero for a single voice; a vanishing centroid (exactly antipodal inputs)
/// is degenerate and rejected.
inline double expertise_diversity(std::span<const PersonaEmbedding> embeddings) {
    if (embeddings.empty()) throw std::invalid_argument("expertise_diversity: no embeddings");
    const std::size_t dim = embeddings.front().vec.size();
    for (const auto& e : embeddings)
        if (e.vec.size() != dim)
            throw std::invalid_argument("expertise_diversity: dimension mismatch");
    if (embeddings.size() == 1) return 0.0;
    std::vector<double> centroid(dim, 0.0);
    for (const auto& e : embeddings)
        for (std::size_t i = 0; i < dim; ++i)
            centroid[i] += e.vec[i] / static_cast<double>(embeddings.size());
    double centroid_norm = 0.0;
    for (double c : centroid) centroid_norm += c * c;
    centroid_norm = std::sqrt(centroid_norm);
    if (centroid_norm <= 0.0 || !std::isfinite(centroid_norm))
        throw std::domain_error("expertise_diversity: degenerate (zero) centroid");
    double acc = 0.0;
    for (const auto& e : embeddings) {
        double dot = 0.0, norm = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            dot += e.vec[i] * centroid[i];
            norm += e.vec[i] * e.vec[i];
        }
        norm = std::sqrt(norm);
        if (norm <= 0.0) throw std::invalid_argument("expertise_diversity: zero-norm embedding");
        acc += 1.0 - dot / (norm * centroid_norm);
    }
    double mean_dist = acc / static_cast<double>(embeddings.size());
    return std::sqrt(std::max(0.0, mean_dist));
}

/// Number of wrong answers among the four reference models on a problem.
inline int complexity_error_rate(std::span<const bool> correct_flags) {
    if (correct_flags.size() != 4)
        throw std::invalid_argument("complexity_error_rate: expected exactly four flags");
    int wrong = 0;
    for (bool c : correct_flags) wrong += !c;
    return wrong;
}

}  // namespace tracelab::metrics
