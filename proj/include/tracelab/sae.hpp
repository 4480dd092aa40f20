#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tracelab/util.hpp"

namespace tracelab::sae {

struct FeatureInfo {
    int feature_id = 0;
    std::string description;
    int personality_score = 0;   // 0..100
    int expertise_score = 0;     // 0..100
    double conversation_ratio = 0.0;
    double onset_ratio = 0.0;
    double max_activation = 0.0;
    double sparsity = 0.0;
};

struct FeatureCatalog {
    std::vector<FeatureInfo> features;

    const FeatureInfo& by_id(int feature_id) const {
        for (const auto& f : features)
            if (f.feature_id == feature_id) return f;
        throw std::out_of_range("feature not in catalog: " + std::to_string(feature_id));
    }
};

struct ActivationTriplet {
    std::int64_t token_index = 0;
    int feature_id = 0;
    double activation = 0.0;  // > 0
};

/// Sparse token x feature activations for one trace.
struct FeatureActivationMatrix {
    std::int64_t token_count = 0;
    std::vector<std::int64_t> sentence_starts;  // ascending token offsets
    std::vector<ActivationTriplet> triplets;

    void validate() const {
        std::set<std::pair<std::int64_t, int>> seen;
        for (const auto& t : triplets) {
            if (t.token_index < 0 || t.token_index >= token_count)
                throw std::invalid_argument("activation token_index out of range");
            if (!(t.activation > 0.0))
                throw std::invalid_argument("activation values must be positive");
            if (!seen.emplace(t.token_index, t.feature_id).second)
                throw std::invalid_argument("duplicate (token, feature) activation");
        }
    }

    /// Token offset within its sentence (0 = sentence-initial). Sentence
    /// boundaries are supplied with the matrix, never inferred here.
    std::int64_t offset_within_sentence(std::int64_t token_index) const {
        std::int64_t start = 0;
        for (std::int64_t s : sentence_starts) {
            if (s <= token_index) start = s;
            else break;
        }
        return token_index - start;
    }
};

/// Fraction of activation contexts judged conversational (score >= 50).
inline double conversation_ratio(std::span<const int> context_scores) {
    if (context_scores.empty()) throw std::invalid_argument("conversation_ratio: no scores");
    std::size_t conversational = 0;
    for (int s : context_scores) {
        if (s < 0 || s > 100) throw std::invalid_argument("context score outside 0..100");
        conversational += s >= 50;
    }
    return static_cast<double>(conversational) / static_cast<double>(context_scores.size());
}

/// Fraction of activations within the first four tokens of their sentence.
inline double onset_ratio(std::span<const std::int64_t> activation_offsets) {
    if (activation_offsets.empty()) throw std::invalid_argument("onset_ratio: no offsets");
    std::size_t early = 0;
    for (std::int64_t o : activation_offsets) {
        if (o < 0) throw std::invalid_argument("sentence offset must be >= 0");
        early += o <= 3;
    }
    return static_cast<double>(early) / static_cast<double>(activation_offsets.size());
}

enum class FeatureLabel { Personality, Expertise };

/// Personality and expertise labels are independent thresholds at 50; a
/// feature may carry both or neither.
inline std::vector<FeatureLabel> classify_feature(int personality_score, int expertise_score) {
    if (personality_score < 0 || personality_score > 100 || expertise_score < 0 ||
        expertise_score > 100)
        throw std::invalid_argument("classify_feature: scores must be 0..100");
    std::vector<FeatureLabel> labels;
    if (personality_score >= 50) labels.push_back(FeatureLabel::Personality);
    if (expertise_score >= 50) labels.push_back(FeatureLabel::Expertise);
    return labels;
}

enum class SelectionMode { Curated, RandomPool, NonConversationalPool };

/// Curated: ratio > 0.5 and onset >= 0.5. RandomPool: ratio above the corpus
/// mean and onset >= 0.5. NonConversationalPool: ratio below the corpus mean.
inline std::unordered_set<int> select_conversational(const FeatureCatalog& catalog,
                                                     SelectionMode mode) {
    if (catalog.features.empty()) throw std::invalid_argument("select_conversational: empty catalog");
    double mean_ratio = 0.0;
    for (const auto& f : catalog.features)
        mean_ratio += f.conversation_ratio / static_cast<double>(catalog.features.size());
    std::unordered_set<int> out;
    for (const auto& f : catalog.features) {
        bool keep = false;
        switch (mode) {
            case SelectionMode::Curated:
                keep = f.conversation_ratio > 0.5 && f.onset_ratio >= 0.5;
                break;
            case SelectionMode::RandomPool:
                keep = f.conversation_ratio > mean_ratio && f.onset_ratio >= 0.5;
                break;
            case SelectionMode::NonConversationalPool:
                keep = f.conversation_ratio < mean_ratio;
                break;
        }
        if (keep) out.insert(f.feature_id);
    }
    return out;
}

/// Number of distinct category features with at least one activation.
inline std::int64_t coverage(const FeatureActivationMatrix& matrix,
                             const std::unordered_set<int>& category) {
    std::unordered_set<int> seen;
    for (const auto& t : matrix.triplets)
        if (category.count(t.feature_id)) seen.insert(t.feature_id);
    return static_cast<std::int64_t>(seen.size());
}

/// Activating-token counts per category feature.
inline std::unordered_map<int, std::int64_t> activation_counts(
    const FeatureActivationMatrix& matrix, const std::unordered_set<int>& category) {
    std::unordered_map<int, std::int64_t> counts;
    for (const auto& t : matrix.triplets)
        if (category.count(t.feature_id)) ++counts[t.feature_id];
    return counts;
}

/// Evenness of activation mass across category features. The normalized form
/// is -sum p_f ln p_f over p_f = a_f / sum a; it is invariant under scaling
/// every count by the same factor. The raw form -sum a_f ln a_f is kept for
/// literal replication and is not scale-invariant. Empty activation -> 0.
inline double entropy(const FeatureActivationMatrix& matrix,
                      const std::unordered_set<int>& category, bool normalized = true) {
    auto counts = activation_counts(matrix, category);
    if (counts.empty()) return 0.0;
    if (normalized) {
        double total = 0.0;
        for (const auto& [f, a] : counts) total += static_cast<double>(a);
        double h = 0.0;
        for (const auto& [f, a] : counts) {
            double p = static_cast<double>(a) / total;
            h -= p * std::log(p);
        }
        return h;
    }
    double h = 0.0;
    for (const auto& [f, a] : counts) {
        double af = static_cast<double>(a);
        h -= af * std::log(af);
    }
    return h;
}

struct SteeringConfig {
    int feature_id = 0;
    double strength = 0.0;         // may be negative
    std::vector<double> decoder;   // residual-width direction
};

/// Steering strength for an experiment condition: twice the feature's
/// maximum observed activation.
inline double default_strength(const FeatureInfo& feature) {
    if (!(feature.max_activation > 0.0))
        throw std::domain_error("default_strength: max_activation must be positive");
    return 2.0 * feature.max_activation;
}

/// h' = h + s * d, elementwise; the input is left unmodified.
inline std::vector<double> apply_steering(std::span<const double> h, const SteeringConfig& config) {
    if (h.size() != config.decoder.size())
        throw std::invalid_argument("apply_steering: dimension mismatch");
    std::vector<double> out(h.begin(), h.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += config.strength * config.decoder[i];
    return out;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Catalog file: TSV with a header row naming the FeatureInfo fields.
inline FeatureCatalog load_catalog(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open catalog: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("catalog is empty: " + path.string());
    auto header = split(line, '\t');
    auto col = [&](std::string_view name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("catalog missing column: " + std::string(name));
    };
    std::size_t c_id = col("feature_id"), c_desc = col("description"),
                c_pers = col("personality_score"), c_exp = col("expertise_score"),
                c_conv = col("conversation_ratio"), c_onset = col("onset_ratio"),
                c_max = col("max_activation"), c_sparse = col("sparsity");
    FeatureCatalog catalog;
    std::unordered_set<int> ids;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto f = split(line, '\t');
        if (f.size() != header.size())
            throw std::runtime_error("catalog row has wrong arity: " + line);
        FeatureInfo info;
        info.feature_id = std::stoi(f[c_id]);
        info.description = f[c_desc];
        info.personality_score = std::stoi(f[c_pers]);
        info.expertise_score = std::stoi(f[c_exp]);
        info.conversation_ratio = std::stod(f[c_conv]);
        info.onset_ratio = std::stod(f[c_onset]);
        info.max_activation = std::stod(f[c_max]);
        info.sparsity = std::stod(f[c_sparse]);
        if (!ids.insert(info.feature_id).second)
            throw std::runtime_error("duplicate feature_id in catalog: " + f[c_id]);
        catalog.features.push_back(std::move(info));
    }
    return catalog;
}

/// Activation file: '#' header lines carrying token_count and sentence
/// starts, then TSV triplets (token_index, feature_id, activation).
inline FeatureActivationMatrix load_activations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open activations: " + path.string());
    FeatureActivationMatrix m;
    bool have_token_count = false;
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            for (const auto& field : split(t.substr(1), ' ')) {
                auto kv = split(field, '=');
                if (kv.size() != 2) continue;
                if (kv[0] == "token_count") {
                    m.token_count = std::stoll(kv[1]);
                    have_token_count = true;
                } else if (kv[0] == "sentence_starts" && !kv[1].empty()) {
                    for (const auto& s : split(kv[1], ','))
                        m.sentence_starts.push_back(std::stoll(s));
                }
            }
            continue;
        }
        if (t.rfind("token_index", 0) == 0) continue;  // column header
        auto f = split(t, '\t');
        if (f.size() != 3) throw std::runtime_error("bad activation row: " + line);
        m.triplets.push_back({std::stoll(f[0]), std::stoi(f[1]), std::stod(f[2])});
    }
    if (!have_token_count) throw std::runtime_error("activation file missing token_count header");
    std::sort(m.sentence_starts.begin(), m.sentence_starts.end());
    m.validate();
    return m;
}

}  // namespace tracelab::sae
