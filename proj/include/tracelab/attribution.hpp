#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tracelab/judge.hpp"
#include "tracelab/util.hpp"

namespace tracelab::attribution {

struct TokenLabel {
    std::size_t token_index = 0;
    int label = 0;  // positive perspective/speaker id
};

/// Strictly increasing token indices covering contiguous labeled runs.
using TokenLabeling = std::vector<TokenLabel>;

struct AlignResult {
    TokenLabeling labeling;
    std::vector<std::size_t> unresolved_segments;  // indices into the input list
    std::size_t token_count = 0;
};

/// Locates each segment's start_text in the trace by whitespace-normalized
/// exact matching (word-sequence equality), searching forward from the
/// previous segment's start. Unresolvable segments are flagged and skipped;
/// if more than half fail, the whole trace is rejected.
inline AlignResult align_segments(std::string_view trace_text, const judge::SegmentList& segments) {
    if (segments.segments.empty())
        throw std::invalid_argument("align_segments: empty segment list");
    std::vector<std::string_view> words = whitespace_tokens(trace_text);
    AlignResult out;
    out.token_count = words.size();

    auto find_words = [&](const std::vector<std::string_view>& needle, std::size_t from)
        -> std::size_t {
        if (needle.empty() || needle.size() > words.size()) return words.size();
        for (std::size_t w = from; w + needle.size() <= words.size(); ++w) {
            bool hit = true;
            for (std::size_t i = 0; i < needle.size(); ++i) {
                if (words[w + i] != needle[i]) {
                    hit = false;
                    break;
                }
            }
            if (hit) return w;
        }
        return words.size();
    };

    std::vector<std::pair<std::size_t, int>> starts;  // (word index, perspective)
    std::size_t search_from = 0;
    bool any_resolved = false;
    for (std::size_t s = 0; s < segments.segments.size(); ++s) {
        const auto& seg = segments.segments[s];
        auto needle = whitespace_tokens(seg.start_text);
        // first resolved segment may sit anywhere; later ones start strictly
        // after the previous start
        std::size_t from = any_resolved ? search_from + 1 : 0;
        std::size_t w = find_words(needle, from);
        if (w >= words.size()) {
            out.unresolved_segments.push_back(s);
            continue;
        }
        starts.emplace_back(w, seg.perspective_id);
        search_from = w;
        any_resolved = true;
    }
    if (out.unresolved_segments.size() * 2 > segments.segments.size())
        throw std::runtime_error("align_segments: more than half of the segments unresolved");

    for (std::size_t k = 0; k < starts.size(); ++k) {
        std::size_t begin = starts[k].first;
        std::size_t end = k + 1 < starts.size() ? starts[k + 1].first : words.size();
        for (std::size_t w = begin; w < end; ++w)
            out.labeling.push_back({w, starts[k].second});
    }
    return out;
}

/// counts[predicted][true]; row/col ids carry the original label values.
struct ConfusionMatrix {
    std::vector<int> predicted_ids;
    std::vector<int> true_ids;
    std::vector<std::vector<std::int64_t>> counts;

    std::int64_t total() const {
        std::int64_t t = 0;
        for (const auto& row : counts)
            for (std::int64_t c : row) t += c;
        return t;
    }
};

inline ConfusionMatrix confusion_matrix(std::span<const int> true_labels,
                                        std::span<const int> predicted_labels) {
    if (true_labels.size() != predicted_labels.size())
        throw std::invalid_argument("confusion_matrix: label vectors differ in length");
    if (true_labels.empty()) throw std::invalid_argument("confusion_matrix: no tokens");
    std::map<int, std::size_t> pred_index, true_index;
    for (int p : predicted_labels) pred_index.emplace(p, 0);
    for (int t : true_labels) true_index.emplace(t, 0);
    ConfusionMatrix cm;
    for (auto& [id, idx] : pred_index) {
        idx = cm.predicted_ids.size();
        cm.predicted_ids.push_back(id);
    }
    for (auto& [id, idx] : true_index) {
        idx = cm.true_ids.size();
        cm.true_ids.push_back(id);
    }
    cm.counts.assign(cm.predicted_ids.size(),
                     std::vector<std::int64_t>(cm.true_ids.size(), 0));
    for (std::size_t i = 0; i < true_labels.size(); ++i)
        ++cm.counts[pred_index[predicted_labels[i]]][true_index[true_labels[i]]];
    return cm;
}

namespace detail {

constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max() / 4;

/// Exact min-cost perfect assignment on a square integer matrix
/// (Jonker-Volgenant style shortest augmenting paths). Returns the total cost.
inline std::int64_t min_cost_assignment(const std::vector<std::vector<std::int64_t>>& cost,
                                        std::vector<int>* row_to_col = nullptr) {
    const int n = static_cast<int>(cost.size());
    std::vector<std::int64_t> u(static_cast<std::size_t>(n) + 1, 0),
        v(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<std::int64_t> minv(static_cast<std::size_t>(n) + 1, kInf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, false);
        do {
            used[static_cast<std::size_t>(j0)] = true;
            int i0 = p[static_cast<std::size_t>(j0)], j1 = 0;
            std::int64_t delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                std::int64_t cur = cost[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)]
                                   - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0);
    }
    std::int64_t total = 0;
    if (row_to_col) row_to_col->assign(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j) {
        int i = p[static_cast<std::size_t>(j)];
        if (i == 0) continue;
        total += cost[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)];
        if (row_to_col) (*row_to_col)[static_cast<std::size_t>(i - 1)] = j - 1;
    }
    return total;
}

/// Max total agreement over one-to-one assignments of a rectangular counts
/// matrix, with rows `rows` and cols `cols` (index subsets).
inline std::int64_t max_agreement(const std::vector<std::vector<std::int64_t>>& counts,
                                  const std::vector<int>& rows, const std::vector<int>& cols) {
    const int n = static_cast<int>(std::max(rows.size(), cols.size()));
    if (n == 0) return 0;
    std::vector<std::vector<std::int64_t>> cost(
        static_cast<std::size_t>(n), std::vector<std::int64_t>(static_cast<std::size_t>(n), 0));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            cost[r][c] = -counts[static_cast<std::size_t>(rows[r])][static_cast<std::size_t>(cols[c])];
    return -min_cost_assignment(cost);
}

}  // namespace detail

struct MatchedPair {
    int predicted_id = 0;
    int true_id = 0;
    std::int64_t count = 0;  // agreement carried by this pair
};

struct MatchResult {
    std::vector<MatchedPair> mapping;  // min(P, T) pairs, ordered by predicted id
    std::int64_t agreement = 0;
};

/// Maximum-agreement one-to-one matching of predicted to true ids, as a
/// min-cost assignment on negated counts padded square with zeros. Among
/// equally optimal assignments the lexicographically least one is returned
/// (lowest predicted id first, then lowest true id).
inline MatchResult hungarian_match(const ConfusionMatrix& cm) {
    const std::size_t P = cm.predicted_ids.size(), T = cm.true_ids.size();
    for (const auto& row : cm.counts)
        for (std::int64_t c : row)
            if (c < 0) throw std::invalid_argument("hungarian_match: negative count");

    std::vector<int> all_rows(P), all_cols(T);
    for (std::size_t i = 0; i < P; ++i) all_rows[i] = static_cast<int>(i);
    for (std::size_t j = 0; j < T; ++j) all_cols[j] = static_cast<int>(j);
    const std::int64_t optimum = detail::max_agreement(cm.counts, all_rows, all_cols);

    MatchResult out;
    out.agreement = optimum;
    std::vector<int> free_cols = all_cols;
    std::vector<int> remaining_rows = all_rows;
    std::int64_t fixed_sum = 0;
    for (std::size_t r = 0; r < P && out.mapping.size() < std::min(P, T); ++r) {
        remaining_rows.erase(remaining_rows.begin());
        bool fixed = false;
        // candidate true columns in ascending id order; leaving this row
        // unmapped is considered last (only possible when P > T)
        for (std::size_t ci = 0; ci < free_cols.size(); ++ci) {
            int c = free_cols[ci];
            std::int64_t take = cm.counts[r][static_cast<std::size_t>(c)];
            std::vector<int> rest_cols = free_cols;
            rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(ci));
            if (fixed_sum + take + detail::max_agreement(cm.counts, remaining_rows, rest_cols) ==
                optimum) {
                out.mapping.push_back({cm.predicted_ids[r], cm.true_ids[static_cast<std::size_t>(c)], take});
                fixed_sum += take;
                free_cols = std::move(rest_cols);
                fixed = true;
                break;
            }
        }
        if (!fixed) {
            // row left unmapped; optimality must still be attainable
            if (fixed_sum + detail::max_agreement(cm.counts, remaining_rows, free_cols) != optimum)
                throw std::logic_error("hungarian_match: inconsistent assignment state");
        }
    }
    return out;
}

/// Proportion of tokens assigned to the correct speaker under the optimal
/// predicted-to-true mapping. Invariant under renaming of predicted labels.
inline double speaker_accuracy(std::span<const int> true_labels,
                               std::span<const int> predicted_labels) {
    ConfusionMatrix cm = confusion_matrix(true_labels, predicted_labels);
    MatchResult match = hungarian_match(cm);
    return static_cast<double>(match.agreement) / static_cast<double>(cm.total());
}

struct WeightedItem {
    double accuracy = 0.0;
    double weight = 0.0;  // >= 0
};

inline double weighted_accuracy(std::span<const WeightedItem> items) {
    double num = 0.0, den = 0.0;
    for (const auto& it : items) {
        if (it.weight < 0) throw std::invalid_argument("weighted_accuracy: negative weight");
        num += it.accuracy * it.weight;
        den += it.weight;
    }
    if (den <= 0.0) throw std::invalid_argument("weighted_accuracy: zero total weight");
    return num / den;
}

}  // namespace tracelab::attribution
