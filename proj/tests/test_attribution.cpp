#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "tracelab/attribution.hpp"

using namespace tracelab::attribution;
using tracelab::judge::Segment;
using tracelab::judge::SegmentList;

namespace {

// exhaustive one-to-one mapping maximum, rows = predicted, cols = true
std::int64_t brute_force_agreement(const std::vector<std::vector<std::int64_t>>& counts) {
    std::size_t P = counts.size(), T = counts.front().size();
    std::vector<int> cols(T);
    std::iota(cols.begin(), cols.end(), 0);
    std::int64_t best = 0;
    if (P <= T) {
        std::sort(cols.begin(), cols.end());
        do {
            std::int64_t sum = 0;
            for (std::size_t r = 0; r < P; ++r) sum += counts[r][static_cast<std::size_t>(cols[r])];
            best = std::max(best, sum);
        } while (std::next_permutation(cols.begin(), cols.end()));
    } else {
        std::vector<int> rows(P);
        std::iota(rows.begin(), rows.end(), 0);
        do {
            std::int64_t sum = 0;
            for (std::size_t c = 0; c < T; ++c) sum += counts[static_cast<std::size_t>(rows[c])][c];
            best = std::max(best, sum);
        } while (std::next_permutation(rows.begin(), rows.end()));
    }
    return best;
}

ConfusionMatrix make_cm(std::vector<std::vector<std::int64_t>> counts) {
    ConfusionMatrix cm;
    cm.counts = std::move(counts);
    for (std::size_t i = 0; i < cm.counts.size(); ++i)
        cm.predicted_ids.push_back(static_cast<int>(i) + 1);
    for (std::size_t j = 0; j < cm.counts.front().size(); ++j)
        cm.true_ids.push_back(static_cast<int>(j) + 1);
    return cm;
}

}  // namespace

TEST_CASE("hungarian match on diagonal and anti-diagonal matrices") {
    auto diag = hungarian_match(make_cm({{5, 0}, {0, 7}}));
    CHECK(diag.agreement == 12);
    REQUIRE(diag.mapping.size() == 2);
    CHECK(diag.mapping[0].predicted_id == 1);
    CHECK(diag.mapping[0].true_id == 1);
    CHECK(diag.mapping[1].predicted_id == 2);
    CHECK(diag.mapping[1].true_id == 2);

    auto swap = hungarian_match(make_cm({{0, 5}, {7, 0}}));
    CHECK(swap.agreement == 12);
    CHECK(swap.mapping[0].true_id == 2);
    CHECK(swap.mapping[1].true_id == 1);
}

TEST_CASE("hungarian match 3x3 example agrees with brute force") {
    // truth [1,1,2,2,3], predicted [1,2,2,3,3]
    std::vector<int> truth{1, 1, 2, 2, 3};
    std::vector<int> pred{1, 2, 2, 3, 3};
    auto cm = confusion_matrix(truth, pred);
    auto match = hungarian_match(cm);
    CHECK(match.agreement == 3);
    CHECK(match.agreement == brute_force_agreement(cm.counts));
    CHECK(speaker_accuracy(truth, pred) == doctest::Approx(0.6));
}

TEST_CASE("tie-break picks the lowest predicted then lowest true id") {
    // both mappings achieve 2; identity is lexicographically first
    auto tied = hungarian_match(make_cm({{1, 1}, {1, 1}}));
    CHECK(tied.agreement == 2);
    CHECK(tied.mapping[0].predicted_id == 1);
    CHECK(tied.mapping[0].true_id == 1);
    CHECK(tied.mapping[1].true_id == 2);
}

TEST_CASE("rectangular matrices map min(P,T) pairs") {
    // more predicted than true speakers
    auto wide = hungarian_match(make_cm({{4, 0}, {5, 1}, {0, 3}}));
    CHECK(wide.mapping.size() == 2);
    CHECK(wide.agreement == brute_force_agreement({{4, 0}, {5, 1}, {0, 3}}));

    // more true than predicted
    auto tall = hungarian_match(make_cm({{2, 9, 4}}));
    CHECK(tall.mapping.size() == 1);
    CHECK(tall.agreement == 9);
    CHECK(tall.mapping[0].true_id == 2);
}

TEST_CASE("hungarian equals exhaustive search on random matrices up to 6x6") {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> dim(1, 6);
    std::uniform_int_distribution<std::int64_t> count(0, 30);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t P = static_cast<std::size_t>(dim(rng)), T = static_cast<std::size_t>(dim(rng));
        std::vector<std::vector<std::int64_t>> counts(P, std::vector<std::int64_t>(T));
        for (auto& row : counts)
            for (auto& c : row) c = count(rng);
        auto match = hungarian_match(make_cm(counts));
        CHECK(match.agreement == brute_force_agreement(counts));
        CHECK(match.mapping.size() == std::min(P, T));
        // mapping is one-to-one and sums to the reported agreement
        std::int64_t sum = 0;
        std::set<int> used_pred, used_true;
        for (const auto& pair : match.mapping) {
            sum += pair.count;
            CHECK(used_pred.insert(pair.predicted_id).second);
            CHECK(used_true.insert(pair.true_id).second);
        }
        CHECK(sum == match.agreement);
    }
}

TEST_CASE("speaker accuracy is invariant under predicted relabeling") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> n_speakers(1, 5);
    std::uniform_int_distribution<int> length(5, 60);
    for (int trial = 0; trial < 1000; ++trial) {
        int S = n_speakers(rng);
        int L = length(rng);
        std::uniform_int_distribution<int> label(1, S);
        std::vector<int> truth, pred;
        for (int i = 0; i < L; ++i) {
            truth.push_back(label(rng));
            pred.push_back(label(rng));
        }
        double base = speaker_accuracy(truth, pred);
        // random permutation of predicted label names
        std::vector<int> perm(static_cast<std::size_t>(S));
        std::iota(perm.begin(), perm.end(), 1);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> renamed;
        for (int p : pred) renamed.push_back(perm[static_cast<std::size_t>(p - 1)]);
        CHECK(speaker_accuracy(truth, renamed) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("speaker accuracy fixtures") {
    std::vector<int> truth{1, 2, 1, 2, 1};
    CHECK(speaker_accuracy(truth, truth) == doctest::Approx(1.0));
    std::vector<int> swapped{2, 1, 2, 1, 2};
    CHECK(speaker_accuracy(truth, swapped) == doctest::Approx(1.0));
    std::vector<int> shorter{1, 2};
    CHECK_THROWS_AS(speaker_accuracy(truth, shorter), std::invalid_argument);
}

TEST_CASE("optimal mapping never loses to a fixed mapping") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> label(1, 4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> truth, pred;
        for (int i = 0; i < 40; ++i) {
            truth.push_back(label(rng));
            pred.push_back(label(rng));
        }
        double optimal = speaker_accuracy(truth, pred);
        // identity mapping accuracy
        int hits = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i];
        CHECK(optimal >= static_cast<double>(hits) / static_cast<double>(truth.size()) - 1e-12);
    }
}

TEST_CASE("segment alignment labels contiguous word runs") {
    std::string text = "First, we compute the total. Wait a second, that is wrong. Agreed, fixed.";
    SegmentList segs;
    segs.segments.push_back({1, "First, we compute"});
    segs.segments.push_back({2, "Wait a second,"});
    segs.segments.push_back({1, "Agreed, fixed."});
    auto res = align_segments(text, segs);
    CHECK(res.unresolved_segments.empty());
    REQUIRE(res.labeling.size() == res.token_count);  // full coverage from word 0
    CHECK(res.labeling.front().label == 1);
    // words: "First," .. "total." = 5 words for segment 1
    CHECK(res.labeling[4].label == 1);
    CHECK(res.labeling[5].label == 2);
    CHECK(res.labeling.back().label == 1);
    // indices strictly increasing
    for (std::size_t i = 1; i < res.labeling.size(); ++i)
        CHECK(res.labeling[i].token_index == res.labeling[i - 1].token_index + 1);
}

TEST_CASE("segment alignment normalizes whitespace") {
    std::string text = "alpha beta gamma delta";
    SegmentList segs;
    segs.segments.push_back({1, "alpha   beta"});  // doubled spaces in the judge output
    segs.segments.push_back({2, "gamma\ndelta"});
    auto res = align_segments(text, segs);
    CHECK(res.unresolved_segments.empty());
    CHECK(res.labeling[0].label == 1);
    CHECK(res.labeling[2].label == 2);
}

TEST_CASE("segment alignment flags unresolved starts and keeps going") {
    std::string text = "one two three four five six";
    SegmentList segs;
    segs.segments.push_back({1, "one two"});
    segs.segments.push_back({2, "absent words"});
    segs.segments.push_back({3, "five six"});
    auto res = align_segments(text, segs);
    REQUIRE(res.unresolved_segments.size() == 1);
    CHECK(res.unresolved_segments[0] == 1);
    CHECK(res.labeling.front().label == 1);
    CHECK(res.labeling.back().label == 3);

    SegmentList hopeless;
    hopeless.segments.push_back({1, "missing"});
    hopeless.segments.push_back({2, "also missing"});
    hopeless.segments.push_back({3, "one two"});
    CHECK_THROWS_AS(align_segments(text, hopeless), std::runtime_error);
}

TEST_CASE("tokens before the first match stay unlabeled") {
    std::string text = "preamble words here segment starts now";
    SegmentList segs;
    segs.segments.push_back({1, "segment starts"});
    auto res = align_segments(text, segs);
    REQUIRE_FALSE(res.labeling.empty());
    CHECK(res.labeling.front().token_index == 3);
    CHECK(res.labeling.size() == 3);
}

TEST_CASE("weighted accuracy") {
    std::vector<WeightedItem> equal{{0.82, 1}, {0.76, 1}, {0.69, 1}};
    CHECK(weighted_accuracy(equal) == doctest::Approx((0.82 + 0.76 + 0.69) / 3.0));
    std::vector<WeightedItem> single{{0.5, 2.5}};
    CHECK(weighted_accuracy(single) == doctest::Approx(0.5));
    std::vector<WeightedItem> zero_excluded{{0.9, 1}, {0.1, 0}};
    CHECK(weighted_accuracy(zero_excluded) == doctest::Approx(0.9));
    std::vector<WeightedItem> all_zero{{0.9, 0}};
    CHECK_THROWS_AS(weighted_accuracy(all_zero), std::invalid_argument);
    std::vector<WeightedItem> negative{{0.9, -1}};
    CHECK_THROWS_AS(weighted_accuracy(negative), std::invalid_argument);
}
