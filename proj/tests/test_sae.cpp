#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "tracelab/sae.hpp"

using namespace tracelab::sae;

TEST_CASE("conversation ratio is the fraction of scores >= 50") {
    std::vector<int> half{100, 0};
    CHECK(conversation_ratio(half) == doctest::Approx(0.5));
    std::vector<int> all(40, 100);
    CHECK(conversation_ratio(all) == doctest::Approx(1.0));
    std::vector<int> boundary{50, 49};
    CHECK(conversation_ratio(boundary) == doctest::Approx(0.5));
    CHECK_THROWS_AS(conversation_ratio(std::vector<int>{}), std::invalid_argument);
    CHECK_THROWS_AS(conversation_ratio(std::vector<int>{101}), std::invalid_argument);
}

TEST_CASE("synthetic 1000-context vector reproduces a 0.657 ratio") {
    std::vector<int> scores;
    for (int i = 0; i < 657; ++i) scores.push_back(50 + i % 51);
    for (int i = 0; i < 343; ++i) scores.push_back(i % 50);
    REQUIRE(scores.size() == 1000);
    CHECK(conversation_ratio(scores) == doctest::Approx(0.657));
}

TEST_CASE("onset ratio counts the first four tokens") {
    std::vector<std::int64_t> early{0, 1, 2, 3};
    CHECK(onset_ratio(early) == doctest::Approx(1.0));
    std::vector<std::int64_t> late{10, 20};
    CHECK(onset_ratio(late) == doctest::Approx(0.0));
    std::vector<std::int64_t> split{0, 5};
    CHECK(onset_ratio(split) == doctest::Approx(0.5));
    CHECK_THROWS_AS(onset_ratio(std::vector<std::int64_t>{}), std::invalid_argument);
    CHECK_THROWS_AS(onset_ratio(std::vector<std::int64_t>{-1}), std::invalid_argument);
}

TEST_CASE("feature classification thresholds at 50, labels independent") {
    auto p = classify_feature(75, 10);
    REQUIRE(p.size() == 1);
    CHECK(p[0] == FeatureLabel::Personality);
    auto e = classify_feature(10, 85);
    REQUIRE(e.size() == 1);
    CHECK(e[0] == FeatureLabel::Expertise);
    CHECK(classify_feature(49, 49).empty());
    CHECK(classify_feature(50, 50).size() == 2);
    CHECK_THROWS_AS(classify_feature(-1, 0), std::invalid_argument);
    CHECK_THROWS_AS(classify_feature(0, 101), std::invalid_argument);
}

namespace {

FeatureCatalog small_catalog() {
    FeatureCatalog c;
    c.features.push_back({30939, "surprise marker", 20, 10, 0.657, 0.6, 5.0, 0.00016});
    c.features.push_back({1, "low ratio", 0, 0, 0.2, 0.9, 1.0, 0.1});
    c.features.push_back({2, "high ratio", 0, 0, 0.8, 0.9, 2.0, 0.1});
    c.features.push_back({3, "late onset", 0, 0, 0.9, 0.1, 3.0, 0.1});
    return c;
}

}  // namespace

TEST_CASE("conversational feature selection") {
    auto catalog = small_catalog();
    auto curated = select_conversational(catalog, SelectionMode::Curated);
    CHECK(curated.count(30939) == 1);  // 0.657 > 0.5, onset 0.6 >= 0.5
    CHECK(curated.count(1) == 0);      // ratio 0.2
    CHECK(curated.count(2) == 1);
    CHECK(curated.count(3) == 0);  // onset below 0.5

    // mean ratio = (0.657 + 0.2 + 0.8 + 0.9)/4 = 0.63925
    auto pool = select_conversational(catalog, SelectionMode::RandomPool);
    CHECK(pool.count(2) == 1);      // 0.8 > mean, onset ok
    CHECK(pool.count(30939) == 1);  // 0.657 > mean, onset 0.6
    CHECK(pool.count(1) == 0);      // ratio below the mean
    CHECK(pool.count(3) == 0);      // onset

    auto nonconv = select_conversational(catalog, SelectionMode::NonConversationalPool);
    CHECK(nonconv.count(1) == 1);
    CHECK(nonconv.count(30939) == 0);  // above the mean
    CHECK(nonconv.count(2) == 0);

    // curated selections never include ratios <= 0.5
    for (int f : curated) CHECK(catalog.by_id(f).conversation_ratio > 0.5);

    FeatureCatalog zeros;
    zeros.features.push_back({1, "", 0, 0, 0.0, 1.0, 1.0, 0.0});
    zeros.features.push_back({2, "", 0, 0, 0.0, 1.0, 1.0, 0.0});
    CHECK(select_conversational(zeros, SelectionMode::Curated).empty());

    FeatureCatalog two;
    two.features.push_back({1, "", 0, 0, 0.2, 1.0, 1.0, 0.0});
    two.features.push_back({2, "", 0, 0, 0.8, 1.0, 1.0, 0.0});
    auto rp = select_conversational(two, SelectionMode::RandomPool);
    REQUIRE(rp.size() == 1);
    CHECK(rp.count(2) == 1);
}

namespace {

FeatureActivationMatrix matrix_from_counts(const std::vector<std::pair<int, int>>& feature_tokens) {
    // feature_tokens: (feature_id, number of activating tokens)
    FeatureActivationMatrix m;
    std::int64_t token = 0;
    for (auto [f, n] : feature_tokens)
        for (int i = 0; i < n; ++i) m.triplets.push_back({token++, f, 1.0});
    m.token_count = token;
    return m;
}

}  // namespace

TEST_CASE("coverage counts distinct activated features in the category") {
    auto m = matrix_from_counts({{3, 1}, {7, 2}});
    std::unordered_set<int> category{3, 7, 9};
    CHECK(coverage(m, category) == 2);

    FeatureActivationMatrix empty;
    empty.token_count = 0;
    CHECK(coverage(empty, category) == 0);

    auto repeated = matrix_from_counts({{3, 3}});
    CHECK(coverage(repeated, {3}) == 1);
    CHECK(coverage(repeated, {4}) == 0);
}

TEST_CASE("coverage is monotone under adding activations") {
    std::mt19937_64 rng(5150);
    std::uniform_int_distribution<int> fid(0, 30);
    std::unordered_set<int> category;
    for (int f = 0; f <= 30; f += 3) category.insert(f);
    FeatureActivationMatrix m;
    m.token_count = 1000;
    std::int64_t prev = 0;
    std::int64_t token = 0;
    for (int step = 0; step < 200; ++step) {
        m.triplets.push_back({token++, fid(rng), 1.0});
        std::int64_t cov = coverage(m, category);
        CHECK(cov >= prev);
        prev = cov;
    }
}

TEST_CASE("normalized entropy fixtures") {
    // four features, five tokens each -> uniform over 4
    auto uniform = matrix_from_counts({{1, 5}, {2, 5}, {3, 5}, {4, 5}});
    std::unordered_set<int> cat{1, 2, 3, 4};
    CHECK(entropy(uniform, cat, true) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    auto point = matrix_from_counts({{1, 9}});
    CHECK(entropy(point, {1}, true) == doctest::Approx(0.0));

    // counts {2,1,1}: -(0.5 ln 0.5 + 2 * 0.25 ln 0.25), evaluated directly
    auto skew = matrix_from_counts({{1, 2}, {2, 1}, {3, 1}});
    double expected = -(0.5 * std::log(0.5) + 2 * 0.25 * std::log(0.25));
    CHECK(entropy(skew, {1, 2, 3}, true) == doctest::Approx(expected).epsilon(1e-12));

    FeatureActivationMatrix none;
    none.token_count = 0;
    CHECK(entropy(none, cat, true) == doctest::Approx(0.0));
    CHECK(entropy(none, cat, false) == doctest::Approx(0.0));
}

TEST_CASE("raw entropy matches -sum a ln a and is not scale-invariant") {
    auto m = matrix_from_counts({{1, 2}, {2, 3}});
    double raw = entropy(m, {1, 2}, false);
    CHECK(raw == doctest::Approx(-(2 * std::log(2.0) + 3 * std::log(3.0))).epsilon(1e-12));
    auto doubled = matrix_from_counts({{1, 4}, {2, 6}});
    CHECK(entropy(doubled, {1, 2}, false) != doctest::Approx(raw));
}

TEST_CASE("normalized entropy is invariant under count scaling and bounded by ln coverage") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> n_features(1, 8);
    std::uniform_int_distribution<int> count(1, 9);
    std::uniform_int_distribution<int> multiplier(2, 5);
    for (int trial = 0; trial < 300; ++trial) {
        int nf = n_features(rng);
        std::vector<std::pair<int, int>> spec1, spec2;
        int mult = multiplier(rng);
        bool uniform = true;
        int first = -1;
        std::unordered_set<int> cat;
        for (int f = 0; f < nf; ++f) {
            int c = count(rng);
            if (first < 0) first = c;
            uniform &= (c == first);
            spec1.push_back({f, c});
            spec2.push_back({f, c * mult});
            cat.insert(f);
        }
        auto m1 = matrix_from_counts(spec1);
        auto m2 = matrix_from_counts(spec2);
        double h1 = entropy(m1, cat, true);
        double h2 = entropy(m2, cat, true);
        CHECK(h1 == doctest::Approx(h2).epsilon(1e-12));
        double bound = std::log(static_cast<double>(coverage(m1, cat)));
        CHECK(h1 <= bound + 1e-12);
        if (uniform) CHECK(h1 == doctest::Approx(bound).epsilon(1e-12));
        if (h1 == doctest::Approx(bound).epsilon(1e-12)) CHECK(uniform);
    }
}

TEST_CASE("default strength doubles the recorded maximum activation") {
    FeatureInfo f;
    f.max_activation = 7.5;
    CHECK(default_strength(f) == doctest::Approx(15.0));
    f.max_activation = 5.0;
    CHECK(default_strength(f) == doctest::Approx(10.0));  // the +/-10 grid for a max of 5
    f.max_activation = 0.0;
    CHECK_THROWS_AS(default_strength(f), std::domain_error);
}

TEST_CASE("steering arithmetic") {
    SteeringConfig cfg{42, 10.0, {0.0, 1.0}};
    std::vector<double> h{1.0, 0.0};
    auto steered = apply_steering(h, cfg);
    CHECK(steered[0] == doctest::Approx(1.0));
    CHECK(steered[1] == doctest::Approx(10.0));
    CHECK(h[0] == 1.0);  // input untouched
    CHECK(h[1] == 0.0);

    cfg.strength = 0.0;
    auto same = apply_steering(h, cfg);
    CHECK(same == h);

    SteeringConfig bad{1, 1.0, {1.0, 2.0, 3.0}};
    CHECK_THROWS_AS(apply_steering(h, bad), std::invalid_argument);
}

TEST_CASE("steering is additive in strength and inverts exactly") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t dim = 1 + trial % 16;
        std::vector<double> h(dim), d(dim);
        for (auto& v : h) v = u(rng);
        for (auto& v : d) v = u(rng);
        double s1 = u(rng), s2 = u(rng);
        auto once = apply_steering(apply_steering(h, {0, s1, d}), {0, s2, d});
        auto combined = apply_steering(h, {0, s1 + s2, d});
        auto back = apply_steering(apply_steering(h, {0, s1, d}), {0, -s1, d});
        for (std::size_t i = 0; i < dim; ++i) {
            CHECK(once[i] == doctest::Approx(combined[i]).epsilon(1e-12));
            CHECK(back[i] == doctest::Approx(h[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("activation and catalog files round trip") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path();

    auto act_path = dir / "tracelab_acts.tsv";
    {
        std::ofstream out(act_path, std::ios::trunc);
        out << "#token_count=10 sentence_starts=0,4,8\n";
        out << "token_index\tfeature_id\tactivation\n";
        out << "0\t3\t1.5\n2\t7\t0.25\n5\t3\t2.0\n";
    }
    auto m = load_activations(act_path);
    CHECK(m.token_count == 10);
    REQUIRE(m.triplets.size() == 3);
    CHECK(m.offset_within_sentence(0) == 0);
    CHECK(m.offset_within_sentence(5) == 1);
    CHECK(m.offset_within_sentence(9) == 1);
    CHECK(coverage(m, {3, 7}) == 2);

    auto bad_path = dir / "tracelab_acts_bad.tsv";
    {
        std::ofstream out(bad_path, std::ios::trunc);
        out << "#token_count=2\n0\t1\t1.0\n0\t1\t2.0\n";  // duplicate pair
    }
    CHECK_THROWS_AS(load_activations(bad_path), std::invalid_argument);

    auto cat_path = dir / "tracelab_catalog.tsv";
    {
        std::ofstream out(cat_path, std::ios::trunc);
        out << "feature_id\tdescription\tpersonality_score\texpertise_score\t"
               "conversation_ratio\tonset_ratio\tmax_activation\tsparsity\n";
        out << "30939\tsurprise marker\t20\t10\t0.657\t0.6\t5.0\t0.00016\n";
        out << "7\tmath ops\t5\t85\t0.3\t0.4\t2.5\t0.01\n";
    }
    auto catalog = load_catalog(cat_path);
    REQUIRE(catalog.features.size() == 2);
    CHECK(catalog.by_id(30939).conversation_ratio == doctest::Approx(0.657));
    CHECK(catalog.by_id(7).expertise_score == 85);
    CHECK_THROWS_AS(catalog.by_id(12345), std::out_of_range);
}
