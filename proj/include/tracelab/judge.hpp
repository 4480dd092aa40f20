#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tracelab/prompts.hpp"
#include "tracelab/util.hpp"

namespace tracelab::judge {

using json = nlohmann::json;

struct ValidationError : std::runtime_error {
    ValidationError(const std::string& what_, std::string raw_)
        : std::runtime_error(what_), raw(std::move(raw_)) {}
    std::string raw;  // the offending response text
};

struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Typed annotations
// ---------------------------------------------------------------------------

struct BehaviorCounts {
    int question_and_answering = 0;
    int perspective_shift = 0;
    int conflict_of_perspectives = 0;
    int reconciliation = 0;

    bool operator==(const BehaviorCounts&) const = default;
};

inline constexpr std::array<std::string_view, 12> kIpaKeys = {
    "1_Shows_solidarity", "2_Shows_tension_release", "3_Agrees",
    "4_Gives_suggestion", "5_Gives_opinion",         "6_Gives_orientation",
    "7_Asks_for_orientation", "8_Asks_for_opinion",  "9_Asks_for_suggestion",
    "10_Disagrees",       "11_Shows_tension",        "12_Shows_antagonism"};

/// Twelve interaction-role counts, indexed by category number 1..12.
struct IpaCounts {
    std::array<int, 12> counts{};

    int at(int category) const { return counts.at(static_cast<std::size_t>(category - 1)); }
    int& at(int category) { return counts.at(static_cast<std::size_t>(category - 1)); }

    bool operator==(const IpaCounts&) const = default;
};

struct CognitiveCounts {
    int verification = 0;
    int backtracking = 0;
    int subgoal_setting = 0;
    int backward_chaining = 0;

    bool operator==(const CognitiveCounts&) const = default;
};

struct ComplexityRating {
    int difficulty = 0;  // 1..7

    bool operator==(const ComplexityRating&) const = default;
};

inline constexpr std::array<std::string_view, 5> kBfiAnswerOptions = {
    "Disagree strongly", "Disagree a little", "Neither agree nor disagree", "Agree a little",
    "Agree strongly"};

struct PersonaSet {
    int n_perspectives = 0;
    std::vector<std::array<std::string, 10>> bfi_answers;  // one row per persona
    std::vector<std::string> expertise;
};

struct Segment {
    int perspective_id = 0;  // 1-based
    std::string start_text;
};

struct SegmentList {
    std::vector<Segment> segments;
};

/// 0..100 answer used by the conversation-context and SAE scoring judges.
struct AnswerScore {
    int score = 0;

    bool operator==(const AnswerScore&) const = default;
};

using Annotation = std::variant<BehaviorCounts, IpaCounts, CognitiveCounts, ComplexityRating,
                                PersonaSet, SegmentList, AnswerScore>;

// ---------------------------------------------------------------------------
// Response parsing
// ---------------------------------------------------------------------------

namespace detail {

/// Judges wrap JSON in code fences or prose; salvage the first balanced
/// braces region (string-literal aware) before schema validation.
inline std::string first_json_object(const std::string& raw) {
    std::size_t start = raw.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < raw.size(); ++i) {
            char c = raw[i];
            if (in_string) {
                if (c == '\\')
                    ++i;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) return raw.substr(start, i - start + 1);
            }
        }
        start = raw.find('{', start + 1);
    }
    throw ValidationError("response contains no JSON object", raw);
}

inline json parse_json_region(const std::string& raw) {
    const std::string region = first_json_object(raw);
    try {
        return json::parse(region);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("response is not valid JSON: ") + e.what(), raw);
    }
}

/// Exact key-set check, case-insensitive on key names. Returns the object's
/// values keyed by the lowercase schema names.
inline std::map<std::string, json> match_schema(const json& obj,
                                                std::span<const std::string_view> schema,
                                                const std::string& raw) {
    if (!obj.is_object()) throw ValidationError("expected a JSON object", raw);
    std::map<std::string, json> out;
    for (const auto& [key, value] : obj.items()) {
        std::string norm = lowercase(key);
        if (out.count(norm)) throw ValidationError("duplicate key: " + key, raw);
        out.emplace(std::move(norm), value);
    }
    if (out.size() != schema.size())
        throw ValidationError("key set differs from schema (" + std::to_string(out.size()) +
                                  " keys, expected " + std::to_string(schema.size()) + ")",
                              raw);
    for (std::string_view want : schema) {
        if (!out.count(lowercase(want)))
            throw ValidationError("missing key: " + std::string(want), raw);
    }
    return out;
}

inline int require_count(const json& v, std::string_view key, const std::string& raw) {
    if (!v.is_number_integer())
        throw ValidationError("field " + std::string(key) + " is not an integer", raw);
    auto n = v.get<std::int64_t>();
    if (n < 0) throw ValidationError("field " + std::string(key) + " is negative", raw);
    if (n > INT32_MAX) throw ValidationError("field " + std::string(key) + " out of range", raw);
    return static_cast<int>(n);
}

}  // namespace detail

inline BehaviorCounts parse_behaviors(const std::string& raw) {
    static constexpr std::array<std::string_view, 4> schema = {
        "Question_and_Answering", "Perspective_Shift", "Conflict_of_Perspectives",
        "Reconciliation"};
    json j = detail::parse_json_region(raw);
    auto fields = detail::match_schema(j, schema, raw);
    BehaviorCounts out;
    out.question_and_answering = detail::require_count(fields["question_and_answering"],
                                                       "Question_and_Answering", raw);
    out.perspective_shift = detail::require_count(fields["perspective_shift"],
                                                  "Perspective_Shift", raw);
    out.conflict_of_perspectives = detail::require_count(fields["conflict_of_perspectives"],
                                                         "Conflict_of_Perspectives", raw);
    out.reconciliation = detail::require_count(fields["reconciliation"], "Reconciliation", raw);
    return out;
}

inline IpaCounts parse_ipa(const std::string& raw) {
    json root = detail::parse_json_region(raw);
    static constexpr std::array<std::string_view, 1> top_schema = {"IPA_counts"};
    auto top = detail::match_schema(root, top_schema, raw);
    auto fields = detail::match_schema(top["ipa_counts"], kIpaKeys, raw);
    IpaCounts out;
    for (int cat = 1; cat <= 12; ++cat) {
        std::string_view key = kIpaKeys[static_cast<std::size_t>(cat - 1)];
        out.at(cat) = detail::require_count(fields[lowercase(key)], key, raw);
    }
    return out;
}

inline CognitiveCounts parse_cognitive(const std::string& raw) {
    // The judge schema uses *_count names; archived measurement records use the
    // behavior names themselves. Either complete key set is accepted.
    static constexpr std::array<std::string_view, 4> prompt_schema = {
        "verification_count", "backtracking_count", "subgoal_count", "backward_count"};
    static constexpr std::array<std::string_view, 4> record_schema = {
        "verification", "backtracking", "subgoal_setting", "backward_chaining"};
    json j = detail::parse_json_region(raw);
    bool prompt_style = j.is_object() && j.contains("verification_count");
    const auto& schema = prompt_style ? prompt_schema : record_schema;
    auto fields = detail::match_schema(j, schema, raw);
    CognitiveCounts out;
    out.verification = detail::require_count(fields[std::string(lowercase(schema[0]))], schema[0], raw);
    out.backtracking = detail::require_count(fields[std::string(lowercase(schema[1]))], schema[1], raw);
    out.subgoal_setting = detail::require_count(fields[std::string(lowercase(schema[2]))], schema[2], raw);
    out.backward_chaining = detail::require_count(fields[std::string(lowercase(schema[3]))], schema[3], raw);
    return out;
}

inline ComplexityRating parse_complexity(const std::string& raw) {
    static constexpr std::array<std::string_view, 1> schema = {"difficulty"};
    json j = detail::parse_json_region(raw);
    auto fields = detail::match_schema(j, schema, raw);
    int d = detail::require_count(fields["difficulty"], "difficulty", raw);
    if (d < 1 || d > 7)
        throw ValidationError("difficulty " + std::to_string(d) + " outside 1..7", raw);
    return ComplexityRating{d};
}

inline AnswerScore parse_answer_score(const std::string& raw) {
    static constexpr std::array<std::string_view, 1> schema = {"answer"};
    json j = detail::parse_json_region(raw);
    auto fields = detail::match_schema(j, schema, raw);
    int s = detail::require_count(fields["answer"], "answer", raw);
    if (s > 100) throw ValidationError("answer " + std::to_string(s) + " outside 0..100", raw);
    return AnswerScore{s};
}

inline PersonaSet parse_personas(const std::string& raw) {
    static constexpr std::array<std::string_view, 3> schema = {"n_perspectives", "personality",
                                                               "domain_expertise"};
    json j = detail::parse_json_region(raw);
    auto fields = detail::match_schema(j, schema, raw);
    PersonaSet out;
    out.n_perspectives = detail::require_count(fields["n_perspectives"], "n_perspectives", raw);
    if (out.n_perspectives < 1) throw ValidationError("n_perspectives must be >= 1", raw);
    const json& personality = fields["personality"];
    const json& expertise = fields["domain_expertise"];
    if (!personality.is_array() || !expertise.is_array())
        throw ValidationError("personality and domain_expertise must be arrays", raw);
    if (personality.size() != static_cast<std::size_t>(out.n_perspectives) ||
        expertise.size() != static_cast<std::size_t>(out.n_perspectives))
        throw ValidationError("persona array lengths do not match n_perspectives", raw);
    for (const json& row : personality) {
        if (!row.is_array() || row.size() != 10)
            throw ValidationError("each personality entry must list 10 answers", raw);
        std::array<std::string, 10> answers;
        for (std::size_t i = 0; i < 10; ++i) {
            if (!row[i].is_string())
                throw ValidationError("questionnaire answers must be strings", raw);
            answers[i] = row[i].get<std::string>();
            bool known = false;
            for (std::string_view opt : kBfiAnswerOptions) known |= (answers[i] == opt);
            if (!known) throw ValidationError("unknown questionnaire answer: " + answers[i], raw);
        }
        out.bfi_answers.push_back(std::move(answers));
    }
    for (const json& e : expertise) {
        if (!e.is_string()) throw ValidationError("expertise entries must be strings", raw);
        out.expertise.push_back(e.get<std::string>());
    }
    return out;
}

inline SegmentList parse_segments(const std::string& raw) {
    static constexpr std::array<std::string_view, 1> schema = {"segments"};
    static constexpr std::array<std::string_view, 2> entry_schema = {"perspective_id",
                                                                     "start_text"};
    json j = detail::parse_json_region(raw);
    auto fields = detail::match_schema(j, schema, raw);
    const json& arr = fields["segments"];
    if (!arr.is_array() || arr.empty())
        throw ValidationError("segments must be a non-empty array", raw);
    SegmentList out;
    for (const json& e : arr) {
        auto entry = detail::match_schema(e, entry_schema, raw);
        Segment s;
        s.perspective_id = detail::require_count(entry["perspective_id"], "perspective_id", raw);
        if (s.perspective_id < 1) throw ValidationError("perspective_id must be >= 1", raw);
        if (!entry["start_text"].is_string())
            throw ValidationError("start_text must be a string", raw);
        s.start_text = entry["start_text"].get<std::string>();
        out.segments.push_back(std::move(s));
    }
    return out;
}

inline Annotation parse_annotation(JudgeKind kind, const std::string& raw) {
    switch (kind) {
        case JudgeKind::ConversationalBehaviors: return parse_behaviors(raw);
        case JudgeKind::IpaRoles: return parse_ipa(raw);
        case JudgeKind::CognitiveBehaviors: return parse_cognitive(raw);
        case JudgeKind::Complexity: return parse_complexity(raw);
        case JudgeKind::PersonaIdentification: return parse_personas(raw);
        case JudgeKind::PersonaSegmentation: return parse_segments(raw);
        case JudgeKind::ConversationContext:
        case JudgeKind::SaePersonalityScore:
        case JudgeKind::SaeExpertiseScore: return parse_answer_score(raw);
    }
    throw std::invalid_argument("bad JudgeKind");
}

// ---------------------------------------------------------------------------
// BFI-10 scoring
// ---------------------------------------------------------------------------

struct Big5 {
    double extraversion = 0;
    double agreeableness = 0;
    double conscientiousness = 0;
    double neuroticism = 0;
    double openness = 0;

    bool operator==(const Big5&) const = default;
};

inline int bfi_answer_value(std::string_view answer) {
    for (std::size_t i = 0; i < kBfiAnswerOptions.size(); ++i)
        if (answer == kBfiAnswerOptions[i]) return static_cast<int>(i) + 1;
    throw std::invalid_argument("unknown questionnaire answer: " + std::string(answer));
}

/// Standard ten-item keying: each dimension is the mean of its positive item
/// and its reverse-coded item (rev(x) = 6 - x). Item numbers follow the
/// questionnaire order in the persona-identification prompt.
inline Big5 score_bfi10(std::span<const int, 10> a) {
    for (int v : a)
        if (v < 1 || v > 5) throw std::invalid_argument("questionnaire value outside 1..5");
    auto rev = [](int x) { return 6 - x; };
    auto mean2 = [](int x, int y) { return (x + y) / 2.0; };
    Big5 s;
    s.extraversion = mean2(a[5], rev(a[0]));       // item 6, rev(item 1)
    s.agreeableness = mean2(a[1], rev(a[6]));      // item 2, rev(item 7)
    s.conscientiousness = mean2(a[7], rev(a[2]));  // item 8, rev(item 3)
    s.neuroticism = mean2(a[8], rev(a[3]));        // item 9, rev(item 4)
    s.openness = mean2(a[9], rev(a[4]));           // item 10, rev(item 5)
    return s;
}

inline Big5 score_bfi10(const std::array<std::string, 10>& answers) {
    std::array<int, 10> values;
    for (std::size_t i = 0; i < 10; ++i) values[i] = bfi_answer_value(answers[i]);
    return score_bfi10(std::span<const int, 10>(values));
}

// ---------------------------------------------------------------------------
// Replay cache and completion endpoints
// ---------------------------------------------------------------------------

inline std::string prompt_digest(std::string_view rendered_prompt) {
    return sha256_hex(rendered_prompt);
}

/// Append-only file of (kind, digest, response) records. A hit returns the
/// byte-identical response. Safe for concurrent use.
class ReplayCache {
public:
    ReplayCache() = default;

    explicit ReplayCache(std::filesystem::path path) : path_(std::move(path)) {
        std::ifstream in(path_);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw std::runtime_error("cache line " + std::to_string(lineno) + ": " + e.what());
            }
            entries_[key(j.at("kind").get<std::string>(), j.at("digest").get<std::string>())] =
                j.at("response").get<std::string>();
        }
    }

    std::optional<std::string> get(JudgeKind kind, const std::string& digest) const {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(key(std::string(kind_name(kind)), digest));
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void put(JudgeKind kind, const std::string& digest, const std::string& response) {
        std::lock_guard lock(mutex_);
        auto [it, inserted] =
            entries_.emplace(key(std::string(kind_name(kind)), digest), response);
        if (!inserted) return;
        if (!path_.empty()) {
            std::ofstream out(path_, std::ios::app);
            json j;
            j["kind"] = kind_name(kind);
            j["digest"] = digest;
            j["response"] = response;
            out << j.dump() << '\n';
        }
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

private:
    static std::string key(const std::string& kind, const std::string& digest) {
        return kind + ':' + digest;
    }

    std::filesystem::path path_;  // empty = in-memory only
    mutable std::mutex mutex_;
    std::map<std::string, std::string> entries_;
};

/// Text-in/text-out completion endpoint.
class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

/// File-backed transport that answers from recorded responses keyed by the
/// prompt digest; substitutes for the network in tests and offline runs.
class FileReplayClient : public CompletionClient {
public:
    explicit FileReplayClient(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open replay file: " + path.string());
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            json j = json::parse(line);
            responses_[j.at("digest").get<std::string>()] = j.at("response").get<std::string>();
        }
    }

    std::string complete(const std::string& prompt) override {
        auto it = responses_.find(prompt_digest(prompt));
        if (it == responses_.end())
            throw TransportError("replay transport has no response for this prompt");
        return it->second;
    }

private:
    std::map<std::string, std::string> responses_;
};

/// Enforces a minimum interval between request starts on a shared endpoint.
class RateLimitedClient : public CompletionClient {
public:
    RateLimitedClient(CompletionClient& inner, std::chrono::milliseconds min_interval)
        : inner_(inner), min_interval_(min_interval) {}

    std::string complete(const std::string& prompt) override {
        if (min_interval_.count() > 0) {
            std::unique_lock lock(mutex_);
            auto now = std::chrono::steady_clock::now();
            if (now < next_allowed_) {
                auto wait = next_allowed_ - now;
                next_allowed_ += min_interval_;
                lock.unlock();
                std::this_thread::sleep_for(wait);
            } else {
                next_allowed_ = now + min_interval_;
            }
        }
        return inner_.complete(prompt);
    }

private:
    CompletionClient& inner_;
    std::chrono::milliseconds min_interval_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point next_allowed_{};
};

// ---------------------------------------------------------------------------
// Annotation driver
// ---------------------------------------------------------------------------

struct AnnotateOptions {
    int max_resubmissions = 2;  // retries after an unparseable fresh response
};

/// Cache hit: parse the recorded response. Miss: submit, validate, store.
/// Unparseable fresh responses are resubmitted up to the configured budget.
inline Annotation annotate(JudgeKind kind, std::string_view payload, CompletionClient* endpoint,
                           ReplayCache* cache, const AnnotateOptions& opts = {}) {
    const std::string prompt = render_prompt(kind, payload);
    const std::string digest = prompt_digest(prompt);
    if (cache) {
        if (auto hit = cache->get(kind, digest)) return parse_annotation(kind, *hit);
    }
    if (!endpoint)
        throw TransportError("no endpoint configured and no cached response for " +
                             std::string(kind_name(kind)));
    std::optional<ValidationError> last;
    for (int attempt = 0; attempt <= opts.max_resubmissions; ++attempt) {
        std::string raw = endpoint->complete(prompt);
        try {
            Annotation parsed = parse_annotation(kind, raw);
            if (cache) cache->put(kind, digest, raw);
            return parsed;
        } catch (const ValidationError& e) {
            last = e;
        }
    }
    throw *last;
}

template <typename T>
inline T annotate_as(JudgeKind kind, std::string_view payload, CompletionClient* endpoint,
                     ReplayCache* cache, const AnnotateOptions& opts = {}) {
    return std::get<T>(annotate(kind, payload, endpoint, cache, opts));
}

struct BatchOptions {
    int concurrency = 4;
};

/// Runs fn(0..n-1) on a bounded worker pool. Callers write results into
/// per-index slots, so aggregates do not depend on completion order.
template <typename Fn>
inline void for_each_concurrent(std::size_t n, const BatchOptions& opts, Fn&& fn) {
    int workers = std::max(1, opts.concurrency);
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace tracelab::judge
