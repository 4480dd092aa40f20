#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "tracelab/util.hpp"

namespace tracelab::trace {

using ordered_json = nlohmann::ordered_json;

/// One model completion with tagged think/answer blocks and provenance.
struct ReasoningTrace {
    std::string trace_id;
    std::string problem_id;
    std::string model_id;
    std::string prompt_text;
    std::string raw_text;
    std::optional<std::string> think_text;
    std::optional<std::string> answer_text;
    std::optional<bool> correct;

    /// Whitespace words of think_text, or of raw_text when no think block.
    std::size_t word_count() const {
        return tracelab::word_count(think_text ? *think_text : raw_text);
    }

    /// ln(word_count + 1); finite for every trace, including empty ones.
    double log_length() const { return std::log(static_cast<double>(word_count()) + 1.0); }
};

struct TaggedBlockSpec {
    std::string open_tag;
    std::string close_tag;

    TaggedBlockSpec(std::string open, std::string close)
        : open_tag(std::move(open)), close_tag(std::move(close)) {
        if (open_tag.empty() || close_tag.empty() || open_tag == close_tag)
            throw std::invalid_argument("TaggedBlockSpec: tags must be non-empty and distinct");
    }
};

inline TaggedBlockSpec think_spec() { return TaggedBlockSpec("<think>", "</think>"); }
inline TaggedBlockSpec answer_spec() { return TaggedBlockSpec("<answer>", "</answer>"); }

/// All non-overlapping open/close pairs, scanning left to right. An open tag
/// without a matching close is treated as no match. Content whitespace is
/// preserved.
inline std::vector<std::string> extract_all_blocks(std::string_view text,
                                                   const TaggedBlockSpec& spec) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = text.find(spec.open_tag, pos);
        if (open == std::string_view::npos) break;
        std::size_t content = open + spec.open_tag.size();
        std::size_t close = text.find(spec.close_tag, content);
        if (close == std::string_view::npos) break;
        out.emplace_back(text.substr(content, close - content));
        pos = close + spec.close_tag.size();
    }
    return out;
}

inline std::optional<std::string> extract_first_block(std::string_view text,
                                                      const TaggedBlockSpec& spec) {
    std::size_t open = text.find(spec.open_tag);
    if (open == std::string_view::npos) return std::nullopt;
    std::size_t content = open + spec.open_tag.size();
    std::size_t close = text.find(spec.close_tag, content);
    if (close == std::string_view::npos) return std::nullopt;
    return std::string(text.substr(content, close - content));
}

struct CorpusError : std::runtime_error {
    CorpusError(std::size_t line_, const std::string& what_)
        : std::runtime_error("corpus line " + std::to_string(line_) + ": " + what_), line(line_) {}
    std::size_t line;
};

inline ReasoningTrace trace_from_json(const ordered_json& j) {
    ReasoningTrace t;
    if (!j.is_object()) throw std::invalid_argument("record is not an object");
    if (!j.contains("trace_id") || !j["trace_id"].is_string())
        throw std::invalid_argument("missing required field trace_id");
    if (!j.contains("raw_text") || !j["raw_text"].is_string())
        throw std::invalid_argument("missing required field raw_text");
    t.trace_id = j["trace_id"].get<std::string>();
    t.raw_text = j["raw_text"].get<std::string>();
    t.problem_id = j.value("problem_id", "");
    t.model_id = j.value("model_id", "");
    t.prompt_text = j.value("prompt_text", "");
    if (j.contains("think_text") && !j["think_text"].is_null())
        t.think_text = j["think_text"].get<std::string>();
    if (j.contains("answer_text") && !j["answer_text"].is_null())
        t.answer_text = j["answer_text"].get<std::string>();
    if (j.contains("correct") && !j["correct"].is_null()) t.correct = j["correct"].get<bool>();
    return t;
}

inline ordered_json trace_to_json(const ReasoningTrace& t) {
    ordered_json j;
    j["trace_id"] = t.trace_id;
    j["problem_id"] = t.problem_id;
    j["model_id"] = t.model_id;
    j["prompt_text"] = t.prompt_text;
    j["raw_text"] = t.raw_text;
    if (t.think_text) j["think_text"] = *t.think_text;
    if (t.answer_text) j["answer_text"] = *t.answer_text;
    if (t.correct) j["correct"] = *t.correct;
    return j;
}

/// One JSON record per line, file order preserved. Malformed lines and
/// duplicate trace ids raise CorpusError with the line number.
inline std::vector<ReasoningTrace> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus: " + path.string());
    std::vector<ReasoningTrace> out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(lineno, std::string("invalid JSON: ") + e.what());
        }
        ReasoningTrace t;
        try {
            t = trace_from_json(j);
        } catch (const std::exception& e) {
            throw CorpusError(lineno, e.what());
        }
        if (!seen.insert(t.trace_id).second)
            throw CorpusError(lineno, "duplicate trace_id: " + t.trace_id);
        out.push_back(std::move(t));
    }
    return out;
}

inline std::string serialize_corpus(const std::vector<ReasoningTrace>& traces) {
    std::string out;
    for (const auto& t : traces) {
        out += trace_to_json(t).dump();
        out += '\n';
    }
    return out;
}

/// Fills think_text/answer_text from raw_text when absent. The first block of
/// each kind is canonical.
inline void extract_tagged_fields(ReasoningTrace& t) {
    if (!t.think_text) t.think_text = extract_first_block(t.raw_text, think_spec());
    if (!t.answer_text) t.answer_text = extract_first_block(t.raw_text, answer_spec());
}

struct DialogueReport {
    bool ok = false;
    std::vector<std::string> violations;
};

namespace detail {

inline std::size_t count_occurrences(std::string_view text, std::string_view needle) {
    std::size_t n = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

}  // namespace detail

/// Structural check for multi-persona dialogue data: a cast_of_characters
/// section declaring persona1..personaN, a conversation of thinkK utterances
/// with K <= N, and exactly one group_solution block.
inline DialogueReport validate_dialogue_format(std::string_view text, int n_personas) {
    if (n_personas < 2 || n_personas > 4)
        throw std::invalid_argument("validate_dialogue_format: n_personas must be in 2..4");
    DialogueReport report;
    auto& v = report.violations;

    auto complete_blocks = [&](const std::string& name) {
        return extract_all_blocks(text, TaggedBlockSpec("<" + name + ">", "</" + name + ">"));
    };
    auto check_balanced = [&](const std::string& name) {
        std::size_t opens = detail::count_occurrences(text, "<" + name + ">");
        std::size_t closes = detail::count_occurrences(text, "</" + name + ">");
        if (opens != closes)
            v.push_back("unbalanced <" + name + "> tags (" + std::to_string(opens) + " open, " +
                        std::to_string(closes) + " close)");
    };

    check_balanced("cast_of_characters");
    auto cast_blocks = complete_blocks("cast_of_characters");
    if (cast_blocks.empty()) {
        v.push_back("missing <cast_of_characters> block");
    } else {
        if (cast_blocks.size() > 1) v.push_back("multiple <cast_of_characters> blocks");
        const std::string& cast = cast_blocks.front();
        for (int k = 1; k <= n_personas; ++k) {
            std::string name = "persona" + std::to_string(k);
            check_balanced(name);
            auto blocks = extract_all_blocks(cast, TaggedBlockSpec("<" + name + ">", "</" + name + ">"));
            if (blocks.empty())
                v.push_back("missing <" + name + "> block in cast_of_characters");
            else if (blocks.size() > 1)
                v.push_back("multiple <" + name + "> blocks in cast_of_characters");
        }
    }
    // persona definitions beyond the declared count
    for (int k = n_personas + 1; k <= 4; ++k) {
        std::string open = "<persona" + std::to_string(k) + ">";
        if (text.find(open) != std::string_view::npos)
            v.push_back("persona block beyond declared count: " + open);
    }

    check_balanced("conversation");
    auto conv_blocks = complete_blocks("conversation");
    if (conv_blocks.empty()) {
        v.push_back("missing <conversation> block");
    } else {
        if (conv_blocks.size() > 1) v.push_back("multiple <conversation> blocks");
        std::string_view conv = conv_blocks.front();
        std::size_t pos = 0;
        int utterances = 0;
        while (pos < conv.size()) {
            while (pos < conv.size() && is_space(conv[pos])) ++pos;
            if (pos >= conv.size()) break;
            if (conv[pos] != '<') {
                v.push_back("unexpected content inside conversation outside think blocks");
                break;
            }
            std::size_t tag_end = conv.find('>', pos);
            if (tag_end == std::string_view::npos) {
                v.push_back("malformed tag inside conversation");
                break;
            }
            std::string tag(conv.substr(pos + 1, tag_end - pos - 1));
            if (tag.rfind("think", 0) != 0) {
                v.push_back("unexpected tag inside conversation: <" + tag + ">");
                break;
            }
            int speaker = 0;
            try {
                speaker = std::stoi(tag.substr(5));
            } catch (const std::exception&) {
                v.push_back("malformed think tag inside conversation: <" + tag + ">");
                break;
            }
            std::string close = "</" + tag + ">";
            std::size_t close_pos = conv.find(close, tag_end + 1);
            if (close_pos == std::string_view::npos) {
                v.push_back("unclosed <" + tag + "> inside conversation");
                break;
            }
            if (speaker < 1 || speaker > n_personas)
                v.push_back("utterance from undeclared persona: <" + tag + ">");
            ++utterances;
            pos = close_pos + close.size();
        }
        if (utterances == 0) v.push_back("conversation has no utterances");
    }

    check_balanced("group_solution");
    auto solutions = complete_blocks("group_solution");
    if (solutions.empty())
        v.push_back("missing <group_solution> block");
    else if (solutions.size() > 1)
        v.push_back("multiple <group_solution> blocks");

    report.ok = v.empty();
    return report;
}

enum class PolitifactClass { True, HalfTrue, False };

inline const char* to_string(PolitifactClass c) {
    switch (c) {
        case PolitifactClass::True: return "True";
        case PolitifactClass::HalfTrue: return "HalfTrue";
        case PolitifactClass::False: return "False";
    }
    return "?";
}

/// Six fact-check labels recoded into three classes.
inline PolitifactClass recode_politifact(std::string_view label) {
    std::string key = lowercase(normalize_whitespace(label));
    if (key == "true" || key == "mostly true") return PolitifactClass::True;
    if (key == "half true") return PolitifactClass::HalfTrue;
    if (key == "false" || key == "mostly false" || key == "pants on fire")
        return PolitifactClass::False;
    throw std::invalid_argument("unknown fact-check label: " + std::string(label));
}

}  // namespace tracelab::trace
