#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tracelab/trace.hpp"

using namespace tracelab;
using namespace tracelab::trace;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::trunc);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("extract_block returns the leftmost pair") {
    auto spec = think_spec();
    auto first = extract_first_block("x <think>A</think> y <think>B</think>", spec);
    REQUIRE(first.has_value());
    CHECK(*first == "A");
    auto all = extract_all_blocks("x <think>A</think> y <think>B</think>", spec);
    REQUIRE(all.size() == 2);
    CHECK(all[0] == "A");
    CHECK(all[1] == "B");
}

TEST_CASE("extract_block edge cases") {
    auto spec = think_spec();
    CHECK_FALSE(extract_first_block("no tags here", spec).has_value());
    CHECK_FALSE(extract_first_block("<think>unclosed", spec).has_value());
    CHECK(extract_all_blocks("<think>unclosed", spec).empty());
    // content whitespace preserved
    auto padded = extract_first_block("<think>  spaced  </think>", spec);
    REQUIRE(padded.has_value());
    CHECK(*padded == "  spaced  ");
    // unclosed prefix hides later complete pairs on the same scan: the close
    // tag belongs to the first open
    auto nested = extract_first_block("<think>a<think>b</think>", spec);
    REQUIRE(nested.has_value());
    CHECK(*nested == "a<think>b");
}

TEST_CASE("extract_block is the identity on tag-free re-wrapped content") {
    TaggedBlockSpec spec("<t>", "</t>");
    for (std::string x : {"plain", "  spaced out  ", "", "multi\nline", "sym*bols(1+2)"}) {
        auto got = extract_first_block("<t>" + x + "</t>", spec);
        REQUIRE(got.has_value());
        CHECK(*got == x);
    }
}

TEST_CASE("answer block of the steered trace") {
    std::string completion = "<think>\n...\n</think>\n\n<answer>\n\n(46 + 54) + (52 - 77)\n\n</answer>";
    auto block = extract_first_block(completion, answer_spec());
    REQUIRE(block.has_value());
    CHECK(trim(*block) == "(46 + 54) + (52 - 77)");
}

TEST_CASE("tag spec rejects degenerate tags") {
    CHECK_THROWS_AS(TaggedBlockSpec("", "</t>"), std::invalid_argument);
    CHECK_THROWS_AS(TaggedBlockSpec("<t>", "<t>"), std::invalid_argument);
}

TEST_CASE("word counts are whitespace runs") {
    ReasoningTrace t;
    t.raw_text = "ignore me";
    t.think_text = "a b  c";
    CHECK(t.word_count() == 3);
    t.think_text.reset();
    CHECK(t.word_count() == 2);  // falls back to raw_text
    t.raw_text = "";
    CHECK(t.word_count() == 0);
    CHECK(t.log_length() == doctest::Approx(0.0));
    CHECK(t.log_length() >= 0.0);
}

TEST_CASE("load_corpus reads records in order") {
    auto path = write_temp("tracelab_corpus_ok.jsonl",
                           R"({"trace_id":"t1","problem_id":"p1","model_id":"m","prompt_text":"q","raw_text":"<think>a b</think>"})"
                           "\n"
                           R"({"trace_id":"t2","raw_text":"plain"})"
                           "\n"
                           R"({"trace_id":"t3","raw_text":"x","correct":true})"
                           "\n");
    auto traces = load_corpus(path);
    REQUIRE(traces.size() == 3);
    CHECK(traces[0].trace_id == "t1");
    CHECK(traces[1].trace_id == "t2");
    CHECK(traces[2].trace_id == "t3");
    CHECK(traces[2].correct == true);
    CHECK_FALSE(traces[1].correct.has_value());
}

TEST_CASE("load_corpus reports the offending line") {
    auto path = write_temp("tracelab_corpus_bad.jsonl",
                           R"({"trace_id":"t1","raw_text":"ok"})"
                           "\n"
                           R"({"trace_id":"t2"})"
                           "\n");
    try {
        load_corpus(path);
        FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("raw_text") != std::string::npos);
    }

    auto dup = write_temp("tracelab_corpus_dup.jsonl",
                          R"({"trace_id":"t1","raw_text":"a"})"
                          "\n"
                          R"({"trace_id":"t1","raw_text":"b"})"
                          "\n");
    try {
        load_corpus(dup);
        FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
    }

    auto junk = write_temp("tracelab_corpus_junk.jsonl", "not json\n");
    CHECK_THROWS_AS(load_corpus(junk), CorpusError);
}

TEST_CASE("corpus round trip is the identity") {
    std::vector<ReasoningTrace> traces(3);
    traces[0] = {"t1", "p1", "m1", "prompt?", "<think>x y</think><answer>1</answer>",
                 "x y", "1", true};
    traces[1] = {"t2", "p2", "m2", "", "bare text", std::nullopt, std::nullopt, std::nullopt};
    traces[2] = {"t3", "p1", "m1", "p", "r", std::string("think only"), std::nullopt, false};
    auto path = write_temp("tracelab_corpus_rt.jsonl", serialize_corpus(traces));
    auto loaded = load_corpus(path);
    REQUIRE(loaded.size() == traces.size());
    for (std::size_t i = 0; i < traces.size(); ++i) {
        CHECK(loaded[i].trace_id == traces[i].trace_id);
        CHECK(loaded[i].problem_id == traces[i].problem_id);
        CHECK(loaded[i].model_id == traces[i].model_id);
        CHECK(loaded[i].prompt_text == traces[i].prompt_text);
        CHECK(loaded[i].raw_text == traces[i].raw_text);
        CHECK(loaded[i].think_text == traces[i].think_text);
        CHECK(loaded[i].answer_text == traces[i].answer_text);
        CHECK(loaded[i].correct == traces[i].correct);
    }
    CHECK(serialize_corpus(loaded) == serialize_corpus(traces));
}

namespace {

// the two-thinker number-theory dialogue used in the fine-tuning data docs
const char* kTwoPersonaDialogue = R"(<cast_of_characters>

<persona1> [Thinker 1 is a meticulous mathematician with a strong background in number theory. He is patient and methodical, preferring to break down problems into smaller, more manageable parts. He enjoys exploring multiple angles before arriving at a conclusion.] </persona1>

<persona2> [Thinker 2 is a quick-witted and intuitive problem solver. She often relies on her gut feeling to guide her through the problem, but she also values rigorous proof. She is not afraid to challenge assumptions and enjoys the process of elimination.] </persona2>

</cast_of_characters>

<conversation>

<think1> Given that the greatest common divisor (GCD) of m and n is 8 and the least common multiple (LCM) is 112, we can use the relationship between GCD and LCM: m x n = GCD(m, n) x LCM(m, n). Substituting the given values, we get m x n = 8 x 112 = 896. </think1>

<think2> That's a good starting point. Since the GCD of m and n is 8, we know that both m and n are multiples of 8. Let's express m and n as m = 8a and n = 8b, where a and b are coprime integers. This gives us (8a) x (8b) = 896, which simplifies to 64ab = 896. Dividing both sides by 64, we get ab = 14. </think2>

<think1> Exactly. Now we need to find pairs of coprime integers (a, b) whose product is 14. The possible pairs are (1, 14) and (2, 7). Since a and b must be coprime, we can discard (2, 7) because 2 and 7 are both factors of 14, but they are not coprime. This leaves us with (1, 14). </think1>

<think2> Wait a second. We can't discard (2, 7) just yet. While it's true that 2 and 7 are factors of 14, they are indeed coprime because their greatest common divisor is 1. So, the valid pairs are (1, 14) and (2, 7). </think2>

<think1> You're right. I overlooked that. Let's consider both pairs. For (a, b) = (1, 14), we get m = 8 x 1 = 8 and n = 8 x 14 = 112. For (a, b) = (2, 7), we get m = 8 x 2 = 16 and n = 8 x 7 = 56. Now, we need to find the least possible value of m + n. </think1>

<think2> For the pair (1, 14), we have m + n = 8 + 112 = 120. For the pair (2, 7), we have m + n = 16 + 56 = 72. The least possible value of m + n is 72. </think2>

</conversation>

<group_solution> 72 </group_solution>)";

}  // namespace

TEST_CASE("dialogue format validation accepts a well-formed two-persona dialogue") {
    auto report = validate_dialogue_format(kTwoPersonaDialogue, 2);
    CHECK(report.violations.empty());
    CHECK(report.ok);
}

TEST_CASE("dialogue format validation flags undeclared personas") {
    std::string text = kTwoPersonaDialogue;
    auto pos = text.find("</conversation>");
    text.insert(pos, "<think3> I was never introduced. </think3>\n\n");
    auto report = validate_dialogue_format(text, 2);
    CHECK_FALSE(report.ok);
    bool found = false;
    for (const auto& v : report.violations)
        found |= v.find("undeclared persona") != std::string::npos;
    CHECK(found);
}

TEST_CASE("dialogue format validation lists every missing piece") {
    std::string text = kTwoPersonaDialogue;
    auto pos = text.find("<group_solution>");
    text = text.substr(0, pos);
    auto report = validate_dialogue_format(text, 2);
    CHECK_FALSE(report.ok);
    bool found = false;
    for (const auto& v : report.violations)
        found |= v.find("group_solution") != std::string::npos;
    CHECK(found);

    auto report3 = validate_dialogue_format(kTwoPersonaDialogue, 3);  // persona3 missing
    CHECK_FALSE(report3.ok);

    CHECK_THROWS_AS(validate_dialogue_format("x", 1), std::invalid_argument);
    CHECK_THROWS_AS(validate_dialogue_format("x", 5), std::invalid_argument);
}

TEST_CASE("dialogue format validation flags unclosed and stray content") {
    std::string unclosed = "<cast_of_characters><persona1>a</persona1><persona2>b</persona2>"
                           "</cast_of_characters><conversation><think1>hm</conversation>"
                           "<group_solution>42</group_solution>";
    auto report = validate_dialogue_format(unclosed, 2);
    CHECK_FALSE(report.ok);

    std::string stray = "<cast_of_characters><persona1>a</persona1><persona2>b</persona2>"
                        "</cast_of_characters><conversation>loose words<think1>x</think1>"
                        "</conversation><group_solution>42</group_solution>";
    auto report2 = validate_dialogue_format(stray, 2);
    CHECK_FALSE(report2.ok);
}

TEST_CASE("fact-check labels recode to three classes") {
    CHECK(recode_politifact("True") == PolitifactClass::True);
    CHECK(recode_politifact("Mostly True") == PolitifactClass::True);
    CHECK(recode_politifact("Half True") == PolitifactClass::HalfTrue);
    CHECK(recode_politifact("Mostly False") == PolitifactClass::False);
    CHECK(recode_politifact("False") == PolitifactClass::False);
    CHECK(recode_politifact("Pants on Fire") == PolitifactClass::False);
    CHECK(recode_politifact("  pants  on  fire ") == PolitifactClass::False);
    CHECK_THROWS_AS(recode_politifact("Unverified"), std::invalid_argument);
}
