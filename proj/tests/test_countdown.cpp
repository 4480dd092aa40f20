#include <doctest.h>

#include <random>
#include <set>

#include "tracelab/countdown.hpp"

using namespace tracelab::countdown;

namespace {

Expression random_tree(std::mt19937_64& rng, int leaves) {
    std::uniform_int_distribution<int> value(0, 99);
    if (leaves == 1) return Expression::leaf(value(rng));
    std::uniform_int_distribution<int> split(1, leaves - 1);
    std::uniform_int_distribution<int> op(0, 3);
    int left = split(rng);
    return Expression::binary(static_cast<BinOp>(op(rng)), random_tree(rng, left),
                              random_tree(rng, leaves - left));
}

// independent enumeration of every two-number expression
std::set<Rational> all_two_number_values(std::int64_t a, std::int64_t b) {
    std::set<Rational> values;
    for (auto [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
        values.insert(Rational(x) + Rational(y));
        values.insert(Rational(x) - Rational(y));
        values.insert(Rational(x) * Rational(y));
        if (y != 0) values.insert(Rational(x) / Rational(y));
    }
    return values;
}

}  // namespace

TEST_CASE("parse and evaluate fixtures") {
    CHECK(evaluate("(30 - 25 + 3) * 4") == Rational(32));
    CHECK(evaluate("(1 + 2) / 3") == Rational(1));
    CHECK(evaluate("(46 + 54) + (52 - 77)") == Rational(75));
    CHECK(evaluate("1/3*3") == Rational(1));
    CHECK(evaluate("2 + 3 * 4") == Rational(14));        // precedence
    CHECK(evaluate("10 - 3 - 2") == Rational(5));        // left associativity
    CHECK(evaluate("100 / 10 / 5") == Rational(2));
}

TEST_CASE("typographic operator aliases and result tails") {
    CHECK(evaluate("(30 \xe2\x88\x92 25 + 3) \xc3\x97 4") == Rational(32));  // − and ×
    CHECK(evaluate("8 \xc3\xb7 2") == Rational(4));                          // ÷
    CHECK(evaluate("(30 - 25 + 3) * 4 = 32") == Rational(32));  // '=' tail ignored
    CHECK(evaluate("1 + 1 = whatever, ignored") == Rational(2));
}

TEST_CASE("parse errors carry positions") {
    CHECK_THROWS_AS(parse_expression(""), ParseError);
    try {
        parse_expression("2 +");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset == 3);
    }
    try {
        parse_expression("()");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset == 1);
    }
    CHECK_THROWS_AS(parse_expression("54 / 2.5"), ParseError);  // non-integer literal
    CHECK_THROWS_AS(parse_expression("1 + x"), ParseError);
    CHECK_THROWS_AS(parse_expression("1 2"), ParseError);  // trailing input
}

TEST_CASE("division by zero is an evaluation error") {
    CHECK_THROWS_AS(evaluate("5/(3-3)"), std::domain_error);
    CHECK_THROWS_AS(evaluate("1 / (2 - 2) + 7"), std::domain_error);
}

TEST_CASE("render/parse round trip preserves the tree") {
    std::mt19937_64 rng(4242);
    std::uniform_int_distribution<int> leaves(1, 6);
    for (int i = 0; i < 500; ++i) {
        Expression t = random_tree(rng, leaves(rng));
        std::string rendered = t.render();
        Expression back = parse_expression(rendered);
        CHECK(back == t);
        CHECK(back.render() == rendered);
    }
}

TEST_CASE("verify_solution accepts the documented solutions") {
    CountdownProblem p{{25, 30, 3, 4}, 32};
    CHECK(verify_solution(p, "(30 - 25 + 3) * 4").valid);
    CHECK(verify_solution(p, "(30 \xe2\x88\x92 25 + 3) \xc3\x97 4").valid);

    CountdownProblem q{{46, 54, 52, 77}, 75};
    CHECK(verify_solution(q, "(46 + 54) + (52 - 77)").valid);
}

TEST_CASE("verify_solution rejects out-of-set literals and wrong values") {
    CountdownProblem two54{{46, 54, 54, 77}, 75};
    auto r = verify_solution(two54, "(46 + 54) / 2 + 77 - 27");
    CHECK_FALSE(r.valid);
    REQUIRE_FALSE(r.reasons.empty());
    CHECK(r.reasons.front().find("multiset mismatch") != std::string::npos);

    CountdownProblem q{{46, 54, 52, 77}, 75};
    auto nonint = verify_solution(q, "(77 - 46) + (54 / 2.5)+( 52 * 1.5 ) - 3");
    CHECK_FALSE(nonint.valid);  // 2.5 is not an integer literal

    auto wrong_value = verify_solution(q, "46 + 54 - 52 + 77");
    CHECK_FALSE(wrong_value.valid);
    CHECK(wrong_value.reasons.front().find("does not equal target") != std::string::npos);

    auto unused = verify_solution(q, "46 + 54 - 52");  // 77 unused
    CHECK_FALSE(unused.valid);
}

TEST_CASE("any single-literal mutation of a valid solution is rejected") {
    CountdownProblem p{{25, 30, 3, 4}, 32};
    // replace each literal with a value outside the multiset
    CHECK_FALSE(verify_solution(p, "(31 - 25 + 3) * 4").valid);
    CHECK_FALSE(verify_solution(p, "(30 - 26 + 3) * 4").valid);
    CHECK_FALSE(verify_solution(p, "(30 - 25 + 5) * 4").valid);
    CHECK_FALSE(verify_solution(p, "(30 - 25 + 3) * 7").valid);
    // duplicate an in-set literal
    CHECK_FALSE(verify_solution(p, "(30 - 25 + 3) * 4 + 3 - 3").valid);
}

TEST_CASE("brute force finds witnesses and proves absence") {
    CountdownProblem easy{{1, 1}, 2};
    auto w = solve_brute_force(easy);
    REQUIRE(w.has_value());
    CHECK(w->render() == "1 + 1");
    CHECK(verify_solution(easy, w->render()).valid);

    CountdownProblem impossible{{2, 2}, 5};
    CHECK_FALSE(solve_brute_force(impossible).has_value());
    auto oracle = all_two_number_values(2, 2);
    CHECK(oracle.count(Rational(5)) == 0);  // independent enumeration agrees

    CountdownProblem paper{{25, 30, 3, 4}, 32};
    auto witness = solve_brute_force(paper);
    REQUIRE(witness.has_value());
    CHECK(verify_solution(paper, witness->render()).valid);
}

TEST_CASE("brute force agrees with pair enumeration on random 2-number instances") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::int64_t> v(1, 20);
    for (int i = 0; i < 200; ++i) {
        CountdownProblem p{{v(rng), v(rng)}, v(rng)};
        bool solver = solve_brute_force(p).has_value();
        bool oracle = all_two_number_values(p.numbers[0], p.numbers[1]).count(Rational(p.target)) > 0;
        CHECK(solver == oracle);
    }
}

TEST_CASE("generator is seed-deterministic and closed under the solver") {
    GeneratorOptions opt;
    opt.k_numbers = 3;
    auto a = generate_problems(10, opt, 99);
    auto b = generate_problems(10, opt, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].numbers == b[i].numbers);
        CHECK(a[i].target == b[i].target);
        auto w = solve_brute_force(a[i]);
        REQUIRE(w.has_value());
        CHECK(verify_solution(a[i], w->render()).valid);
    }
}

TEST_CASE("generator errors out on infeasible ranges") {
    GeneratorOptions opt;
    opt.k_numbers = 2;
    opt.value_min = opt.value_max = 2;     // only {2,2}
    opt.target_min = opt.target_max = 5;   // unreachable
    opt.attempt_budget_per_problem = 50;
    CHECK_THROWS_AS(generate_problems(1, opt, 1), std::runtime_error);
}

TEST_CASE("problem line round trip") {
    CountdownProblem p{{25, 30, 3, 4}, 32};
    auto line = format_problem_line(p);
    CHECK(line == "25,30,3,4 32");
    auto q = parse_problem_line(line);
    CHECK(q.numbers == p.numbers);
    CHECK(q.target == p.target);
}

TEST_CASE("reward follows the 0.9/0.1 weighting") {
    CountdownProblem p{{25, 30, 3, 4}, 32};
    auto full = reward(p, "<think>try (30-25+3)*4</think> <answer>(30 - 25 + 3) * 4</answer>");
    CHECK(full.accuracy == 1);
    CHECK(full.format_ok == 1);
    CHECK(full.reward == doctest::Approx(1.0));

    auto wrong = reward(p, "<think>hmm</think> <answer>30 + 25 + 3 + 4</answer>");
    CHECK(wrong.accuracy == 0);
    CHECK(wrong.format_ok == 1);
    CHECK(wrong.reward == doctest::Approx(0.1));

    auto none = reward(p, "no tags at all");
    CHECK(none.accuracy == 0);
    CHECK(none.format_ok == 0);
    CHECK(none.reward == doctest::Approx(0.0));

    // answer without think: accuracy still earned, format not
    auto no_think = reward(p, "<answer>(30 - 25 + 3) * 4</answer>");
    CHECK(no_think.accuracy == 1);
    CHECK(no_think.format_ok == 0);
    CHECK(no_think.reward == doctest::Approx(0.9));

    // several answer blocks: first one is judged, format demands a single one
    auto multi = reward(p, "<think>x</think><answer>(30 - 25 + 3) * 4</answer><answer>1</answer>");
    CHECK(multi.accuracy == 1);
    CHECK(multi.format_ok == 0);
    CHECK(multi.reward == doctest::Approx(0.9));

    auto unparseable = reward(p, "<think>x</think><answer>thirty two</answer>");
    CHECK(unparseable.accuracy == 0);
    CHECK(unparseable.format_ok == 0);
    CHECK(unparseable.reward == doctest::Approx(0.0));
}

TEST_CASE("reward only takes the four documented values") {
    std::mt19937_64 rng(11);
    GeneratorOptions opt;
    opt.k_numbers = 3;
    auto problems = generate_problems(20, opt, 5);
    std::uniform_int_distribution<int> style(0, 3);
    for (const auto& p : problems) {
        auto w = solve_brute_force(p);
        REQUIRE(w.has_value());
        std::string expr = w->render();
        std::string completion;
        switch (style(rng)) {
            case 0: completion = "<think>t</think><answer>" + expr + "</answer>"; break;
            case 1: completion = "<answer>" + expr + "</answer>"; break;
            case 2: completion = "<think>t</think><answer>0</answer>"; break;
            default: completion = "nothing"; break;
        }
        double r = reward(p, completion).reward;
        bool allowed = r == 0.0 || r == 0.1 || r == 0.9 || r == 1.0;
        CHECK(allowed);
        auto b = reward(p, completion);
        CHECK((b.accuracy == 1 && b.format_ok == 1) == (b.reward == 1.0));
    }
}
