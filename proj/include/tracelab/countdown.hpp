#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "tracelab/trace.hpp"

namespace tracelab::countdown {

using Rational = boost::multiprecision::cpp_rational;

enum class BinOp : std::uint8_t { Add, Sub, Mul, Div };

inline char op_symbol(BinOp op) {
    switch (op) {
        case BinOp::Add: return '+';
        case BinOp::Sub: return '-';
        case BinOp::Mul: return '*';
        case BinOp::Div: return '/';
    }
    return '?';
}

/// Arithmetic expression tree: integer leaves and binary {+,-,*,/} nodes.
class Expression {
public:
    static Expression leaf(std::int64_t value) {
        Expression e;
        e.node_ = std::make_unique<Node>();
        e.node_->value = value;
        return e;
    }

    static Expression binary(BinOp op, Expression left, Expression right) {
        Expression e;
        e.node_ = std::make_unique<Node>();
        e.node_->op = op;
        e.node_->left = std::move(left.node_);
        e.node_->right = std::move(right.node_);
        return e;
    }

    Expression() = default;
    Expression(Expression&&) noexcept = default;
    Expression& operator=(Expression&&) noexcept = default;
    Expression(const Expression& other) : node_(clone(other.node_.get())) {}
    Expression& operator=(const Expression& other) {
        if (this != &other) node_ = clone(other.node_.get());
        return *this;
    }

    bool empty() const { return node_ == nullptr; }
    bool is_leaf() const { return node_ && !node_->left; }
    std::int64_t leaf_value() const { return node_->value; }
    BinOp op() const { return node_->op; }

    friend bool operator==(const Expression& a, const Expression& b) {
        return equal(a.node_.get(), b.node_.get());
    }

    void collect_literals(std::vector<std::int64_t>& out) const { collect(node_.get(), out); }

    std::vector<std::int64_t> literals() const {
        std::vector<std::int64_t> out;
        collect_literals(out);
        return out;
    }

    Rational evaluate() const { return eval(node_.get()); }

    /// Minimal parenthesisation that reparses to the identical tree under
    /// left-associative precedence.
    std::string render() const {
        std::string out;
        render_node(node_.get(), out, /*parent_prec=*/0, /*right_side=*/false);
        return out;
    }

private:
    struct Node {
        std::int64_t value = 0;  // leaf payload when left == nullptr
        BinOp op = BinOp::Add;
        std::unique_ptr<Node> left;
        std::unique_ptr<Node> right;
    };

    static std::unique_ptr<Node> clone(const Node* n) {
        if (!n) return nullptr;
        auto c = std::make_unique<Node>();
        c->value = n->value;
        c->op = n->op;
        c->left = clone(n->left.get());
        c->right = clone(n->right.get());
        return c;
    }

    static bool equal(const Node* a, const Node* b) {
        if (!a || !b) return a == b;
        if (!a->left != !b->left) return false;
        if (!a->left) return a->value == b->value;
        return a->op == b->op && equal(a->left.get(), b->left.get()) &&
               equal(a->right.get(), b->right.get());
    }

    static void collect(const Node* n, std::vector<std::int64_t>& out) {
        if (!n) return;
        if (!n->left) {
            out.push_back(n->value);
            return;
        }
        collect(n->left.get(), out);
        collect(n->right.get(), out);
    }

    static Rational eval(const Node* n) {
        if (!n) throw std::logic_error("evaluate: empty expression");
        if (!n->left) return Rational(n->value);
        Rational l = eval(n->left.get());
        Rational r = eval(n->right.get());
        switch (n->op) {
            case BinOp::Add: return l + r;
            case BinOp::Sub: return l - r;
            case BinOp::Mul: return l * r;
            case BinOp::Div:
                if (r == 0) throw std::domain_error("division by zero");
                return l / r;
        }
        throw std::logic_error("evaluate: bad operator");
    }

    static int precedence(BinOp op) {
        return (op == BinOp::Add || op == BinOp::Sub) ? 1 : 2;
    }

    static void render_node(const Node* n, std::string& out, int parent_prec, bool right_side) {
        if (!n) return;
        if (!n->left) {
            out += std::to_string(n->value);
            return;
        }
        int prec = precedence(n->op);
        // The right operand of an equal-precedence parent needs parens to
        // survive left-associative reparsing.
        bool parens = prec < parent_prec || (prec == parent_prec && right_side);
        if (parens) out += '(';
        render_node(n->left.get(), out, prec, false);
        out += ' ';
        out += op_symbol(n->op);
        out += ' ';
        render_node(n->right.get(), out, prec, true);
        if (parens) out += ')';
    }

    std::unique_ptr<Node> node_;
};

struct ParseError : std::runtime_error {
    ParseError(std::size_t offset_, const std::string& what_)
        : std::runtime_error("parse error at offset " + std::to_string(offset_) + ": " + what_),
          offset(offset_) {}
    std::size_t offset;
};

namespace detail {

// Tokenizer accepting ASCII operators plus the typographic aliases
// U+00D7 (×), U+00F7 (÷) and U+2212 (−).
struct Lexer {
    std::string_view text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() &&
               (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n' || text[pos] == '\r'))
            ++pos;
    }

    bool match_bytes(std::string_view bytes) {
        if (text.substr(pos, bytes.size()) == bytes) {
            pos += bytes.size();
            return true;
        }
        return false;
    }

    // Returns one of: '0' (integer, value in out_value), '+','-','*','/','(',')','=', or
    // '\0' for end of input.
    char next(std::int64_t& out_value, std::size_t& tok_offset) {
        skip_ws();
        tok_offset = pos;
        if (pos >= text.size()) return '\0';
        char c = text[pos];
        if (c >= '0' && c <= '9') {
            std::int64_t v = 0;
            while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
                int digit = text[pos] - '0';
                if (v > (INT64_MAX - digit) / 10)
                    throw ParseError(tok_offset, "integer literal out of range");
                v = v * 10 + digit;
                ++pos;
            }
            out_value = v;
            return '0';
        }
        switch (c) {
            case '+': case '-': case '*': case '/': case '(': case ')': case '=':
                ++pos;
                return c;
            default: break;
        }
        if (match_bytes("\xc3\x97")) return '*';          // ×
        if (match_bytes("\xc3\xb7")) return '/';          // ÷
        if (match_bytes("\xe2\x88\x92")) return '-';      // −
        throw ParseError(tok_offset, "unexpected character");
    }
};

struct Parser {
    Lexer lex;
    char tok = '\0';
    std::int64_t tok_value = 0;
    std::size_t tok_offset = 0;

    void advance() { tok = lex.next(tok_value, tok_offset); }

    Expression parse_factor() {
        if (tok == '0') {
            Expression e = Expression::leaf(tok_value);
            advance();
            return e;
        }
        if (tok == '(') {
            advance();
            if (tok == ')') throw ParseError(tok_offset, "empty parentheses");
            Expression e = parse_expr();
            if (tok != ')') throw ParseError(tok_offset, "expected ')'");
            advance();
            return e;
        }
        throw ParseError(tok_offset, "expected operand");
    }

    Expression parse_term() {
        Expression e = parse_factor();
        while (tok == '*' || tok == '/') {
            BinOp op = tok == '*' ? BinOp::Mul : BinOp::Div;
            advance();
            e = Expression::binary(op, std::move(e), parse_factor());
        }
        return e;
    }

    Expression parse_expr() {
        Expression e = parse_term();
        while (tok == '+' || tok == '-') {
            BinOp op = tok == '+' ? BinOp::Add : BinOp::Sub;
            advance();
            e = Expression::binary(op, std::move(e), parse_term());
        }
        return e;
    }
};

}  // namespace detail

/// Parses one expression. A trailing "= ..." (the echoed result) is ignored.
inline Expression parse_expression(std::string_view text) {
    detail::Parser p;
    p.lex.text = text;
    p.advance();
    if (p.tok == '\0') throw ParseError(p.tok_offset, "expected operand");
    Expression e = p.parse_expr();
    if (p.tok != '=' && p.tok != '\0')
        throw ParseError(p.tok_offset, "trailing input after expression");
    return e;
}

inline Rational evaluate(std::string_view text) { return parse_expression(text).evaluate(); }

struct CountdownProblem {
    std::vector<std::int64_t> numbers;  // multiset, 2..6 positive integers
    std::int64_t target = 0;
};

/// Problem line format: numbers comma-separated, whitespace, target.
inline CountdownProblem parse_problem_line(std::string_view line) {
    std::istringstream in{std::string(line)};
    std::string nums;
    CountdownProblem p;
    if (!(in >> nums >> p.target)) throw std::runtime_error("malformed problem line: " + std::string(line));
    std::size_t start = 0;
    for (std::size_t i = 0; i <= nums.size(); ++i) {
        if (i == nums.size() || nums[i] == ',') {
            p.numbers.push_back(std::stoll(nums.substr(start, i - start)));
            start = i + 1;
        }
    }
    if (p.numbers.empty()) throw std::runtime_error("problem line has no numbers");
    return p;
}

inline std::string format_problem_line(const CountdownProblem& p) {
    std::string out;
    for (std::size_t i = 0; i < p.numbers.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(p.numbers[i]);
    }
    out += ' ';
    out += std::to_string(p.target);
    return out;
}

struct VerifyResult {
    bool valid = false;
    std::vector<std::string> reasons;
};

/// Valid iff the text parses, its leaf literals are exactly the problem's
/// multiset (each number used once), and the exact value equals the target.
inline VerifyResult verify_solution(const CountdownProblem& problem, std::string_view expr_text) {
    VerifyResult r;
    Expression expr;
    try {
        expr = parse_expression(expr_text);
    } catch (const ParseError& e) {
        r.reasons.emplace_back(e.what());
        return r;
    }
    std::vector<std::int64_t> used = expr.literals();
    std::vector<std::int64_t> given = problem.numbers;
    std::sort(used.begin(), used.end());
    std::sort(given.begin(), given.end());
    if (used != given) {
        auto join = [](const std::vector<std::int64_t>& v) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) s += ',';
                s += std::to_string(v[i]);
            }
            return s;
        };
        r.reasons.push_back("number multiset mismatch: expression uses {" + join(used) +
                            "}, problem provides {" + join(given) + "}");
    }
    Rational value;
    try {
        value = expr.evaluate();
    } catch (const std::domain_error& e) {
        r.reasons.emplace_back(e.what());
        return r;
    }
    if (value != Rational(problem.target)) {
        std::ostringstream ss;
        ss << "value " << value << " does not equal target " << problem.target;
        r.reasons.push_back(ss.str());
    }
    r.valid = r.reasons.empty();
    return r;
}

namespace detail {

// Binary tree shapes over n leaves, enumerated in a fixed order (left split
// size ascending, left shapes before right). Internal nodes are indexed in
// pre-order for operator assignment.
struct Shape {
    // For each internal node in pre-order: number of leaves in its left subtree
    // relative to the subtree it roots. A flattened recursive description.
    std::vector<int> splits;
};

inline void enumerate_shapes(int leaves, std::vector<Shape>& out, Shape& prefix) {
    if (leaves == 1) {
        out.push_back(prefix);
        return;
    }
    for (int left = 1; left < leaves; ++left) {
        prefix.splits.push_back(left);
        std::size_t mark = prefix.splits.size();
        // enumerate left subtrees, then for each, right subtrees
        std::vector<Shape> lefts;
        Shape lp;
        enumerate_shapes(left, lefts, lp);
        for (const Shape& ls : lefts) {
            prefix.splits.resize(mark);
            prefix.splits.insert(prefix.splits.end(), ls.splits.begin(), ls.splits.end());
            std::size_t mark2 = prefix.splits.size();
            std::vector<Shape> rights;
            Shape rp;
            enumerate_shapes(leaves - left, rights, rp);
            for (const Shape& rs : rights) {
                prefix.splits.resize(mark2);
                prefix.splits.insert(prefix.splits.end(), rs.splits.begin(), rs.splits.end());
                out.push_back(prefix);
            }
        }
        prefix.splits.resize(mark - 1);
    }
}

inline const std::vector<Shape>& shapes_for(int leaves) {
    static std::vector<std::vector<Shape>> cache(7);
    auto& entry = cache.at(static_cast<std::size_t>(leaves));
    if (entry.empty()) {
        Shape prefix;
        enumerate_shapes(leaves, entry, prefix);
    }
    return entry;
}

struct ShapeWalker {
    const Shape& shape;
    const std::vector<std::int64_t>& leaves;
    const std::vector<BinOp>& ops;
    std::size_t split_idx = 0;
    std::size_t leaf_idx = 0;
    std::size_t op_idx = 0;

    // Evaluates without building a tree; throws domain_error on /0.
    Rational eval(int n_leaves) {
        if (n_leaves == 1) return Rational(leaves[leaf_idx++]);
        int left = shape.splits[split_idx++];
        BinOp op = ops[op_idx++];
        Rational l = eval(left);
        Rational r = eval(n_leaves - left);
        switch (op) {
            case BinOp::Add: return l + r;
            case BinOp::Sub: return l - r;
            case BinOp::Mul: return l * r;
            case BinOp::Div:
                if (r == 0) throw std::domain_error("division by zero");
                return l / r;
        }
        throw std::logic_error("bad op");
    }

    Expression build(int n_leaves) {
        if (n_leaves == 1) return Expression::leaf(leaves[leaf_idx++]);
        int left = shape.splits[split_idx++];
        BinOp op = ops[op_idx++];
        Expression l = build(left);
        Expression r = build(n_leaves - left);
        return Expression::binary(op, std::move(l), std::move(r));
    }
};

}  // namespace detail

/// Exhaustive search over operand permutations, tree shapes, and operator
/// assignments. Returns the first witness in enumeration order, so results
/// are deterministic.
inline std::optional<Expression> solve_brute_force(const CountdownProblem& problem) {
    const int k = static_cast<int>(problem.numbers.size());
    if (k < 1 || k > 6) throw std::invalid_argument("solve_brute_force supports 1..6 numbers");
    std::vector<std::int64_t> perm = problem.numbers;
    std::sort(perm.begin(), perm.end());
    const Rational target(problem.target);
    const auto& shapes = detail::shapes_for(k);
    const std::size_t n_ops_assignments = k == 1 ? 1 : (std::size_t{1} << (2 * (k - 1)));
    std::vector<BinOp> ops(static_cast<std::size_t>(k > 0 ? k - 1 : 0));
    do {
        for (const auto& shape : shapes) {
            for (std::size_t code = 0; code < n_ops_assignments; ++code) {
                std::size_t c = code;
                for (int i = 0; i < k - 1; ++i) {
                    ops[static_cast<std::size_t>(i)] = static_cast<BinOp>(c & 3);
                    c >>= 2;
                }
                detail::ShapeWalker walker{shape, perm, ops};
                try {
                    if (walker.eval(k) == target) {
                        detail::ShapeWalker builder{shape, perm, ops};
                        return builder.build(k);
                    }
                } catch (const std::domain_error&) {
                    // division by zero: not a candidate
                }
            }
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::nullopt;
}

struct GeneratorOptions {
    int k_numbers = 3;  // 3..4
    std::int64_t value_min = 1, value_max = 99;
    std::int64_t target_min = 1, target_max = 99;
    int attempt_budget_per_problem = 10000;
};

/// Every emitted problem is brute-force solvable; reproducible from seed.
inline std::vector<CountdownProblem> generate_problems(int count, const GeneratorOptions& opt,
                                                       std::uint64_t seed) {
    if (opt.value_min > opt.value_max || opt.target_min > opt.target_max)
        throw std::invalid_argument("generate_problems: empty range");
    if (opt.k_numbers < 2 || opt.k_numbers > 6)
        throw std::invalid_argument("generate_problems: k_numbers out of range");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int64_t> value_dist(opt.value_min, opt.value_max);
    std::uniform_int_distribution<std::int64_t> target_dist(opt.target_min, opt.target_max);
    std::vector<CountdownProblem> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        bool emitted = false;
        for (int attempt = 0; attempt < opt.attempt_budget_per_problem; ++attempt) {
            CountdownProblem p;
            p.numbers.resize(static_cast<std::size_t>(opt.k_numbers));
            for (auto& n : p.numbers) n = value_dist(rng);
            p.target = target_dist(rng);
            if (solve_brute_force(p)) {
                out.push_back(std::move(p));
                emitted = true;
                break;
            }
        }
        if (!emitted)
            throw std::runtime_error("generate_problems: attempt budget exhausted; ranges too tight");
    }
    return out;
}

struct RewardBreakdown {
    int accuracy = 0;   // 1 iff first answer block verifies against the problem
    int format_ok = 0;  // 1 iff >=1 think block and a single parseable answer block
    double reward = 0.0;
};

constexpr double kAccuracyWeight = 0.9;
constexpr double kFormatWeight = 0.1;

/// Accuracy x 0.9 + format x 0.1. Format requires at least one think block and
/// a single answer block holding one parseable expression; accuracy is judged
/// on the first answer block.
inline RewardBreakdown reward(const CountdownProblem& problem, std::string_view completion) {
    RewardBreakdown out;
    auto thinks = trace::extract_all_blocks(completion, trace::think_spec());
    auto answers = trace::extract_all_blocks(completion, trace::answer_spec());
    bool answer_parses = false;
    if (!answers.empty()) {
        try {
            parse_expression(answers.front());
            answer_parses = true;
        } catch (const ParseError&) {
        }
        if (answer_parses && verify_solution(problem, answers.front()).valid) out.accuracy = 1;
    }
    if (!thinks.empty() && answers.size() == 1 && answer_parses) out.format_ok = 1;
    out.reward = kAccuracyWeight * out.accuracy + kFormatWeight * out.format_ok;
    return out;
}

}  // namespace tracelab::countdown
