#include "mstate/timefun.hpp"

#include "mstate/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

namespace mstate {

enum class Kind { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Exp, Ln, Ind };
enum class Cmp { Less, LessEq, Greater, GreaterEq };

struct TimeFunction::Node {
    Kind kind = Kind::Const;
    double value = 0.0;
    Cmp cmp = Cmp::Less;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;
};

namespace {

using NodePtr = std::shared_ptr<const TimeFunction::Node>;

NodePtr make_const(double v) {
    auto n = std::make_shared<TimeFunction::Node>();
    n->kind = Kind::Const;
    n->value = v;
    return n;
}

NodePtr make_node(Kind kind, NodePtr a, NodePtr b = nullptr) {
    auto n = std::make_shared<TimeFunction::Node>();
    n->kind = kind;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

double eval_node(const TimeFunction::Node& n, double t) {
    switch (n.kind) {
    case Kind::Const:
        return n.value;
    case Kind::Var:
        return t;
    case Kind::Neg:
        return -eval_node(*n.a, t);
    case Kind::Add:
        return eval_node(*n.a, t) + eval_node(*n.b, t);
    case Kind::Sub:
        return eval_node(*n.a, t) - eval_node(*n.b, t);
    case Kind::Mul: {
        // Indicator factors are evaluated first; a zero mask skips the other
        // operand entirely.
        if (n.b->kind == Kind::Ind) {
            const double mask = eval_node(*n.b, t);
            return mask == 0.0 ? 0.0 : eval_node(*n.a, t) * mask;
        }
        const double lhs = eval_node(*n.a, t);
        if (n.a->kind == Kind::Ind && lhs == 0.0) return 0.0;
        return lhs * eval_node(*n.b, t);
    }
    case Kind::Div: {
        const double den = eval_node(*n.b, t);
        if (den == 0.0) throw DomainError("division by zero", t);
        return eval_node(*n.a, t) / den;
    }
    case Kind::Pow: {
        const double base = eval_node(*n.a, t);
        const double expo = eval_node(*n.b, t);
        if (expo != std::floor(expo) && !(base > 0.0))
            throw DomainError("non-integer power of non-positive base", t);
        return std::pow(base, expo);
    }
    case Kind::Exp:
        return std::exp(eval_node(*n.a, t));
    case Kind::Ln: {
        const double x = eval_node(*n.a, t);
        if (!(x > 0.0)) throw DomainError("logarithm of non-positive value", t);
        return std::log(x);
    }
    case Kind::Ind: {
        const double lhs = eval_node(*n.a, t);
        const double rhs = eval_node(*n.b, t);
        bool on = false;
        switch (n.cmp) {
        case Cmp::Less: on = lhs < rhs; break;
        case Cmp::LessEq: on = lhs <= rhs; break;
        case Cmp::Greater: on = lhs > rhs; break;
        case Cmp::GreaterEq: on = lhs >= rhs; break;
        }
        return on ? 1.0 : 0.0;
    }
    }
    return 0.0;
}

bool depends_on_t(const TimeFunction::Node& n) {
    if (n.kind == Kind::Var) return true;
    return (n.a && depends_on_t(*n.a)) || (n.b && depends_on_t(*n.b));
}

bool is_affine(const TimeFunction::Node& n) {
    switch (n.kind) {
    case Kind::Const:
    case Kind::Var:
        return true;
    case Kind::Neg:
        return is_affine(*n.a);
    case Kind::Add:
    case Kind::Sub:
        return is_affine(*n.a) && is_affine(*n.b);
    case Kind::Mul:
        return is_affine(*n.a) && is_affine(*n.b) && !(depends_on_t(*n.a) && depends_on_t(*n.b));
    case Kind::Div:
        return is_affine(*n.a) && !depends_on_t(*n.b);
    default:
        return !depends_on_t(n);
    }
}

void format_number(std::string& out, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

const char* cmp_text(Cmp c) {
    switch (c) {
    case Cmp::Less: return "<";
    case Cmp::LessEq: return "<=";
    case Cmp::Greater: return ">";
    case Cmp::GreaterEq: return ">=";
    }
    return "?";
}

void print_node(std::string& out, const TimeFunction::Node& n) {
    auto binary = [&](const char* op) {
        out += '(';
        print_node(out, *n.a);
        out += op;
        print_node(out, *n.b);
        out += ')';
    };
    switch (n.kind) {
    case Kind::Const:
        if (n.value < 0.0 || std::signbit(n.value)) {
            out += "(-";
            format_number(out, -n.value);
            out += ')';
        } else {
            format_number(out, n.value);
        }
        break;
    case Kind::Var: out += 't'; break;
    case Kind::Neg:
        out += "(-";
        print_node(out, *n.a);
        out += ')';
        break;
    case Kind::Add: binary(" + "); break;
    case Kind::Sub: binary(" - "); break;
    case Kind::Mul: binary(" * "); break;
    case Kind::Div: binary(" / "); break;
    case Kind::Pow: binary("^"); break;
    case Kind::Exp:
        out += "exp(";
        print_node(out, *n.a);
        out += ')';
        break;
    case Kind::Ln:
        out += "ln(";
        print_node(out, *n.a);
        out += ')';
        break;
    case Kind::Ind:
        out += "ind(";
        print_node(out, *n.a);
        out += ' ';
        out += cmp_text(n.cmp);
        out += ' ';
        print_node(out, *n.b);
        out += ')';
        break;
    }
}

void collect_thresholds(const TimeFunction::Node& n, std::set<double>& out) {
    if (n.kind == Kind::Ind) {
        // lhs - rhs = slope * t + intercept; both sides were validated affine.
        const double f0 = eval_node(*n.a, 0.0) - eval_node(*n.b, 0.0);
        const double f1 = eval_node(*n.a, 1.0) - eval_node(*n.b, 1.0);
        const double slope = f1 - f0;
        if (slope != 0.0) out.insert(-f0 / slope);
    }
    if (n.a) collect_thresholds(*n.a, out);
    if (n.b) collect_thresholds(*n.b, out);
}

class Parser {
public:
    Parser(std::string_view src, const ConstantTable& constants)
        : src_(src), constants_(constants) {}

    NodePtr parse() {
        auto e = expr();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected character '" + std::string(1, src_[pos_]) + "'",
                                      "operator or end of input");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg, const std::string& expected) const {
        throw ParseError(msg, pos_, expected);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(pos_ < src_.size() ? "unexpected character '" + std::string(1, src_[pos_]) + "'"
                                                : std::string("unexpected end of input"),
                             std::string("'") + c + "'");
    }

    NodePtr expr() {
        auto lhs = term();
        for (;;) {
            if (accept('+')) lhs = make_node(Kind::Add, lhs, term());
            else if (accept('-')) lhs = make_node(Kind::Sub, lhs, term());
            else return lhs;
        }
    }

    NodePtr term() {
        auto lhs = factor();
        for (;;) {
            if (accept('*')) lhs = make_node(Kind::Mul, lhs, factor());
            else if (accept('/')) lhs = make_node(Kind::Div, lhs, factor());
            else return lhs;
        }
    }

    NodePtr factor() {
        auto b = base();
        if (accept('^')) return make_node(Kind::Pow, b, factor());
        return b;
    }

    NodePtr base() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of input", "number, 't', '(', '-' or function");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            auto e = expr();
            expect(')');
            return e;
        }
        if (c == '-') {
            ++pos_;
            return make_node(Kind::Neg, base());
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail("unexpected character '" + std::string(1, c) + "'", "number, 't', '(', '-' or function");
    }

    NodePtr number() {
        const std::size_t start = pos_;
        bool seen_dot = false;
        bool seen_digit = false;
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c))) {
                seen_digit = true;
            } else if (c == '.') {
                if (seen_dot) {
                    pos_ = start;
                    fail("malformed numeric literal", "number");
                }
                seen_dot = true;
            } else {
                break;
            }
            ++pos_;
        }
        if (!seen_digit) {
            pos_ = start;
            fail("malformed numeric literal", "number");
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            const std::size_t digits = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            if (pos_ == digits) {
                pos_ = start;
                fail("malformed numeric literal", "exponent digits");
            }
        }
        if (pos_ < src_.size() &&
            (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' || src_[pos_] == '_')) {
            pos_ = start;
            fail("malformed numeric literal", "number");
        }
        double v = 0.0;
        const auto text = src_.substr(start, pos_ - start);
        // from_chars rejects a leading '.', so parse a zero-prefixed copy.
        const std::string buf = text.front() == '.' ? "0" + std::string(text) : std::string(text);
        auto res = std::from_chars(buf.data(), buf.data() + buf.size(), v);
        if (res.ec != std::errc{} || res.ptr != buf.data() + buf.size()) {
            pos_ = start;
            fail("malformed numeric literal", "number");
        }
        return make_const(v);
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string name(src_.substr(start, pos_ - start));
        if (name == "t") return make_node(Kind::Var, nullptr);
        if (name == "exp" || name == "ln") {
            expect('(');
            auto arg = expr();
            expect(')');
            return make_node(name == "exp" ? Kind::Exp : Kind::Ln, arg);
        }
        if (name == "ind") {
            expect('(');
            const std::size_t cmp_start = pos_;
            auto lhs = expr();
            skip_ws();
            Cmp cmp;
            if (accept('<')) cmp = accept('=') ? Cmp::LessEq : Cmp::Less;
            else if (accept('>')) cmp = accept('=') ? Cmp::GreaterEq : Cmp::Greater;
            else fail("missing comparison in indicator", "'<', '<=', '>' or '>='");
            auto rhs = expr();
            expect(')');
            if (!is_affine(*lhs) || !is_affine(*rhs)) {
                pos_ = cmp_start;
                fail("indicator comparison operands must be affine in t", "affine expression");
            }
            auto n = std::make_shared<TimeFunction::Node>();
            n->kind = Kind::Ind;
            n->cmp = cmp;
            n->a = lhs;
            n->b = rhs;
            return n;
        }
        if (auto it = constants_.find(name); it != constants_.end()) return make_const(it->second);
        pos_ = start;
        fail("unknown identifier '" + name + "'", "'t', 'exp', 'ln', 'ind' or a declared constant");
    }

    std::string_view src_;
    const ConstantTable& constants_;
    std::size_t pos_ = 0;
};

} // namespace

TimeFunction::TimeFunction() : TimeFunction(make_const(0.0)) {}

TimeFunction::TimeFunction(std::shared_ptr<const Node> root) : root_(std::move(root)) {
    std::set<double> thresholds;
    try {
        collect_thresholds(*root_, thresholds);
    } catch (const DomainError& e) {
        throw ParseError(std::string("indicator operand cannot be evaluated: ") + e.what(), 0, "");
    }
    breakpoints_.assign(thresholds.begin(), thresholds.end());
}

TimeFunction TimeFunction::constant(double value) { return TimeFunction(make_const(value)); }

double TimeFunction::evaluate(double t) const {
    const double v = eval_node(*root_, t);
    if (!std::isfinite(v)) throw DomainError("non-finite value", t);
    return v;
}

std::vector<double> TimeFunction::breakpoints_in(double s, double t) const {
    std::vector<double> out;
    for (double b : breakpoints_)
        if (b > s && b < t) out.push_back(b);
    return out;
}

bool TimeFunction::is_constant() const { return root_->kind == Kind::Const; }

bool TimeFunction::is_zero() const { return is_constant() && root_->value == 0.0; }

std::string TimeFunction::to_string() const {
    std::string out;
    print_node(out, *root_);
    return out;
}

TimeFunction parse_timefun(std::string_view src, const ConstantTable& constants) {
    for (const auto& [name, value] : constants)
        if (!std::isfinite(value)) throw ConfigError("constant '" + name + "' is not finite");
    Parser parser(src, constants);
    return TimeFunction(parser.parse());
}

} // namespace mstate
