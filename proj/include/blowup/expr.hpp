#pragma once

#include <cctype>
#include <memory>
#include <string>
#include <string_view>
#include <utility>

#include "blowup/common.hpp"

namespace blowup {

// ---------------------------------------------------------------------------
// Arithmetic expressions in one variable x.
//
// Grammar (recursive descent, standard precedence, left-associative):
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := '-' factor | atom ('^' number)?
//   atom   := number | 'x' | fn '(' expr ')' | '(' expr ')'
//   fn     := sin | cos | exp | tanh | sech2
//
// Unary minus binds looser than '^', so "-x^2" means -(x^2).
// The function set is closed under differentiation (tanh' = sech2,
// sech2' = -2*sech2*tanh), which keeps initial data smooth by construction.
// ---------------------------------------------------------------------------

struct ParseError : Error {
    std::size_t offset;
    ParseError(const std::string& msg, std::size_t off)
        : Error(msg + " at offset " + std::to_string(off)), offset(off) {}
};

struct EvalError : Error {
    double at_x;
    EvalError(const std::string& msg, double x)
        : Error(msg + " at x = " + format_g17(x)), at_x(x) {}
};

class Expr {
public:
    enum class Kind { Number, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
    enum class Fn { Sin, Cos, Exp, Tanh, Sech2 };

    struct Node {
        Kind kind;
        double value = 0.0;  // Number payload, or the constant exponent of Pow
        Fn fn = Fn::Sin;
        std::shared_ptr<const Node> a, b;
    };
    using NodePtr = std::shared_ptr<const Node>;

    Expr() : node_(number_node(0.0)) {}

    static Expr constant(double v) { return Expr(number_node(v)); }
    static Expr variable() {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Var;
        return Expr(std::move(n));
    }

    friend Expr operator+(const Expr& l, const Expr& r) { return Expr::binary(Kind::Add, l, r); }
    friend Expr operator-(const Expr& l, const Expr& r) { return Expr::binary(Kind::Sub, l, r); }
    friend Expr operator*(const Expr& l, const Expr& r) { return Expr::binary(Kind::Mul, l, r); }
    friend Expr operator/(const Expr& l, const Expr& r) { return Expr::binary(Kind::Div, l, r); }

    bool is_constant() const { return node_->kind == Kind::Number; }
    double constant_value() const { return node_->value; }

    double eval(double x) const { return eval_node(*node_, x); }

    Expr derivative() const { return Expr(diff_node(node_)); }

    std::string str() const {
        std::string out;
        print_node(*node_, out, 0);
        return out;
    }

    /// Parses `text`; throws ParseError with the byte offset on bad input.
    static Expr parse(std::string_view text);

private:
    explicit Expr(NodePtr n) : node_(std::move(n)) {}

    static NodePtr number_node(double v) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Number;
        n->value = v;
        return n;
    }

    // Folding is limited to exact identities (neutral/absorbing elements), so
    // evaluation results are unchanged bit for bit.
    static Expr binary(Kind k, const Expr& l, const Expr& r) {
        const NodePtr& a = l.node_;
        const NodePtr& b = r.node_;
        const bool ac = a->kind == Kind::Number;
        const bool bc = b->kind == Kind::Number;
        switch (k) {
            case Kind::Add:
                if (ac && a->value == 0.0) return Expr(b);
                if (bc && b->value == 0.0) return Expr(a);
                break;
            case Kind::Sub:
                if (bc && b->value == 0.0) return Expr(a);
                break;
            case Kind::Mul:
                if ((ac && a->value == 0.0) || (bc && b->value == 0.0)) return constant(0.0);
                if (ac && a->value == 1.0) return Expr(b);
                if (bc && b->value == 1.0) return Expr(a);
                break;
            case Kind::Div:
                if (ac && a->value == 0.0) return constant(0.0);
                if (bc && b->value == 1.0) return Expr(a);
                break;
            default:
                break;
        }
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->a = a;
        n->b = b;
        return Expr(std::move(n));
    }

    static Expr negate(const Expr& e) {
        if (e.node_->kind == Kind::Number) return constant(-e.node_->value);
        auto n = std::make_shared<Node>();
        n->kind = Kind::Neg;
        n->a = e.node_;
        return Expr(std::move(n));
    }

    static Expr power(const Expr& base, double exponent) {
        if (exponent == 1.0) return base;
        if (exponent == 0.0) return constant(1.0);
        auto n = std::make_shared<Node>();
        n->kind = Kind::Pow;
        n->a = base.node_;
        n->value = exponent;
        return Expr(std::move(n));
    }

    static Expr call(Fn f, const Expr& arg) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Call;
        n->fn = f;
        n->a = arg.node_;
        return Expr(std::move(n));
    }

    static double eval_node(const Node& n, double x) {
        double v = 0.0;
        switch (n.kind) {
            case Kind::Number: return n.value;
            case Kind::Var: return x;
            case Kind::Neg: return -eval_node(*n.a, x);
            case Kind::Add: return eval_node(*n.a, x) + eval_node(*n.b, x);
            case Kind::Sub: return eval_node(*n.a, x) - eval_node(*n.b, x);
            case Kind::Mul: return eval_node(*n.a, x) * eval_node(*n.b, x);
            case Kind::Div: {
                const double den = eval_node(*n.b, x);
                if (den == 0.0) throw EvalError("division by zero", x);
                v = eval_node(*n.a, x) / den;
                break;
            }
            case Kind::Pow:
                v = std::pow(eval_node(*n.a, x), n.value);
                break;
            case Kind::Call: {
                const double u = eval_node(*n.a, x);
                switch (n.fn) {
                    case Fn::Sin: v = std::sin(u); break;
                    case Fn::Cos: v = std::cos(u); break;
                    case Fn::Exp: v = std::exp(u); break;
                    case Fn::Tanh: v = std::tanh(u); break;
                    case Fn::Sech2: {
                        const double c = std::cosh(u);
                        v = 1.0 / (c * c);
                        break;
                    }
                }
                break;
            }
        }
        if (!std::isfinite(v)) throw EvalError("non-finite value", x);
        return v;
    }

    static NodePtr diff_node(const NodePtr& n) {
        switch (n->kind) {
            case Kind::Number: return number_node(0.0);
            case Kind::Var: return number_node(1.0);
            case Kind::Neg: return negate(Expr(diff_node(n->a))).node_;
            case Kind::Add: return (Expr(diff_node(n->a)) + Expr(diff_node(n->b))).node_;
            case Kind::Sub: return (Expr(diff_node(n->a)) - Expr(diff_node(n->b))).node_;
            case Kind::Mul: {
                Expr a(n->a), b(n->b);
                return (Expr(diff_node(n->a)) * b + a * Expr(diff_node(n->b))).node_;
            }
            case Kind::Div: {
                Expr a(n->a), b(n->b);
                Expr num = Expr(diff_node(n->a)) * b - a * Expr(diff_node(n->b));
                return (num / (b * b)).node_;
            }
            case Kind::Pow: {
                // d/dx u^c = c * u^(c-1) * u'
                Expr u(n->a);
                Expr d = constant(n->value) * power(u, n->value - 1.0) * Expr(diff_node(n->a));
                return d.node_;
            }
            case Kind::Call: {
                Expr u(n->a);
                Expr du(diff_node(n->a));
                Expr outer = constant(0.0);
                switch (n->fn) {
                    case Fn::Sin: outer = call(Fn::Cos, u); break;
                    case Fn::Cos: outer = negate(call(Fn::Sin, u)); break;
                    case Fn::Exp: outer = call(Fn::Exp, u); break;
                    case Fn::Tanh: outer = call(Fn::Sech2, u); break;
                    case Fn::Sech2:
                        outer = constant(-2.0) * call(Fn::Sech2, u) * call(Fn::Tanh, u);
                        break;
                }
                return (outer * du).node_;
            }
        }
        throw Error("unreachable expression node");
    }

    // Parenthesize by precedence: 0 add, 1 mul, 2 unary, 3 pow/atom.
    static void print_node(const Node& n, std::string& out, int parent_prec) {
        auto wrap = [&](int prec, auto&& body) {
            if (prec < parent_prec) out += '(';
            body();
            if (prec < parent_prec) out += ')';
        };
        switch (n.kind) {
            case Kind::Number:
                if (n.value < 0.0) {
                    wrap(2, [&] { out += format_g17(n.value); });
                } else {
                    out += format_g17(n.value);
                }
                return;
            case Kind::Var: out += 'x'; return;
            case Kind::Neg:
                wrap(2, [&] {
                    out += '-';
                    print_node(*n.a, out, 3);
                });
                return;
            case Kind::Add:
            case Kind::Sub:
                wrap(0, [&] {
                    print_node(*n.a, out, 0);
                    out += (n.kind == Kind::Add) ? '+' : '-';
                    print_node(*n.b, out, 1);
                });
                return;
            case Kind::Mul:
            case Kind::Div:
                wrap(1, [&] {
                    print_node(*n.a, out, 1);
                    out += (n.kind == Kind::Mul) ? '*' : '/';
                    print_node(*n.b, out, 2);
                });
                return;
            case Kind::Pow:
                wrap(3, [&] {
                    print_node(*n.a, out, 4);
                    out += '^';
                    if (n.value < 0.0) {
                        out += '(';
                        out += format_g17(n.value);
                        out += ')';
                    } else {
                        out += format_g17(n.value);
                    }
                });
                return;
            case Kind::Call:
                switch (n.fn) {
                    case Fn::Sin: out += "sin"; break;
                    case Fn::Cos: out += "cos"; break;
                    case Fn::Exp: out += "exp"; break;
                    case Fn::Tanh: out += "tanh"; break;
                    case Fn::Sech2: out += "sech2"; break;
                }
                out += '(';
                print_node(*n.a, out, 0);
                out += ')';
                return;
        }
    }

    friend class ExprParser;
    NodePtr node_;
};

class ExprParser {
public:
    explicit ExprParser(std::string_view text) : text_(text) {}

    Expr run() {
        if (text_.empty()) throw ParseError("empty expression", 0);
        Expr e = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
        return e;
    }

private:
    static constexpr int kMaxDepth = 64;

    Expr parse_expr() {
        DepthGuard guard(this);
        Expr e = parse_term();
        for (;;) {
            skip_ws();
            if (accept('+')) {
                e = e + parse_term();
            } else if (accept('-')) {
                e = e - parse_term();
            } else {
                return e;
            }
        }
    }

    Expr parse_term() {
        DepthGuard guard(this);
        Expr e = parse_factor();
        for (;;) {
            skip_ws();
            if (accept('*')) {
                e = e * parse_factor();
            } else if (accept('/')) {
                e = e / parse_factor();
            } else {
                return e;
            }
        }
    }

    Expr parse_factor() {
        DepthGuard guard(this);
        skip_ws();
        if (accept('-')) return Expr::negate(parse_factor());
        Expr base = parse_atom();
        skip_ws();
        if (accept('^')) {
            skip_ws();
            const std::size_t at = pos_;
            bool neg = accept('-');
            skip_ws();
            if (pos_ >= text_.size() || !(std::isdigit(uc(text_[pos_])) || text_[pos_] == '.'))
                throw ParseError("non-constant exponent", at);
            double v = parse_number();
            return Expr::power(base, neg ? -v : v);
        }
        return base;
    }

    Expr parse_atom() {
        DepthGuard guard(this);
        skip_ws();
        if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
        const char c = text_[pos_];
        if (std::isdigit(uc(c)) || c == '.') return Expr::constant(parse_number());
        if (accept('(')) {
            Expr e = parse_expr();
            expect(')');
            return e;
        }
        if (std::isalpha(uc(c))) {
            const std::size_t at = pos_;
            std::string name;
            while (pos_ < text_.size() && std::isalnum(uc(text_[pos_]))) name += text_[pos_++];
            if (name == "x") return Expr::variable();
            Expr::Fn fn;
            if (name == "sin") fn = Expr::Fn::Sin;
            else if (name == "cos") fn = Expr::Fn::Cos;
            else if (name == "exp") fn = Expr::Fn::Exp;
            else if (name == "tanh") fn = Expr::Fn::Tanh;
            else if (name == "sech2") fn = Expr::Fn::Sech2;
            else throw ParseError("unknown function '" + name + "'", at);
            expect('(');
            Expr arg = parse_expr();
            expect(')');
            return Expr::call(fn, arg);
        }
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    double parse_number() {
        const std::size_t at = pos_;
        std::string digits;
        while (pos_ < text_.size() && (std::isdigit(uc(text_[pos_])) || text_[pos_] == '.'))
            digits += text_[pos_++];
        // optional exponent
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
            if (look < text_.size() && std::isdigit(uc(text_[look]))) {
                digits += text_.substr(pos_, look + 1 - pos_);
                pos_ = look + 1;
                while (pos_ < text_.size() && std::isdigit(uc(text_[pos_]))) digits += text_[pos_++];
            }
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(digits, &used);
            if (used != digits.size()) throw ParseError("malformed number", at);
            return v;
        } catch (const std::exception&) {
            throw ParseError("malformed number", at);
        }
    }

    struct DepthGuard {
        explicit DepthGuard(ExprParser* p) : parser(p) {
            if (++parser->depth_ > kMaxDepth)
                throw ParseError("expression too deeply nested", parser->pos_);
        }
        ~DepthGuard() { --parser->depth_; }
        ExprParser* parser;
    };

    static unsigned char uc(char c) { return static_cast<unsigned char>(c); }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(uc(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        skip_ws();
        if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos_);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    int depth_ = 0;
};

inline Expr Expr::parse(std::string_view text) { return ExprParser(text).run(); }

}  // namespace blowup
