#include "weylab/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace weylab {

namespace {

bool is_const(const ExprPtr& e, double v) {
    return e->kind == Expr::Kind::Const && e->value == v;
}

ExprPtr node(Expr::Kind k, std::vector<ExprPtr> kids, double v = 0.0, std::string name = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    e->value = v;
    e->name = std::move(name);
    e->kids = std::move(kids);
    return e;
}

}  // namespace

ExprPtr make_const(double v) { return node(Expr::Kind::Const, {}, v); }
ExprPtr make_var(std::string name) { return node(Expr::Kind::Var, {}, 0.0, std::move(name)); }

ExprPtr add(ExprPtr a, ExprPtr b) {
    if (a->kind == Expr::Kind::Const && b->kind == Expr::Kind::Const)
        return make_const(a->value + b->value);
    if (is_const(a, 0)) return b;
    if (is_const(b, 0)) return a;
    return node(Expr::Kind::Add, {std::move(a), std::move(b)});
}

ExprPtr sub(ExprPtr a, ExprPtr b) {
    if (a->kind == Expr::Kind::Const && b->kind == Expr::Kind::Const)
        return make_const(a->value - b->value);
    if (is_const(b, 0)) return a;
    if (is_const(a, 0)) return neg(std::move(b));
    return node(Expr::Kind::Sub, {std::move(a), std::move(b)});
}

ExprPtr mul(ExprPtr a, ExprPtr b) {
    if (a->kind == Expr::Kind::Const && b->kind == Expr::Kind::Const)
        return make_const(a->value * b->value);
    if (is_const(a, 0) || is_const(b, 0)) return make_const(0);
    if (is_const(a, 1)) return b;
    if (is_const(b, 1)) return a;
    return node(Expr::Kind::Mul, {std::move(a), std::move(b)});
}

ExprPtr divide(ExprPtr a, ExprPtr b) {
    if (is_const(a, 0)) return make_const(0);
    if (is_const(b, 1)) return a;
    if (a->kind == Expr::Kind::Const && b->kind == Expr::Kind::Const && b->value != 0)
        return make_const(a->value / b->value);
    return node(Expr::Kind::Div, {std::move(a), std::move(b)});
}

ExprPtr neg(ExprPtr a) {
    if (a->kind == Expr::Kind::Const) return make_const(-a->value);
    if (a->kind == Expr::Kind::Neg) return a->kids[0];
    return node(Expr::Kind::Neg, {std::move(a)});
}

ExprPtr fn(Expr::Kind k, ExprPtr a) {
    if (a->kind == Expr::Kind::Const) {
        switch (k) {
            case Expr::Kind::Sin: return make_const(std::sin(a->value));
            case Expr::Kind::Cos: return make_const(std::cos(a->value));
            case Expr::Kind::Exp: return make_const(std::exp(a->value));
            case Expr::Kind::Sqrt: return make_const(std::sqrt(a->value));
            case Expr::Kind::Log: return make_const(std::log(a->value));
            default: break;
        }
    }
    return node(k, {std::move(a)});
}

ExprPtr pow_expr(ExprPtr a, ExprPtr b) {
    if (is_const(b, 1)) return a;
    if (is_const(b, 0)) return make_const(1);
    if (a->kind == Expr::Kind::Const && b->kind == Expr::Kind::Const)
        return make_const(std::pow(a->value, b->value));
    return node(Expr::Kind::Pow, {std::move(a), std::move(b)});
}

ExprPtr weight(std::vector<ExprPtr> args) {
    if (args.empty()) throw ExprError("w() needs at least one argument");
    return node(Expr::Kind::Weight, std::move(args));
}

// ---------------------------------------------------------------- parser

namespace {

struct Parser {
    const std::string& s;
    std::size_t pos = 0;

    explicit Parser(const std::string& text) : s(text) {}

    void skip() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
        skip();
        if (pos < s.size() && s[pos] == c) { ++pos; return true; }
        return false;
    }
    [[noreturn]] void fail(const std::string& msg) { throw ExprError(msg + " at position " + std::to_string(pos), pos); }

    ExprPtr parse() {
        ExprPtr e = expr();
        skip();
        if (pos != s.size()) fail("trailing input");
        return e;
    }

    ExprPtr expr() {
        ExprPtr lhs = term();
        for (;;) {
            skip();
            if (eat('+')) lhs = add(lhs, term());
            else if (eat('-')) lhs = sub(lhs, term());
            else return lhs;
        }
    }

    ExprPtr term() {
        ExprPtr lhs = unary();
        for (;;) {
            skip();
            if (eat('*')) lhs = mul(lhs, unary());
            else if (eat('/')) lhs = divide(lhs, unary());
            else return lhs;
        }
    }

    ExprPtr unary() {
        skip();
        if (eat('-')) return neg(unary());
        if (eat('+')) return unary();
        return power();
    }

    ExprPtr power() {
        ExprPtr base = atom();
        skip();
        if (eat('^')) return pow_expr(base, unary());  // right-associative
        return base;
    }

    ExprPtr atom() {
        skip();
        if (pos >= s.size()) fail("unexpected end of expression");
        char c = s[pos];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s.c_str() + pos;
            char* end = nullptr;
            double v = std::strtod(begin, &end);
            if (end == begin) fail("bad number");
            pos += static_cast<std::size_t>(end - begin);
            return make_const(v);
        }
        if (eat('(')) {
            ExprPtr e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos;
            while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
            std::string name = s.substr(start, pos - start);
            skip();
            if (pos < s.size() && s[pos] == '(') {
                ++pos;
                std::vector<ExprPtr> args;
                if (!eat(')')) {
                    args.push_back(expr());
                    while (eat(',')) args.push_back(expr());
                    if (!eat(')')) fail("expected ')'");
                }
                return call(name, std::move(args));
            }
            return make_var(std::move(name));
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    ExprPtr call(const std::string& name, std::vector<ExprPtr> args) {
        auto need = [&](std::size_t n) {
            if (args.size() != n)
                fail(name + " expects " + std::to_string(n) + " argument(s)");
        };
        if (name == "sin") { need(1); return fn(Expr::Kind::Sin, args[0]); }
        if (name == "cos") { need(1); return fn(Expr::Kind::Cos, args[0]); }
        if (name == "exp") { need(1); return fn(Expr::Kind::Exp, args[0]); }
        if (name == "sqrt") { need(1); return fn(Expr::Kind::Sqrt, args[0]); }
        if (name == "pow") { need(2); return pow_expr(args[0], args[1]); }
        if (name == "w") return weight(std::move(args));
        fail("unknown function '" + name + "'");
    }
};

}  // namespace

ExprPtr parse_expr(const std::string& text) {
    Parser p(text);
    return p.parse();
}

// ---------------------------------------------------------------- diff

ExprPtr diff(const ExprPtr& e, const std::string& var) {
    using K = Expr::Kind;
    switch (e->kind) {
        case K::Const: return make_const(0);
        case K::Var: return make_const(e->name == var ? 1.0 : 0.0);
        case K::Add: return add(diff(e->kids[0], var), diff(e->kids[1], var));
        case K::Sub: return sub(diff(e->kids[0], var), diff(e->kids[1], var));
        case K::Mul:
            return add(mul(diff(e->kids[0], var), e->kids[1]),
                       mul(e->kids[0], diff(e->kids[1], var)));
        case K::Div:
            return divide(sub(mul(diff(e->kids[0], var), e->kids[1]),
                              mul(e->kids[0], diff(e->kids[1], var))),
                          mul(e->kids[1], e->kids[1]));
        case K::Neg: return neg(diff(e->kids[0], var));
        case K::Sin: return mul(fn(K::Cos, e->kids[0]), diff(e->kids[0], var));
        case K::Cos: return neg(mul(fn(K::Sin, e->kids[0]), diff(e->kids[0], var)));
        case K::Exp: return mul(fn(K::Exp, e->kids[0]), diff(e->kids[0], var));
        case K::Sqrt:
            return divide(diff(e->kids[0], var), mul(make_const(2), fn(K::Sqrt, e->kids[0])));
        case K::Log: return divide(diff(e->kids[0], var), e->kids[0]);
        case K::Pow: {
            const ExprPtr& a = e->kids[0];
            const ExprPtr& b = e->kids[1];
            ExprPtr da = diff(a, var);
            if (b->kind == K::Const) {
                // b * a^(b-1) * a'
                return mul(mul(b, pow_expr(a, make_const(b->value - 1))), da);
            }
            ExprPtr db = diff(b, var);
            // a^b * (b' log a + b a'/a)
            return mul(e, add(mul(db, fn(K::Log, a)), divide(mul(b, da), a)));
        }
        case K::Weight: {
            // w = sqrt(1 + sum a_i^2), dw = sum a_i a_i' / w
            ExprPtr num = make_const(0);
            for (const auto& a : e->kids) num = add(num, mul(a, diff(a, var)));
            return divide(num, e);
        }
    }
    throw ExprError("diff: bad node");
}

bool depends_on(const ExprPtr& e, const std::string& var) {
    if (e->kind == Expr::Kind::Var) return e->name == var;
    for (const auto& k : e->kids)
        if (depends_on(k, var)) return true;
    return false;
}

std::vector<std::string> free_vars(const ExprPtr& e) {
    std::vector<std::string> out;
    auto walk = [&](auto&& self, const ExprPtr& n) -> void {
        if (n->kind == Expr::Kind::Var) {
            for (const auto& v : out)
                if (v == n->name) return;
            out.push_back(n->name);
            return;
        }
        for (const auto& k : n->kids) self(self, k);
    };
    walk(walk, e);
    return out;
}

std::string to_string(const ExprPtr& e) {
    using K = Expr::Kind;
    std::ostringstream os;
    switch (e->kind) {
        case K::Const: os << e->value; break;
        case K::Var: os << e->name; break;
        case K::Add: os << "(" << to_string(e->kids[0]) << " + " << to_string(e->kids[1]) << ")"; break;
        case K::Sub: os << "(" << to_string(e->kids[0]) << " - " << to_string(e->kids[1]) << ")"; break;
        case K::Mul: os << "(" << to_string(e->kids[0]) << " * " << to_string(e->kids[1]) << ")"; break;
        case K::Div: os << "(" << to_string(e->kids[0]) << " / " << to_string(e->kids[1]) << ")"; break;
        case K::Neg: os << "(-" << to_string(e->kids[0]) << ")"; break;
        case K::Sin: os << "sin(" << to_string(e->kids[0]) << ")"; break;
        case K::Cos: os << "cos(" << to_string(e->kids[0]) << ")"; break;
        case K::Exp: os << "exp(" << to_string(e->kids[0]) << ")"; break;
        case K::Sqrt: os << "sqrt(" << to_string(e->kids[0]) << ")"; break;
        case K::Log: os << "log(" << to_string(e->kids[0]) << ")"; break;
        case K::Pow: os << "pow(" << to_string(e->kids[0]) << ", " << to_string(e->kids[1]) << ")"; break;
        case K::Weight: {
            os << "w(";
            for (std::size_t i = 0; i < e->kids.size(); ++i)
                os << (i ? ", " : "") << to_string(e->kids[i]);
            os << ")";
            break;
        }
    }
    return os.str();
}

// ---------------------------------------------------------------- compile

CompiledExpr::CompiledExpr(const ExprPtr& e, std::span<const std::string> layout) {
    auto emit = [&](auto&& self, const ExprPtr& n) -> void {
        for (const auto& k : n->kids) self(self, k);
        Op op{n->kind, n->value, -1, static_cast<int>(n->kids.size())};
        if (n->kind == Expr::Kind::Var) {
            for (std::size_t i = 0; i < layout.size(); ++i)
                if (layout[i] == n->name) { op.var_slot = static_cast<int>(i); break; }
            if (op.var_slot < 0)
                throw ExprError("unbound variable '" + n->name + "'");
        }
        ops_.push_back(op);
    };
    emit(emit, e);
}

double CompiledExpr::eval(std::span<const double> vars) const {
    double stack[128];
    int top = -1;
    using K = Expr::Kind;
    for (const Op& op : ops_) {
        switch (op.kind) {
            case K::Const: stack[++top] = op.value; break;
            case K::Var: stack[++top] = vars[static_cast<std::size_t>(op.var_slot)]; break;
            case K::Add: --top; stack[top] += stack[top + 1]; break;
            case K::Sub: --top; stack[top] -= stack[top + 1]; break;
            case K::Mul: --top; stack[top] *= stack[top + 1]; break;
            case K::Div: --top; stack[top] /= stack[top + 1]; break;
            case K::Neg: stack[top] = -stack[top]; break;
            case K::Sin: stack[top] = std::sin(stack[top]); break;
            case K::Cos: stack[top] = std::cos(stack[top]); break;
            case K::Exp: stack[top] = std::exp(stack[top]); break;
            case K::Sqrt: stack[top] = std::sqrt(stack[top]); break;
            case K::Log: stack[top] = std::log(stack[top]); break;
            case K::Pow: --top; stack[top] = std::pow(stack[top], stack[top + 1]); break;
            case K::Weight: {
                double acc = 1.0;
                for (int i = 0; i < op.arity; ++i) { acc += stack[top] * stack[top]; --top; }
                stack[++top] = std::sqrt(acc);
                break;
            }
        }
    }
    return stack[0];
}

}  // namespace weylab
