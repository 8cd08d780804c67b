#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace weylab {

// Small closed-form expression language used for potentials, dampings and
// phase-space symbols.  Grammar: + - * / ^, unary minus, numbers, named
// variables (t, x1..xD, xi1..xiD, parameters), and the functions
// sin, cos, exp, sqrt, pow(a,b) and the bracket weight w(a1,..,ak) =
// sqrt(1 + a1^2 + ... + ak^2).

struct ExprError : std::runtime_error {
    explicit ExprError(const std::string& msg, std::size_t pos = std::string::npos)
        : std::runtime_error(msg), position(pos) {}
    std::size_t position;
};

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind { Const, Var, Add, Sub, Mul, Div, Neg, Sin, Cos, Exp, Sqrt, Log, Pow, Weight };
    Kind kind;
    double value = 0.0;       // Const
    std::string name;         // Var
    std::vector<ExprPtr> kids;
};

// Node builders with light constant folding.
ExprPtr make_const(double v);
ExprPtr make_var(std::string name);
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr sub(ExprPtr a, ExprPtr b);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr divide(ExprPtr a, ExprPtr b);
ExprPtr neg(ExprPtr a);
ExprPtr fn(Expr::Kind k, ExprPtr a);
ExprPtr pow_expr(ExprPtr a, ExprPtr b);
ExprPtr weight(std::vector<ExprPtr> args);

ExprPtr parse_expr(const std::string& text);

// Symbolic derivative with respect to a named variable.
ExprPtr diff(const ExprPtr& e, const std::string& var);

bool depends_on(const ExprPtr& e, const std::string& var);

// Collects variable names referenced by the expression.
std::vector<std::string> free_vars(const ExprPtr& e);

std::string to_string(const ExprPtr& e);

// Flat stack-machine form for fast repeated evaluation.  Variables are
// resolved against a fixed layout once; unknown names throw ExprError.
class CompiledExpr {
  public:
    CompiledExpr() = default;
    CompiledExpr(const ExprPtr& e, std::span<const std::string> layout);

    double eval(std::span<const double> vars) const;
    bool valid() const { return !ops_.empty(); }

  private:
    struct Op {
        Expr::Kind kind;
        double value;
        int var_slot;
        int arity;
    };
    std::vector<Op> ops_;
};

}  // namespace weylab
