#pragma once

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "weylab/expr.hpp"
#include "weylab/field.hpp"

namespace weylab {

// Scalar field of (t, x).  Fields built from expressions carry their AST and
// differentiate exactly; fields built from raw closures fall back to central
// finite differences (step scaled by 1 + |x|, widened for orders >= 3 to
// stay above the roundoff floor).
class ScalarField {
  public:
    ScalarField() = default;
    static ScalarField zero(int dim);
    static ScalarField from_expr(const ExprPtr& ast, int dim,
                                 const std::map<std::string, double>& params = {});
    static ScalarField from_function(std::function<double(double, std::span<const double>)> f, int dim);

    double operator()(double t, std::span<const double> x) const;
    ScalarField deriv(std::span<const int> alpha) const;
    ScalarField dt() const;
    // Derivative with respect to a named scalar parameter kept free in the AST.
    std::optional<ScalarField> dparam(const std::string& name) const;

    int dim() const { return dim_; }
    bool has_ast() const { return static_cast<bool>(ast_); }
    bool time_dependent() const;
    const ExprPtr& ast() const { return ast_; }

  private:
    int dim_ = 0;
    ExprPtr ast_;
    std::map<std::string, double> params_;
    std::function<double(double, std::span<const double>)> fn_;
    mutable std::optional<CompiledExpr> compiled_;
};

// Real-valued field of (t, x, xi) on phase space.
class PhaseField {
  public:
    PhaseField() = default;
    static PhaseField from_expr(const ExprPtr& ast, int dim,
                                const std::map<std::string, double>& params = {});
    static PhaseField from_function(std::function<double(double, std::span<const double>, std::span<const double>)> f,
                                    int dim);

    double operator()(double t, std::span<const double> x, std::span<const double> xi) const;
    // |alpha| xi-derivatives and |beta| x-derivatives.
    PhaseField deriv(std::span<const int> alpha_xi, std::span<const int> beta_x) const;

    int dim() const { return dim_; }
    bool has_ast() const { return static_cast<bool>(ast_); }
    bool time_dependent() const;

  private:
    int dim_ = 0;
    ExprPtr ast_;
    std::map<std::string, double> params_;
    std::function<double(double, std::span<const double>, std::span<const double>)> fn_;
    mutable std::optional<CompiledExpr> compiled_;
};

struct PotentialSpec {
    int dim = 1;
    double mass = 1.0;
    ScalarField V;
    std::vector<ScalarField> A;  // size dim (empty means A = 0)
    std::map<std::string, double> params;

    bool time_dependent() const;
};

struct DampingSpec {
    PhaseField k;
    int declared_degree = -1;  // 0,1,2 or -1 for general
    bool present = false;
};

struct GrowthClass {
    enum class Kind { A21, A22 };
    Kind kind = Kind::A21;
    double M = 0.0;      // A22 only, must be > 0
    double delta = 1.0;  // A22 only, the margin in the |A_j| clause
};

enum class SymbolDegree { d0 = 0, d1 = 1, d2 = 2, general = -1 };

// Time-dependent phase-space symbol with a declared polynomial degree in xi.
struct SymbolExpr {
    int dim = 1;
    SymbolDegree degree = SymbolDegree::general;
    std::string name;
    bool time_dep = false;
    std::function<cdouble(double t, std::span<const double> x, std::span<const double> xi)> eval;
};

struct CutoffProfile {
    std::string name = "gaussian";
    std::function<double(double)> chi;  // rapidly decreasing, chi(0) = 1

    static CutoffProfile gaussian();
    static CutoffProfile sech(double width);
};

// h(t,x,xi) = |xi - A|^2 / 2m + V
SymbolExpr hamiltonian_symbol(const PotentialSpec& p);
// h_s = h + (i/2m) div A; Re h_s = h identically
SymbolExpr symmetrized_symbol(const PotentialSpec& p);
SymbolExpr damping_symbol(const DampingSpec& k, int dim);
// chi_eps(t,x,xi) = chi(eps (mu + h(t,x,xi)))
SymbolExpr cutoff_symbol(const SymbolExpr& h, double mu, double epsilon, const CutoffProfile& profile);

// Sampling region for the assumption checkers.
struct SampleBox {
    std::vector<double> x_half;   // per-axis half-width
    double xi_half = 10.0;
    double t_lo = 0.0, t_hi = 1.0;
};

struct ClauseReport {
    std::string id;
    std::string description;
    double fitted_C = 0.0;
    double fitted_C_inner = 0.0;  // same fit restricted to the half-size box
    bool stable = true;           // no divergence between nested boxes
    bool pass = true;
    std::vector<double> witness_x;
    std::vector<double> witness_xi;
    double witness_t = 0.0;
};

struct AssumptionReport {
    std::vector<ClauseReport> clauses;
    SampleBox box;
    int n_samples = 0;
    unsigned long long seed = 0;
    double stability_factor = 1.5;
    bool pass() const;
};

AssumptionReport check_growth(const PotentialSpec& p, const DampingSpec& k, const GrowthClass& cls,
                              const SampleBox& box, int n_samples, unsigned long long seed = 1);

struct LowerBoundFit {
    double C0 = 0.0;
    double C1 = 0.0;
    bool feasible = false;
    double C1_inner = 0.0;  // fit on the half-size box, for the stability check
    double mu_floor() const { return 0.5 * C0 + C1; }
};

// Constants of the two-sided bound C0 (<xi>^2 + <x>^{2(M+1)}) - C1 <= h <= C0^{-1}(...).
LowerBoundFit fit_lower_bound_constants(const PotentialSpec& p, const GrowthClass& cls,
                                        const SampleBox& box, int n_samples,
                                        unsigned long long seed = 1);

// Default mu used for cutoff and parametrix work when none is configured.
double default_mu(const LowerBoundFit& fit);

}  // namespace weylab
