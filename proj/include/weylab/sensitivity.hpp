#pragma once

#include "weylab/evolve.hpp"

namespace weylab {

// Problem family parametrized by a scalar rho in an open interval.  When the
// fields carry expression trees the parameter derivative is symbolic; closure
// families supply dpar_symbol explicitly or accept the flagged central
// finite-difference fallback in rho.
struct ParametrizedFamily {
    double rho_lo = 0.0, rho_hi = 1.0;
    std::function<Problem(double rho)> build;
    // d/drho of the full symbol h - i k at a given rho (null -> fd fallback)
    std::function<SymbolExpr(double rho)> dpar_symbol;
    bool fd_fallback = false;
    double fd_step_scale = 1e-5;
};

bool rho_admissible(const ParametrizedFamily& fam, double rho);

// Quantization of the parameter-derivative symbol at (t, rho).
OperatorHandle dpar_operator(const ParametrizedFamily& fam, double rho, double t, const GridPtr& grid);

// CN solve of i w' = (H - iK) w + dparH u with w(0) = 0; the inhomogeneity is
// evaluated at step midpoints from the stored forward trajectory.
Trajectory solve_sensitivity(const ParametrizedFamily& fam, double rho, const Trajectory& u_traj,
                             const EvolveConfig& cfg);

// w_tau(t) = (u(t; rho+tau) - u(t; rho)) / tau from two full propagations.
Trajectory difference_quotient(const ParametrizedFamily& fam, double rho, double tau,
                               const EvolveConfig& cfg);

struct RateReport {
    std::vector<double> taus;
    std::vector<double> errors;   // max_t ||w_tau - w||
    std::vector<double> ratios;   // successive error ratios
    double fitted_order = 0.0;
    bool monotone = true;
    bool pass = false;            // fitted order >= 0.9 (or errors at rounding floor)
    double bound_ratio = 0.0;     // max_t ||w||_{a,M} / ||u0||_{a+1,M}
    int level_a = 0;
    double level_M = 0.0;
    bool used_fd_fallback = false;
};

RateReport convergence_study(const ParametrizedFamily& fam, double rho, const std::vector<double>& taus,
                             const EvolveConfig& cfg, int level_a = 0, double level_M = 0.0);

// Builds an expression-backed family; every field may reference the
// parameter name as a free variable.
ParametrizedFamily make_expr_family(int dim, double mass, const std::string& V_expr,
                                    const std::vector<std::string>& A_expr, const std::string& k_expr,
                                    int k_degree, const std::string& rho_name, double rho_lo,
                                    double rho_hi, const GrowthClass& growth, const GridPtr& grid,
                                    const State& u0, double T,
                                    const std::map<std::string, double>& params = {});

}  // namespace weylab
