#pragma once

#include "weylab/evolve.hpp"

namespace weylab {

struct ScanReport {
    std::string variable;             // "mu" or "eps"
    std::vector<double> values;       // scan points, ascending
    std::vector<double> norms;        // estimated operator norms
    std::vector<bool> admissible;     // points kept for the fit
    double slope = 0.0;
    double slope_halfwidth = 0.0;     // LSQ confidence half-width
    double expected = 0.0;
    double band_lo = 0.0, band_hi = 0.0;
    double band_ratio = 0.0;          // max/min over the scan (commutator scans)
    bool monotone_divergence = false;
    bool pass = false;
    double C0_star = 0.0, C1_star = 0.0, mu_floor = 0.0;
    std::string notes;
};

// p_mu = 1 / (mu + h_s); requires mu >= C0*/2 + C1*.
SymbolExpr parametrix_symbol(const SymbolExpr& h_s, double mu, const LowerBoundFit& fit);

// || (mu + H) Op(p_mu) - I ||; the parametrix factor uses the one-sided
// (left) quantization, matching the single-symbol form of the construction.
double remainder_norm(const Problem& p, double mu, int iters = 60, unsigned long long seed = 7);

ScanReport remainder_decay_scan(const Problem& p, const std::vector<double>& mu_list,
                                int iters = 60, unsigned long long seed = 7);

// Solves (mu + H) g = f directly (dense LU at desk scale).
State resolvent_apply(const Problem& p, double mu, const State& f);

// Truncated Neumann-series resolvent Op(p_mu) sum_k (-R_mu)^k f; diverges is
// flagged when ||R_mu|| >= 1.
State resolvent_neumann(const Problem& p, double mu, const State& f, int terms);

// || [X_eps, Lambda] || over an epsilon list with Lambda = mu + H.
ScanReport commutator_bound_scan(const Problem& p, const std::vector<double>& eps_list,
                                 const CutoffProfile& profile, double mu = -1.0, int iters = 60,
                                 unsigned long long seed = 7);

struct QaeResult {
    double norm_direct = 0.0;     // from the definition
    double norm_identity = 0.0;   // via the inductive identity (a = -1 only)
    double mu = 0.0;
};

// || [i d/dt - H~_eps(t), Lambda(t)^a] Lambda(t)^{-a} || at a fixed t, a in {-1, 1}.
QaeResult q_a_epsilon_norm(const Problem& p, int a, double epsilon, double t,
                           const CutoffProfile& profile, double mu = -1.0, int iters = 60,
                           unsigned long long seed = 7);

}  // namespace weylab
