#pragma once

#include "weylab/quantize.hpp"

namespace weylab {

struct NormSpec {
    int a = 0;              // Sobolev level, |a| <= 3 at desk scale
    double M = 0.0;         // growth index
    double mu_prime = 1.0;  // shift inside Lambda_M
    double boundary_threshold = 1e-8;
};

// ||f|| + sum_{1<=|alpha|<=2a} ||d^alpha f|| + ||<x>^{2a(M+1)} f||  (a >= 1);
// for a = 0 this is the plain L2 norm.
double sobolev_norm(const State& f, const NormSpec& spec);

// Lambda_M = Op(mu' + |xi|^2/2 + <x>^{2(M+1)}), unit mass convention.
OperatorHandle lambda_M_operator(const GridPtr& grid, const NormSpec& spec);

// Applies Lambda_M^p for p in {-1, 0, 1}.  The inverse solve is conjugate
// gradient (the operator is Hermitian positive definite), dense fallback on
// small grids.
State lambda_M_power_apply(const State& f, const NormSpec& spec, int power);

// ||Lambda_M^a f|| for a < 0 (desk scale: a = -1).
double dual_norm(const State& f, const NormSpec& spec);

struct EquivalenceReport {
    double ratio_min = 0.0;
    double ratio_max = 0.0;
    double ratio_median = 0.0;
    std::vector<double> ratios;
};

// Statistics of sobolev_norm(f) / ||Lambda_M f|| over an ensemble.
EquivalenceReport norm_equivalence_report(const NormSpec& spec, const std::vector<State>& ensemble);

}  // namespace weylab
