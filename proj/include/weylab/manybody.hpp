#pragma once

#include "weylab/calculus.hpp"

namespace weylab {

// One particle's data over its own d-dimensional block.
struct Particle {
    double mass = 1.0;
    ScalarField V;                // fields over d axes
    std::vector<ScalarField> A;   // size d (empty = no vector potential)
    DampingSpec damp;
    GrowthClass cls;
};

struct Interaction {
    int i = 0, j = 1;             // 0-based particle indices, i < j
    ScalarField W;                // field of the difference vector, d axes
    bool w12_type = false;        // strong-pair class (tighter growth clause)
};

struct ManyBodyProblem {
    int n = 2;  // particle count (2 or 3 at desk scale)
    int d = 1;  // dimensions per particle
    std::vector<Particle> particles;
    std::vector<Interaction> interactions;
    GridPtr grid;  // flattened grid over n*d axes

    double min_M0() const;  // min over w12-type partners' M
};

// Configuration-space weight Phi(z): A22 particles contribute <x^(k)>^{M_k+1},
// A21 particles contribute <x^(k)>.
std::vector<double> phi_weight(const ManyBodyProblem& p);

// Full generator symbol sum_k h_k - i sum_k k_k + sum W_ij as one flattened
// operator handle frozen at t.
OperatorHandle assemble(const ManyBodyProblem& p, double t);

Generator mb_generator(const ManyBodyProblem& p);

// ||f|| + sum_{|alpha|<=2a} ||d^alpha f|| + sum_k ||<x^(k)>^{2a(M_k+1)} f||
double bprime_norm(const State& f, const ManyBodyProblem& p, int a, double boundary_threshold = 1e-8);

AssumptionReport check_assumption_2_3(const ManyBodyProblem& p, const SampleBox& box, int n_samples,
                                      unsigned long long seed = 1);

Trajectory mb_propagate(const ManyBodyProblem& p, const State& u0, double T, const EvolveConfig& cfg);

// Parametrix decay fit against the comparison symbol (A21 particles enter
// through their quadratic comparison blocks) with the Phi-weight.
ScanReport mb_parametrix_scan(const ManyBodyProblem& p, const std::vector<double>& mu_list,
                              int iters = 60, unsigned long long seed = 7);

// Swaps two particles' blocks of a flattened state.
State swap_particles(const State& f, const ManyBodyProblem& p, int i, int j);

}  // namespace weylab
