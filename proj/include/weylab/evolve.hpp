#pragma once

#include "weylab/quantize.hpp"
#include "weylab/wsnorm.hpp"

namespace weylab {

struct Problem {
    PotentialSpec pot;
    DampingSpec damp;
    GrowthClass growth;
    GridPtr grid;
    State u0;
    double T = 1.0;
};

enum class Scheme { crank_nicolson, rk4 };

struct EvolveConfig {
    Scheme scheme = Scheme::crank_nicolson;
    double dt = 1e-3;
    std::vector<std::pair<int, double>> monitor;  // (a, M) Sobolev levels
    int stride = 1;
    bool keep_states = false;
    double boundary_threshold = 1e-8;
    double solver_tol = 1e-12;
    bool assumption_override = false;
};

struct LevelSeries {
    std::string label;
    std::vector<double> values;
    double fitted_C = 0.0;  // max_t value(t)/value(0)
};

struct EvolutionReport {
    std::vector<double> t;
    std::vector<double> l2;
    std::vector<LevelSeries> levels;
    double garding_C = 0.0;
    bool garding_converged = true;
    bool growth_bound_ok = true;
    double max_growth_ratio = 1.0;
    double log_slope = 0.0;
    double boundary_max = 0.0;
    bool assumption_override = false;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<State> states;
    EvolutionReport report;
};

struct GuardBreach : std::runtime_error {
    GuardBreach(const std::string& what, double when) : std::runtime_error(what), time(when) {}
    double time;
};

// Time-frozen operator factory plus the kinetic frequency diagonal used by
// the iterative solver's preconditioner.
struct Generator {
    GridPtr grid;
    std::function<OperatorHandle(double)> make_H;
    std::function<OperatorHandle(double)> make_K;  // null when no damping
    std::vector<double> kin_diag;
    bool time_dependent = true;
};

Generator make_generator(const Problem& p);

// Per-record norm monitors for propagate_core.
struct MonitorLevel {
    std::string label;
    std::function<double(const State&)> norm;
};

State step(const Generator& gen, const State& u, double t, double dt, Scheme scheme,
           const EvolveConfig& cfg);

Trajectory propagate_core(const Generator& gen, const State& u0, double T, const EvolveConfig& cfg,
                          const std::vector<MonitorLevel>& monitors, bool backward_adjoint = false);

Trajectory propagate(const Problem& p, const EvolveConfig& cfg);

// Backward Cauchy problem for the adjoint generator H + iK from t = T down
// to t = 0 with terminal datum g; records are returned in ascending time.
Trajectory propagate_backward_adjoint(const Problem& p, const State& g_terminal, const EvolveConfig& cfg);

// max_t |(u(t), v(t)) - (u(0), v(0))| / |(u(0), v(0))|
double duality_pairing_test(const Trajectory& forward, const Trajectory& backward);

// X_eps^dagger (H - iK) X_eps with X_eps the dense quantization of the cutoff symbol.
OperatorHandle regularized_operator(const Problem& p, double epsilon, double t,
                                    const CutoffProfile& profile, double mu);

}  // namespace weylab
