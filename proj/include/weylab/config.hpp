#pragma once

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "weylab/manybody.hpp"
#include "weylab/sensitivity.hpp"

namespace weylab {

// Parsed run configuration.  The JSON schema is documented in README.md and
// the bundled configs/ directory.
struct RunConfig {
    std::string command;
    unsigned long long seed = 1;
    int threads = 1;

    // single-particle problem block
    int D = 1, N = 64;
    double L = 10.0;
    double mass = 1.0;
    std::string V_expr = "0";
    std::vector<std::string> A_expr;
    std::string k_expr;  // empty = no damping
    int k_degree = -1;
    GrowthClass growth;
    std::map<std::string, double> params;

    // initial state
    std::vector<double> init_center, init_momentum;
    double init_width = 1.0;
    std::string init_file;

    // evolve block
    Scheme scheme = Scheme::crank_nicolson;
    double dt = 1e-3, T = 1.0;
    std::vector<std::pair<int, double>> monitor;
    int stride = 1;
    double boundary_threshold = 1e-8;
    bool assumption_override = false;

    // scan block
    std::vector<double> mu_list, eps_list, taus;
    std::string profile_name = "gaussian";
    double profile_width = 3.0;
    double mu_value = -1.0;

    // sensitivity block
    std::string rho_name = "rho";
    double rho = 1.0, rho_lo = 0.0, rho_hi = 2.0;
    int level_a = 0;
    double level_M = 0.0;

    // assumptions block
    std::vector<double> box_x;
    double box_xi = 10.0;
    int samples = 2000;

    // many-body block
    struct MbParticle {
        double mass = 1.0;
        std::string V_expr = "0";
        std::vector<std::string> A_expr;
        std::string k_expr;
        int k_degree = -1;
        GrowthClass cls;
    };
    struct MbInteraction {
        int i = 1, j = 2;  // 1-based in the config
        std::string W_expr;
        bool w12_type = false;
    };
    int mb_n = 0, mb_d = 1;
    std::vector<MbParticle> mb_particles;
    std::vector<MbInteraction> mb_interactions;

    std::string out_dir = "out";
    bool dump_states = false;
};

RunConfig parse_config(const std::string& path, std::vector<std::string>& diagnostics);

// Schema and expression validation without execution; returns diagnostics.
std::vector<std::string> validate_config(const std::string& path);

// Executes the configured command; writes report.json and series.csv under
// out_dir; returns the process exit status (0 iff all verdicts pass).
int run_config(const std::string& path, const std::string& out_dir_override = "",
               long long seed_override = -1, int threads = 1);

Problem build_problem(const RunConfig& cfg);
ManyBodyProblem build_mb_problem(const RunConfig& cfg);
State build_initial_state(const RunConfig& cfg, const GridPtr& grid);

}  // namespace weylab
