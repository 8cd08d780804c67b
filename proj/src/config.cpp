#include "weylab/config.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace weylab {

using nlohmann::json;

namespace {

const std::vector<std::string> kCommands = {"solve",        "sensitivity",   "parametrix-scan",
                                            "commutator-scan", "assumptions", "manybody",
                                            "quantize-check"};

GrowthClass parse_growth(const json& j, std::vector<std::string>& diags) {
    GrowthClass g;
    std::string kind = j.value("kind", "A21");
    if (kind == "A21") g.kind = GrowthClass::Kind::A21;
    else if (kind == "A22") g.kind = GrowthClass::Kind::A22;
    else diags.push_back("growth.kind must be A21 or A22, got '" + kind + "'");
    g.M = j.value("M", 0.0);
    g.delta = j.value("delta", 1.0);
    if (g.kind == GrowthClass::Kind::A22 && !(g.M > 0.0))
        diags.push_back("growth.M must be > 0 for the A22 class");
    return g;
}

void check_expr(const std::string& text, int D, bool phase_space, const std::string& where,
                const std::map<std::string, double>& params, const std::string& rho_name,
                std::vector<std::string>& diags) {
    if (text.empty()) return;
    try {
        ExprPtr e = parse_expr(text);
        for (const auto& v : free_vars(e)) {
            if (v == "t" || v == rho_name) continue;
            if (params.count(v)) continue;
            bool ok = false;
            for (int j = 1; j <= D; ++j) {
                if (v == "x" + std::to_string(j)) ok = true;
                if (phase_space && v == "xi" + std::to_string(j)) ok = true;
            }
            if (!ok) diags.push_back(where + ": unbound variable '" + v + "'");
        }
    } catch (const ExprError& err) {
        diags.push_back(where + ": " + err.what());
    }
}

json known_keys_check(const json& j, const std::vector<std::string>& known, const std::string& where,
                      std::vector<std::string>& diags) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            diags.push_back(where + ": unknown field '" + it.key() + "'");
    return j;
}

CutoffProfile make_profile(const RunConfig& cfg) {
    if (cfg.profile_name == "gaussian") return CutoffProfile::gaussian();
    if (cfg.profile_name == "sech") return CutoffProfile::sech(cfg.profile_width);
    throw std::invalid_argument("unknown cutoff profile '" + cfg.profile_name + "'");
}

json clause_to_json(const ClauseReport& c) {
    json j;
    j["id"] = c.id;
    j["description"] = c.description;
    j["fitted_C"] = c.fitted_C;
    j["fitted_C_inner"] = c.fitted_C_inner;
    j["stable"] = c.stable;
    j["pass"] = c.pass;
    if (!c.witness_x.empty()) j["witness_x"] = c.witness_x;
    if (!c.witness_xi.empty()) j["witness_xi"] = c.witness_xi;
    return j;
}

json scan_to_json(const ScanReport& r) {
    json j;
    j["variable"] = r.variable;
    j["values"] = r.values;
    j["norms"] = r.norms;
    j["admissible"] = r.admissible;
    j["slope"] = r.slope;
    j["slope_halfwidth"] = r.slope_halfwidth;
    j["expected"] = r.expected;
    j["band"] = {r.band_lo, r.band_hi};
    j["band_ratio"] = r.band_ratio;
    j["monotone_divergence"] = r.monotone_divergence;
    j["pass"] = r.pass;
    j["C0_star"] = r.C0_star;
    j["C1_star"] = r.C1_star;
    j["mu_floor"] = r.mu_floor;
    if (!r.notes.empty()) j["notes"] = r.notes;
    return j;
}

json report_to_json(const EvolutionReport& r) {
    json j;
    j["garding_C"] = r.garding_C;
    j["garding_converged"] = r.garding_converged;
    j["growth_bound_ok"] = r.growth_bound_ok;
    j["max_growth_ratio"] = r.max_growth_ratio;
    j["log_slope"] = r.log_slope;
    j["boundary_max"] = r.boundary_max;
    j["assumption_override"] = r.assumption_override;
    json lv = json::array();
    for (const auto& l : r.levels) lv.push_back({{"label", l.label}, {"fitted_C", l.fitted_C}});
    j["levels"] = lv;
    return j;
}

void write_series_csv(const std::string& path, const EvolutionReport& r) {
    std::ofstream os(path);
    os.precision(17);
    os << "t,l2";
    for (const auto& l : r.levels) os << "," << l.label;
    os << "\n";
    for (std::size_t i = 0; i < r.t.size(); ++i) {
        os << r.t[i] << "," << r.l2[i];
        for (const auto& l : r.levels) os << "," << l.values[i];
        os << "\n";
    }
}

void write_scan_csv(const std::string& path, const ScanReport& r) {
    std::ofstream os(path);
    os.precision(17);
    os << r.variable << ",norm,admissible\n";
    for (std::size_t i = 0; i < r.values.size(); ++i)
        os << r.values[i] << "," << r.norms[i] << "," << (r.admissible.empty() || r.admissible[i] ? 1 : 0)
           << "\n";
}

}  // namespace

RunConfig parse_config(const std::string& path, std::vector<std::string>& diags) {
    RunConfig cfg;
    std::ifstream is(path);
    if (!is) {
        diags.push_back("cannot open config file '" + path + "'");
        return cfg;
    }
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        diags.push_back(std::string("json parse error: ") + e.what());
        return cfg;
    }

    known_keys_check(j,
                     {"command", "seed", "threads", "grid", "problem", "initial", "evolve", "scan",
                      "sensitivity", "assumptions", "manybody", "output"},
                     "config", diags);

    cfg.command = j.value("command", "");
    if (std::find(kCommands.begin(), kCommands.end(), cfg.command) == kCommands.end())
        diags.push_back("command must be one of solve/sensitivity/parametrix-scan/commutator-scan/"
                        "assumptions/manybody/quantize-check");
    cfg.seed = j.value("seed", 1ULL);
    cfg.threads = j.value("threads", 1);

    if (j.contains("grid")) {
        const json& g = known_keys_check(j["grid"], {"D", "N", "L"}, "grid", diags);
        cfg.D = g.value("D", 1);
        cfg.N = g.value("N", 64);
        cfg.L = g.value("L", 10.0);
        if (cfg.N % 2 != 0 || cfg.N < 8) diags.push_back("grid.N must be even and >= 8");
        if (!(cfg.L > 0)) diags.push_back("grid.L must be positive");
        if (cfg.D >= 1 && std::pow(static_cast<double>(cfg.N), cfg.D) > 4194304.0)
            diags.push_back("grid: N^D exceeds the desk-scale limit 2^22");
    }

    if (j.contains("problem")) {
        const json& p = known_keys_check(
            j["problem"], {"mass", "V", "A", "k", "k_degree", "growth", "params"}, "problem", diags);
        cfg.mass = p.value("mass", 1.0);
        if (!(cfg.mass > 0)) diags.push_back("problem.mass must be positive");
        if (p.contains("params"))
            for (auto it = p["params"].begin(); it != p["params"].end(); ++it)
                cfg.params[it.key()] = it.value().get<double>();
        cfg.V_expr = p.value("V", "0");
        if (p.contains("A"))
            for (const auto& a : p["A"]) cfg.A_expr.push_back(a.get<std::string>());
        if (!cfg.A_expr.empty() && static_cast<int>(cfg.A_expr.size()) != cfg.D)
            diags.push_back("problem.A must list exactly D expressions");
        if (p.contains("k") && !p["k"].is_null()) cfg.k_expr = p["k"].get<std::string>();
        cfg.k_degree = p.value("k_degree", -1);
        if (p.contains("growth")) cfg.growth = parse_growth(p["growth"], diags);
        std::string rn = j.contains("sensitivity") ? j["sensitivity"].value("rho_name", "rho") : "rho";
        check_expr(cfg.V_expr, cfg.D, false, "problem.V", cfg.params, rn, diags);
        for (std::size_t i = 0; i < cfg.A_expr.size(); ++i)
            check_expr(cfg.A_expr[i], cfg.D, false, "problem.A[" + std::to_string(i) + "]", cfg.params,
                       rn, diags);
        check_expr(cfg.k_expr, cfg.D, true, "problem.k", cfg.params, rn, diags);
    }

    if (j.contains("initial")) {
        const json& p = known_keys_check(j["initial"], {"type", "center", "width", "momentum", "path"},
                                         "initial", diags);
        std::string type = p.value("type", "gaussian");
        if (type == "file") {
            cfg.init_file = p.value("path", "");
            if (cfg.init_file.empty()) diags.push_back("initial: file type needs a path");
        } else if (type != "gaussian") {
            diags.push_back("initial.type must be gaussian or file");
        }
        if (p.contains("center")) cfg.init_center = p["center"].get<std::vector<double>>();
        if (p.contains("momentum")) cfg.init_momentum = p["momentum"].get<std::vector<double>>();
        cfg.init_width = p.value("width", 1.0);
        if (!(cfg.init_width > 0)) diags.push_back("initial.width must be positive");
    }

    if (j.contains("evolve")) {
        const json& p = known_keys_check(
            j["evolve"], {"scheme", "dt", "T", "monitor", "stride", "boundary_threshold", "override"},
            "evolve", diags);
        std::string sc = p.value("scheme", "crank_nicolson");
        if (sc == "crank_nicolson") cfg.scheme = Scheme::crank_nicolson;
        else if (sc == "rk4") cfg.scheme = Scheme::rk4;
        else diags.push_back("evolve.scheme must be crank_nicolson or rk4");
        cfg.dt = p.value("dt", 1e-3);
        cfg.T = p.value("T", 1.0);
        if (!(cfg.dt > 0) || cfg.dt > cfg.T) diags.push_back("evolve: need 0 < dt <= T");
        cfg.stride = p.value("stride", 1);
        if (cfg.stride < 1) diags.push_back("evolve.stride must be >= 1");
        cfg.boundary_threshold = p.value("boundary_threshold", 1e-8);
        cfg.assumption_override = p.value("override", false);
        if (p.contains("monitor"))
            for (const auto& m : p["monitor"])
                cfg.monitor.emplace_back(m.at(0).get<int>(), m.at(1).get<double>());
    }

    if (j.contains("scan")) {
        const json& p = known_keys_check(j["scan"], {"mu", "eps", "taus", "profile", "profile_width", "mu_value"},
                                         "scan", diags);
        if (p.contains("mu")) cfg.mu_list = p["mu"].get<std::vector<double>>();
        if (p.contains("eps")) cfg.eps_list = p["eps"].get<std::vector<double>>();
        if (p.contains("taus")) cfg.taus = p["taus"].get<std::vector<double>>();
        cfg.profile_name = p.value("profile", "gaussian");
        if (cfg.profile_name != "gaussian" && cfg.profile_name != "sech")
            diags.push_back("scan.profile must be gaussian or sech");
        cfg.profile_width = p.value("profile_width", 3.0);
        cfg.mu_value = p.value("mu_value", -1.0);
        for (double e : cfg.eps_list)
            if (!(e > 0 && e <= 1)) diags.push_back("scan.eps values must lie in (0, 1]");
    }

    if (j.contains("sensitivity")) {
        const json& p = known_keys_check(j["sensitivity"],
                                         {"rho_name", "rho", "interval", "level_a", "level_M"},
                                         "sensitivity", diags);
        cfg.rho_name = p.value("rho_name", "rho");
        cfg.rho = p.value("rho", 1.0);
        if (p.contains("interval")) {
            cfg.rho_lo = p["interval"].at(0).get<double>();
            cfg.rho_hi = p["interval"].at(1).get<double>();
        }
        cfg.level_a = p.value("level_a", 0);
        cfg.level_M = p.value("level_M", 0.0);
        if (!(cfg.rho > cfg.rho_lo && cfg.rho < cfg.rho_hi))
            diags.push_back("sensitivity.rho must lie inside the interval");
    }

    if (j.contains("assumptions")) {
        const json& p = known_keys_check(j["assumptions"], {"box_x", "box_xi", "samples"},
                                         "assumptions", diags);
        if (p.contains("box_x")) cfg.box_x = p["box_x"].get<std::vector<double>>();
        cfg.box_xi = p.value("box_xi", 10.0);
        cfg.samples = p.value("samples", 2000);
    }

    if (j.contains("manybody")) {
        const json& p = known_keys_check(j["manybody"], {"n", "d", "particles", "interactions"},
                                         "manybody", diags);
        cfg.mb_n = p.value("n", 2);
        cfg.mb_d = p.value("d", 1);
        if (cfg.mb_n < 2 || cfg.mb_n > 3) diags.push_back("manybody.n must be 2 or 3 at desk scale");
        if (p.contains("particles")) {
            for (const auto& q : p["particles"]) {
                RunConfig::MbParticle part;
                part.mass = q.value("mass", 1.0);
                part.V_expr = q.value("V", "0");
                if (q.contains("A"))
                    for (const auto& a : q["A"]) part.A_expr.push_back(a.get<std::string>());
                if (q.contains("k") && !q["k"].is_null()) part.k_expr = q["k"].get<std::string>();
                part.k_degree = q.value("k_degree", -1);
                if (q.contains("growth")) part.cls = parse_growth(q["growth"], diags);
                check_expr(part.V_expr, cfg.mb_d, false, "manybody particle V", cfg.params, "rho", diags);
                check_expr(part.k_expr, cfg.mb_d, true, "manybody particle k", cfg.params, "rho", diags);
                cfg.mb_particles.push_back(std::move(part));
            }
            if (static_cast<int>(cfg.mb_particles.size()) != cfg.mb_n)
                diags.push_back("manybody.particles must list exactly n entries");
        }
        if (p.contains("interactions")) {
            for (const auto& q : p["interactions"]) {
                RunConfig::MbInteraction w;
                w.i = q.value("i", 1);
                w.j = q.value("j", 2);
                w.W_expr = q.value("W", "0");
                w.w12_type = q.value("w12_type", false);
                if (w.i < 1 || w.j > cfg.mb_n || w.i >= w.j)
                    diags.push_back("manybody interaction indices must satisfy 1 <= i < j <= n");
                check_expr(w.W_expr, cfg.mb_d, false, "manybody interaction W", cfg.params, "rho", diags);
                cfg.mb_interactions.push_back(std::move(w));
            }
        }
    }

    if (j.contains("output")) {
        const json& p = known_keys_check(j["output"], {"dir", "dump_states"}, "output", diags);
        cfg.out_dir = p.value("dir", "out");
        cfg.dump_states = p.value("dump_states", false);
    }
    return cfg;
}

std::vector<std::string> validate_config(const std::string& path) {
    std::vector<std::string> diags;
    parse_config(path, diags);
    return diags;
}

State build_initial_state(const RunConfig& cfg, const GridPtr& grid) {
    if (!cfg.init_file.empty()) return load_state(cfg.init_file);
    const int D = grid->dim();
    std::vector<double> c = cfg.init_center, k = cfg.init_momentum;
    c.resize(static_cast<std::size_t>(D), 0.0);
    k.resize(static_cast<std::size_t>(D), 0.0);
    double w = cfg.init_width;
    State u(grid, 0.0);
    std::vector<double> x(static_cast<std::size_t>(D));
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        grid->point(i, x);
        double arg = 0.0, phase = 0.0;
        for (int j = 0; j < D; ++j) {
            double dx = x[static_cast<std::size_t>(j)] - c[static_cast<std::size_t>(j)];
            arg += dx * dx;
            phase += k[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
        }
        u.values[i] = std::exp(cdouble{-arg / (2.0 * w * w), phase});
    }
    double nrm = l2_norm(u);
    for (auto& z : u.values) z /= nrm;
    return u;
}

Problem build_problem(const RunConfig& cfg) {
    Problem p;
    p.pot.dim = cfg.D;
    p.pot.mass = cfg.mass;
    p.pot.params = cfg.params;
    p.pot.V = ScalarField::from_expr(parse_expr(cfg.V_expr), cfg.D, cfg.params);
    for (const auto& a : cfg.A_expr)
        p.pot.A.push_back(ScalarField::from_expr(parse_expr(a), cfg.D, cfg.params));
    if (!cfg.k_expr.empty()) {
        p.damp.k = PhaseField::from_expr(parse_expr(cfg.k_expr), cfg.D, cfg.params);
        p.damp.declared_degree = cfg.k_degree;
        p.damp.present = true;
    }
    p.growth = cfg.growth;
    p.grid = Grid::make(cfg.D, cfg.N, cfg.L);
    p.u0 = build_initial_state(cfg, p.grid);
    p.T = cfg.T;
    return p;
}

ManyBodyProblem build_mb_problem(const RunConfig& cfg) {
    ManyBodyProblem p;
    p.n = cfg.mb_n;
    p.d = cfg.mb_d;
    for (const auto& q : cfg.mb_particles) {
        Particle part;
        part.mass = q.mass;
        part.V = ScalarField::from_expr(parse_expr(q.V_expr), p.d, cfg.params);
        for (const auto& a : q.A_expr)
            part.A.push_back(ScalarField::from_expr(parse_expr(a), p.d, cfg.params));
        if (!q.k_expr.empty()) {
            part.damp.k = PhaseField::from_expr(parse_expr(q.k_expr), p.d, cfg.params);
            part.damp.declared_degree = q.k_degree;
            part.damp.present = true;
        }
        part.cls = q.cls;
        p.particles.push_back(std::move(part));
    }
    for (const auto& w : cfg.mb_interactions) {
        Interaction in;
        in.i = w.i - 1;
        in.j = w.j - 1;
        in.W = ScalarField::from_expr(parse_expr(w.W_expr), p.d, cfg.params);
        in.w12_type = w.w12_type;
        p.interactions.push_back(std::move(in));
    }
    p.grid = Grid::make(p.n * p.d, cfg.N, cfg.L);
    return p;
}

namespace {

int run_parsed(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    json report;
    report["command"] = cfg.command;
    report["seed"] = cfg.seed;
    report["tool"] = "weylab";
    bool pass = true;
    std::string series_csv = cfg.out_dir + "/series.csv";

    try {
        if (cfg.command == "solve") {
            Problem p = build_problem(cfg);
            EvolveConfig ec;
            ec.scheme = cfg.scheme;
            ec.dt = cfg.dt;
            ec.monitor = cfg.monitor;
            ec.stride = cfg.stride;
            ec.boundary_threshold = cfg.boundary_threshold;
            ec.assumption_override = cfg.assumption_override;
            ec.keep_states = cfg.dump_states;
            Trajectory traj = propagate(p, ec);
            report["evolution"] = report_to_json(traj.report);
            write_series_csv(series_csv, traj.report);
            if (cfg.dump_states)
                for (std::size_t i = 0; i < traj.states.size(); ++i)
                    save_state(traj.states[i], cfg.out_dir + "/state_" + std::to_string(i) + ".bin");
            pass = traj.report.growth_bound_ok;
        } else if (cfg.command == "sensitivity") {
            RunConfig c2 = cfg;
            ParametrizedFamily fam = make_expr_family(
                cfg.D, cfg.mass, cfg.V_expr, cfg.A_expr, cfg.k_expr, cfg.k_degree, cfg.rho_name,
                cfg.rho_lo, cfg.rho_hi, cfg.growth, Grid::make(cfg.D, cfg.N, cfg.L),
                build_initial_state(c2, Grid::make(cfg.D, cfg.N, cfg.L)), cfg.T, cfg.params);
            EvolveConfig ec;
            ec.dt = cfg.dt;
            ec.stride = 1;
            RateReport rr = convergence_study(fam, cfg.rho, cfg.taus, ec, cfg.level_a, cfg.level_M);
            json jj;
            jj["taus"] = rr.taus;
            jj["errors"] = rr.errors;
            jj["ratios"] = rr.ratios;
            jj["fitted_order"] = rr.fitted_order;
            jj["bound_ratio"] = rr.bound_ratio;
            jj["used_fd_fallback"] = rr.used_fd_fallback;
            jj["pass"] = rr.pass;
            report["sensitivity"] = jj;
            std::ofstream os(series_csv);
            os.precision(17);
            os << "tau,error\n";
            for (std::size_t i = 0; i < rr.taus.size(); ++i)
                os << rr.taus[i] << "," << rr.errors[i] << "\n";
            pass = rr.pass;
        } else if (cfg.command == "parametrix-scan") {
            Problem p = build_problem(cfg);
            ScanReport rep = remainder_decay_scan(p, cfg.mu_list, 60, cfg.seed);
            report["scan"] = scan_to_json(rep);
            write_scan_csv(series_csv, rep);
            pass = rep.pass;
        } else if (cfg.command == "commutator-scan") {
            Problem p = build_problem(cfg);
            ScanReport rep = commutator_bound_scan(p, cfg.eps_list, make_profile(cfg), cfg.mu_value,
                                                   60, cfg.seed);
            report["scan"] = scan_to_json(rep);
            write_scan_csv(series_csv, rep);
            pass = rep.pass;
        } else if (cfg.command == "assumptions") {
            Problem p = build_problem(cfg);
            SampleBox box;
            box.x_half = cfg.box_x.empty() ? std::vector<double>(static_cast<std::size_t>(cfg.D), cfg.L)
                                           : cfg.box_x;
            box.xi_half = cfg.box_xi;
            AssumptionReport rep = check_growth(p.pot, p.damp, p.growth, box, cfg.samples, cfg.seed);
            json clauses = json::array();
            for (const auto& c : rep.clauses) clauses.push_back(clause_to_json(c));
            report["assumptions"] = {{"clauses", clauses}, {"pass", rep.pass()}};
            if (p.growth.kind == GrowthClass::Kind::A22) {
                LowerBoundFit fit = fit_lower_bound_constants(p.pot, p.growth, box, cfg.samples, cfg.seed);
                report["lower_bound"] = {{"C0_star", fit.C0},
                                         {"C1_star", fit.C1},
                                         {"feasible", fit.feasible},
                                         {"mu_floor", fit.mu_floor()}};
                if (!fit.feasible) pass = false;
            }
            std::ofstream os(series_csv);
            os << "clause,fitted_C,pass\n";
            for (const auto& c : rep.clauses)
                os << c.id << "," << c.fitted_C << "," << (c.pass ? 1 : 0) << "\n";
            pass = pass && rep.pass();
        } else if (cfg.command == "manybody") {
            ManyBodyProblem p = build_mb_problem(cfg);
            RunConfig c2 = cfg;
            State u0 = build_initial_state(c2, p.grid);
            EvolveConfig ec;
            ec.scheme = cfg.scheme;
            ec.dt = cfg.dt;
            ec.monitor = cfg.monitor;
            ec.stride = cfg.stride;
            ec.boundary_threshold = cfg.boundary_threshold;
            ec.assumption_override = cfg.assumption_override;
            Trajectory traj = mb_propagate(p, u0, cfg.T, ec);
            report["evolution"] = report_to_json(traj.report);
            write_series_csv(series_csv, traj.report);
            if (!cfg.mu_list.empty()) {
                ScanReport rep = mb_parametrix_scan(p, cfg.mu_list, 60, cfg.seed);
                report["mb_parametrix"] = scan_to_json(rep);
                pass = pass && rep.pass;
            }
            pass = pass && traj.report.growth_bound_ok;
        } else if (cfg.command == "quantize-check") {
            Problem p = build_problem(cfg);
            SymbolExpr h = hamiltonian_symbol(p.pot);
            OperatorHandle fast = quantize_poly(h, p.grid, 0.0);
            OperatorHandle dense = quantize_dense(h, p.grid, 0.0);
            if (cfg.dump_states) export_dense_kernel(dense, cfg.out_dir + "/kernel.bin");
            std::mt19937_64 rng(cfg.seed);
            double worst = 0.0;
            for (int probe = 0; probe < 20; ++probe) {
                auto f = random_state_values(*p.grid, rng);
                auto a = fast.apply(f), b = dense.apply(f);
                double num = 0.0, den = 0.0;
                for (std::size_t i = 0; i < f.size(); ++i) {
                    num += std::norm(a[i] - b[i]);
                    den += std::norm(f[i]);
                }
                worst = std::max(worst, std::sqrt(num) / std::sqrt(den));
            }
            report["quantize_check"] = {{"max_rel_deviation", worst}, {"pass", worst <= 1e-10}};
            if (p.damp.present) {
                SymbolExpr k = damping_symbol(p.damp, p.pot.dim);
                OperatorHandle K = (k.degree != SymbolDegree::general)
                                       ? quantize_poly(k, p.grid, 0.0)
                                       : quantize_dense(k, p.grid, 0.0);
                GardingResult gr = garding_floor(K);
                report["garding_floor"] = gr.floor;
            }
            std::ofstream os(series_csv);
            os << "probe_deviation\n" << worst << "\n";
            pass = worst <= 1e-10;
        }
    } catch (const GuardBreach& e) {
        report["guard_breach"] = {{"what", e.what()}, {"time", e.time}};
        pass = false;
    } catch (const std::exception& e) {
        report["error"] = e.what();
        pass = false;
    }

    report["pass"] = pass;
    std::ofstream os(cfg.out_dir + "/report.json");
    os << report.dump(2) << "\n";
    return pass ? 0 : 1;
}

}  // namespace

int run_config(const std::string& path, const std::string& out_dir_override, long long seed_override,
               int threads) {
    std::vector<std::string> diags;
    RunConfig cfg = parse_config(path, diags);
    if (!diags.empty()) {
        for (const auto& d : diags) std::cerr << "config: " << d << "\n";
        return 2;
    }
    if (!out_dir_override.empty()) cfg.out_dir = out_dir_override;
    if (seed_override >= 0) cfg.seed = static_cast<unsigned long long>(seed_override);
    cfg.threads = threads;
    return run_parsed(cfg);
}

}  // namespace weylab
