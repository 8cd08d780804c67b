#include "weylab/manybody.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace weylab {

namespace {

double bracket(std::span<const double> v) {
    double s = 1.0;
    for (double c : v) s += c * c;
    return std::sqrt(s);
}

// Physical flattened symbol sum_k h_k + sum W_ij (real part of the generator).
SymbolExpr flattened_h(const ManyBodyProblem& p) {
    SymbolExpr s;
    s.dim = p.n * p.d;
    s.degree = SymbolDegree::d2;
    s.name = "h_hat_phys";
    s.time_dep = false;
    for (const auto& part : p.particles) {
        s.time_dep = s.time_dep || part.V.time_dependent();
        for (const auto& a : part.A) s.time_dep = s.time_dep || a.time_dependent();
    }
    for (const auto& w : p.interactions) s.time_dep = s.time_dep || w.W.time_dependent();
    ManyBodyProblem prob = p;
    s.eval = [prob](double t, std::span<const double> z, std::span<const double> zeta) -> cdouble {
        const int d = prob.d;
        double acc = 0.0;
        for (int k = 0; k < prob.n; ++k) {
            const Particle& part = prob.particles[static_cast<std::size_t>(k)];
            auto xk = z.subspan(static_cast<std::size_t>(k * d), static_cast<std::size_t>(d));
            double kin = 0.0;
            for (int j = 0; j < d; ++j) {
                double aj = part.A.empty() ? 0.0 : part.A[static_cast<std::size_t>(j)](t, xk);
                double dd = zeta[static_cast<std::size_t>(k * d + j)] - aj;
                kin += dd * dd;
            }
            acc += kin / (2.0 * part.mass) + part.V(t, xk);
        }
        std::vector<double> diff(static_cast<std::size_t>(d));
        for (const auto& w : prob.interactions) {
            for (int j = 0; j < d; ++j)
                diff[static_cast<std::size_t>(j)] = z[static_cast<std::size_t>(w.i * d + j)] -
                                                    z[static_cast<std::size_t>(w.j * d + j)];
            acc += w.W(t, diff);
        }
        return acc;
    };
    return s;
}

// Damping symbol of particle k extended to the flattened phase space.
SymbolExpr flattened_damping(const ManyBodyProblem& p, int k) {
    const Particle& part = p.particles[static_cast<std::size_t>(k)];
    SymbolExpr s;
    s.dim = p.n * p.d;
    s.degree = (part.damp.declared_degree >= 0 && part.damp.declared_degree <= 2)
                   ? static_cast<SymbolDegree>(part.damp.declared_degree)
                   : SymbolDegree::general;
    s.name = "k_" + std::to_string(k + 1);
    s.time_dep = part.damp.k.time_dependent();
    PhaseField f = part.damp.k;
    int d = p.d;
    s.eval = [f, k, d](double t, std::span<const double> z, std::span<const double> zeta) -> cdouble {
        auto xk = z.subspan(static_cast<std::size_t>(k * d), static_cast<std::size_t>(d));
        auto zk = zeta.subspan(static_cast<std::size_t>(k * d), static_cast<std::size_t>(d));
        return {f(t, xk, zk), 0.0};
    };
    return s;
}

// Comparison symbol of the parametrix construction: A22 particles keep their
// physical blocks, A21 particles are replaced by |xi|^2/2m + <x>^2, and only
// strong-pair interactions enter.
SymbolExpr comparison_h(const ManyBodyProblem& p, bool symmetrized) {
    SymbolExpr s;
    s.dim = p.n * p.d;
    s.degree = SymbolDegree::d2;
    s.name = symmetrized ? "h_hat_s" : "h_hat";
    s.time_dep = false;
    ManyBodyProblem prob = p;
    s.eval = [prob, symmetrized](double t, std::span<const double> z,
                                 std::span<const double> zeta) -> cdouble {
        const int d = prob.d;
        double acc = 0.0, div = 0.0;
        std::vector<int> alpha(static_cast<std::size_t>(d), 0);
        for (int k = 0; k < prob.n; ++k) {
            const Particle& part = prob.particles[static_cast<std::size_t>(k)];
            auto xk = z.subspan(static_cast<std::size_t>(k * d), static_cast<std::size_t>(d));
            auto zk = zeta.subspan(static_cast<std::size_t>(k * d), static_cast<std::size_t>(d));
            if (part.cls.kind == GrowthClass::Kind::A22) {
                double kin = 0.0;
                for (int j = 0; j < d; ++j) {
                    double aj = part.A.empty() ? 0.0 : part.A[static_cast<std::size_t>(j)](t, xk);
                    double dd = zk[static_cast<std::size_t>(j)] - aj;
                    kin += dd * dd;
                }
                acc += kin / (2.0 * part.mass) + part.V(t, xk);
                if (symmetrized && !part.A.empty()) {
                    for (int j = 0; j < d; ++j) {
                        std::fill(alpha.begin(), alpha.end(), 0);
                        alpha[static_cast<std::size_t>(j)] = 1;
                        div += part.A[static_cast<std::size_t>(j)].deriv(alpha)(t, xk) /
                               (2.0 * part.mass);
                    }
                }
            } else {
                double kin = 0.0;
                for (int j = 0; j < d; ++j) kin += zk[static_cast<std::size_t>(j)] * zk[static_cast<std::size_t>(j)];
                acc += kin / (2.0 * part.mass) + bracket(xk) * bracket(xk);
            }
        }
        std::vector<double> diff(static_cast<std::size_t>(d));
        for (const auto& w : prob.interactions) {
            if (!w.w12_type) continue;
            for (int j = 0; j < d; ++j)
                diff[static_cast<std::size_t>(j)] = z[static_cast<std::size_t>(w.i * d + j)] -
                                                    z[static_cast<std::size_t>(w.j * d + j)];
            acc += w.W(t, diff);
        }
        return {acc, div};
    };
    return s;
}

}  // namespace

double ManyBodyProblem::min_M0() const {
    double m0 = std::numeric_limits<double>::infinity();
    for (const auto& w : interactions) {
        if (!w.w12_type) continue;
        m0 = std::min({m0, particles[static_cast<std::size_t>(w.i)].cls.M,
                       particles[static_cast<std::size_t>(w.j)].cls.M});
    }
    return std::isfinite(m0) ? m0 : 0.0;
}

std::vector<double> phi_weight(const ManyBodyProblem& p) {
    return sample_real(*p.grid, [&](std::span<const double> z) {
        double phi = 0.0;
        for (int k = 0; k < p.n; ++k) {
            auto xk = z.subspan(static_cast<std::size_t>(k * p.d), static_cast<std::size_t>(p.d));
            const Particle& part = p.particles[static_cast<std::size_t>(k)];
            double b = bracket(xk);
            phi += part.cls.kind == GrowthClass::Kind::A22 ? std::pow(b, part.cls.M + 1.0) : b;
        }
        return phi;
    });
}

OperatorHandle assemble(const ManyBodyProblem& p, double t) {
    if (static_cast<int>(p.particles.size()) != p.n)
        throw std::invalid_argument("assemble: particle count mismatch");
    for (const auto& w : p.interactions)
        if (w.i < 0 || w.j >= p.n || w.i >= w.j)
            throw std::invalid_argument("assemble: bad interaction pair");
    OperatorHandle H = quantize_poly(flattened_h(p), p.grid, t);
    OperatorHandle out = H;
    for (int k = 0; k < p.n; ++k) {
        if (!p.particles[static_cast<std::size_t>(k)].damp.present) continue;
        SymbolExpr ks = flattened_damping(p, k);
        OperatorHandle K = (ks.degree != SymbolDegree::general) ? quantize_poly(ks, p.grid, t)
                                                                : quantize_dense(ks, p.grid, t);
        out = lincomb(cdouble{1, 0}, out, cdouble{0, -1}, K);
    }
    return out;
}

Generator mb_generator(const ManyBodyProblem& p) {
    Generator gen;
    gen.grid = p.grid;
    SymbolExpr h = flattened_h(p);
    gen.time_dependent = h.time_dep;
    GridPtr grid = p.grid;
    gen.make_H = [h, grid](double t) { return quantize_poly(h, grid, t); };

    bool any_damp = false;
    for (const auto& part : p.particles) any_damp = any_damp || part.damp.present;
    if (any_damp) {
        ManyBodyProblem prob = p;
        gen.make_K = [prob, grid](double t) {
            OperatorHandle acc = scale(cdouble{0, 0}, OperatorHandle::identity(grid));
            bool first = true;
            OperatorHandle out = acc;
            for (int k = 0; k < prob.n; ++k) {
                if (!prob.particles[static_cast<std::size_t>(k)].damp.present) continue;
                SymbolExpr ks = flattened_damping(prob, k);
                OperatorHandle K = (ks.degree != SymbolDegree::general)
                                       ? quantize_poly(ks, grid, t)
                                       : quantize_dense(ks, grid, t);
                out = first ? K : lincomb(cdouble{1, 0}, out, cdouble{1, 0}, K);
                first = false;
            }
            return out;
        };
        for (const auto& part : p.particles)
            if (part.damp.present) gen.time_dependent = gen.time_dependent || part.damp.k.time_dependent();
    }
    const Grid& g = *p.grid;
    gen.kin_diag.resize(g.total());
    std::vector<int> idx(g.dim());
    for (std::size_t i = 0; i < g.total(); ++i) {
        g.unravel(i, idx);
        double s = 0.0;
        for (int ax = 0; ax < g.dim(); ++ax) {
            int k = ax / p.d;
            double m = g.dmult()[idx[ax]];
            s += m * m / (2.0 * p.particles[static_cast<std::size_t>(k)].mass);
        }
        gen.kin_diag[i] = s;
    }
    return gen;
}

double bprime_norm(const State& f, const ManyBodyProblem& p, int a, double boundary_threshold) {
    if (a < 0 || a > 1) throw std::invalid_argument("bprime_norm: a in {0, 1} at desk scale");
    double bm = boundary_mass(f, 0.1);
    if (bm > boundary_threshold)
        throw std::runtime_error("bprime_norm: boundary-mass guard tripped");
    double total = l2_norm(f);
    if (a == 0) return total;
    const Grid& g = *f.grid;
    // all multi-indices 1 <= |alpha| <= 2a over the flattened axes
    std::vector<int> alpha(static_cast<std::size_t>(g.dim()), 0);
    std::function<void(int, int)> rec = [&](int axis, int left) {
        if (axis == g.dim()) {
            int tot = 0;
            for (int v : alpha) tot += v;
            if (tot >= 1) total += l2_norm(spectral_derivative(f, alpha));
            return;
        }
        for (int v = 0; v <= left; ++v) {
            alpha[static_cast<std::size_t>(axis)] = v;
            rec(axis + 1, left - v);
        }
    };
    rec(0, 2 * a);
    for (int k = 0; k < p.n; ++k) {
        const Particle& part = p.particles[static_cast<std::size_t>(k)];
        double power = 2.0 * a * (part.cls.M + 1.0);
        State wf = f;
        std::vector<double> z(static_cast<std::size_t>(g.dim()));
        for (std::size_t i = 0; i < wf.values.size(); ++i) {
            g.point(i, z);
            auto xk = std::span<const double>(z).subspan(static_cast<std::size_t>(k * p.d),
                                                         static_cast<std::size_t>(p.d));
            wf.values[i] *= std::pow(bracket(xk), power);
        }
        total += l2_norm(wf);
    }
    return total;
}

AssumptionReport check_assumption_2_3(const ManyBodyProblem& p, const SampleBox& box, int n_samples,
                                      unsigned long long seed) {
    AssumptionReport rep;
    rep.box = box;
    rep.n_samples = n_samples;
    rep.seed = seed;
    // per-particle clauses delegate to the single-particle checker
    for (int k = 0; k < p.n; ++k) {
        const Particle& part = p.particles[static_cast<std::size_t>(k)];
        PotentialSpec pot;
        pot.dim = p.d;
        pot.mass = part.mass;
        pot.V = part.V;
        pot.A = part.A;
        AssumptionReport sub = check_growth(pot, part.damp, part.cls, box, n_samples, seed + static_cast<unsigned long long>(k));
        for (auto c : sub.clauses) {
            c.id = "p" + std::to_string(k + 1) + ":" + c.id;
            rep.clauses.push_back(c);
        }
    }
    // interaction clauses
    std::mt19937_64 rng(seed + 77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> ut(box.t_lo, box.t_hi);
    const double M0 = p.min_M0();
    for (const auto& w : p.interactions) {
        double delta = 1.0;
        {
            const auto& pi = p.particles[static_cast<std::size_t>(w.i)];
            const auto& pj = p.particles[static_cast<std::size_t>(w.j)];
            delta = std::min(pi.cls.delta, pj.cls.delta);
        }
        double Cfull = 0.0, Cin = 0.0, CDfull = 0.0, CDin = 0.0;
        std::vector<double> x(static_cast<std::size_t>(p.d));
        std::vector<double> witness;
        // derivative fields up to order 3
        std::vector<ScalarField> derivs;
        std::vector<int> alpha(static_cast<std::size_t>(p.d), 0);
        std::function<void(int, int)> rec = [&](int axis, int left) {
            if (axis == p.d) {
                int tot = 0;
                for (int v : alpha) tot += v;
                if (tot >= 1) derivs.push_back(w.W.deriv(alpha));
                return;
            }
            for (int v = 0; v <= left; ++v) {
                alpha[static_cast<std::size_t>(axis)] = v;
                rec(axis + 1, left - v);
            }
        };
        rec(0, 3);
        double wpow = w.w12_type ? 2.0 * (M0 + 1.0) - delta : 1.0;
        double dpow = w.w12_type ? 2.0 * (M0 + 1.0) : 1.0;
        for (int s = 0; s < n_samples; ++s) {
            double tt = ut(rng);
            bool inner = true;
            for (int j = 0; j < p.d; ++j) {
                x[static_cast<std::size_t>(j)] = u(rng) * 2.0 * box.x_half[static_cast<std::size_t>(j % static_cast<int>(box.x_half.size()))];
                inner = inner && std::abs(x[static_cast<std::size_t>(j)]) <=
                                     box.x_half[static_cast<std::size_t>(j % static_cast<int>(box.x_half.size()))];
            }
            double b = bracket(x);
            if (w.w12_type) {
                double r = std::abs(w.W(tt, x)) / std::pow(b, wpow);
                if (r > Cfull) { Cfull = r; witness = x; }
                if (inner) Cin = std::max(Cin, r);
            }
            double dmax = 0.0;
            for (const auto& f : derivs) dmax = std::max(dmax, std::abs(f(tt, x)));
            double rd = dmax / std::pow(b, dpow);
            CDfull = std::max(CDfull, rd);
            if (inner) CDin = std::max(CDin, rd);
        }
        std::string tag = "W" + std::to_string(w.i + 1) + std::to_string(w.j + 1);
        if (w.w12_type) {
            ClauseReport c;
            c.id = tag + "-bound";
            c.description = "|W| <= C <x>^{2(M0+1)-delta}, delta=" + std::to_string(delta);
            c.fitted_C = Cfull;
            c.fitted_C_inner = Cin;
            c.witness_x = witness;
            c.stable = Cin <= 0 || Cfull <= rep.stability_factor * Cin || Cfull < 1e-12;
            c.pass = c.stable && std::isfinite(Cfull);
            rep.clauses.push_back(c);
        }
        ClauseReport cd;
        cd.id = tag + (w.w12_type ? "-deriv" : "-generic-deriv");
        cd.description = w.w12_type ? "|d^a W| <= C <x>^{2(M0+1)}" : "|d^a W| <= C <x>";
        cd.fitted_C = CDfull;
        cd.fitted_C_inner = CDin;
        cd.stable = CDin <= 0 || CDfull <= rep.stability_factor * CDin || CDfull < 1e-12;
        cd.pass = cd.stable && std::isfinite(CDfull);
        rep.clauses.push_back(cd);
    }
    return rep;
}

Trajectory mb_propagate(const ManyBodyProblem& p, const State& u0, double T, const EvolveConfig& cfg) {
    Generator gen = mb_generator(p);
    std::vector<MonitorLevel> monitors;
    for (auto [a, M] : cfg.monitor) {
        (void)M;  // the flattened norm uses each particle's own M
        int level = a;
        ManyBodyProblem prob = p;
        double thr = cfg.assumption_override ? 1.0 : cfg.boundary_threshold;
        monitors.push_back({"bprime:a=" + std::to_string(level),
                            [prob, level, thr](const State& s) { return bprime_norm(s, prob, level, thr); }});
    }
    return propagate_core(gen, u0, T, cfg, monitors, false);
}

ScanReport mb_parametrix_scan(const ManyBodyProblem& p, const std::vector<double>& mu_list, int iters,
                              unsigned long long seed) {
    if (!p.grid->dense_capable())
        throw std::invalid_argument("mb_parametrix_scan: flattened grid exceeds the dense limit");
    ScanReport rep;
    rep.variable = "mu";
    rep.values = mu_list;
    rep.expected = -0.5;
    rep.band_lo = -0.65;
    rep.band_hi = -0.35;

    SymbolExpr hhat = comparison_h(p, false);
    SymbolExpr hhat_s = comparison_h(p, true);
    OperatorHandle H = quantize_poly(hhat, p.grid, 0.0);

    // mu* and C0* of the Phi-weighted lower bound, fitted on the grid lattice
    std::vector<double> phi = phi_weight(p);
    const Grid& g = *p.grid;
    double C0 = 1.0;
    {
        std::vector<int> idx(g.dim());
        std::vector<double> z(static_cast<std::size_t>(g.dim())), zeta(static_cast<std::size_t>(g.dim()));
        double inf_ratio = std::numeric_limits<double>::infinity();
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::size_t> pick(0, g.total() - 1);
        for (int s = 0; s < 4000; ++s) {
            std::size_t ix = pick(rng), iz = pick(rng);
            g.point(ix, z);
            g.unravel(iz, idx);
            for (int ax = 0; ax < g.dim(); ++ax) zeta[static_cast<std::size_t>(ax)] = g.dmult()[idx[ax]];
            double hv = hhat.eval(0.0, z, zeta).real();
            double theta = 1.0;
            for (double c : zeta) theta += c * c;
            theta += phi[ix] * phi[ix];
            if (hv > 1e-12) inf_ratio = std::min(inf_ratio, theta / hv);
        }
        C0 = std::min(1.0, inf_ratio);
        double mu_star = 0.0;
        for (int s = 0; s < 4000; ++s) {
            std::size_t ix = pick(rng), iz = pick(rng);
            g.point(ix, z);
            g.unravel(iz, idx);
            for (int ax = 0; ax < g.dim(); ++ax) zeta[static_cast<std::size_t>(ax)] = g.dmult()[idx[ax]];
            double hv = hhat.eval(0.0, z, zeta).real();
            double theta = 1.0;
            for (double c : zeta) theta += c * c;
            theta += phi[ix] * phi[ix];
            mu_star = std::max(mu_star, C0 * theta - hv);
        }
        rep.C0_star = C0;
        rep.C1_star = mu_star;  // the mu* of the weighted lower bound
        rep.mu_floor = mu_star;
    }

    std::vector<double> xs, ys;
    for (double mu : mu_list) {
        bool ok = mu >= std::max(2.0 * rep.mu_floor, 1.0);
        rep.admissible.push_back(ok);
        if (!ok) {
            rep.norms.push_back(0.0);
            continue;
        }
        SymbolExpr pm;
        pm.dim = hhat_s.dim;
        pm.degree = SymbolDegree::general;
        pm.name = "p_mu_hat";
        pm.time_dep = hhat_s.time_dep;
        auto hs = hhat_s.eval;
        pm.eval = [hs, mu](double t, std::span<const double> z, std::span<const double> zeta) -> cdouble {
            return 1.0 / (mu + hs(t, z, zeta));
        };
        OperatorHandle P = quantize_dense(pm, p.grid, 0.0, Ordering::left);
        OperatorHandle R = lincomb(cdouble{1, 0}, compose(shift(H, mu), P), cdouble{-1, 0},
                                   OperatorHandle::identity(p.grid));
        rep.norms.push_back(op_norm_estimate(R, iters, seed).value);
        xs.push_back(std::log(mu));
        ys.push_back(std::log(std::max(rep.norms.back(), 1e-300)));
    }
    if (xs.size() < 3) throw std::runtime_error("mb_parametrix_scan: too few admissible mu values");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = xs.size();
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    rep.pass = rep.slope >= rep.band_lo && rep.slope <= rep.band_hi;
    return rep;
}

State swap_particles(const State& f, const ManyBodyProblem& p, int i, int j) {
    const Grid& g = *f.grid;
    State out = f;
    std::vector<int> idx(g.dim()), jdx(g.dim());
    for (std::size_t flat = 0; flat < f.values.size(); ++flat) {
        g.unravel(flat, idx);
        jdx = idx;
        for (int ax = 0; ax < p.d; ++ax)
            std::swap(jdx[i * p.d + ax], jdx[j * p.d + ax]);
        std::size_t target = 0;
        for (int ax = 0; ax < g.dim(); ++ax) target = target * g.n() + static_cast<std::size_t>(jdx[ax]);
        out.values[target] = f.values[flat];
    }
    return out;
}

}  // namespace weylab
