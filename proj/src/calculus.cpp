#include "weylab/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace weylab {

namespace {

SampleBox default_box(const Problem& p) {
    SampleBox box;
    box.x_half.assign(static_cast<std::size_t>(p.pot.dim), p.grid->half_width());
    // cover the grid's own frequency range
    box.xi_half = M_PI / p.grid->half_width() * (p.grid->n() / 2);
    return box;
}

LowerBoundFit fit_for(const Problem& p) {
    GrowthClass cls = p.growth;
    if (cls.kind != GrowthClass::Kind::A22) {
        cls.kind = GrowthClass::Kind::A22;
        cls.M = std::max(cls.M, 1e-9);
    }
    return fit_lower_bound_constants(p.pot, cls, default_box(p), 4000, 11);
}

void fit_line(const std::vector<double>& xs, const std::vector<double>& ys, double& slope,
              double& halfwidth) {
    std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0 || n < 2) throw std::runtime_error("scan fit: degenerate abscissa");
    slope = (n * sxy - sx * sy) / denom;
    double intercept = (sy - slope * sx) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = ys[i] - slope * xs[i] - intercept;
        ss += r * r;
    }
    double var = n > 2 ? ss / (n - 2) : 0.0;
    halfwidth = 2.0 * std::sqrt(var * n / denom);
}

}  // namespace

SymbolExpr parametrix_symbol(const SymbolExpr& h_s, double mu, const LowerBoundFit& fit) {
    if (mu < fit.mu_floor())
        throw std::invalid_argument("parametrix_symbol: mu below the admissible floor C0*/2 + C1*");
    SymbolExpr s;
    s.dim = h_s.dim;
    s.degree = SymbolDegree::general;
    s.name = "p_mu";
    s.time_dep = h_s.time_dep;
    auto hs = h_s.eval;
    s.eval = [hs, mu](double t, std::span<const double> x, std::span<const double> xi) -> cdouble {
        return 1.0 / (mu + hs(t, x, xi));
    };
    return s;
}

double remainder_norm(const Problem& p, double mu, int iters, unsigned long long seed) {
    if (!p.grid->dense_capable())
        throw std::invalid_argument("remainder_norm: grid exceeds the dense-kernel limit");
    LowerBoundFit fit = fit_for(p);
    SymbolExpr hs = symmetrized_symbol(p.pot);
    SymbolExpr pm = parametrix_symbol(hs, mu, fit);
    OperatorHandle P = quantize_dense(pm, p.grid, 0.0, Ordering::left);
    OperatorHandle H = quantize_poly(hamiltonian_symbol(p.pot), p.grid, 0.0);
    // R = (mu + H) P - I
    OperatorHandle R = lincomb(cdouble{1, 0}, compose(shift(H, mu), P), cdouble{-1, 0},
                               OperatorHandle::identity(p.grid));
    NormEstimate est = op_norm_estimate(R, iters, seed);
    return est.value;
}

ScanReport remainder_decay_scan(const Problem& p, const std::vector<double>& mu_list, int iters,
                                unsigned long long seed) {
    if (mu_list.size() < 5)
        throw std::invalid_argument("remainder_decay_scan: need >= 5 mu values");
    ScanReport rep;
    rep.variable = "mu";
    rep.values = mu_list;
    rep.expected = -0.5;
    rep.band_lo = -0.65;
    rep.band_hi = -0.35;
    LowerBoundFit fit = fit_for(p);
    rep.C0_star = fit.C0;
    rep.C1_star = fit.C1;
    rep.mu_floor = fit.mu_floor();
    std::vector<double> xs, ys;
    for (double mu : mu_list) {
        bool ok = mu >= std::max(10.0 * fit.C1, fit.mu_floor());
        rep.admissible.push_back(ok);
        if (!ok) {
            rep.norms.push_back(0.0);
            continue;
        }
        double nrm = remainder_norm(p, mu, iters, seed);
        rep.norms.push_back(nrm);
        xs.push_back(std::log(mu - fit.C1));
        ys.push_back(std::log(std::max(nrm, 1e-300)));
    }
    if (xs.size() < 3) throw std::runtime_error("remainder_decay_scan: too few admissible mu values");
    fit_line(xs, ys, rep.slope, rep.slope_halfwidth);
    rep.pass = rep.slope >= rep.band_lo && rep.slope <= rep.band_hi;
    return rep;
}

State resolvent_apply(const Problem& p, double mu, const State& f) {
    OperatorHandle H = quantize_poly(hamiltonian_symbol(p.pot), p.grid, 0.0);
    if (p.grid->dense_capable()) {
        Eigen::MatrixXcd A = H.dense();
        for (Eigen::Index i = 0; i < A.rows(); ++i) A(i, i) += mu;
        Eigen::Map<const Eigen::VectorXcd> b(f.values.data(), static_cast<Eigen::Index>(f.values.size()));
        Eigen::VectorXcd x = A.partialPivLu().solve(b);
        State out = f;
        out.values.assign(x.data(), x.data() + x.size());
        return out;
    }
    // conjugate gradient: mu + H is Hermitian positive definite for admissible mu
    State out = f;
    std::vector<cdouble> x(f.values.size(), cdouble{0, 0}), r = f.values, q = r;
    auto apply = [&](const std::vector<cdouble>& v) {
        auto hv = H.apply(v);
        for (std::size_t i = 0; i < hv.size(); ++i) hv[i] += mu * v[i];
        return hv;
    };
    auto dot = [](const std::vector<cdouble>& a, const std::vector<cdouble>& b) {
        cdouble s{0, 0};
        for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
        return s;
    };
    double rr = dot(r, r).real(), b2 = std::sqrt(rr);
    for (int it = 0; it < 10000 && std::sqrt(rr) > 1e-12 * b2; ++it) {
        auto Aq = apply(q);
        double alpha = rr / dot(q, Aq).real();
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += alpha * q[i];
            r[i] -= alpha * Aq[i];
        }
        double rr2 = dot(r, r).real();
        double beta = rr2 / rr;
        rr = rr2;
        for (std::size_t i = 0; i < q.size(); ++i) q[i] = r[i] + beta * q[i];
    }
    out.values = std::move(x);
    return out;
}

State resolvent_neumann(const Problem& p, double mu, const State& f, int terms) {
    LowerBoundFit fit = fit_for(p);
    SymbolExpr hs = symmetrized_symbol(p.pot);
    SymbolExpr pm = parametrix_symbol(hs, mu, fit);
    OperatorHandle P = quantize_dense(pm, p.grid, 0.0, Ordering::left);
    OperatorHandle H = quantize_poly(hamiltonian_symbol(p.pot), p.grid, 0.0);
    OperatorHandle R = lincomb(cdouble{1, 0}, compose(shift(H, mu), P), cdouble{-1, 0},
                               OperatorHandle::identity(p.grid));
    NormEstimate est = op_norm_estimate(R, 40, 3);
    if (est.value >= 1.0)
        throw std::runtime_error("resolvent_neumann: ||R_mu|| >= 1, series divergent at this mu");
    // sum_k (-R)^k f
    std::vector<cdouble> term = f.values, acc = f.values;
    for (int k = 1; k <= terms; ++k) {
        term = R.apply(term);
        for (auto& z : term) z = -z;
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += term[i];
    }
    State out = f;
    out.values = P.apply(acc);
    return out;
}

ScanReport commutator_bound_scan(const Problem& p, const std::vector<double>& eps_list,
                                 const CutoffProfile& profile, double mu, int iters,
                                 unsigned long long seed) {
    if (!p.grid->dense_capable())
        throw std::invalid_argument("commutator_bound_scan: grid exceeds the dense limit");
    ScanReport rep;
    rep.variable = "eps";
    rep.values = eps_list;
    LowerBoundFit fit = fit_for(p);
    rep.C0_star = fit.C0;
    rep.C1_star = fit.C1;
    if (mu <= 0.0) mu = default_mu(fit);
    rep.mu_floor = mu;
    SymbolExpr h = hamiltonian_symbol(p.pot);
    OperatorHandle H = quantize_poly(h, p.grid, 0.0);
    Eigen::MatrixXcd Lam = H.dense();
    for (Eigen::Index i = 0; i < Lam.rows(); ++i) Lam(i, i) += mu;
    for (double eps : eps_list) {
        OperatorHandle X = quantize_dense(cutoff_symbol(h, mu, eps, profile), p.grid, 0.0);
        Eigen::MatrixXcd Om = X.dense() * Lam - Lam * X.dense();
        OperatorHandle OmH = OperatorHandle::from_dense(p.grid, std::move(Om));
        rep.norms.push_back(op_norm_estimate(OmH, iters, seed).value);
        rep.admissible.push_back(true);
    }
    double lo = rep.norms.front(), hi = rep.norms.front();
    for (double v : rep.norms) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    rep.band_ratio = hi / std::max(lo, 1e-300);
    // monotone divergence toward eps -> 0 means norms strictly increase along
    // the list when sorted by decreasing eps
    std::vector<std::pair<double, double>> sorted;
    for (std::size_t i = 0; i < eps_list.size(); ++i) sorted.emplace_back(eps_list[i], rep.norms[i]);
    std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.first > b.first; });
    rep.monotone_divergence = true;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
        if (sorted[i + 1].second <= sorted[i].second) rep.monotone_divergence = false;
    rep.pass = rep.band_ratio <= 3.0 && !rep.monotone_divergence;
    rep.notes = "profile=" + profile.name;
    return rep;
}

QaeResult q_a_epsilon_norm(const Problem& p, int a, double epsilon, double t,
                           const CutoffProfile& profile, double mu, int iters,
                           unsigned long long seed) {
    if (a != 1 && a != -1) throw std::invalid_argument("q_a_epsilon_norm: a must be +-1");
    if (!p.grid->dense_capable())
        throw std::invalid_argument("q_a_epsilon_norm: grid exceeds the dense limit");
    LowerBoundFit fit = fit_for(p);
    if (mu <= 0.0) mu = default_mu(fit);
    QaeResult res;
    res.mu = mu;

    SymbolExpr h = hamiltonian_symbol(p.pot);
    OperatorHandle Hop = quantize_poly(h, p.grid, t);
    Eigen::MatrixXcd Lam = Hop.dense();
    for (Eigen::Index i = 0; i < Lam.rows(); ++i) Lam(i, i) += mu;
    Eigen::MatrixXcd LamInv = Lam.partialPivLu().inverse();

    // dLambda/dt: quantization of d/dt h = d/dt V - (xi - A) . dA/dt / m
    std::vector<ScalarField> dAdt;
    for (const auto& aj : p.pot.A) dAdt.push_back(aj.dt());
    SymbolExpr dh;
    dh.dim = p.pot.dim;
    dh.degree = SymbolDegree::d2;
    dh.name = "dh_dt";
    dh.time_dep = true;
    {
        PotentialSpec pot = p.pot;
        ScalarField dV = p.pot.V.dt();
        dh.eval = [pot, dV, dAdt](double tt, std::span<const double> x,
                                  std::span<const double> xi) -> cdouble {
            double acc = dV(tt, x);
            for (std::size_t j = 0; j < dAdt.size(); ++j)
                acc -= (xi[j] - pot.A[j](tt, x)) * dAdt[j](tt, x) / pot.mass;
            return acc;
        };
    }
    Eigen::MatrixXcd dLam = quantize_poly(dh, p.grid, t).dense();

    // H~_eps = X^dagger (H - iK) X
    OperatorHandle X = quantize_dense(cutoff_symbol(h, mu, epsilon, profile), p.grid, t);
    Eigen::MatrixXcd Xm = X.dense();
    Eigen::MatrixXcd Ht = Hop.dense();
    if (p.damp.present) {
        SymbolExpr k = damping_symbol(p.damp, p.pot.dim);
        OperatorHandle K = (k.degree != SymbolDegree::general) ? quantize_poly(k, p.grid, t)
                                                               : quantize_dense(k, p.grid, t);
        Ht -= cdouble{0, 1} * K.dense();
    }
    Eigen::MatrixXcd Heps = Xm.adjoint() * Ht * Xm;

    const cdouble I1{0, 1};
    Eigen::MatrixXcd Q1 = (Lam * Heps - Heps * Lam + I1 * dLam) * LamInv;
    if (a == 1) {
        res.norm_direct = op_norm_estimate(OperatorHandle::from_dense(p.grid, Q1), iters, seed).value;
        return res;
    }
    // a = -1 from the definition: [i d/dt - Heps, Lam^{-1}] Lam
    //   = -i Lam^{-1} dLam Lam^{-1} Lam - [Heps, Lam^{-1}] Lam
    Eigen::MatrixXcd Qm1 =
        -I1 * LamInv * dLam - (Heps * LamInv - LamInv * Heps) * Lam;
    res.norm_direct = op_norm_estimate(OperatorHandle::from_dense(p.grid, Qm1), iters, seed).value;
    // inductive identity Q_{-1} = -Lam^{-1} Q_1 Lam
    Eigen::MatrixXcd Qid = -LamInv * Q1 * Lam;
    res.norm_identity = op_norm_estimate(OperatorHandle::from_dense(p.grid, Qid), iters, seed).value;
    return res;
}

}  // namespace weylab
