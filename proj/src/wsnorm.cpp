#include "weylab/wsnorm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace weylab {

namespace {

void enumerate_upto(int dim, int max_order, std::vector<std::vector<int>>& out) {
    std::vector<int> cur(static_cast<std::size_t>(dim), 0);
    std::function<void(int, int)> rec = [&](int axis, int left) {
        if (axis == dim) {
            int total = 0;
            for (int a : cur) total += a;
            if (total >= 1) out.push_back(cur);
            return;
        }
        for (int a = 0; a <= left; ++a) {
            cur[static_cast<std::size_t>(axis)] = a;
            rec(axis + 1, left - a);
        }
    };
    rec(0, max_order);
}

std::vector<double> bracket_weight(const Grid& g, double power) {
    return sample_real(g, [power](std::span<const double> x) {
        double s = 1.0;
        for (double c : x) s += c * c;
        return std::pow(std::sqrt(s), power);
    });
}

SymbolExpr lambda_M_symbol(int dim, const NormSpec& spec) {
    SymbolExpr s;
    s.dim = dim;
    s.degree = SymbolDegree::d2;
    s.name = "lambda_M";
    s.time_dep = false;
    double mu = spec.mu_prime;
    double p = 2.0 * (spec.M + 1.0);
    s.eval = [mu, p](double, std::span<const double> x, std::span<const double> xi) -> cdouble {
        double kin = 0.0, w = 1.0;
        for (double z : xi) kin += z * z;
        for (double c : x) w += c * c;
        return mu + 0.5 * kin + std::pow(std::sqrt(w), p);
    };
    return s;
}

// Conjugate gradient for the Hermitian positive definite Lambda_M.
std::vector<cdouble> cg_solve(const OperatorHandle& A, const std::vector<cdouble>& b, double tol,
                              int max_iter) {
    std::vector<cdouble> x(b.size(), cdouble{0, 0});
    std::vector<cdouble> r = b, p = b;
    auto dot = [](const std::vector<cdouble>& u, const std::vector<cdouble>& v) {
        cdouble s{0, 0};
        for (std::size_t i = 0; i < u.size(); ++i) s += std::conj(u[i]) * v[i];
        return s;
    };
    double rr = dot(r, r).real();
    double b2 = std::sqrt(rr);
    if (b2 == 0.0) return x;
    for (int it = 0; it < max_iter; ++it) {
        std::vector<cdouble> Ap = A.apply(p);
        double pAp = dot(p, Ap).real();
        double alpha = rr / pAp;
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        double rr_new = dot(r, r).real();
        if (std::sqrt(rr_new) <= tol * b2) return x;
        double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    }
    throw std::runtime_error("lambda_M inverse: conjugate gradient did not converge");
}

}  // namespace

double sobolev_norm(const State& f, const NormSpec& spec) {
    if (spec.a < 0) throw std::invalid_argument("sobolev_norm: a must be >= 0 (use dual_norm)");
    if (spec.a > 3) throw std::invalid_argument("sobolev_norm: |a| <= 3 at desk scale");
    double bm = boundary_mass(f, 0.1);
    if (bm > spec.boundary_threshold)
        throw std::runtime_error("sobolev_norm: boundary-mass guard tripped (" + std::to_string(bm) + ")");
    double base = l2_norm(f);
    if (spec.a == 0) return base;

    const Grid& g = *f.grid;
    double total = base;
    std::vector<std::vector<int>> alphas;
    enumerate_upto(g.dim(), 2 * spec.a, alphas);
    for (const auto& alpha : alphas) total += l2_norm(spectral_derivative(f, alpha));

    std::vector<double> w = bracket_weight(g, 2.0 * spec.a * (spec.M + 1.0));
    State wf = f;
    for (std::size_t i = 0; i < wf.values.size(); ++i) wf.values[i] *= w[i];
    total += l2_norm(wf);
    return total;
}

OperatorHandle lambda_M_operator(const GridPtr& grid, const NormSpec& spec) {
    return quantize_poly(lambda_M_symbol(grid->dim(), spec), grid, 0.0);
}

State lambda_M_power_apply(const State& f, const NormSpec& spec, int power) {
    if (power == 0) return f;
    OperatorHandle lam = lambda_M_operator(f.grid, spec);
    if (power == 1) return lam.apply(f);
    if (power != -1) throw std::invalid_argument("lambda_M_power_apply: power must be -1, 0 or 1");
    State out = f;
    if (f.grid->total() <= 1024) {
        const Eigen::MatrixXcd& A = lam.dense();
        Eigen::Map<const Eigen::VectorXcd> b(f.values.data(), static_cast<Eigen::Index>(f.values.size()));
        Eigen::VectorXcd x = A.partialPivLu().solve(b);
        out.values.assign(x.data(), x.data() + x.size());
        return out;
    }
    out.values = cg_solve(lam, f.values, 1e-12, 20000);
    return out;
}

double dual_norm(const State& f, const NormSpec& spec) {
    if (spec.a >= 0) throw std::invalid_argument("dual_norm: a must be negative");
    if (spec.a != -1) throw std::invalid_argument("dual_norm: |a| = 1 at desk scale");
    NormSpec s1 = spec;
    s1.a = 1;
    return l2_norm(lambda_M_power_apply(f, s1, -1));
}

EquivalenceReport norm_equivalence_report(const NormSpec& spec, const std::vector<State>& ensemble) {
    if (ensemble.empty()) throw std::invalid_argument("norm_equivalence_report: empty ensemble");
    if (spec.a != 1) throw std::invalid_argument("norm_equivalence_report: a = 1 at desk scale");
    EquivalenceReport rep;
    for (const auto& f : ensemble) {
        double num = sobolev_norm(f, spec);
        double den = l2_norm(lambda_M_power_apply(f, spec, 1));
        rep.ratios.push_back(num / den);
    }
    std::vector<double> sorted = rep.ratios;
    std::sort(sorted.begin(), sorted.end());
    rep.ratio_min = sorted.front();
    rep.ratio_max = sorted.back();
    rep.ratio_median = sorted[sorted.size() / 2];
    return rep;
}

}  // namespace weylab
