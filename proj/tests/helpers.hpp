#pragma once

#include <cmath>
#include <random>

#include "weylab/evolve.hpp"

namespace weylab::test {

inline State normalized_gaussian(const GridPtr& g, double width = 1.0, double center = 0.0,
                                 double momentum = 0.0) {
    State u(g, 0.0);
    std::vector<double> x(static_cast<std::size_t>(g->dim()));
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        g->point(i, x);
        double arg = 0.0, phase = 0.0;
        for (double c : x) {
            arg += (c - center) * (c - center);
            phase += momentum * c;
        }
        u.values[i] = std::exp(cdouble{-arg / (2.0 * width * width), phase});
    }
    double n = l2_norm(u);
    for (auto& z : u.values) z /= n;
    return u;
}

inline State random_band_limited(const GridPtr& g, std::mt19937_64& rng, int band = 0,
                                 double envelope_width = 2.0) {
    const int N = g->n();
    if (band <= 0) band = N / 8;
    std::normal_distribution<double> nd(0.0, 1.0);
    State u(g, 0.0);
    std::vector<double> x(static_cast<std::size_t>(g->dim()));
    // random low-band trigonometric polynomial times a gaussian envelope,
    // identical as a continuum function across refinements
    std::vector<std::vector<cdouble>> coef(static_cast<std::size_t>(g->dim()),
                                           std::vector<cdouble>(static_cast<std::size_t>(2 * band + 1)));
    for (auto& row : coef)
        for (auto& c : row) c = cdouble{nd(rng), nd(rng)};
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        g->point(i, x);
        cdouble acc{0.0, 0.0};
        for (int ax = 0; ax < g->dim(); ++ax) {
            cdouble axacc{0.0, 0.0};
            for (int k = -band; k <= band; ++k) {
                double xi = M_PI / g->half_width() * k;
                axacc += coef[static_cast<std::size_t>(ax)][static_cast<std::size_t>(k + band)] *
                         std::exp(cdouble{0.0, xi * x[static_cast<std::size_t>(ax)]});
            }
            acc += axacc;
        }
        double env = 0.0;
        for (double c : x) env += c * c;
        u.values[i] = acc * std::exp(-env / (2.0 * envelope_width * envelope_width));
    }
    double n = l2_norm(u);
    for (auto& z : u.values) z /= n;
    return u;
}

inline PotentialSpec harmonic_potential(int dim = 1, double mass = 1.0, double k = 0.5) {
    PotentialSpec p;
    p.dim = dim;
    p.mass = mass;
    std::string expr = std::to_string(k) + "*(";
    for (int j = 1; j <= dim; ++j) expr += (j > 1 ? "+" : "") + ("x" + std::to_string(j) + "^2");
    expr += ")";
    p.V = ScalarField::from_expr(parse_expr(expr), dim);
    return p;
}

inline double rel_err(const std::vector<cdouble>& a, const std::vector<cdouble>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace weylab::test
