#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "weylab/quantize.hpp"

using namespace weylab;
using weylab::test::rel_err;

namespace {

SymbolExpr make_symbol(int dim, SymbolDegree deg,
                       std::function<cdouble(double, std::span<const double>, std::span<const double>)> f) {
    SymbolExpr s;
    s.dim = dim;
    s.degree = deg;
    s.name = "test";
    s.time_dep = false;
    s.eval = std::move(f);
    return s;
}

}  // namespace

TEST_CASE("fast path: xi^2 acts as the spectral laplacian") {
    auto g = Grid::make(1, 64, M_PI);
    auto s = make_symbol(1, SymbolDegree::d2, [](double, std::span<const double>, std::span<const double> xi) {
        return cdouble{xi[0] * xi[0], 0.0};
    });
    OperatorHandle op = quantize_poly(s, g, 0.0);
    std::vector<cdouble> f(g->total());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::sin(3 * g->position(static_cast<int>(i)));
    auto out = op.apply(f);
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, std::abs(out[i] - 9.0 * f[i]));
    CHECK(worst <= 1e-10);
}

TEST_CASE("fast path: degree-0 symbol is pointwise multiplication") {
    auto g = Grid::make(1, 32, 2.0);
    auto s = make_symbol(1, SymbolDegree::d0, [](double, std::span<const double> x, std::span<const double>) {
        return cdouble{std::sin(M_PI * x[0] / 2.0), 0.0};
    });
    OperatorHandle op = quantize_poly(s, g, 0.0);
    std::mt19937_64 rng(1);
    auto f = random_state_values(*g, rng);
    auto out = op.apply(f);
    for (std::size_t i = 0; i < f.size(); ++i) {
        cdouble want = std::sin(M_PI * g->position(static_cast<int>(i)) / 2.0) * f[i];
        CHECK(std::abs(out[i] - want) <= 1e-13);
    }
}

TEST_CASE("dense kernel of the unit symbol is the identity") {
    auto g = Grid::make(1, 32, 3.0);
    auto s = make_symbol(1, SymbolDegree::d0,
                         [](double, std::span<const double>, std::span<const double>) {
                             return cdouble{1.0, 0.0};
                         });
    OperatorHandle op = quantize_dense(s, g, 0.0);
    const Eigen::MatrixXcd& K = op.dense();
    Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(K.rows(), K.cols());
    CHECK((K - I).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("x*xi symbol: symmetric ordering equals the dense kernel") {
    auto g = Grid::make(1, 32, 4.0);
    auto s = make_symbol(1, SymbolDegree::d1, [](double, std::span<const double> x, std::span<const double> xi) {
        return cdouble{x[0] * xi[0], 0.0};
    });
    OperatorHandle fast = quantize_poly(s, g, 0.0);
    OperatorHandle dense = quantize_dense(s, g, 0.0);
    State u = weylab::test::normalized_gaussian(g, 1.0);
    auto a = fast.apply(u.values), b = dense.apply(u.values);
    CHECK(rel_err(a, b) <= 1e-10);
}

TEST_CASE("path equivalence on random degree-<=2 symbols") {
    auto g = Grid::make(1, 64, 2.7);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double L = g->half_width();
    for (int trial = 0; trial < 10; ++trial) {
        double a0 = u(rng), a1 = u(rng), a2 = u(rng), b1 = u(rng), c1 = u(rng), c2 = u(rng);
        auto s = make_symbol(1, SymbolDegree::d2, [=](double, std::span<const double> x,
                                                      std::span<const double> xi) {
            double q0 = a0 * std::sin(2 * M_PI * x[0] / (2 * L)) + a1 * x[0] * x[0] / 5.0;
            double q1 = b1 * std::cos(4 * M_PI * x[0] / (2 * L)) + c1 * x[0] / 3.0;
            double q2 = 0.5 + c2 * 0.2 * std::sin(2 * M_PI * x[0] / (2 * L)) + a2 * 0.1;
            return cdouble{q0 + q1 * xi[0] + q2 * xi[0] * xi[0], 0.0};
        });
        OperatorHandle fast = quantize_poly(s, g, 0.0);
        OperatorHandle dense = quantize_dense(s, g, 0.0);
        std::mt19937_64 prng(100 + static_cast<unsigned long long>(trial));
        for (int probe = 0; probe < 20; ++probe) {
            auto f = random_state_values(*g, prng);
            auto x = fast.apply(f), y = dense.apply(f);
            CHECK(rel_err(x, y) <= 1e-10);
        }
    }
}

TEST_CASE("path equivalence in two dimensions") {
    auto g = Grid::make(2, 12, 2.0);
    auto s = make_symbol(2, SymbolDegree::d2, [](double, std::span<const double> x,
                                                 std::span<const double> xi) {
        double c = std::sin(M_PI * x[0] / 2.0) * std::cos(M_PI * x[1] / 2.0);
        return cdouble{x[0] * x[0] + c * xi[0] * xi[1] + 0.5 * (xi[0] * xi[0] + xi[1] * xi[1]) +
                           0.3 * c * xi[1],
                       0.0};
    });
    OperatorHandle fast = quantize_poly(s, g, 0.0);
    OperatorHandle dense = quantize_dense(s, g, 0.0);
    std::mt19937_64 rng(9);
    for (int probe = 0; probe < 5; ++probe) {
        auto f = random_state_values(*g, rng);
        CHECK(rel_err(fast.apply(f), dense.apply(f)) <= 1e-10);
    }
}

TEST_CASE("harmonic oscillator ground energy from the dense kernel") {
    auto g = Grid::make(1, 64, 8.0);
    auto s = make_symbol(1, SymbolDegree::d2, [](double, std::span<const double> x, std::span<const double> xi) {
        return cdouble{0.5 * (xi[0] * xi[0] + x[0] * x[0]), 0.0};
    });
    OperatorHandle op = quantize_dense(s, g, 0.0);
    Eigen::MatrixXcd H = 0.5 * (op.dense() + op.dense().adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("real symbols quantize to symmetric operators") {
    auto g = Grid::make(1, 32, 3.0);
    auto s = make_symbol(1, SymbolDegree::general, [](double, std::span<const double> x,
                                                      std::span<const double> xi) {
        return cdouble{std::exp(-0.1 * xi[0] * xi[0]) * (1 + 0.3 * std::sin(M_PI * x[0] / 3.0)), 0.0};
    });
    OperatorHandle op = quantize_dense(s, g, 0.0);
    const Eigen::MatrixXcd& K = op.dense();
    CHECK((K - K.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * K.cwiseAbs().maxCoeff());
}

TEST_CASE("linearity of operator application") {
    auto g = Grid::make(1, 32, 3.0);
    auto p = weylab::test::harmonic_potential(1, 1.0, 0.5);
    OperatorHandle op = quantize_poly(hamiltonian_symbol(p), g, 0.0);
    std::mt19937_64 rng(4);
    auto f = random_state_values(*g, rng);
    auto h = random_state_values(*g, rng);
    cdouble al{0.3, -0.8}, be{-1.1, 0.2};
    std::vector<cdouble> combo(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) combo[i] = al * f[i] + be * h[i];
    auto lhs = op.apply(combo);
    auto af = op.apply(f), ah = op.apply(h);
    std::vector<cdouble> rhs(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) rhs[i] = al * af[i] + be * ah[i];
    CHECK(rel_err(lhs, rhs) <= 1e-12);
}

TEST_CASE("adjoint") {
    auto g = Grid::make(1, 32, 3.0);
    // multiplication by real a(x) is self-adjoint
    auto sa = make_symbol(1, SymbolDegree::d0, [](double, std::span<const double> x, std::span<const double>) {
        return cdouble{x[0] * x[0], 0.0};
    });
    OperatorHandle ma = quantize_poly(sa, g, 0.0);
    std::mt19937_64 rng(6);
    auto f = random_state_values(*g, rng);
    CHECK(rel_err(ma.apply(f), ma.adjoint().apply(f)) <= 1e-13);

    // multiplication by i flips sign under adjoint
    auto si = make_symbol(1, SymbolDegree::d0, [](double, std::span<const double>, std::span<const double>) {
        return cdouble{0.0, 1.0};
    });
    OperatorHandle mi = quantize_poly(si, g, 0.0);
    auto x = mi.adjoint().apply(f);
    for (std::size_t i = 0; i < f.size(); ++i)
        CHECK(std::abs(x[i] + cdouble{0, 1} * f[i]) <= 1e-14);

    // dense kernel adjoint satisfies the pairing identity
    auto sg = make_symbol(1, SymbolDegree::general, [](double, std::span<const double> x,
                                                       std::span<const double> xi) {
        return cdouble{std::sin(M_PI * x[0] / 3.0) * std::exp(-0.05 * xi[0] * xi[0]),
                       0.1 * std::cos(M_PI * x[0] / 3.0)};
    });
    OperatorHandle og = quantize_dense(sg, g, 0.0);
    OperatorHandle ogd = og.adjoint();
    GridPtr gp = g;
    for (int trial = 0; trial < 10; ++trial) {
        State a(gp), b(gp);
        a.values = random_state_values(*g, rng);
        b.values = random_state_values(*g, rng);
        State oa = og.apply(a), adb = ogd.apply(b);
        cdouble lhs = inner_product(oa, b), rhs = inner_product(a, adb);
        CHECK(std::abs(lhs - rhs) <= 1e-11 * (std::abs(lhs) + 1.0));
    }
}

TEST_CASE("garding floor") {
    auto g = Grid::make(1, 64, 5.0);
    auto sx2 = make_symbol(1, SymbolDegree::d0, [](double, std::span<const double> x, std::span<const double>) {
        return cdouble{x[0] * x[0], 0.0};
    });
    CHECK(garding_floor(quantize_poly(sx2, g, 0.0)).floor >= -1e-12);

    auto sx2m1 = make_symbol(1, SymbolDegree::d0, [](double, std::span<const double> x, std::span<const double>) {
        return cdouble{x[0] * x[0] - 1.0, 0.0};
    });
    CHECK(garding_floor(quantize_poly(sx2m1, g, 0.0)).floor == doctest::Approx(-1.0).epsilon(1e-9));

    auto sxi2 = make_symbol(1, SymbolDegree::d2, [](double, std::span<const double>, std::span<const double> xi) {
        return cdouble{xi[0] * xi[0], 0.0};
    });
    CHECK(garding_floor(quantize_poly(sxi2, g, 0.0)).floor >= -1e-9);
}

TEST_CASE("operator norm estimate") {
    auto g = Grid::make(1, 32, 3.0);
    OperatorHandle id = OperatorHandle::identity(g);
    CHECK(op_norm_estimate(id, 30, 1).value == doctest::Approx(1.0).epsilon(1e-8));

    auto s2 = make_symbol(1, SymbolDegree::d0, [](double, std::span<const double>, std::span<const double>) {
        return cdouble{2.0, 0.0};
    });
    CHECK(op_norm_estimate(quantize_poly(s2, g, 0.0), 30, 1).value == doctest::Approx(2.0).epsilon(1e-8));
    CHECK_THROWS(op_norm_estimate(id, 5, 1));

    // random dense kernel against the full SVD oracle
    std::mt19937_64 rng(13);
    Eigen::MatrixXcd A(32, 32);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index i = 0; i < 32; ++i)
        for (Eigen::Index j = 0; j < 32; ++j) A(i, j) = cdouble{nd(rng), nd(rng)};
    OperatorHandle op = OperatorHandle::from_dense(g, A);
    double svd = A.jacobiSvd().singularValues()(0);
    CHECK(op_norm_estimate(op, 400, 2).value == doctest::Approx(svd).epsilon(1e-6));
}

TEST_CASE("mis-declared symbol degree is rejected") {
    auto g = Grid::make(1, 32, 3.0);
    auto s = make_symbol(1, SymbolDegree::d2, [](double, std::span<const double>, std::span<const double> xi) {
        return cdouble{std::exp(-xi[0] * xi[0]), 0.0};  // genuinely non-polynomial
    });
    CHECK_THROWS_AS(quantize_poly(s, g, 0.0), std::invalid_argument);
}

TEST_CASE("frozen-time consistency") {
    auto g = Grid::make(1, 32, 3.0);
    auto s = make_symbol(1, SymbolDegree::d0, [](double t, std::span<const double> x, std::span<const double>) {
        return cdouble{std::cos(t) * x[0], 0.0};
    });
    // a time-dependent symbol frozen at t equals the time-frozen symbol quantized
    auto frozen = make_symbol(1, SymbolDegree::d0, [](double, std::span<const double> x, std::span<const double>) {
        return cdouble{std::cos(0.7) * x[0], 0.0};
    });
    std::mt19937_64 rng(3);
    auto f = random_state_values(*g, rng);
    CHECK(rel_err(quantize_poly(s, g, 0.7).apply(f), quantize_poly(frozen, g, 0.0).apply(f)) <= 1e-14);
}
