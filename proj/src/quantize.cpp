#include "weylab/quantize.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace weylab {

namespace {

using Vec = std::vector<cdouble>;

Vec fft_of(const Grid& g, const Vec& f, int sign) {
    Vec out = f;
    fft_all(g, out, sign);
    return out;
}

void axis_multiply(const Grid& g, Vec& spec, int axis, const std::vector<double>& table) {
    std::vector<int> idx(g.dim());
    for (std::size_t i = 0; i < spec.size(); ++i) {
        g.unravel(i, idx);
        spec[i] *= table[idx[axis]];
    }
}

}  // namespace

// ---------------------------------------------------------- OperatorHandle

OperatorHandle OperatorHandle::identity(GridPtr g, double t) {
    OperatorHandle op;
    op.grid_ = std::move(g);
    op.time_ = t;
    op.kind_ = Kind::identity;
    op.fwd_ = [](const Vec& f) { return f; };
    op.adj_ = op.fwd_;
    return op;
}

OperatorHandle OperatorHandle::from_functions(GridPtr g, Kind kind, ApplyFn fwd, ApplyFn adj, double t) {
    OperatorHandle op;
    op.grid_ = std::move(g);
    op.time_ = t;
    op.kind_ = kind;
    op.fwd_ = std::move(fwd);
    op.adj_ = std::move(adj);
    return op;
}

OperatorHandle OperatorHandle::from_dense(GridPtr g, Eigen::MatrixXcd mat, double t) {
    OperatorHandle op;
    op.grid_ = std::move(g);
    op.time_ = t;
    op.kind_ = Kind::dense_kernel;
    auto m = std::make_shared<Eigen::MatrixXcd>(std::move(mat));
    op.mat_ = m;
    op.fwd_ = [m](const Vec& f) {
        Eigen::Map<const Eigen::VectorXcd> v(f.data(), static_cast<Eigen::Index>(f.size()));
        Eigen::VectorXcd r = (*m) * v;
        return Vec(r.data(), r.data() + r.size());
    };
    op.adj_ = [m](const Vec& f) {
        Eigen::Map<const Eigen::VectorXcd> v(f.data(), static_cast<Eigen::Index>(f.size()));
        Eigen::VectorXcd r = m->adjoint() * v;
        return Vec(r.data(), r.data() + r.size());
    };
    return op;
}

std::vector<cdouble> OperatorHandle::apply(const Vec& f) const {
    if (!fwd_) throw std::runtime_error("OperatorHandle: empty handle");
    return fwd_(f);
}

std::vector<cdouble> OperatorHandle::apply_adjoint(const Vec& f) const {
    if (!adj_) throw std::runtime_error("OperatorHandle: no adjoint");
    return adj_(f);
}

State OperatorHandle::apply(const State& f) const {
    if (f.grid != grid_) throw std::invalid_argument("OperatorHandle: grid mismatch");
    State out = f;
    out.values = apply(f.values);
    return out;
}

OperatorHandle OperatorHandle::adjoint() const {
    OperatorHandle op = *this;
    std::swap(op.fwd_, op.adj_);
    if (mat_) op.mat_ = std::make_shared<Eigen::MatrixXcd>(mat_->adjoint());
    return op;
}

const Eigen::MatrixXcd& OperatorHandle::dense() const {
    if (mat_) return *mat_;
    if (!grid_->dense_capable())
        throw std::runtime_error("OperatorHandle::dense: grid exceeds the dense-kernel limit");
    const auto n = static_cast<Eigen::Index>(grid_->total());
    auto m = std::make_shared<Eigen::MatrixXcd>(n, n);
    Vec basis(grid_->total(), cdouble{0.0, 0.0});
    for (Eigen::Index k = 0; k < n; ++k) {
        basis[static_cast<std::size_t>(k)] = 1.0;
        Vec col = fwd_(basis);
        for (Eigen::Index r = 0; r < n; ++r) (*m)(r, k) = col[static_cast<std::size_t>(r)];
        basis[static_cast<std::size_t>(k)] = 0.0;
    }
    mat_ = m;
    return *mat_;
}

OperatorHandle compose(const OperatorHandle& a, const OperatorHandle& b) {
    if (a.grid() != b.grid()) throw std::invalid_argument("compose: grid mismatch");
    return OperatorHandle::from_functions(
        a.grid(), OperatorHandle::Kind::composition,
        [a, b](const Vec& f) { return a.apply(b.apply(f)); },
        [a, b](const Vec& f) { return b.apply_adjoint(a.apply_adjoint(f)); }, a.time());
}

OperatorHandle lincomb(cdouble alpha, const OperatorHandle& a, cdouble beta, const OperatorHandle& b) {
    if (a.grid() != b.grid()) throw std::invalid_argument("lincomb: grid mismatch");
    return OperatorHandle::from_functions(
        a.grid(), OperatorHandle::Kind::combination,
        [alpha, beta, a, b](const Vec& f) {
            Vec u = a.apply(f), v = b.apply(f);
            for (std::size_t i = 0; i < u.size(); ++i) u[i] = alpha * u[i] + beta * v[i];
            return u;
        },
        [alpha, beta, a, b](const Vec& f) {
            Vec u = a.apply_adjoint(f), v = b.apply_adjoint(f);
            for (std::size_t i = 0; i < u.size(); ++i)
                u[i] = std::conj(alpha) * u[i] + std::conj(beta) * v[i];
            return u;
        },
        a.time());
}

OperatorHandle scale(cdouble alpha, const OperatorHandle& a) {
    return OperatorHandle::from_functions(
        a.grid(), OperatorHandle::Kind::combination,
        [alpha, a](const Vec& f) {
            Vec u = a.apply(f);
            for (auto& v : u) v *= alpha;
            return u;
        },
        [alpha, a](const Vec& f) {
            Vec u = a.apply_adjoint(f);
            for (auto& v : u) v *= std::conj(alpha);
            return u;
        },
        a.time());
}

OperatorHandle shift(const OperatorHandle& a, cdouble mu) {
    return OperatorHandle::from_functions(
        a.grid(), OperatorHandle::Kind::combination,
        [mu, a](const Vec& f) {
            Vec u = a.apply(f);
            for (std::size_t i = 0; i < u.size(); ++i) u[i] += mu * f[i];
            return u;
        },
        [mu, a](const Vec& f) {
            Vec u = a.apply_adjoint(f);
            for (std::size_t i = 0; i < u.size(); ++i) u[i] += std::conj(mu) * f[i];
            return u;
        },
        a.time());
}

// ------------------------------------------------------------ fast path

namespace {

struct PolyCoeffs {
    GridPtr grid;
    Vec c0;                            // multiplication part
    std::vector<Vec> c1;               // per axis, may be empty vectors when zero
    std::vector<std::vector<Vec>> c2;  // symmetric, j <= k slots filled
    std::vector<bool> c1_zero;
    std::vector<std::vector<bool>> c2_zero;
    std::vector<std::vector<cdouble>> c2_const_val;
    std::vector<std::vector<bool>> c2_const;
    bool all_c1_zero = true;
    bool all_c2_const = true;
};

bool nearly_zero(const Vec& v) {
    for (const auto& z : v)
        if (std::abs(z.real()) > 1e-300 || std::abs(z.imag()) > 1e-300) return false;
    return true;
}

bool nearly_const(const Vec& v, cdouble& val) {
    val = v.empty() ? cdouble{0, 0} : v[0];
    double scale = std::abs(val) + 1e-30;
    for (const auto& z : v)
        if (std::abs(z - val) > 1e-13 * scale) return false;
    return true;
}

std::shared_ptr<PolyCoeffs> extract_coeffs(const SymbolExpr& s, const GridPtr& grid, double t) {
    const int d = grid->dim();
    auto pc = std::make_shared<PolyCoeffs>();
    pc->grid = grid;
    const std::size_t n = grid->total();
    pc->c0.resize(n);
    pc->c1.assign(d, {});
    pc->c1_zero.assign(d, true);
    pc->c2.assign(d, std::vector<Vec>(d));
    pc->c2_zero.assign(d, std::vector<bool>(d, true));
    pc->c2_const_val.assign(d, std::vector<cdouble>(d, cdouble{0, 0}));
    pc->c2_const.assign(d, std::vector<bool>(d, true));

    std::vector<Vec> c1(d, Vec(n));
    std::vector<std::vector<Vec>> c2(d, std::vector<Vec>(d));
    for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k) c2[j][k].resize(n);

    std::vector<double> x(d), xi(d, 0.0);
    std::vector<double> xp(d), xm(d);
    for (std::size_t i = 0; i < n; ++i) {
        grid->point(i, x);
        std::fill(xi.begin(), xi.end(), 0.0);
        cdouble s0 = s.eval(t, x, xi);
        pc->c0[i] = s0;
        for (int j = 0; j < d; ++j) {
            xi[j] = 1.0;
            cdouble sp = s.eval(t, x, xi);
            xi[j] = -1.0;
            cdouble sm = s.eval(t, x, xi);
            xi[j] = 0.0;
            c1[j][i] = 0.5 * (sp - sm);
            c2[j][j][i] = 0.5 * (sp + sm - 2.0 * s0);
        }
        for (int j = 0; j < d; ++j) {
            for (int k = j + 1; k < d; ++k) {
                auto probe = [&](double a, double b) {
                    xi[j] = a;
                    xi[k] = b;
                    cdouble v = s.eval(t, x, xi);
                    xi[j] = 0.0;
                    xi[k] = 0.0;
                    return v;
                };
                c2[j][k][i] = (probe(1, 1) - probe(1, -1) - probe(-1, 1) + probe(-1, -1)) / 8.0;
            }
        }
    }
    for (int j = 0; j < d; ++j) {
        if (!nearly_zero(c1[j])) {
            pc->c1[j] = std::move(c1[j]);
            pc->c1_zero[j] = false;
            pc->all_c1_zero = false;
        }
        for (int k = j; k < d; ++k) {
            if (!nearly_zero(c2[j][k])) {
                pc->c2_zero[j][k] = false;
                cdouble cv;
                if (nearly_const(c2[j][k], cv)) {
                    pc->c2_const_val[j][k] = cv;
                } else {
                    pc->c2_const[j][k] = false;
                    pc->all_c2_const = false;
                    pc->c2[j][k] = std::move(c2[j][k]);
                }
            }
        }
    }
    return pc;
}

Vec poly_apply(const PolyCoeffs& pc, const Vec& f, bool conjugated) {
    const Grid& g = *pc.grid;
    const int d = g.dim();
    const std::size_t n = g.total();
    auto coef = [&](const Vec& c, std::size_t i) { return conjugated ? std::conj(c[i]) : c[i]; };
    auto ccoef = [&](cdouble c) { return conjugated ? std::conj(c) : c; };

    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = coef(pc.c0, i) * f[i];

    Vec spec = fft_of(g, f, -1);

    // first derivatives of f per axis (only those needed)
    std::vector<bool> need_df(d, false);
    for (int j = 0; j < d; ++j) {
        if (!pc.c1_zero[j]) need_df[j] = true;
        for (int k = 0; k < d; ++k) {
            int a = std::min(j, k), b = std::max(j, k);
            if (!pc.c2_zero[a][b] && !pc.c2_const[a][b]) need_df[j] = need_df[k] = true;
        }
    }
    std::vector<Vec> df(d);
    const auto& m = g.dmult();
    std::vector<int> idx(d);
    for (int j = 0; j < d; ++j) {
        if (!need_df[j]) continue;
        Vec tmp = spec;
        axis_multiply(g, tmp, j, m);
        fft_all(g, tmp, +1);
        df[j] = std::move(tmp);
    }

    auto apply_D = [&](Vec v, int axis) {
        fft_all(g, v, -1);
        axis_multiply(g, v, axis, m);
        fft_all(g, v, +1);
        return v;
    };

    // degree-1 part: (c1 D + D c1)/2
    for (int j = 0; j < d; ++j) {
        if (pc.c1_zero[j]) continue;
        Vec prod(n);
        for (std::size_t i = 0; i < n; ++i) prod[i] = coef(pc.c1[j], i) * f[i];
        Vec Dprod = apply_D(std::move(prod), j);
        for (std::size_t i = 0; i < n; ++i)
            out[i] += 0.5 * (coef(pc.c1[j], i) * df[j][i] + Dprod[i]);
    }

    // constant-coefficient degree-2 block collapses to one Fourier multiplier
    {
        bool any = false;
        std::vector<double> acc_table;  // multiplier accumulated per flat index
        Vec tmp;
        for (int j = 0; j < d; ++j) {
            for (int k = j; k < d; ++k) {
                if (pc.c2_zero[j][k] || !pc.c2_const[j][k]) continue;
                any = true;
            }
        }
        if (any) {
            tmp = spec;
            std::vector<int> ix(d);
            for (std::size_t i = 0; i < n; ++i) {
                g.unravel(i, ix);
                cdouble q{0.0, 0.0};
                for (int j = 0; j < d; ++j)
                    for (int k = j; k < d; ++k) {
                        if (pc.c2_zero[j][k] || !pc.c2_const[j][k]) continue;
                        double mm = m[ix[j]] * m[ix[k]];
                        double w = (j == k) ? 1.0 : 2.0;  // ordered-pair sum
                        q += ccoef(pc.c2_const_val[j][k]) * (w * mm);
                    }
                tmp[i] *= q;
            }
            fft_all(g, tmp, +1);
            for (std::size_t i = 0; i < n; ++i) out[i] += tmp[i];
        }
    }

    // variable-coefficient degree-2 terms; for j < k the two ordered pairs
    // (j,k), (k,j) share the coefficient and merge into weight 1/2
    for (int j = 0; j < d; ++j) {
        for (int k = j; k < d; ++k) {
            if (pc.c2_zero[j][k] || pc.c2_const[j][k]) continue;
            const Vec& c = pc.c2[j][k];
            Vec t1(n);  // D_j D_k (c f)
            for (std::size_t i = 0; i < n; ++i) t1[i] = coef(c, i) * f[i];
            fft_all(g, t1, -1);
            axis_multiply(g, t1, j, m);
            axis_multiply(g, t1, k, m);
            fft_all(g, t1, +1);
            Vec t3 = spec;  // D_j D_k f
            axis_multiply(g, t3, j, m);
            axis_multiply(g, t3, k, m);
            fft_all(g, t3, +1);
            Vec t2a(n);  // D_j (c D_k f)
            for (std::size_t i = 0; i < n; ++i) t2a[i] = coef(c, i) * df[k][i];
            t2a = apply_D(std::move(t2a), j);
            if (j == k) {
                for (std::size_t i = 0; i < n; ++i)
                    out[i] += 0.25 * (t1[i] + 2.0 * t2a[i] + coef(c, i) * t3[i]);
            } else {
                Vec t2b(n);  // D_k (c D_j f)
                for (std::size_t i = 0; i < n; ++i) t2b[i] = coef(c, i) * df[j][i];
                t2b = apply_D(std::move(t2b), k);
                for (std::size_t i = 0; i < n; ++i)
                    out[i] += 0.5 * (t1[i] + t2a[i] + t2b[i] + coef(c, i) * t3[i]);
            }
        }
    }
    return out;
}

}  // namespace

namespace {

// Declared-degree invariant: a symbol declared polynomial of degree <= 2 must
// agree with its own xi-Taylor reconstruction; catches mis-declared damping
// degrees before they silently quantize wrong.
void verify_declared_degree(const SymbolExpr& s, const GridPtr& grid, double t) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ux(-grid->half_width(), grid->half_width());
    double ximax = M_PI / grid->half_width() * (grid->n() / 2);
    std::uniform_real_distribution<double> uz(-ximax, ximax);
    const int d = grid->dim();
    std::vector<double> x(d), xi(d), probe(d);
    for (int trial = 0; trial < 16; ++trial) {
        for (int j = 0; j < d; ++j) {
            x[j] = ux(rng);
            xi[j] = uz(rng);
        }
        std::fill(probe.begin(), probe.end(), 0.0);
        cdouble s0 = s.eval(t, x, probe);
        cdouble rec = s0;
        for (int j = 0; j < d; ++j) {
            probe[j] = 1.0;
            cdouble sp = s.eval(t, x, probe);
            probe[j] = -1.0;
            cdouble sm = s.eval(t, x, probe);
            probe[j] = 0.0;
            rec += 0.5 * (sp - sm) * xi[j] + 0.5 * (sp + sm - 2.0 * s0) * xi[j] * xi[j];
        }
        for (int j = 0; j < d; ++j) {
            for (int k = j + 1; k < d; ++k) {
                auto at = [&](double a, double b) {
                    probe[j] = a;
                    probe[k] = b;
                    cdouble v = s.eval(t, x, probe);
                    probe[j] = 0.0;
                    probe[k] = 0.0;
                    return v;
                };
                cdouble cjk = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / 4.0;
                rec += cjk * xi[j] * xi[k];
            }
        }
        cdouble truth = s.eval(t, x, xi);
        double scale = std::abs(truth) + std::abs(rec) + 1.0;
        if (std::abs(truth - rec) > 1e-8 * scale)
            throw std::invalid_argument("quantize_poly: symbol '" + s.name +
                                        "' is not polynomial of degree <= 2 in xi as declared");
    }
}

}  // namespace

OperatorHandle quantize_poly(const SymbolExpr& s, const GridPtr& grid, double t) {
    if (s.degree == SymbolDegree::general)
        throw std::invalid_argument("quantize_poly: symbol degree exceeds 2");
    if (s.dim != grid->dim()) throw std::invalid_argument("quantize_poly: dimension mismatch");
    verify_declared_degree(s, grid, t);
    auto pc = extract_coeffs(s, grid, t);
    return OperatorHandle::from_functions(
        grid, OperatorHandle::Kind::poly_fast,
        [pc](const Vec& f) { return poly_apply(*pc, f, false); },
        [pc](const Vec& f) { return poly_apply(*pc, f, true); }, t);
}

// ------------------------------------------------------------ dense path

OperatorHandle quantize_dense(const SymbolExpr& s, const GridPtr& grid, double t, Ordering ordering) {
    if (s.dim != grid->dim()) throw std::invalid_argument("quantize_dense: dimension mismatch");
    if (!grid->dense_capable())
        throw std::invalid_argument("quantize_dense: grid exceeds the dense-kernel size limit");
    const int d = grid->dim();
    const int N = grid->n();
    const std::size_t n = grid->total();
    const double dxi = M_PI / grid->half_width();

    // integer key per axis: 2 * midpoint frequency index (left ordering: 2 j_eff(col))
    auto j_eff = [N](int k) { return (k == N / 2) ? 0 : ((k < N / 2) ? k : k - N); };

    // cache of x-DFTs of s(t, ., ximid), keyed by the per-axis integer keys
    const int keyspan = 2 * N - 1;  // keys in [-(N-2), N-2]
    std::size_t cache_size = 1;
    for (int ax = 0; ax < d; ++ax) cache_size *= static_cast<std::size_t>(keyspan);
    std::vector<std::shared_ptr<Vec>> cache(cache_size);

    std::vector<double> xi(d);
    auto dft_for_key = [&](const std::vector<int>& key) -> const Vec& {
        std::size_t flat = 0;
        for (int ax = 0; ax < d; ++ax)
            flat = flat * keyspan + static_cast<std::size_t>(key[ax] + (N - 1));
        if (!cache[flat]) {
            for (int ax = 0; ax < d; ++ax) xi[ax] = 0.5 * dxi * key[ax];
            auto vals = std::make_shared<Vec>(sample_complex(
                *grid, [&](std::span<const double> x) { return s.eval(t, x, xi); }));
            fft_all(*grid, *vals, -1);
            double scale = 1.0 / static_cast<double>(n);
            for (auto& v : *vals) v *= scale;
            cache[flat] = vals;
        }
        return *cache[flat];
    };

    Eigen::MatrixXcd Kf(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<int> ridx(d), cidx(d), key(d), diff(d);
    for (std::size_t col = 0; col < n; ++col) {
        grid->unravel(col, cidx);
        for (std::size_t row = 0; row < n; ++row) {
            grid->unravel(row, ridx);
            for (int ax = 0; ax < d; ++ax) {
                key[ax] = (ordering == Ordering::midpoint) ? j_eff(ridx[ax]) + j_eff(cidx[ax])
                                                           : 2 * j_eff(cidx[ax]);
                diff[ax] = ((ridx[ax] - cidx[ax]) % N + N) % N;
            }
            const Vec& Sh = dft_for_key(key);
            std::size_t dflat = 0;
            for (int ax = 0; ax < d; ++ax) dflat = dflat * N + static_cast<std::size_t>(diff[ax]);
            Kf(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = Sh[dflat];
        }
    }

    // position-space matrix: IFFT over rows' index, forward FFT over columns' index
    Eigen::MatrixXcd K(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Vec buf(n);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t row = 0; row < n; ++row) buf[row] = Kf(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
        fft_all(*grid, buf, +1);
        for (std::size_t row = 0; row < n; ++row) K(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = buf[row];
    }
    for (std::size_t row = 0; row < n; ++row) {
        for (std::size_t col = 0; col < n; ++col) buf[col] = K(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
        fft_all(*grid, buf, -1);
        for (std::size_t col = 0; col < n; ++col) K(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = buf[col];
    }
    return OperatorHandle::from_dense(grid, std::move(K), t);
}

OperatorHandle adjoint(const OperatorHandle& op) { return op.adjoint(); }

// ------------------------------------------------------------- spectra

GardingResult garding_floor(const OperatorHandle& op) {
    GardingResult res;
    const Grid& g = *op.grid();
    if (g.dense_capable()) {
        const Eigen::MatrixXcd& A = op.dense();
        Eigen::MatrixXcd H = 0.5 * (A + A.adjoint());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H, Eigen::EigenvaluesOnly);
        res.floor = es.eigenvalues().minCoeff();
        res.converged = true;
        return res;
    }
    // matrix-free: shifted power iteration on the Hermitian part
    auto herm_apply = [&](const Vec& f) {
        Vec a = op.apply(f), b = op.apply_adjoint(f);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.5 * (a[i] + b[i]);
        return a;
    };
    std::mt19937_64 rng(12345);
    Vec v = random_state_values(g, rng);
    auto normalize = [](Vec& w) {
        double s = 0.0;
        for (const auto& z : w) s += std::norm(z);
        s = std::sqrt(s);
        for (auto& z : w) z /= s;
        return s;
    };
    normalize(v);
    double lam = 0.0;
    for (int it = 0; it < 300; ++it) {
        Vec w = herm_apply(v);
        cdouble r{0, 0};
        for (std::size_t i = 0; i < v.size(); ++i) r += std::conj(v[i]) * w[i];
        lam = r.real();
        v = std::move(w);
        normalize(v);
    }
    double shift_val = std::abs(lam) * 1.5 + 1.0;
    Vec u = random_state_values(g, rng);
    normalize(u);
    double mu = 0.0, prev = 0.0;
    for (int it = 0; it < 400; ++it) {
        Vec w = herm_apply(u);
        for (std::size_t i = 0; i < u.size(); ++i) w[i] = shift_val * u[i] - w[i];
        cdouble r{0, 0};
        for (std::size_t i = 0; i < u.size(); ++i) r += std::conj(u[i]) * w[i];
        prev = mu;
        mu = r.real();
        u = std::move(w);
        normalize(u);
    }
    res.floor = shift_val - mu;
    res.residual = std::abs(mu - prev) / (std::abs(mu) + 1e-300);
    res.converged = res.residual <= 1e-6;
    return res;
}

NormEstimate op_norm_estimate(const OperatorHandle& op, int iters, unsigned long long seed) {
    if (iters < 20) throw std::invalid_argument("op_norm_estimate: iters must be >= 20");
    std::mt19937_64 rng(seed);
    Vec v = random_state_values(*op.grid(), rng);
    auto norm_of = [](const Vec& w) {
        double s = 0.0;
        for (const auto& z : w) s += std::norm(z);
        return std::sqrt(s);
    };
    double nv = norm_of(v);
    for (auto& z : v) z /= nv;
    NormEstimate est;
    double prev = 0.0;
    for (int it = 0; it < iters; ++it) {
        Vec w = op.apply(v);
        double sigma = norm_of(w);
        Vec u = op.apply_adjoint(w);
        double nu = norm_of(u);
        if (nu == 0.0) {
            est.value = 0.0;
            est.rel_change = 0.0;
            est.converged = true;
            return est;
        }
        for (auto& z : u) z /= nu;
        v = std::move(u);
        est.rel_change = std::abs(sigma - prev) / (sigma + 1e-300);
        prev = sigma;
        est.value = sigma;
    }
    est.converged = est.rel_change <= 1e-4;
    return est;
}

std::vector<cdouble> random_state_values(const Grid& g, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec v(g.total());
    for (auto& z : v) z = cdouble{nd(rng), nd(rng)};
    return v;
}

void export_dense_kernel(const OperatorHandle& op, const std::string& path) {
    const Eigen::MatrixXcd& K = op.dense();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("export_dense_kernel: cannot open " + path);
    const char magic[4] = {'W', 'L', 'K', 'M'};
    os.write(magic, 4);
    std::int64_t rows = K.rows(), cols = K.cols();
    os.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    os.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    os.write(reinterpret_cast<const char*>(K.data()),
             static_cast<std::streamsize>(sizeof(cdouble) * static_cast<std::size_t>(rows * cols)));
}

}  // namespace weylab
