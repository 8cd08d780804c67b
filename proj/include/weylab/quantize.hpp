#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>

#include "weylab/field.hpp"
#include "weylab/symbols.hpp"

namespace weylab {

// Operator orderings realized by the dense kernel builder.  `midpoint` is
// the double-symbol rule s(t,(x+x')/2,xi) (the default everywhere);
// `left` is the one-sided single-symbol rule s(t,x,D_x) used by the
// parametrix and resolvent factors.
enum class Ordering { midpoint, left };

class OperatorHandle {
  public:
    enum class Kind { poly_fast, dense_kernel, composition, combination, identity };

    using ApplyFn = std::function<std::vector<cdouble>(const std::vector<cdouble>&)>;

    OperatorHandle() = default;

    static OperatorHandle identity(GridPtr g, double t = 0.0);
    static OperatorHandle from_functions(GridPtr g, Kind kind, ApplyFn fwd, ApplyFn adj, double t = 0.0);
    static OperatorHandle from_dense(GridPtr g, Eigen::MatrixXcd mat, double t = 0.0);

    const GridPtr& grid() const { return grid_; }
    double time() const { return time_; }
    Kind kind() const { return kind_; }

    std::vector<cdouble> apply(const std::vector<cdouble>& f) const;
    std::vector<cdouble> apply_adjoint(const std::vector<cdouble>& f) const;
    State apply(const State& f) const;

    OperatorHandle adjoint() const;

    // Materializes (and caches) the dense matrix; requires a dense-capable grid.
    const Eigen::MatrixXcd& dense() const;
    bool has_dense() const { return static_cast<bool>(mat_); }

  private:
    GridPtr grid_;
    double time_ = 0.0;
    Kind kind_ = Kind::identity;
    ApplyFn fwd_, adj_;
    mutable std::shared_ptr<Eigen::MatrixXcd> mat_;
};

// A o B (apply B first).
OperatorHandle compose(const OperatorHandle& a, const OperatorHandle& b);
// alpha A + beta B
OperatorHandle lincomb(cdouble alpha, const OperatorHandle& a, cdouble beta, const OperatorHandle& b);
OperatorHandle scale(cdouble alpha, const OperatorHandle& a);
// A + mu I
OperatorHandle shift(const OperatorHandle& a, cdouble mu);

// Midpoint quantization of a symbol polynomial in xi of degree <= 2, applied
// spectrally:  c0 as multiplication, c1 as the symmetric ordering
// (c1 D + D c1)/2, c2 as (D D c2 + 2 D c2 D + c2 D D)/4.
OperatorHandle quantize_poly(const SymbolExpr& s, const GridPtr& grid, double t);

// Dense kernel for arbitrary symbols.  Realized in the frequency domain with
// the symbol evaluated at exact half-step frequency midpoints, which keeps
// the fast path and the kernel path equal to rounding for polynomial symbols.
OperatorHandle quantize_dense(const SymbolExpr& s, const GridPtr& grid, double t,
                              Ordering ordering = Ordering::midpoint);

OperatorHandle adjoint(const OperatorHandle& op);

struct GardingResult {
    double floor = 0.0;
    bool converged = true;
    double residual = 0.0;
};

// Smallest eigenvalue of the Hermitian part (op + op†)/2.
GardingResult garding_floor(const OperatorHandle& op);

struct NormEstimate {
    double value = 0.0;
    double rel_change = 0.0;
    bool converged = false;
};

// Power iteration on op† op.
NormEstimate op_norm_estimate(const OperatorHandle& op, int iters, unsigned long long seed);

// Binary dump of the materialized kernel matrix for offline inspection.
void export_dense_kernel(const OperatorHandle& op, const std::string& path);

std::vector<cdouble> random_state_values(const Grid& g, std::mt19937_64& rng);

}  // namespace weylab
