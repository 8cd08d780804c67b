#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace weylab {

using cdouble = std::complex<double>;

// Uniform periodic lattice on [-L, L)^D together with its dual frequency
// lattice.  Frequencies are stored in DFT order; `freq` carries the raw
// values xi_j = (pi/L) j and `dmult` the derivative multipliers, which
// coincide except at the unpaired Nyquist mode where dmult is zero.
class Grid {
  public:
    static std::shared_ptr<const Grid> make(int dim, int points_per_axis, double half_width);

    int dim() const { return dim_; }
    int n() const { return n_; }
    double half_width() const { return half_width_; }
    double spacing() const { return 2.0 * half_width_ / n_; }
    std::size_t total() const { return total_; }
    double cell_volume() const;

    double position(int k) const { return -half_width_ + spacing() * k; }
    const std::vector<double>& freq() const { return freq_; }
    const std::vector<double>& dmult() const { return dmult_; }

    // Decomposes a flat row-major index into per-axis indices.
    void unravel(std::size_t flat, std::span<int> idx) const;
    void point(std::size_t flat, std::span<double> x) const;

    bool dense_capable(std::size_t limit = 4096) const { return total_ <= limit; }

  private:
    Grid() = default;
    int dim_ = 0;
    int n_ = 0;
    double half_width_ = 0;
    std::size_t total_ = 0;
    std::vector<double> freq_;
    std::vector<double> dmult_;
};

using GridPtr = std::shared_ptr<const Grid>;

struct State {
    GridPtr grid;
    std::vector<cdouble> values;
    double time_tag = 0.0;

    State() = default;
    State(GridPtr g, double t = 0.0) : grid(std::move(g)), values(grid->total(), cdouble{0.0, 0.0}), time_tag(t) {}
};

// In-place multi-dimensional complex DFT over all axes.  sign = -1 forward
// (plain sum), +1 backward (normalized by 1/N^D).
void fft_all(const Grid& g, std::vector<cdouble>& values, int sign);

State make_state(const GridPtr& g, const std::vector<cdouble>& values, double time_tag = 0.0);

// Samples a closed-form field f(x) over the grid.
std::vector<double> sample_real(const Grid& g, const std::function<double(std::span<const double>)>& f);
std::vector<cdouble> sample_complex(const Grid& g, const std::function<cdouble(std::span<const double>)>& f);

// Lattice quadrature h^D sum f g*, conjugate-linear in the second slot.
cdouble inner_product(const State& f, const State& g);
double l2_norm(const State& f);

State spectral_derivative(const State& f, std::span<const int> alpha);

// Fraction of the squared norm carried by points within margin_fraction of
// either end of any axis (margin measured as a fraction of the axis length).
double boundary_mass(const State& f, double margin_fraction);

void save_state(const State& f, const std::string& path);
State load_state(const std::string& path);

}  // namespace weylab
