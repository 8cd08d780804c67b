#include "weylab/field.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace weylab {

std::shared_ptr<const Grid> Grid::make(int dim, int points_per_axis, double half_width) {
    if (dim < 1) throw std::invalid_argument("grid: dim must be >= 1");
    if (points_per_axis < 8 || points_per_axis % 2 != 0)
        throw std::invalid_argument("grid: points_per_axis must be even and >= 8");
    if (!(half_width > 0)) throw std::invalid_argument("grid: half_width must be positive");
    double total = std::pow(static_cast<double>(points_per_axis), dim);
    if (total > 4194304.0)  // 2^22 desk-scale cap
        throw std::invalid_argument("grid: total point count exceeds desk-scale limit");

    auto g = std::shared_ptr<Grid>(new Grid());
    g->dim_ = dim;
    g->n_ = points_per_axis;
    g->half_width_ = half_width;
    g->total_ = static_cast<std::size_t>(total + 0.5);
    const int n = points_per_axis;
    g->freq_.resize(n);
    g->dmult_.resize(n);
    for (int k = 0; k < n; ++k) {
        int j = (k < n / 2) ? k : k - n;
        g->freq_[k] = M_PI / half_width * j;
        g->dmult_[k] = (k == n / 2) ? 0.0 : g->freq_[k];
    }
    return g;
}

double Grid::cell_volume() const {
    return std::pow(spacing(), dim_);
}

void Grid::unravel(std::size_t flat, std::span<int> idx) const {
    for (int ax = dim_ - 1; ax >= 0; --ax) {
        idx[ax] = static_cast<int>(flat % n_);
        flat /= n_;
    }
}

void Grid::point(std::size_t flat, std::span<double> x) const {
    for (int ax = dim_ - 1; ax >= 0; --ax) {
        x[ax] = position(static_cast<int>(flat % n_));
        flat /= n_;
    }
}

namespace {

struct PlanKey {
    int dim;
    int n;
    int sign;
    bool operator<(const PlanKey& o) const {
        return std::tie(dim, n, sign) < std::tie(o.dim, o.n, o.sign);
    }
};

fftw_plan get_plan(const Grid& g, int sign) {
    static std::map<PlanKey, fftw_plan> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    PlanKey key{g.dim(), g.n(), sign};
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    std::vector<int> dims(g.dim(), g.n());
    fftw_complex* scratch = fftw_alloc_complex(g.total());
    fftw_plan plan = fftw_plan_dft(g.dim(), dims.data(), scratch, scratch,
                                   sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    if (!plan) throw std::runtime_error("fftw plan creation failed");
    cache.emplace(key, plan);
    return plan;
}

}  // namespace

void fft_all(const Grid& g, std::vector<cdouble>& values, int sign) {
    if (values.size() != g.total()) throw std::invalid_argument("fft_all: size mismatch");
    fftw_plan plan = get_plan(g, sign);
    auto* ptr = reinterpret_cast<fftw_complex*>(values.data());
    fftw_execute_dft(plan, ptr, ptr);
    if (sign > 0) {
        double scale = 1.0 / static_cast<double>(g.total());
        for (auto& v : values) v *= scale;
    }
}

State make_state(const GridPtr& g, const std::vector<cdouble>& values, double time_tag) {
    if (values.size() != g->total()) throw std::invalid_argument("make_state: size mismatch");
    State s(g, time_tag);
    s.values = values;
    for (const auto& v : s.values)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw std::invalid_argument("make_state: non-finite entry");
    return s;
}

std::vector<double> sample_real(const Grid& g, const std::function<double(std::span<const double>)>& f) {
    std::vector<double> out(g.total());
    std::vector<double> x(g.dim());
    for (std::size_t i = 0; i < g.total(); ++i) {
        g.point(i, x);
        out[i] = f(x);
    }
    return out;
}

std::vector<cdouble> sample_complex(const Grid& g, const std::function<cdouble(std::span<const double>)>& f) {
    std::vector<cdouble> out(g.total());
    std::vector<double> x(g.dim());
    for (std::size_t i = 0; i < g.total(); ++i) {
        g.point(i, x);
        out[i] = f(x);
    }
    return out;
}

cdouble inner_product(const State& f, const State& g) {
    if (f.grid != g.grid)
        throw std::invalid_argument("inner_product: states live on different grids");
    cdouble acc{0.0, 0.0};
    for (std::size_t i = 0; i < f.values.size(); ++i)
        acc += f.values[i] * std::conj(g.values[i]);
    return acc * f.grid->cell_volume();
}

double l2_norm(const State& f) {
    double acc = 0.0;
    for (const auto& v : f.values) acc += std::norm(v);
    return std::sqrt(acc * f.grid->cell_volume());
}

State spectral_derivative(const State& f, std::span<const int> alpha) {
    const Grid& g = *f.grid;
    if (static_cast<int>(alpha.size()) != g.dim())
        throw std::invalid_argument("spectral_derivative: bad multi-index length");
    int order = 0;
    for (int a : alpha) {
        if (a < 0) throw std::invalid_argument("spectral_derivative: negative order");
        order += a;
    }
    if (order > 6) throw std::invalid_argument("spectral_derivative: order exceeds configured max (6)");

    State out = f;
    if (order == 0) return out;
    fft_all(g, out.values, -1);

    const int n = g.n();
    // per-axis multiplier tables (i xi)^a, Nyquist zeroed for odd a
    std::vector<std::vector<cdouble>> table(g.dim());
    for (int ax = 0; ax < g.dim(); ++ax) {
        int a = alpha[ax];
        table[ax].resize(n);
        for (int k = 0; k < n; ++k) {
            if (a == 0) { table[ax][k] = 1.0; continue; }
            double xi = g.freq()[k];
            if (k == n / 2 && a % 2 == 1) { table[ax][k] = 0.0; continue; }
            table[ax][k] = std::pow(cdouble{0.0, xi}, a);
        }
    }
    std::vector<int> idx(g.dim());
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        g.unravel(i, idx);
        cdouble m{1.0, 0.0};
        for (int ax = 0; ax < g.dim(); ++ax) m *= table[ax][idx[ax]];
        out.values[i] *= m;
    }
    fft_all(g, out.values, +1);
    return out;
}

double boundary_mass(const State& f, double margin_fraction) {
    if (!(margin_fraction > 0.0 && margin_fraction < 0.5))
        throw std::invalid_argument("boundary_mass: margin_fraction must lie in (0, 0.5)");
    const Grid& g = *f.grid;
    const double L = g.half_width();
    const double strip = margin_fraction * 2.0 * L;
    double total = 0.0, near = 0.0;
    std::vector<double> x(g.dim());
    for (std::size_t i = 0; i < f.values.size(); ++i) {
        double w = std::norm(f.values[i]);
        total += w;
        g.point(i, x);
        for (double c : x) {
            if (c < -L + strip || c >= L - strip) { near += w; break; }
        }
    }
    return total > 0.0 ? near / total : 0.0;
}

void save_state(const State& f, const std::string& path) {
    const Grid& g = *f.grid;
    if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
        std::ofstream os(path);
        if (!os) throw std::runtime_error("save_state: cannot open " + path);
        os.precision(17);
        os << g.dim() << "," << g.n() << "," << g.half_width() << "," << f.time_tag << "\n";
        for (const auto& v : f.values) os << v.real() << "," << v.imag() << "\n";
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_state: cannot open " + path);
    const char magic[4] = {'W', 'L', 'S', 'T'};
    os.write(magic, 4);
    std::int32_t dim = g.dim(), n = g.n();
    double L = g.half_width(), t = f.time_tag;
    os.write(reinterpret_cast<const char*>(&dim), sizeof dim);
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(&L), sizeof L);
    os.write(reinterpret_cast<const char*>(&t), sizeof t);
    os.write(reinterpret_cast<const char*>(f.values.data()),
             static_cast<std::streamsize>(f.values.size() * sizeof(cdouble)));
}

State load_state(const std::string& path) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("load_state: cannot open " + path);
        std::string line;
        if (!std::getline(is, line)) throw std::runtime_error("load_state: empty file");
        std::istringstream hdr(line);
        int dim, n;
        double L, t;
        char c;
        hdr >> dim >> c >> n >> c >> L >> c >> t;
        auto g = Grid::make(dim, n, L);
        State s(g, t);
        for (std::size_t i = 0; i < g->total(); ++i) {
            if (!std::getline(is, line)) throw std::runtime_error("load_state: truncated file");
            std::istringstream row(line);
            double re, im;
            row >> re >> c >> im;
            s.values[i] = {re, im};
        }
        return s;
    }
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_state: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "WLST", 4) != 0) throw std::runtime_error("load_state: bad magic");
    std::int32_t dim, n;
    double L, t;
    is.read(reinterpret_cast<char*>(&dim), sizeof dim);
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    is.read(reinterpret_cast<char*>(&L), sizeof L);
    is.read(reinterpret_cast<char*>(&t), sizeof t);
    auto g = Grid::make(dim, n, L);
    State s(g, t);
    is.read(reinterpret_cast<char*>(s.values.data()),
            static_cast<std::streamsize>(s.values.size() * sizeof(cdouble)));
    if (!is) throw std::runtime_error("load_state: truncated file");
    return s;
}

}  // namespace weylab
