#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "phi4/fft.hpp"
#include "phi4/grid.hpp"

namespace phi4 {

enum class Rep { Real, Fourier };

// A real scalar field (or distribution) on the discrete torus, carried either
// as N^2 real samples or as N^2 complex Fourier coefficients with Hermitian
// symmetry. Coefficients follow the plain Fourier-series convention
//   f(x) = sum_k fhat_k e^{i k_phys . x},  fhat_k = (1/N^2) sum_x f(x) e^{-i k_phys . x},
// so that ||f||_{L^2}^2 = L^2 sum_k |fhat_k|^2.
class Field {
public:
    Field() = default;
    explicit Field(const TorusGrid& g) : grid_(g), rep_(Rep::Real), real_(g.points(), 0.0) {}

    static Field zero(const TorusGrid& g) { return Field(g); }
    static Field constant(const TorusGrid& g, double c) {
        Field f(g);
        std::fill(f.real_.begin(), f.real_.end(), c);
        return f;
    }
    static Field from_real(const TorusGrid& g, std::vector<double> samples) {
        if (static_cast<int>(samples.size()) != g.points())
            throw std::invalid_argument("Field::from_real: sample count mismatch");
        Field f(g);
        f.real_ = std::move(samples);
        return f;
    }
    static Field from_fourier(const TorusGrid& g, std::vector<std::complex<double>> coeffs) {
        if (static_cast<int>(coeffs.size()) != g.points())
            throw std::invalid_argument("Field::from_fourier: coefficient count mismatch");
        Field f(g);
        f.rep_ = Rep::Fourier;
        f.real_.clear();
        f.four_ = std::move(coeffs);
        return f;
    }
    // Single mode a*e^{i k.x} + conj, i.e. the real field 2*Re(a e^{i k.x}).
    static Field mode(const TorusGrid& g, int k1, int k2, std::complex<double> a) {
        std::vector<std::complex<double>> c(g.points(), 0.0);
        int i1 = g.idx_of_freq(k1), i2 = g.idx_of_freq(k2);
        int m1 = (g.n - i1) % g.n, m2 = (g.n - i2) % g.n;
        c[static_cast<size_t>(i1) * g.n + i2] += a;
        c[static_cast<size_t>(m1) * g.n + m2] += std::conj(a);
        return from_fourier(g, std::move(c));
    }

    const TorusGrid& grid() const { return grid_; }
    Rep rep() const { return rep_; }
    int n() const { return grid_.n; }

    bool finite() const {
        if (rep_ == Rep::Real) {
            for (double x : real_)
                if (!std::isfinite(x)) return false;
        } else {
            for (auto& z : four_)
                if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        }
        return true;
    }

    void require_finite(const char* where) const {
        if (!finite()) throw std::domain_error(std::string(where) + ": NaN/Inf in field");
    }

    // Representation access. Const access never converts, so read-only
    // sharing across workers is safe; use real_view/fourier_view (or the
    // mutable accessors) where either representation must be accepted.
    const std::vector<double>& real_data() const {
        if (rep_ != Rep::Real)
            throw std::logic_error("Field: real access on Fourier field");
        return real_;
    }
    const std::vector<std::complex<double>>& fourier_data() const {
        if (rep_ != Rep::Fourier)
            throw std::logic_error("Field: Fourier access on real field");
        return four_;
    }
    std::vector<double>& mutable_real() {
        ensure_real();
        return real_;
    }
    std::vector<std::complex<double>>& mutable_fourier() {
        ensure_fourier();
        return four_;
    }

    void ensure_real() {
        if (rep_ == Rep::Real) return;
        detail::fft2(four_.data(), grid_.n, FFTW_BACKWARD);
        real_.resize(four_.size());
        for (size_t i = 0; i < four_.size(); ++i) real_[i] = four_[i].real();
        four_.clear();
        rep_ = Rep::Real;
    }
    void ensure_fourier() {
        if (rep_ == Rep::Fourier) return;
        four_.resize(real_.size());
        for (size_t i = 0; i < real_.size(); ++i) four_[i] = real_[i];
        detail::fft2(four_.data(), grid_.n, FFTW_FORWARD);
        double inv = 1.0 / grid_.points();
        for (auto& z : four_) z *= inv;
        real_.clear();
        rep_ = Rep::Fourier;
    }

    Field& operator+=(const Field& o) { return zip(o, [](double a, double b) { return a + b; }); }
    Field& operator-=(const Field& o) { return zip(o, [](double a, double b) { return a - b; }); }
    Field& operator*=(double c) {
        if (rep_ == Rep::Real)
            for (double& x : real_) x *= c;
        else
            for (auto& z : four_) z *= c;
        return *this;
    }
    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(double c, Field f) { return f *= c; }

    double max_abs() const {
        if (rep_ == Rep::Real) {
            double m = 0.0;
            for (double v : real_) m = std::max(m, std::abs(v));
            return m;
        }
        Field t = *this;
        t.ensure_real();
        return t.max_abs();
    }

    static void check_same_grid(const Field& a, const Field& b) {
        if (a.grid_ != b.grid_) throw std::invalid_argument("Field: grid mismatch");
    }

private:
    template <class F>
    Field& zip(const Field& o, F op) {
        check_same_grid(*this, o);
        // Operate in whichever representation this field already holds,
        // converting a mismatched operand into a scratch copy.
        Field scratch;
        const Field* rhs = &o;
        if (o.rep_ != rep_) {
            scratch = o;
            if (rep_ == Rep::Real)
                scratch.ensure_real();
            else
                scratch.ensure_fourier();
            rhs = &scratch;
        }
        if (rep_ == Rep::Real) {
            const auto& y = rhs->real_;
            for (size_t i = 0; i < real_.size(); ++i) real_[i] = op(real_[i], y[i]);
        } else {
            const auto& y = rhs->four_;
            for (size_t i = 0; i < four_.size(); ++i) {
                four_[i] = {op(four_[i].real(), y[i].real()),
                            op(four_[i].imag(), y[i].imag())};
            }
        }
        return *this;
    }

    TorusGrid grid_;
    Rep rep_ = Rep::Real;
    std::vector<double> real_;
    std::vector<std::complex<double>> four_;
};

// Borrow the requested representation without copying when it is already
// present; otherwise converts into the caller-provided scratch field.
inline const std::vector<double>& real_view(const Field& f, Field& scratch) {
    if (f.rep() == Rep::Real) return f.real_data();
    scratch = f;
    scratch.ensure_real();
    return scratch.real_data();
}

inline const std::vector<std::complex<double>>& fourier_view(const Field& f,
                                                             Field& scratch) {
    if (f.rep() == Rep::Fourier) return f.fourier_data();
    scratch = f;
    scratch.ensure_fourier();
    return scratch.fourier_data();
}

// L^2(T^2) inner product evaluated by grid quadrature.
inline double inner(const Field& a, const Field& b) {
    Field::check_same_grid(a, b);
    Field sa, sb;
    const auto& x = real_view(a, sa);
    const auto& y = real_view(b, sb);
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s * a.grid().cell_area();
}

inline Field to_fourier(const Field& f) {
    f.require_finite("to_fourier");
    Field g = f;
    g.ensure_fourier();
    return g;
}

inline Field to_real(const Field& f) {
    f.require_finite("to_real");
    Field g = f;
    g.ensure_real();
    return g;
}

namespace detail {

// Copy Fourier coefficients of an n-grid spectrum into an m-grid spectrum
// (m > n), matching signed frequencies; the rest is zero. The asymmetric
// Nyquist rows k = -n/2 are dropped: the product operators act on the
// symmetric band {|k| <= n/2 - 1}^2, which keeps pad/truncate exact adjoints
// of each other and the padded products alias-free (no split-cosine Nyquist
// ambiguity).
inline std::vector<std::complex<double>> pad_spectrum(
    const std::vector<std::complex<double>>& src, int n, int m) {
    std::vector<std::complex<double>> dst(static_cast<size_t>(m) * m, 0.0);
    for (int j1 = 0; j1 < n; ++j1) {
        int k1 = j1 < n / 2 ? j1 : j1 - n;
        if (k1 == -n / 2) continue;
        int i1 = k1 >= 0 ? k1 : k1 + m;
        for (int j2 = 0; j2 < n; ++j2) {
            int k2 = j2 < n / 2 ? j2 : j2 - n;
            if (k2 == -n / 2) continue;
            int i2 = k2 >= 0 ? k2 : k2 + m;
            dst[static_cast<size_t>(i1) * m + i2] = src[static_cast<size_t>(j1) * n + j2];
        }
    }
    return dst;
}

// Keep only the symmetric band {|k| <= n/2 - 1}^2 of an m-grid spectrum; the
// Nyquist rows of the target grid are zero.
inline std::vector<std::complex<double>> truncate_spectrum(
    const std::vector<std::complex<double>>& src, int m, int n) {
    std::vector<std::complex<double>> dst(static_cast<size_t>(n) * n, 0.0);
    for (int j1 = 0; j1 < n; ++j1) {
        int k1 = j1 < n / 2 ? j1 : j1 - n;
        if (k1 == -n / 2) continue;
        int i1 = k1 >= 0 ? k1 : k1 + m;
        for (int j2 = 0; j2 < n; ++j2) {
            int k2 = j2 < n / 2 ? j2 : j2 - n;
            if (k2 == -n / 2) continue;
            int i2 = k2 >= 0 ? k2 : k2 + m;
            dst[static_cast<size_t>(j1) * n + j2] = src[static_cast<size_t>(i1) * m + i2];
        }
    }
    return dst;
}

inline std::vector<std::complex<double>> to_padded_real(
    const std::vector<std::complex<double>>& coeffs, int n, int m) {
    auto buf = pad_spectrum(coeffs, n, m);
    fft2(buf.data(), m, FFTW_BACKWARD);
    return buf;
}

}  // namespace detail

// Pointwise product. With dealias on, both inputs are zero-padded to 3N/2
// modes, multiplied there and truncated back, which removes all aliasing from
// the quadratic interaction of retained modes.
inline Field multiply(const Field& f, const Field& g, bool dealias = true) {
    Field::check_same_grid(f, g);
    const int n = f.n();
    Field sf, sg;
    if (!dealias) {
        const auto& a = real_view(f, sf);
        const auto& b = real_view(g, sg);
        std::vector<double> out(a.size());
        for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
        return Field::from_real(f.grid(), std::move(out));
    }
    const int m = 3 * n / 2;
    auto fa = detail::to_padded_real(fourier_view(f, sf), n, m);
    auto fb = detail::to_padded_real(fourier_view(g, sg), n, m);
    for (size_t i = 0; i < fa.size(); ++i) fa[i] = fa[i].real() * fb[i].real();
    detail::fft2(fa.data(), m, FFTW_FORWARD);
    double inv = 1.0 / (static_cast<double>(m) * m);
    for (auto& z : fa) z *= inv;
    return Field::from_fourier(f.grid(), detail::truncate_spectrum(fa, m, n));
}

// Alias-free triple product of retained modes: padding to 2N keeps every sum
// k1+k2+k3 of in-band frequencies from folding back into the band.
inline Field multiply3(const Field& f, const Field& g, const Field& h) {
    Field::check_same_grid(f, g);
    Field::check_same_grid(f, h);
    const int n = f.n();
    const int m = 2 * n;
    Field sf, sg, sh;
    auto fa = detail::to_padded_real(fourier_view(f, sf), n, m);
    auto fb = detail::to_padded_real(fourier_view(g, sg), n, m);
    auto fc = detail::to_padded_real(fourier_view(h, sh), n, m);
    for (size_t i = 0; i < fa.size(); ++i)
        fa[i] = fa[i].real() * fb[i].real() * fc[i].real();
    detail::fft2(fa.data(), m, FFTW_FORWARD);
    double inv = 1.0 / (static_cast<double>(m) * m);
    for (auto& z : fa) z *= inv;
    return Field::from_fourier(f.grid(), detail::truncate_spectrum(fa, m, n));
}

// ---- Field snapshot binary format -----------------------------------------
// 16-byte header: 8-byte magic "PHI4FLD\0", u32 version, u32 reserved;
// then u64 N, f64 L (little-endian), then row-major f64 real-space samples.

inline constexpr char kFieldMagic[8] = {'P', 'H', 'I', '4', 'F', 'L', 'D', '\0'};
inline constexpr std::uint32_t kFieldVersion = 1;

inline void save_field(const Field& f, std::ostream& os) {
    os.write(kFieldMagic, 8);
    std::uint32_t ver = kFieldVersion, pad = 0;
    os.write(reinterpret_cast<const char*>(&ver), 4);
    os.write(reinterpret_cast<const char*>(&pad), 4);
    std::uint64_t n = static_cast<std::uint64_t>(f.n());
    double l = f.grid().length;
    os.write(reinterpret_cast<const char*>(&n), 8);
    os.write(reinterpret_cast<const char*>(&l), 8);
    Field scratch;
    const auto& data = real_view(f, scratch);
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
}

inline void save_field(const Field& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_field: cannot open " + path);
    save_field(f, os);
}

inline Field load_field(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kFieldMagic, 8) != 0)
        throw std::runtime_error("load_field: bad magic");
    std::uint32_t ver = 0, pad = 0;
    is.read(reinterpret_cast<char*>(&ver), 4);
    is.read(reinterpret_cast<char*>(&pad), 4);
    if (ver != kFieldVersion) throw std::runtime_error("load_field: unsupported version");
    std::uint64_t n = 0;
    double l = 0;
    is.read(reinterpret_cast<char*>(&n), 8);
    is.read(reinterpret_cast<char*>(&l), 8);
    TorusGrid g(static_cast<int>(n), l);
    std::vector<double> data(g.points());
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw std::runtime_error("load_field: truncated file");
    return Field::from_real(g, std::move(data));
}

inline Field load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_field: cannot open " + path);
    return load_field(is);
}

}  // namespace phi4
