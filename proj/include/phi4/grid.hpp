#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace phi4 {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Discrete 2-D torus of side length L sampled on an N x N grid.
// Retained Fourier modes are K = {-N/2, ..., N/2-1}^2 with physical
// wavevector k_phys = 2*pi*k/L.
struct TorusGrid {
    int n = 0;
    double length = 1.0;

    TorusGrid() = default;
    TorusGrid(int n_, double length_) : n(n_), length(length_) {
        if (n < 8 || n % 2 != 0)
            throw std::invalid_argument("TorusGrid: N must be even and >= 8");
        if (!(length > 0.0))
            throw std::invalid_argument("TorusGrid: L must be positive");
    }

    int points() const { return n * n; }
    double spacing() const { return length / n; }
    // Quadrature weight of one grid point, so that sums approximate integrals.
    double cell_area() const { return (length / n) * (length / n); }

    // Signed lattice frequency for storage index j in [0, N).
    int freq(int j) const { return j < n / 2 ? j : j - n; }
    // Storage index of lattice frequency k in [-N/2, N/2).
    int idx_of_freq(int k) const { return k >= 0 ? k : k + n; }

    double k_phys(int k) const { return 2.0 * kPi * k / length; }
    // |k_phys|^2 of the mode with storage indices (j1, j2).
    double k2_phys(int j1, int j2) const {
        double k1 = k_phys(freq(j1)), k2 = k_phys(freq(j2));
        return k1 * k1 + k2 * k2;
    }
    // Lattice |k| (integer index scale, used for the dyadic blocks).
    double k_lattice(int j1, int j2) const {
        double k1 = freq(j1), k2 = freq(j2);
        return std::sqrt(k1 * k1 + k2 * k2);
    }

    bool operator==(const TorusGrid& o) const {
        return n == o.n && length == o.length;
    }
    bool operator!=(const TorusGrid& o) const { return !(*this == o); }
};

}  // namespace phi4
