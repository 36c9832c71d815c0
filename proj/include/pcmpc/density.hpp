#ifndef PCMPC_DENSITY_HPP
#define PCMPC_DENSITY_HPP

#include <complex>
#include <limits>

#include "pcmpc/pce.hpp"

namespace pcmpc {

struct DensityGridSpec {
    /// Support interval; NaN selects mean +/- 10 std from the PCE moments.
    double z_lo = std::numeric_limits<double>::quiet_NaN();
    double z_hi = std::numeric_limits<double>::quiet_NaN();
    int n_points = 4096;  // power of two
};

/// Recovered probability density on a uniform grid, clipped of negative
/// ringing and renormalized; quality metrics keep the pre-normalization
/// integral and the clipped mass.
struct DensityGrid {
    Eigen::VectorXd z;
    Eigen::VectorXd pdf;
    double z_lo = 0.0, z_hi = 0.0;
    double raw_integral = 0.0;
    double clipped_mass = 0.0;

    Eigen::VectorXd cdf() const;  // cumulative trapezoid
    double mean() const;
    double variance() const;
};

/// E[exp(i t c psi_degree(xi))] for one basis term over a single germ.
/// Analytic for degree-one terms of every supported germ family and for
/// degree-two Gaussian terms; Gauss quadrature with node doubling otherwise.
std::complex<double> char_fun_term(const UnivariateBasis& germ_basis, int degree, double coeff,
                                   double t);

/// Density of a scalar PCE via the product of per-germ characteristic
/// functions and inverse FFT. Terms sharing a germ are grouped so the
/// product runs over independent factors only.
DensityGrid pdf_from_pce(const PCEVector& Z, const DensityGridSpec& spec = {});

/// Kolmogorov-Smirnov statistic between the grid CDF and the empirical CDF
/// of the samples (at least 100 required).
double ks_distance(const DensityGrid& grid, const Eigen::VectorXd& samples);

}  // namespace pcmpc

#endif  // PCMPC_DENSITY_HPP
