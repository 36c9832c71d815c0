#ifndef PCMPC_MEASURES_HPP
#define PCMPC_MEASURES_HPP

#include <functional>
#include <string>
#include <vector>

namespace pcmpc {

enum class MeasureFamily { Dirac, Gaussian, Uniform, Beta, Gamma };

std::string to_string(MeasureFamily family);

/// A parametric probability measure together with its standardized germ.
///
/// Each family maps to one orthogonal polynomial family:
///   Dirac     -> constant basis {1}
///   Gaussian  -> probabilists' Hermite on the N(0,1) germ
///   Uniform   -> shifted Legendre on the U(0,1) germ
///   Beta      -> Jacobi on the B(alpha,beta) germ over [0,1]
///   Gamma     -> generalized Laguerre on the Gamma(k,theta) germ
///
/// A measure Z relates to its germ xi by the affine map
/// Z = germ_shift() + germ_scale() * xi (identity for Beta/Gamma germs).
class MeasureSpec {
public:
    static MeasureSpec dirac(double point);
    static MeasureSpec gaussian(double mean, double stddev);
    static MeasureSpec uniform(double lo, double hi);
    static MeasureSpec beta(double alpha, double beta);
    static MeasureSpec gamma(double shape, double scale);

    MeasureFamily family() const { return family_; }
    const std::vector<double>& params() const { return params_; }

    double mean() const;
    double variance() const;
    double stddev() const;

    /// Analytic raw moment E[Z^order].
    double raw_moment(int order) const;

    /// The standardized germ measure of this family (Table of canonical
    /// germs: Dirac(0), N(0,1), U(0,1); Beta and Gamma are their own germ).
    MeasureSpec germ() const;
    double germ_shift() const;
    double germ_scale() const;

    bool is_dirac() const { return family_ == MeasureFamily::Dirac; }

    /// Monic three-term recurrence coefficient pair (a_j, b_j) for the
    /// orthogonal polynomials of this measure, with b_0 = 1 (probability
    /// normalization). phi_{j+1}(x) = (x - a_j) phi_j(x) - b_j phi_{j-1}(x).
    std::pair<double, double> recurrence(int j) const;

    std::string to_string() const;

    bool operator==(const MeasureSpec& other) const;

private:
    MeasureSpec(MeasureFamily family, std::vector<double> params);

    MeasureFamily family_;
    std::vector<double> params_;
};

/// Orthogonal/orthonormal polynomials of a stochastic germ, generated from
/// the monic three-term recurrence. phi_0 = psi_0 = 1 always; squared norms
/// <phi_j, phi_j> are accumulated analytically as products of recurrence b's.
class UnivariateBasis {
public:
    UnivariateBasis(const MeasureSpec& germ_measure, int max_degree);

    const MeasureSpec& measure() const { return measure_; }
    int max_degree() const { return max_degree_; }

    /// Monic orthogonal polynomial phi_degree at a point.
    double eval_phi(int degree, double point) const;
    /// Orthonormal polynomial psi_degree = phi_degree / sqrt(<phi,phi>).
    double eval_psi(int degree, double point) const;

    /// <phi_degree, phi_degree> under the germ measure.
    double norm_squared(int degree) const;

    /// Recurrence pair (a_j, b_j); b_0 = 1.
    std::pair<double, double> recurrence(int j) const;

    bool operator==(const UnivariateBasis& other) const;

private:
    MeasureSpec measure_;
    int max_degree_;
    std::vector<double> rec_a_;
    std::vector<double> rec_b_;
    std::vector<double> norms_;  // <phi_j, phi_j>, j = 0..max_degree
};

/// Gauss quadrature rule for a probability measure: weights sum to one and
/// an n-node rule integrates polynomials up to degree 2n-1 exactly.
class QuadratureRule {
public:
    QuadratureRule(std::vector<double> nodes, std::vector<double> weights,
                   MeasureSpec measure);

    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    const MeasureSpec& measure() const { return measure_; }
    int size() const { return static_cast<int>(nodes_.size()); }

    double integrate(const std::function<double(double)>& f) const;

private:
    std::vector<double> nodes_;
    std::vector<double> weights_;
    MeasureSpec measure_;
};

/// Builds the orthonormal basis of the germ of `measure` up to max_degree.
/// Dirac collapses to the single constant basis {1}.
UnivariateBasis make_basis(const MeasureSpec& measure, int max_degree);

/// Golub-Welsch rule from the Jacobi matrix of the measure's recurrence.
/// Dirac returns the single node at its point with weight one.
QuadratureRule gauss_rule(const MeasureSpec& measure, int n_nodes);

/// Quadrature approximation of the inner product integral of f*g.
double inner_product(const std::function<double(double)>& f,
                     const std::function<double(double)>& g,
                     const QuadratureRule& rule);

/// Node count that integrates a product of polynomial degrees (deg_f, deg_g)
/// exactly, plus two guard nodes against rounding.
int default_node_count(int deg_f, int deg_g);

}  // namespace pcmpc

#endif  // PCMPC_MEASURES_HPP
