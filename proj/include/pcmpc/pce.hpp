#ifndef PCMPC_PCE_HPP
#define PCMPC_PCE_HPP

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

#include "pcmpc/measures.hpp"

namespace pcmpc {

/// One stochastic germ of a multivariate basis. Ids identify germs within a
/// basis; independence across components is asserted by id disjointness.
struct Germ {
    int id;
    MeasureSpec measure;      // standardized germ measure
    UnivariateBasis basis;    // orthonormal polynomials of the germ
};

/// Multivariate orthonormal basis: products of univariate orthonormal
/// polynomials over independent germs. Term 0 is always the constant 1.
class MultiBasis {
public:
    using MultiIndex = std::vector<int>;  // one degree per germ

    MultiBasis(std::vector<Germ> germs, std::vector<MultiIndex> terms);

    /// The trivial basis {1} with no germs.
    static MultiBasis constant();

    int term_count() const { return static_cast<int>(terms_.size()); }
    int germ_count() const { return static_cast<int>(germs_.size()); }
    const std::vector<Germ>& germs() const { return germs_; }
    const std::vector<MultiIndex>& terms() const { return terms_; }

    int term_degree(int term) const;
    int max_degree() const;
    /// Largest degree of `germ` over all terms.
    int max_degree_in_germ(int germ) const;
    /// Position of the germ with this id, or -1.
    int find_germ(int id) const;

    /// Value of one basis term at a germ realization (one value per germ).
    double eval_term(int term, const Eigen::VectorXd& germ_values) const;
    /// All term values for a batch of germ draws (rows) -> (n_draws x L).
    Eigen::MatrixXd eval_terms(const Eigen::MatrixXd& germ_draws) const;

    bool same_structure(const MultiBasis& other) const;

private:
    std::vector<Germ> germs_;
    std::vector<MultiIndex> terms_;
    // Precomputed (germ position, degree) factors per term.
    std::vector<std::vector<std::pair<int, int>>> term_factors_;
};

/// Random vector represented by PCE coefficients: column j of `coeffs` is
/// the coefficient vector on basis term j.
class PCEVector {
public:
    PCEVector(std::shared_ptr<const MultiBasis> basis, Eigen::MatrixXd coeffs);

    int dim() const { return static_cast<int>(coeffs_.rows()); }
    int term_count() const { return static_cast<int>(coeffs_.cols()); }
    const MultiBasis& basis() const { return *basis_; }
    const std::shared_ptr<const MultiBasis>& basis_ptr() const { return basis_; }
    const Eigen::MatrixXd& coeffs() const { return coeffs_; }

    /// First moment: the coefficient on the constant term.
    Eigen::VectorXd mean() const;
    /// Component-wise variance: sum of squared non-constant coefficients
    /// (orthonormal basis).
    Eigen::VectorXd variance() const;

    /// Pathwise realizations for given germ draws (n_draws x germ_count)
    /// -> (n_draws x dim).
    Eigen::MatrixXd sample(const Eigen::MatrixXd& germ_draws) const;

    bool is_deterministic() const;

private:
    std::shared_ptr<const MultiBasis> basis_;
    Eigen::MatrixXd coeffs_;
};

/// Exact two-term expansion of a scalar measure: coefficients (mean, std)
/// on {1, psi^1(xi)}; Dirac yields the single constant term.
PCEVector affine_pce(const MeasureSpec& measure, int germ_id = 0);

/// Union of component bases sharing one constant term;
/// term count 1 + sum(L_i - 1). Germ ids must be disjoint.
MultiBasis union_basis(const std::vector<MultiBasis>& components);

/// All multi-indices of total degree <= p over the given germs;
/// term count (n+p)!/(n!p!) for n non-degenerate germs.
MultiBasis tensor_basis(std::vector<Germ> germs, int total_degree);
MultiBasis tensor_basis(const std::vector<MeasureSpec>& measures, int total_degree);

/// Component-wise affine PCEs of independent measures embedded in their
/// union basis (germ ids 0..n-1); component i touches only the constant
/// term and its own germ block.
PCEVector gen_pce(const std::vector<MeasureSpec>& specs);

/// Exact expansion of a multivariate Gaussian via Cholesky factorization;
/// rank-deficient directions drop their germ (Sigma = 0 gives a Dirac).
PCEVector gaussian_mv_pce(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance);

/// Exact propagation through an affine map z -> A z + b: same basis, every
/// coefficient column mapped by A, offset added to the constant column.
PCEVector propagate_affine(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           const PCEVector& Z);

/// Coefficients of f(Z) on `target` by tensorized Gauss quadrature over the
/// active germs. The map must be polynomial of total degree <= f_degree;
/// projection exactness is probed and a non-representable map is rejected.
PCEVector galerkin_project(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                           int f_degree, const PCEVector& Z,
                           std::shared_ptr<const MultiBasis> target);

}  // namespace pcmpc

#endif  // PCMPC_PCE_HPP
