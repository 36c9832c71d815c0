#ifndef PCMPC_CONIC_HPP
#define PCMPC_CONIC_HPP

#include <Eigen/Sparse>
#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace pcmpc {

/// Canonical convex conic form consumed by the solver:
///
///   minimize    (1/2) z' P z + q' z + r0
///   subject to  A z = b
///               G z + s = h,   s in K
///
/// where K is a product of second-order cones; a cone of dimension one is
/// the nonnegative half-line. P is positive semidefinite.
struct ConicData {
    int n = 0;
    Eigen::SparseMatrix<double> P;  // n x n, full symmetric storage
    Eigen::VectorXd q;
    double r0 = 0.0;
    Eigen::SparseMatrix<double> A;  // m_eq x n
    Eigen::VectorXd b;
    Eigen::SparseMatrix<double> G;  // m_c x n
    Eigen::VectorXd h;
    std::vector<int> cone_dims;

    int eq_rows() const { return static_cast<int>(b.size()); }
    int cone_rows() const { return static_cast<int>(h.size()); }
    void validate() const;
};

/// Plain-text standard-form layout, one section per block:
///   line 1:  pcmpc-conic-v1
///   line 2:  n <n> eq <rows> cone_rows <rows> cones <count> r0 <value>
///   line 3:  dims <d_1> ... <d_count>
///   then sections "P <nnz>", "A <nnz>", "G <nnz>" as 0-based "i j value"
///   triplet lines, and sections "q", "b", "h" as one value per line.
/// Values are round-trip exact (max_digits10).
void write_standard_form(const ConicData& data, std::ostream& os);
ConicData read_standard_form(std::istream& is);

}  // namespace pcmpc

#endif  // PCMPC_CONIC_HPP
