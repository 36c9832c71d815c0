#ifndef PCMPC_TRANSCRIPTION_HPP
#define PCMPC_TRANSCRIPTION_HPP

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pcmpc/conic.hpp"
#include "pcmpc/horizon.hpp"

namespace pcmpc {

/// Cantelli (distribution-free) or Gaussian-quantile back-off factor for a
/// chance constraint with violation probability `risk`.
double chance_gamma(double risk, bool two_sided, bool gaussian);

/// One side of a component-wise chance constraint: P[Z <= bound] >= 1-risk
/// (or the mirrored lower form). An infinite bound deactivates the side.
struct ChanceBound {
    double bound = std::numeric_limits<double>::infinity();
    double risk = 1.0;
};

enum class ChanceTarget { State, Input };

/// A component-wise chance constraint over a time range. Whether the
/// back-off is one- or two-sided follows from which bounds are finite.
struct ChanceSpec {
    ChanceTarget target = ChanceTarget::State;
    int component = 0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    double risk = 0.1;
    int k_begin = 0;
    int k_end = -1;  // inclusive; -1 means the full admissible range
};

/// Full stochastic OCP description: LTI dynamics, horizon, exact PCEs of the
/// initial condition and disturbance, quadratic weights (optional; leave
/// empty for custom objectives), per-component chance bounds, and the
/// Gaussian flag selecting exact quantile back-offs.
struct StochasticProblem {
    int N = 0;
    Eigen::MatrixXd A, B, E;
    std::optional<PCEVector> x0;
    std::optional<PCEVector> w;           // i.i.d. one-step disturbance
    std::vector<PCEVector> w_steps;       // non-i.i.d. alternative, one per step
    std::optional<Eigen::MatrixXd> Q, R, QN;
    std::vector<ChanceBound> lbx, ubx, lbu, ubu;  // empty or one per component
    bool gauss = false;

    int n_x() const { return static_cast<int>(A.rows()); }
    int n_u() const { return static_cast<int>(B.cols()); }
    int n_w() const { return static_cast<int>(E.cols()); }
    void validate() const;

    /// Joint basis consistent with this problem's uncertainty description.
    HorizonBasis make_horizon_basis() const;
};

/// Deterministic conic transcription of the stochastic OCP over PCE
/// coefficients: decision variables x^j(k), u^j(k); quadratic objective;
/// linear equalities (coefficient dynamics, parametric initial condition,
/// causality); one second-order cone per chance constraint instance.
class ConicProgram {
public:
    ConicProgram(int n_x, int n_u, int N, int L);

    int n_x() const { return n_x_; }
    int n_u() const { return n_u_; }
    int horizon() const { return N_; }
    int term_count() const { return L_; }
    int var_count() const { return n_vars_; }

    int x_index(int k, int j, int i) const;
    int u_index(int k, int j, int i) const;

    /// Replaces the objective (1/2) z'Pz + q'z + r0; pass the full symmetric
    /// triplet set of P. Enables custom objectives on an otherwise
    /// weight-free program.
    void set_objective(std::vector<Eigen::Triplet<double>> P_full, Eigen::VectorXd q,
                       double r0 = 0.0);

    /// Appends one linear equality given as (variable, coefficient) pairs.
    int add_equality(const std::vector<std::pair<int, double>>& row, double rhs);

    /// Appends the second-order cones of one chance constraint without
    /// rebuilding anything else. Skips deactivated (all-infinite) specs
    /// with a warning.
    void add_chance(const ChanceSpec& spec);

    /// Updates only the right-hand side of the initial-condition equalities.
    /// Accepts the full embedded n_x x L coefficient matrix; columns in
    /// disturbance blocks must be zero.
    void set_initial_param(const Eigen::MatrixXd& x0_joint);
    /// Dirac shortcut: exact measured state, zero higher coefficients.
    void set_initial_state(const Eigen::VectorXd& measured_state);

    bool gauss_flag() const { return gauss_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    /// Assembled standard conic form (cached; invalidated by mutation).
    const ConicData& conic_data() const;

    /// Stable text summary of sizes and sparsity for regression fixtures.
    std::string structure_dump() const;

    friend ConicProgram build(const StochasticProblem& prob, const HorizonBasis& hb);

private:
    void invalidate_cache() const;

    int n_x_, n_u_, N_, L_, n_vars_;
    bool gauss_ = false;
    // Joint-term bookkeeping copied from the horizon basis: the disturbance
    // step owning each term, or -1 for the constant / ini block.
    std::vector<int> term_step_;

    std::vector<Eigen::Triplet<double>> P_trip_;
    Eigen::VectorXd q_;
    double r0_ = 0.0;
    std::vector<Eigen::Triplet<double>> A_trip_;
    std::vector<double> b_;
    int init_row_begin_ = -1;
    std::vector<Eigen::Triplet<double>> G_trip_;
    std::vector<double> h_;
    std::vector<int> cone_dims_;
    std::vector<std::string> warnings_;

    mutable ConicData cache_;
    mutable bool cache_valid_ = false;
};

/// Assembles the complete conic program for a validated problem.
ConicProgram build(const StochasticProblem& prob, const HorizonBasis& hb);

}  // namespace pcmpc

#endif  // PCMPC_TRANSCRIPTION_HPP
