#ifndef PCMPC_SOLVER_HPP
#define PCMPC_SOLVER_HPP

#include <memory>
#include <string>
#include <vector>

#include "pcmpc/conic.hpp"

namespace pcmpc {

struct SolverOptions {
    int max_iterations = 200;
    double eps_feas = 1e-8;        // primal/dual feasibility tolerance
    double eps_gap = 1e-8;         // relative duality-gap tolerance
    double regularization = 1e-10; // static KKT regularization floor
    int verbosity = 0;

    void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, MaxIter, NumericalError };

std::string to_string(SolveStatus status);

/// Solver-level result on the raw decision vector.
struct RawSolution {
    SolveStatus status = SolveStatus::NumericalError;
    Eigen::VectorXd z;     // primal variables
    Eigen::VectorXd y;     // equality multipliers
    Eigen::VectorXd zeta;  // cone multipliers
    Eigen::VectorXd s;     // cone slacks
    double objective = 0.0;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double solve_ms = 0.0;
    std::string message;
};

/// Mehrotra predictor-corrector primal-dual interior-point method over the
/// product of second-order cones, quadratic objective kept in the KKT
/// system. Deterministic: identical inputs and options reproduce identical
/// iterate sequences. An optional warm point seeds the primal iterate.
RawSolution solve_conic(const ConicData& data, const SolverOptions& opts = {},
                        const Eigen::VectorXd* warm = nullptr);

/// Direct KKT solve of the equality-constrained QP, ignoring all cone
/// constraints. Dense factorization up to moderate sizes, sparse beyond;
/// serves as an oracle when cones are inactive.
RawSolution solve_equality_qp_raw(const ConicData& data, const SolverOptions& opts = {});

class ConicProgram;

/// Solution in PCE coefficient trajectories: x[k] is n_x x L for
/// k = 0..N and u[k] is n_u x L for k = 0..N-1.
struct PCESolution {
    SolveStatus status = SolveStatus::NumericalError;
    std::vector<Eigen::MatrixXd> x;
    std::vector<Eigen::MatrixXd> u;
    double objective = 0.0;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    double solve_ms = 0.0;
    Eigen::VectorXd z_raw;
    std::string message;
};

/// Pluggable solver interface; accepts the standard conic form.
class SolverBackend {
public:
    virtual ~SolverBackend() = default;
    virtual RawSolution solve(const ConicData& data, const SolverOptions& opts) = 0;
    virtual std::string name() const = 0;
};

/// Registers a backend for subsequent solves; null restores the built-in.
void register_backend(std::shared_ptr<SolverBackend> backend);
void clear_backend();
std::shared_ptr<SolverBackend> current_backend();

/// Solves a built program (through the registered backend if any) and
/// unpacks the coefficient trajectories.
PCESolution solve(const ConicProgram& program, const SolverOptions& opts = {},
                  const Eigen::VectorXd* warm = nullptr);

/// Equality-QP oracle on a built program (cones dropped).
PCESolution solve_equality_qp(const ConicProgram& program, const SolverOptions& opts = {});

}  // namespace pcmpc

#endif  // PCMPC_SOLVER_HPP
