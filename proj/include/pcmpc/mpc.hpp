#ifndef PCMPC_MPC_HPP
#define PCMPC_MPC_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>

#include "pcmpc/solver.hpp"
#include "pcmpc/transcription.hpp"

namespace pcmpc {

/// Solver failure inside a control step; carries the returned status.
class SolveError : public std::runtime_error {
public:
    SolveError(SolveStatus status, const std::string& what)
        : std::runtime_error(what), status_(status) {}
    SolveStatus status() const { return status_; }

private:
    SolveStatus status_;
};

struct MpcOptions {
    SolverOptions solver;
    /// Seed each re-solve from the previous solution shifted by one step.
    bool warm_start = true;
};

/// Receding-horizon controller. The conic program is built once; every step
/// only updates the parametric initial condition (Dirac embedding of the
/// measured state), re-solves, and applies the constant coefficient of u(0).
class Controller {
public:
    explicit Controller(const StochasticProblem& prob, MpcOptions opts = {});

    /// Closes the loop once; throws SolveError when the solve fails.
    Eigen::VectorXd step(const Eigen::VectorXd& measured_state);

    /// Drops the warm-start cache. Runs that must not depend on what the
    /// controller solved before (fresh closed-loop paths) start from here.
    void reset_warm_start() { have_warm_ = false; }

    const PCESolution& last_solution() const { return last_; }
    const ConicProgram& program() const { return program_; }
    const HorizonBasis& horizon_basis() const { return hb_; }
    const StochasticProblem& problem() const { return prob_; }

    int solve_count() const { return solve_count_; }
    double total_solve_ms() const { return total_solve_ms_; }

private:
    StochasticProblem prob_;
    HorizonBasis hb_;
    ConicProgram program_;
    MpcOptions opts_;
    PCESolution last_;
    bool have_warm_ = false;
    Eigen::VectorXd warm_;
    int solve_count_ = 0;
    double total_solve_ms_ = 0.0;
};

struct Plant {
    Eigen::MatrixXd A, B, E;
};

/// Realized state/input path of one closed-loop run.
struct ClosedLoopTrace {
    Eigen::MatrixXd x;  // (T+1) x n_x
    Eigen::MatrixXd u;  // T x n_u
    std::vector<SolveStatus> status;
    std::vector<double> solve_ms;
    std::uint64_t path_id = 0;
    bool completed = true;
};

using DisturbanceSampler = std::function<Eigen::VectorXd(int step)>;

/// Disturbance stream realizing the problem's per-step PCE with draws keyed
/// (seed, path, step, germ) — the same keying the horizon basis uses, so
/// open-loop and closed-loop sampling agree pathwise.
DisturbanceSampler make_disturbance_sampler(const StochasticProblem& prob, std::uint64_t seed,
                                            std::uint64_t path);

/// Initial-condition realization for one path, keyed (seed, path, -1, germ).
Eigen::VectorXd sample_initial_state(const StochasticProblem& prob, std::uint64_t seed,
                                     std::uint64_t path);

/// Rolls the plant forward T steps under the controller; solver failures
/// abort the path and leave a partial trace.
ClosedLoopTrace simulate_closed_loop(Controller& ctrl, const Plant& plant,
                                     const DisturbanceSampler& sampler, int T,
                                     const Eigen::VectorXd& x0);

struct ViolationStat {
    ChanceTarget target = ChanceTarget::State;
    int component = 0;
    bool upper = true;
    double bound = 0.0;
    double risk = 0.0;
    Eigen::VectorXd frequency;  // per step
};

struct MonteCarloSummary {
    std::vector<double> quantile_levels;
    /// One matrix per state component: (T+1) x levels.
    std::vector<Eigen::MatrixXd> x_quantiles;
    std::vector<ViolationStat> violations;
    int n_paths = 0;
    int T = 0;
    int failed_paths = 0;
    double wall_s = 0.0;
    double total_solve_ms = 0.0;
};

struct MonteCarloResult {
    std::vector<ClosedLoopTrace> traces;
    MonteCarloSummary summary;
};

/// Closed-loop ensemble over deterministic per-path streams. Path p draws
/// from (seed, p); the result is a pure function of (problem, seed,
/// n_paths, T) and independent of the worker count.
MonteCarloResult monte_carlo(const StochasticProblem& prob, int n_paths, int T,
                             std::uint64_t seed, int workers, MpcOptions opts = {});

}  // namespace pcmpc

#endif  // PCMPC_MPC_HPP
