#include "pcmpc/mpc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "pcmpc/rng.hpp"

namespace pcmpc {

Controller::Controller(const StochasticProblem& prob, MpcOptions opts)
    : prob_(prob), hb_(prob.make_horizon_basis()), program_(build(prob_, hb_)),
      opts_(std::move(opts)) {}

Eigen::VectorXd Controller::step(const Eigen::VectorXd& measured_state) {
    if (measured_state.size() != prob_.n_x()) {
        throw std::invalid_argument("measured state dimension mismatch");
    }
    program_.set_initial_state(measured_state);

    const Eigen::VectorXd* warm = nullptr;
    if (opts_.warm_start && have_warm_) warm = &warm_;
    PCESolution sol = solve(program_, opts_.solver, warm);
    solve_count_ += 1;
    total_solve_ms_ += sol.solve_ms;
    if (sol.status != SolveStatus::Optimal) {
        last_ = std::move(sol);
        have_warm_ = false;
        std::ostringstream os;
        os << "control step solve returned " << to_string(last_.status);
        throw SolveError(last_.status, os.str());
    }

    // Shift warm start: trajectories moved one step earlier, last step kept.
    if (opts_.warm_start) {
        warm_.resize(program_.var_count());
        const int N = program_.horizon();
        const int L = program_.term_count();
        for (int k = 0; k <= N; ++k) {
            const auto& xs = sol.x[std::min(k + 1, N)];
            for (int j = 0; j < L; ++j) {
                for (int i = 0; i < program_.n_x(); ++i) {
                    warm_(program_.x_index(k, j, i)) = xs(i, j);
                }
            }
        }
        for (int k = 0; k < N; ++k) {
            const auto& us = sol.u[std::min(k + 1, N - 1)];
            for (int j = 0; j < L; ++j) {
                for (int i = 0; i < program_.n_u(); ++i) {
                    warm_(program_.u_index(k, j, i)) = us(i, j);
                }
            }
        }
        have_warm_ = true;
    }

    // With a Dirac measurement and causality, only the constant coefficient
    // of u(0) is active.
    Eigen::VectorXd input = sol.u[0].col(0);
    last_ = std::move(sol);
    return input;
}

DisturbanceSampler make_disturbance_sampler(const StochasticProblem& prob, std::uint64_t seed,
                                            std::uint64_t path) {
    if (prob.w.has_value()) {
        const PCEVector w = *prob.w;
        return [w, seed, path](int step) {
            const auto& germs = w.basis().germs();
            Eigen::MatrixXd draws(1, w.basis().germ_count());
            for (int g = 0; g < w.basis().germ_count(); ++g) {
                draws(0, g) = draw_germ(germs[g].measure, seed, path, step, g);
            }
            return Eigen::VectorXd(w.sample(draws).row(0));
        };
    }
    const std::vector<PCEVector> steps = prob.w_steps;
    return [steps, seed, path](int step) {
        const PCEVector& w = steps.at(step % steps.size());
        const auto& germs = w.basis().germs();
        Eigen::MatrixXd draws(1, w.basis().germ_count());
        for (int g = 0; g < w.basis().germ_count(); ++g) {
            draws(0, g) = draw_germ(germs[g].measure, seed, path, step, g);
        }
        return Eigen::VectorXd(w.sample(draws).row(0));
    };
}

Eigen::VectorXd sample_initial_state(const StochasticProblem& prob, std::uint64_t seed,
                                     std::uint64_t path) {
    const PCEVector& x0 = *prob.x0;
    const auto& germs = x0.basis().germs();
    Eigen::MatrixXd draws(1, x0.basis().germ_count());
    for (int g = 0; g < x0.basis().germ_count(); ++g) {
        draws(0, g) = draw_germ(germs[g].measure, seed, path, -1, g);
    }
    return x0.sample(draws).row(0);
}

ClosedLoopTrace simulate_closed_loop(Controller& ctrl, const Plant& plant,
                                     const DisturbanceSampler& sampler, int T,
                                     const Eigen::VectorXd& x0) {
    if (T < 0) throw std::invalid_argument("closed-loop length must be >= 0");
    // Each path is a pure function of its inputs regardless of what the
    // controller solved before.
    ctrl.reset_warm_start();
    const int nx = static_cast<int>(plant.A.rows());
    const int nu = static_cast<int>(plant.B.cols());
    ClosedLoopTrace trace;
    trace.x.resize(T + 1, nx);
    trace.u.resize(T, nu);
    trace.x.row(0) = x0.transpose();
    trace.status.reserve(T);
    trace.solve_ms.reserve(T);
    for (int t = 0; t < T; ++t) {
        Eigen::VectorXd u;
        try {
            u = ctrl.step(trace.x.row(t).transpose());
        } catch (const SolveError& err) {
            trace.status.push_back(err.status());
            trace.solve_ms.push_back(ctrl.last_solution().solve_ms);
            trace.completed = false;
            trace.x.conservativeResize(t + 1, nx);
            trace.u.conservativeResize(t, nu);
            return trace;
        }
        trace.status.push_back(SolveStatus::Optimal);
        trace.solve_ms.push_back(ctrl.last_solution().solve_ms);
        trace.u.row(t) = u.transpose();
        const Eigen::VectorXd w = sampler(t);
        trace.x.row(t + 1) =
            (plant.A * trace.x.row(t).transpose() + plant.B * u + plant.E * w).transpose();
    }
    return trace;
}

namespace {

Eigen::VectorXd empirical_quantiles(std::vector<double>& values,
                                    const std::vector<double>& levels) {
    std::sort(values.begin(), values.end());
    Eigen::VectorXd out(levels.size());
    const int n = static_cast<int>(values.size());
    for (size_t i = 0; i < levels.size(); ++i) {
        if (n == 0) {
            out(i) = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const double pos = levels[i] * (n - 1);
        const int lo = static_cast<int>(std::floor(pos));
        const int hi = std::min(lo + 1, n - 1);
        const double fr = pos - lo;
        out(i) = (1.0 - fr) * values[lo] + fr * values[hi];
    }
    return out;
}

}  // namespace

MonteCarloResult monte_carlo(const StochasticProblem& prob, int n_paths, int T,
                             std::uint64_t seed, int workers, MpcOptions opts) {
    if (n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    prob.validate();

    const auto t0 = std::chrono::steady_clock::now();
    MonteCarloResult result;
    result.traces.resize(n_paths);
    const Plant plant{prob.A, prob.B, prob.E};

    std::atomic<int> next{0};
    std::vector<std::string> worker_errors(workers);
    auto body = [&](int wid) {
        try {
            Controller ctrl(prob, opts);
            for (;;) {
                const int p = next.fetch_add(1);
                if (p >= n_paths) break;
                const auto sampler = make_disturbance_sampler(prob, seed, p);
                const Eigen::VectorXd x0 = sample_initial_state(prob, seed, p);
                ClosedLoopTrace trace = simulate_closed_loop(ctrl, plant, sampler, T, x0);
                trace.path_id = p;
                result.traces[p] = std::move(trace);
            }
        } catch (const std::exception& e) {
            worker_errors[wid] = e.what();
        }
    };
    if (workers == 1) {
        body(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int wdx = 0; wdx < workers; ++wdx) pool.emplace_back(body, wdx);
        for (auto& th : pool) th.join();
    }
    for (const auto& err : worker_errors) {
        if (!err.empty()) throw std::runtime_error("monte_carlo worker failed: " + err);
    }

    // Summary, computed serially in path order.
    MonteCarloSummary& sum = result.summary;
    sum.n_paths = n_paths;
    sum.T = T;
    sum.quantile_levels = {0.05, 0.25, 0.5, 0.75, 0.95};
    const int nx = prob.n_x();
    sum.x_quantiles.assign(nx, Eigen::MatrixXd::Zero(T + 1, sum.quantile_levels.size()));
    for (int i = 0; i < nx; ++i) {
        for (int t = 0; t <= T; ++t) {
            std::vector<double> vals;
            vals.reserve(n_paths);
            for (const auto& tr : result.traces) {
                if (tr.x.rows() > t) vals.push_back(tr.x(t, i));
            }
            sum.x_quantiles[i].row(t) = empirical_quantiles(vals, sum.quantile_levels).transpose();
        }
    }
    auto violation = [&](ChanceTarget target, int comp, bool upper, double bound, double risk) {
        ViolationStat v;
        v.target = target;
        v.component = comp;
        v.upper = upper;
        v.bound = bound;
        v.risk = risk;
        const int steps = target == ChanceTarget::State ? T + 1 : T;
        v.frequency = Eigen::VectorXd::Zero(steps);
        for (int t = 0; t < steps; ++t) {
            int count = 0, total = 0;
            for (const auto& tr : result.traces) {
                const auto& M = target == ChanceTarget::State ? tr.x : tr.u;
                if (M.rows() <= t) continue;
                total += 1;
                const double val = M(t, comp);
                if ((upper && val > bound) || (!upper && val < bound)) count += 1;
            }
            v.frequency(t) = total ? static_cast<double>(count) / total : 0.0;
        }
        return v;
    };
    auto add_violations = [&](const std::vector<ChanceBound>& lo,
                              const std::vector<ChanceBound>& hi, ChanceTarget target) {
        for (size_t i = 0; i < lo.size(); ++i) {
            if (std::isfinite(lo[i].bound)) {
                sum.violations.push_back(
                    violation(target, static_cast<int>(i), false, lo[i].bound, lo[i].risk));
            }
        }
        for (size_t i = 0; i < hi.size(); ++i) {
            if (std::isfinite(hi[i].bound)) {
                sum.violations.push_back(
                    violation(target, static_cast<int>(i), true, hi[i].bound, hi[i].risk));
            }
        }
    };
    add_violations(prob.lbx, prob.ubx, ChanceTarget::State);
    add_violations(prob.lbu, prob.ubu, ChanceTarget::Input);

    for (const auto& tr : result.traces) {
        if (!tr.completed) sum.failed_paths += 1;
        for (double ms : tr.solve_ms) sum.total_solve_ms += ms;
    }
    sum.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace pcmpc
