#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pcmpc/mpc.hpp"

using namespace pcmpc;

namespace {

StochasticProblem tank_problem(double bound = 2.0) {
    StochasticProblem prob;
    prob.N = 10;
    prob.A.resize(4, 4);
    prob.A << 0.921, 0, 0.041, 0, 0, 0.918, 0, 0.033, 0, 0, 0.924, 0, 0, 0, 0, 0.937;
    prob.B.resize(4, 2);
    prob.B << 0.017, 0.001, 0.001, 0.023, 0, 0.061, 0.072, 0;
    prob.E = Eigen::MatrixXd::Identity(4, 4);
    prob.x0 = gen_pce(std::vector<MeasureSpec>(4, MeasureSpec::uniform(-1.0, 1.0)));
    std::vector<Germ> germs;
    std::vector<MultiBasis::MultiIndex> terms{MultiBasis::MultiIndex(4, 0)};
    for (int g = 0; g < 4; ++g) {
        germs.push_back(Germ{g, MeasureSpec::gaussian(0.0, 1.0),
                             make_basis(MeasureSpec::gaussian(0.0, 1.0), 2)});
        for (int d = 1; d <= 2; ++d) {
            MultiBasis::MultiIndex t(4, 0);
            t[g] = d;
            terms.push_back(std::move(t));
        }
    }
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(4, 9);
    for (int i = 0; i < 4; ++i) {
        c(i, 0) = 0.05;
        c(i, 1 + 2 * i) = 0.05;
        c(i, 2 + 2 * i) = 0.05 * std::sqrt(2.0);
    }
    prob.w = PCEVector(std::make_shared<const MultiBasis>(std::move(germs), std::move(terms)), c);
    prob.Q = 3.0 * Eigen::MatrixXd::Identity(4, 4);
    prob.QN = 3.0 * Eigen::MatrixXd::Identity(4, 4);
    prob.R = 1e4 * Eigen::MatrixXd::Identity(2, 2);
    prob.lbx = {ChanceBound{-bound, 0.2}, ChanceBound{-bound, 0.2}, ChanceBound{}, ChanceBound{}};
    prob.lbx[2].bound = prob.lbx[3].bound = -std::numeric_limits<double>::infinity();
    prob.ubx = {ChanceBound{bound, 0.2}, ChanceBound{bound, 0.2}, ChanceBound{}, ChanceBound{}};
    return prob;
}

StochasticProblem small_det() {
    StochasticProblem prob;
    prob.N = 6;
    prob.A.resize(2, 2);
    prob.A << 0.9, 0.2, 0.0, 0.85;
    prob.B.resize(2, 1);
    prob.B << 0.1, 0.8;
    prob.E.resize(2, 1);
    prob.E << 1.0, 1.0;
    prob.x0 = gen_pce({MeasureSpec::dirac(1.0), MeasureSpec::dirac(-0.5)});
    prob.w = affine_pce(MeasureSpec::dirac(0.0));
    prob.Q = Eigen::MatrixXd::Identity(2, 2);
    prob.QN = Eigen::MatrixXd::Identity(2, 2);
    prob.R = Eigen::MatrixXd::Identity(1, 1);
    return prob;
}

}  // namespace

TEST_CASE("origin measurement with an origin-regulating objective applies zero input") {
    Controller ctrl(small_det());
    const Eigen::VectorXd u = ctrl.step(Eigen::VectorXd::Zero(2));
    CHECK(u.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("identical consecutive measurements give identical inputs") {
    MpcOptions opts;
    opts.warm_start = false;
    Controller cold(small_det(), opts);
    Eigen::VectorXd xm(2);
    xm << 0.7, -0.2;
    const Eigen::VectorXd u1 = cold.step(xm);
    const Eigen::VectorXd u2 = cold.step(xm);
    CHECK((u1 - u2).cwiseAbs().maxCoeff() == 0.0);

    Controller warm(small_det());
    const Eigen::VectorXd w1 = warm.step(xm);
    const Eigen::VectorXd w2 = warm.step(xm);
    CHECK((w1 - w2).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("Dirac measurement zeroes the non-constant coefficients of u(0)") {
    StochasticProblem prob = tank_problem();
    Controller ctrl(prob);
    Eigen::VectorXd xm(4);
    xm << 0.8, -0.6, 0.4, 0.2;
    ctrl.step(xm);
    const PCESolution& sol = ctrl.last_solution();
    REQUIRE(sol.status == SolveStatus::Optimal);
    const int L = ctrl.program().term_count();
    CHECK(sol.u[0].rightCols(L - 1).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("closed loop without disturbance regulates toward the origin") {
    StochasticProblem prob = small_det();
    Controller ctrl(prob);
    const Plant plant{prob.A, prob.B, prob.E};
    const auto zero = [](int) { return Eigen::VectorXd::Zero(1); };
    Eigen::VectorXd x0(2);
    x0 << 1.0, -0.5;
    const ClosedLoopTrace trace = simulate_closed_loop(ctrl, plant, zero, 15, x0);
    REQUIRE(trace.completed);
    CHECK(trace.x.rows() == 16);
    CHECK(trace.x.row(15).norm() < 0.1 * trace.x.row(0).norm());
    for (int t = 1; t <= 15; ++t) {
        CHECK(trace.x.row(t).norm() <= trace.x.row(t - 1).norm() + 1e-9);
    }

    const ClosedLoopTrace empty = simulate_closed_loop(ctrl, plant, zero, 0, x0);
    CHECK(empty.x.rows() == 1);
    CHECK(empty.u.rows() == 0);
}

TEST_CASE("monte carlo ensembles are a pure function of the seed") {
    StochasticProblem prob = tank_problem();
    const int paths = 6, T = 4;
    const MonteCarloResult serial = monte_carlo(prob, paths, T, 77, 1);
    const MonteCarloResult parallel = monte_carlo(prob, paths, T, 77, 4);
    REQUIRE(serial.traces.size() == parallel.traces.size());
    for (int p = 0; p < paths; ++p) {
        CHECK((serial.traces[p].x - parallel.traces[p].x).cwiseAbs().maxCoeff() == 0.0);
        CHECK((serial.traces[p].u - parallel.traces[p].u).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(serial.summary.failed_paths == 0);

    const MonteCarloResult other = monte_carlo(prob, paths, T, 78, 1);
    bool differs = false;
    for (int p = 0; p < paths; ++p) {
        if ((serial.traces[p].x - other.traces[p].x).cwiseAbs().maxCoeff() > 0.0) differs = true;
    }
    CHECK(differs);
}

TEST_CASE("chance-constraint conservatism in closed loop") {
    StochasticProblem prob = tank_problem();
    const int paths = 40, T = 6;
    const MonteCarloResult mc = monte_carlo(prob, paths, T, 3, 2);
    CHECK(mc.summary.failed_paths == 0);
    REQUIRE(!mc.summary.violations.empty());
    for (const auto& v : mc.summary.violations) {
        // Cantelli guarantees violation <= risk; allow binomial noise.
        const double se = std::sqrt(v.risk * (1.0 - v.risk) / paths);
        CHECK(v.frequency.maxCoeff() <= v.risk + 3.0 * se);
    }
    // Realizations stay comfortably within the bounds for the tank system.
    for (const auto& tr : mc.traces) {
        CHECK(tr.x.col(0).cwiseAbs().maxCoeff() <= 2.0);
        CHECK(tr.x.col(1).cwiseAbs().maxCoeff() <= 2.0);
    }
}

TEST_CASE("infeasible steps abort the path but not the ensemble") {
    // A bound so tight that sampled initial states sit outside it, making
    // the first OCP infeasible on most paths.
    StochasticProblem prob = tank_problem(0.05);
    const MonteCarloResult mc = monte_carlo(prob, 8, 3, 5, 2);
    CHECK(mc.summary.failed_paths > 0);
    for (const auto& tr : mc.traces) {
        if (!tr.completed) {
            REQUIRE(!tr.status.empty());
            CHECK(tr.status.back() == SolveStatus::Infeasible);
        }
    }
}

TEST_CASE("controller rejects wrong measurement dimension") {
    Controller ctrl(small_det());
    CHECK_THROWS_AS(ctrl.step(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}
