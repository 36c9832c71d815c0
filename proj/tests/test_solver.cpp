#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "pcmpc/solver.hpp"
#include "pcmpc/transcription.hpp"

using namespace pcmpc;

namespace {

Eigen::SparseMatrix<double> sparse(const Eigen::MatrixXd& M) {
    return M.sparseView().eval();
}

ConicData make_data(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                    const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                    const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
                    std::vector<int> dims) {
    ConicData d;
    d.n = static_cast<int>(q.size());
    d.P = sparse(P);
    d.q = q;
    d.A = sparse(A);
    d.b = b;
    d.G = sparse(G);
    d.h = h;
    d.cone_dims = std::move(dims);
    return d;
}

/// Deterministic LQ problem over a Dirac-only basis (L = 1).
StochasticProblem lq_problem(int nx, int nu, int N, unsigned tag) {
    StochasticProblem prob;
    prob.N = N;
    // Fixed pseudo-random stable-ish system.
    SplitMix64 rng{0xBEEF0000ULL + tag};
    auto next = [&] { return 2.0 * uniform01_from_bits(rng()) - 1.0; };
    prob.A.resize(nx, nx);
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < nx; ++j) prob.A(i, j) = 0.6 * next() / nx + (i == j ? 0.8 : 0.0);
    }
    prob.B.resize(nx, nu);
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < nu; ++j) prob.B(i, j) = next();
    }
    prob.E = Eigen::MatrixXd::Identity(nx, nx);
    std::vector<MeasureSpec> x0specs;
    for (int i = 0; i < nx; ++i) x0specs.push_back(MeasureSpec::dirac(next()));
    prob.x0 = gen_pce(x0specs);
    prob.w = gen_pce(std::vector<MeasureSpec>(nx, MeasureSpec::dirac(0.0)));
    prob.Q = Eigen::MatrixXd::Identity(nx, nx);
    prob.QN = 2.0 * Eigen::MatrixXd::Identity(nx, nx);
    prob.R = 0.5 * Eigen::MatrixXd::Identity(nu, nu);
    return prob;
}

}  // namespace

TEST_CASE("unconstrained scalar QP") {
    const auto d = make_data(2.0 * Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1),
                             Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), Eigen::MatrixXd(0, 1),
                             Eigen::VectorXd(0), {});
    const RawSolution sol = solve_conic(d);
    CHECK(sol.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.z(0)) < 1e-9);
    CHECK(std::abs(sol.objective) < 1e-12);
}

TEST_CASE("projection onto the unit ball through one second-order cone") {
    Eigen::MatrixXd P = 2.0 * Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd q(2);
    q << -4.0, 6.0;  // objective |z - (2, -3)|^2
    Eigen::MatrixXd G(3, 2);
    G << 0, 0, -1, 0, 0, -1;
    Eigen::VectorXd h(3);
    h << 1, 0, 0;
    const auto d = make_data(P, q, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), G, h, {3});
    const RawSolution sol = solve_conic(d);
    REQUIRE(sol.status == SolveStatus::Optimal);
    const Eigen::Vector2d expect = Eigen::Vector2d(2.0, -3.0) / std::sqrt(13.0);
    CHECK((sol.z - expect).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("active linear bound through a dim-1 cone") {
    // minimize (x-3)^2 subject to x <= 1.
    Eigen::MatrixXd G(1, 1);
    G << 1.0;
    Eigen::VectorXd h(1);
    h << 1.0;
    const auto d = make_data(2.0 * Eigen::MatrixXd::Identity(1, 1),
                             Eigen::VectorXd::Constant(1, -6.0), Eigen::MatrixXd(0, 1),
                             Eigen::VectorXd(0), G, h, {1});
    const RawSolution sol = solve_conic(d);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.z(0) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("one-step LQ matches the closed form") {
    StochasticProblem prob = lq_problem(2, 1, 1, 3);
    const HorizonBasis hb = prob.make_horizon_basis();
    REQUIRE(hb.term_count() == 1);
    const ConicProgram prog = build(prob, hb);
    const PCESolution sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);

    const Eigen::VectorXd x0 = prob.x0->mean();
    const Eigen::MatrixXd& B = prob.B;
    const Eigen::MatrixXd K =
        (*prob.R + B.transpose() * *prob.QN * B).ldlt().solve(B.transpose() * *prob.QN * prob.A);
    const Eigen::VectorXd u_expect = -K * x0;
    CHECK((sol.u[0].col(0) - u_expect).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("deterministic LQR matches the Riccati recursion") {
    for (unsigned tag : {1u, 2u}) {
        StochasticProblem prob = lq_problem(3, 2, 6, tag);
        const HorizonBasis hb = prob.make_horizon_basis();
        const ConicProgram prog = build(prob, hb);

        const PCESolution ipm = solve(prog);
        const PCESolution qp = solve_equality_qp(prog);
        REQUIRE(ipm.status == SolveStatus::Optimal);
        REQUIRE(qp.status == SolveStatus::Optimal);

        const auto gains =
            oracles::riccati_gains(prob.A, prob.B, *prob.Q, *prob.R, *prob.QN, prob.N);
        Eigen::VectorXd x = prob.x0->mean();
        for (int k = 0; k < prob.N; ++k) {
            const Eigen::VectorXd u = -gains[k] * x;
            CHECK((ipm.u[k].col(0) - u).cwiseAbs().maxCoeff() < 1e-7);
            CHECK((qp.u[k].col(0) - u).cwiseAbs().maxCoeff() < 1e-8);
            x = prob.A * x + prob.B * u;
            CHECK((qp.x[k + 1].col(0) - x).cwiseAbs().maxCoeff() < 1e-8);
        }
        // Equality-QP oracle agrees with the interior-point path when the
        // cones are absent.
        CHECK(std::abs(ipm.objective - qp.objective) <
              1e-6 * std::max(1.0, std::abs(qp.objective)));
    }
}

TEST_CASE("feasibility-only program returns a feasible point") {
    Eigen::MatrixXd A(1, 2);
    A << 1.0, 1.0;
    Eigen::VectorXd b(1);
    b << 3.0;
    const auto d = make_data(Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2), A, b,
                             Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), {});
    const RawSolution sol = solve_conic(d);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.z.sum() - 3.0) < 1e-10);
}

TEST_CASE("determinism: identical inputs give identical iterates") {
    StochasticProblem prob = lq_problem(2, 1, 4, 9);
    prob.ubx = {{0.35, 0.1}, {ChanceBound{}.bound, 1.0}};
    const HorizonBasis hb = prob.make_horizon_basis();
    const ConicProgram prog = build(prob, hb);
    const PCESolution s1 = solve(prog);
    const PCESolution s2 = solve(prog);
    REQUIRE(s1.status == SolveStatus::Optimal);
    CHECK(s1.iterations == s2.iterations);
    CHECK((s1.z_raw - s2.z_raw).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("optimality certificate: stationarity residual bound") {
    StochasticProblem prob = lq_problem(2, 1, 5, 21);
    prob.x0 = gen_pce({MeasureSpec::dirac(0.25), MeasureSpec::dirac(-0.1)});
    prob.ubx = {{0.3, 0.2}, {0.6, 0.2}};
    const ConicProgram prog = build(prob, prob.make_horizon_basis());
    const ConicData& data = prog.conic_data();
    const RawSolution sol = solve_conic(data);
    REQUIRE(sol.status == SolveStatus::Optimal);
    const Eigen::VectorXd grad = data.P * sol.z + data.q;
    const Eigen::VectorXd stat =
        grad + data.A.transpose() * sol.y + data.G.transpose() * sol.zeta;
    CHECK(stat.lpNorm<Eigen::Infinity>() <=
          1e-6 * (1.0 + grad.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("scaling invariance of the argmin") {
    StochasticProblem prob = lq_problem(2, 1, 5, 4);
    const ConicProgram prog1 = build(prob, prob.make_horizon_basis());
    StochasticProblem scaled = prob;
    *scaled.Q *= 7.0;
    *scaled.R *= 7.0;
    *scaled.QN *= 7.0;
    const ConicProgram prog2 = build(scaled, scaled.make_horizon_basis());
    const PCESolution s1 = solve(prog1);
    const PCESolution s2 = solve(prog2);
    REQUIRE(s1.status == SolveStatus::Optimal);
    REQUIRE(s2.status == SolveStatus::Optimal);
    CHECK((s1.z_raw - s2.z_raw).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(s2.objective == doctest::Approx(7.0 * s1.objective).epsilon(1e-6));
}

TEST_CASE("monotone infeasibility reporting") {
    // x(1) is pinned by the dynamics; an upper bound far below the reachable
    // set must eventually report infeasible.
    StochasticProblem prob = lq_problem(1, 1, 1, 5);
    prob.B.setZero();  // x(1) = A x(0), no control authority
    const double reachable = (prob.A * prob.x0->mean())(0);
    bool seen_optimal = false, seen_infeasible = false;
    for (double margin : {1.0, -5.0, -50.0}) {
        StochasticProblem p = prob;
        p.ubx = {{reachable + margin, 0.2}};
        const ConicProgram prog = build(p, p.make_horizon_basis());
        const PCESolution sol = solve(prog);
        if (margin > 0.0) {
            CHECK(sol.status == SolveStatus::Optimal);
            seen_optimal = true;
        }
        if (margin < -1.0) {
            CHECK(sol.status == SolveStatus::Infeasible);
            seen_infeasible = sol.status == SolveStatus::Infeasible;
        }
    }
    CHECK(seen_optimal);
    CHECK(seen_infeasible);
}

TEST_CASE("backend registration dispatches and propagates status") {
    struct EchoBackend : SolverBackend {
        RawSolution solve(const ConicData& data, const SolverOptions& opts) override {
            calls += 1;
            return solve_conic(data, opts);
        }
        std::string name() const override { return "echo"; }
        int calls = 0;
    };
    struct InfeasibleBackend : SolverBackend {
        RawSolution solve(const ConicData&, const SolverOptions&) override {
            RawSolution r;
            r.status = SolveStatus::Infeasible;
            return r;
        }
        std::string name() const override { return "always-infeasible"; }
    };

    StochasticProblem prob = lq_problem(2, 1, 3, 6);
    const ConicProgram prog = build(prob, prob.make_horizon_basis());
    const PCESolution direct = solve(prog);

    auto echo = std::make_shared<EchoBackend>();
    register_backend(echo);
    const PCESolution via = solve(prog);
    CHECK(echo->calls == 1);
    CHECK(via.status == SolveStatus::Optimal);
    CHECK((via.z_raw - direct.z_raw).cwiseAbs().maxCoeff() == 0.0);

    register_backend(std::make_shared<InfeasibleBackend>());
    CHECK(solve(prog).status == SolveStatus::Infeasible);
    clear_backend();
    CHECK(solve(prog).status == SolveStatus::Optimal);
}

TEST_CASE("standard-form export round-trips to the same optimum") {
    StochasticProblem prob = lq_problem(2, 1, 4, 7);
    prob.x0 = gen_pce({MeasureSpec::dirac(0.3), MeasureSpec::dirac(0.2)});
    prob.ubx = {{0.4, 0.15}, {0.9, 0.15}};
    const ConicProgram prog = build(prob, prob.make_horizon_basis());
    const ConicData& data = prog.conic_data();

    std::stringstream ss;
    write_standard_form(data, ss);
    const ConicData back = read_standard_form(ss);
    CHECK(back.n == data.n);
    CHECK(back.cone_dims == data.cone_dims);

    const RawSolution s1 = solve_conic(data);
    const RawSolution s2 = solve_conic(back);
    REQUIRE(s1.status == SolveStatus::Optimal);
    REQUIRE(s2.status == SolveStatus::Optimal);
    CHECK((s1.z - s2.z).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("equality oracle agrees with the cone path when cones are inactive") {
    StochasticProblem prob = lq_problem(2, 1, 5, 8);
    // Bounds far outside the reachable set: the cones never activate.
    prob.ubx = {{100.0, 0.1}, {100.0, 0.1}};
    const ConicProgram prog = build(prob, prob.make_horizon_basis());
    const PCESolution cone = solve(prog);
    const PCESolution qp = solve_equality_qp(prog);
    REQUIRE(cone.status == SolveStatus::Optimal);
    REQUIRE(qp.status == SolveStatus::Optimal);
    CHECK((cone.z_raw - qp.z_raw).cwiseAbs().maxCoeff() < 1e-6);
}
