#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pcmpc/mpc.hpp"
#include "pcmpc/solver.hpp"
#include "pcmpc/transcription.hpp"

using namespace pcmpc;

namespace {

StochasticProblem reactor_problem() {
    StochasticProblem prob;
    prob.N = 50;
    prob.A.resize(2, 2);
    prob.A << 0.95123, 0.0, 0.08833, 0.81873;
    prob.B.resize(2, 1);
    prob.B << -0.0048771, -0.0020429;
    prob.E.resize(2, 1);
    prob.E << 1.0, 1.0;
    Eigen::VectorXd mu(2);
    mu << 0.5, 0.1;
    prob.x0 = gaussian_mv_pce(mu, Eigen::Vector2d(0.05 * 0.05, 0.01 * 0.01).asDiagonal());
    prob.w = affine_pce(MeasureSpec::uniform(-0.0173, 0.0173));
    prob.Q = Eigen::MatrixXd::Identity(2, 2);
    prob.QN = Eigen::MatrixXd::Identity(2, 2);
    prob.R = Eigen::MatrixXd::Identity(1, 1);
    prob.ubx = {ChanceBound{}, ChanceBound{0.24, 0.1}};
    return prob;
}

StochasticProblem small_stochastic(int N = 4) {
    StochasticProblem prob;
    prob.N = N;
    prob.A.resize(2, 2);
    prob.A << 0.9, 0.1, 0.0, 0.8;
    prob.B.resize(2, 1);
    prob.B << 0.0, 1.0;
    prob.E.resize(2, 1);
    prob.E << 1.0, 0.5;
    prob.x0 = gen_pce({MeasureSpec::gaussian(0.4, 0.05), MeasureSpec::uniform(-0.1, 0.1)});
    prob.w = affine_pce(MeasureSpec::uniform(-0.05, 0.05));
    prob.Q = Eigen::MatrixXd::Identity(2, 2);
    prob.QN = Eigen::MatrixXd::Identity(2, 2);
    prob.R = Eigen::MatrixXd::Identity(1, 1);
    return prob;
}

}  // namespace

TEST_CASE("chance gamma factors") {
    CHECK(chance_gamma(0.1, false, false) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(chance_gamma(0.2, true, false) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(chance_gamma(0.5, false, true) == doctest::Approx(0.0).scale(1).epsilon(1e-12));
    CHECK(chance_gamma(0.1, false, true) == doctest::Approx(1.2815515655).epsilon(1e-9));
    CHECK(chance_gamma(0.1, true, true) == doctest::Approx(1.6448536270).epsilon(1e-9));
    CHECK_THROWS_AS(chance_gamma(0.0, false, false), std::invalid_argument);
    CHECK_THROWS_AS(chance_gamma(1.0, true, false), std::invalid_argument);
}

TEST_CASE("reactor transcription structure regression") {
    const StochasticProblem prob = reactor_problem();
    const HorizonBasis hb = prob.make_horizon_basis();
    CHECK(hb.term_count() == 53);
    const ConicProgram prog = build(prob, hb);
    CHECK(prog.var_count() == 8056);  // (51*53*2) + (50*53*1)

    const ConicData& d = prog.conic_data();
    const int L = 53, N = 50, nx = 2;
    // Dynamics rows plus initial-condition rows plus causality rows.
    const int causality = 1275;  // sum_{k=0..49} (50-k) blocked coefficients
    CHECK(d.eq_rows() == L * N * nx + L * nx + causality);
    CHECK(static_cast<int>(d.cone_dims.size()) == 51);
    for (int dim : d.cone_dims) CHECK(dim == 53);

    // The one-sided state bound on component 1 only; component 0
    // deactivated by the infinite bound.
    CHECK(prog.warnings().empty());
}

TEST_CASE("causality index sets") {
    const StochasticProblem prob = reactor_problem();
    const HorizonBasis hb = prob.make_horizon_basis();
    // At k = 0 only the constant and ini block stay free.
    int free0 = 0;
    for (int j = 0; j < hb.term_count(); ++j) {
        const BlockRef ref = hb.block_of(j);
        if (!(ref.tag == BlockTag::Disturbance && ref.step >= 0)) free0 += 1;
    }
    CHECK(free0 == 3);
    // At k = 10 the free coefficients are the constant, the ini block and
    // the blocks of steps 0..9.
    int free10 = 0;
    for (int j = 0; j < hb.term_count(); ++j) {
        const BlockRef ref = hb.block_of(j);
        if (ref.tag != BlockTag::Disturbance || ref.step < 10) free10 += 1;
    }
    CHECK(free10 == 13);
}

TEST_CASE("solved input coefficients satisfy causality and triangularity") {
    StochasticProblem prob = small_stochastic(4);
    const HorizonBasis hb = prob.make_horizon_basis();
    const ConicProgram prog = build(prob, hb);
    const PCESolution sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    for (int k = 0; k < prob.N; ++k) {
        for (int j = 0; j < hb.term_count(); ++j) {
            const BlockRef ref = hb.block_of(j);
            if (ref.tag == BlockTag::Disturbance && ref.step >= k) {
                CHECK(std::abs(sol.u[k](0, j)) < 1e-9);
                CHECK(std::abs(sol.x[k](0, j)) < 1e-9);
                CHECK(std::abs(sol.x[k](1, j)) < 1e-9);
            }
        }
    }
}

TEST_CASE("all-Dirac degeneration matches the dense KKT oracle") {
    StochasticProblem prob = small_stochastic(6);
    prob.x0 = gen_pce({MeasureSpec::dirac(0.4), MeasureSpec::dirac(-0.1)});
    prob.w = affine_pce(MeasureSpec::dirac(0.0));
    const ConicProgram prog = build(prob, prob.make_horizon_basis());
    CHECK(prog.term_count() == 1);
    const PCESolution ipm = solve(prog);
    const PCESolution qp = solve_equality_qp(prog);
    REQUIRE(ipm.status == SolveStatus::Optimal);
    REQUIRE(qp.status == SolveStatus::Optimal);
    CHECK(std::abs(ipm.objective - qp.objective) < 1e-8 * std::max(1.0, qp.objective));
    CHECK((ipm.z_raw - qp.z_raw).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("objective equals the Monte Carlo cost of the solved policy") {
    StochasticProblem prob = small_stochastic(4);
    const HorizonBasis hb = prob.make_horizon_basis();
    const ConicProgram prog = build(prob, hb);
    const PCESolution sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);

    const int n = 100000;
    const Eigen::MatrixXd draws = hb.draw_germs(n, 0xC0C0);
    const Eigen::MatrixXd terms = hb.joint().eval_terms(draws);
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(n);
    for (int k = 0; k <= prob.N; ++k) {
        const Eigen::MatrixXd xk = terms * sol.x[k].transpose();  // n x nx realizations
        const Eigen::MatrixXd& Wm = k < prob.N ? *prob.Q : *prob.QN;
        for (int r = 0; r < n; ++r) {
            cost(r) += xk.row(r) * Wm * xk.row(r).transpose();
        }
        if (k < prob.N) {
            const Eigen::MatrixXd uk = terms * sol.u[k].transpose();
            for (int r = 0; r < n; ++r) cost(r) += uk.row(r) * *prob.R * uk.row(r).transpose();
        }
    }
    const auto est = oracles::estimate_moments(cost);
    CHECK(std::abs(sol.objective - est.mean) < 5.0 * est.mean_se);
}

TEST_CASE("chance cone on a deterministic problem reduces to a plain bound") {
    StochasticProblem prob = small_stochastic(3);
    prob.x0 = gen_pce({MeasureSpec::dirac(0.4), MeasureSpec::dirac(0.0)});
    prob.w = affine_pce(MeasureSpec::dirac(0.0));
    prob.Q = Eigen::MatrixXd::Zero(2, 2);
    prob.QN = Eigen::MatrixXd::Zero(2, 2);
    // Pull x2 upward through a custom objective; the bound must clamp it.
    const HorizonBasis hb = prob.make_horizon_basis();
    ConicProgram prog = build(prob, hb);
    Eigen::VectorXd q = Eigen::VectorXd::Zero(prog.var_count());
    std::vector<Eigen::Triplet<double>> P;
    for (int k = 0; k < prob.N; ++k) {
        P.emplace_back(prog.u_index(k, 0, 0), prog.u_index(k, 0, 0), 2e-4);
    }
    q(prog.x_index(prob.N, 0, 1)) = -1.0;  // maximize x2(N)
    prog.set_objective(P, q);
    prog.add_chance({ChanceTarget::State, 1, -std::numeric_limits<double>::infinity(), 0.7,
                     0.3, 0, -1});
    const PCESolution sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.x[prob.N](1, 0) == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("add_chance after build equals building with the constraint") {
    StochasticProblem with = small_stochastic(4);
    with.ubx = {ChanceBound{}, ChanceBound{0.25, 0.1}};
    const ConicProgram prog_with = build(with, with.make_horizon_basis());

    StochasticProblem without = small_stochastic(4);
    ConicProgram prog_after = build(without, without.make_horizon_basis());
    prog_after.add_chance({ChanceTarget::State, 1,
                           -std::numeric_limits<double>::infinity(), 0.25, 0.1, 0, -1});

    const PCESolution a = solve(prog_with);
    const PCESolution b = solve(prog_after);
    REQUIRE(a.status == SolveStatus::Optimal);
    REQUIRE(b.status == SolveStatus::Optimal);
    CHECK(std::abs(a.objective - b.objective) < 1e-7 * std::max(1.0, a.objective));
    CHECK((a.z_raw - b.z_raw).cwiseAbs().maxCoeff() < 1e-5);

    // Deactivated spec is a warned no-op.
    ConicProgram noop = build(without, without.make_horizon_basis());
    const size_t cones_before = noop.conic_data().cone_dims.size();
    noop.add_chance({ChanceTarget::State, 0, -std::numeric_limits<double>::infinity(),
                     std::numeric_limits<double>::infinity(), 0.1, 0, -1});
    CHECK(noop.conic_data().cone_dims.size() == cones_before);
    CHECK(noop.warnings().size() == 1);

    CHECK_THROWS_AS(prog_after.add_chance({ChanceTarget::Input, 2, 0.0, 1.0, 0.1, 0, -1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(prog_after.add_chance(
                        {ChanceTarget::State, 0, 0.0, 1.0, 0.1, 0, 99}),
                    std::invalid_argument);
}

TEST_CASE("parametric initial condition updates only the right-hand side") {
    StochasticProblem prob = small_stochastic(4);
    const HorizonBasis hb = prob.make_horizon_basis();
    ConicProgram prog = build(prob, hb);
    const PCESolution first = solve(prog);
    REQUIRE(first.status == SolveStatus::Optimal);

    // Identical value: identical solution.
    const Embedding emb = hb.embed(*prob.x0, *prob.w);
    prog.set_initial_param(emb.x_ini);
    const PCESolution again = solve(prog);
    CHECK((first.z_raw - again.z_raw).cwiseAbs().maxCoeff() == 0.0);

    // Dirac measurement: only the constant column carries the state.
    Eigen::VectorXd xm(2);
    xm << 0.2, -0.3;
    prog.set_initial_state(xm);
    const PCESolution meas = solve(prog);
    REQUIRE(meas.status == SolveStatus::Optimal);
    CHECK((meas.x[0].col(0) - xm).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(meas.x[0].rightCols(hb.term_count() - 1).cwiseAbs().maxCoeff() < 1e-9);

    // The constraint matrix is untouched: only b changed.
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, hb.term_count());
    bad(0, hb.step_range(0).first) = 1.0;
    CHECK_THROWS_WITH_AS(prog.set_initial_param(bad), doctest::Contains("disturbance"),
                         std::invalid_argument);
    CHECK_THROWS_AS(prog.set_initial_param(Eigen::MatrixXd::Zero(3, 3)), std::invalid_argument);
}

TEST_CASE("gauss flag changes back-offs, never sparsity") {
    StochasticProblem cant = small_stochastic(3);
    cant.x0 = gen_pce({MeasureSpec::gaussian(0.4, 0.05), MeasureSpec::gaussian(0.0, 0.1)});
    cant.w = affine_pce(MeasureSpec::gaussian(0.0, 0.05));
    cant.ubx = {ChanceBound{}, ChanceBound{0.4, 0.1}};
    StochasticProblem gssn = cant;
    gssn.gauss = true;

    const ConicProgram p1 = build(cant, cant.make_horizon_basis());
    const ConicProgram p2 = build(gssn, gssn.make_horizon_basis());
    const ConicData& d1 = p1.conic_data();
    const ConicData& d2 = p2.conic_data();
    CHECK(d1.G.nonZeros() == d2.G.nonZeros());
    CHECK(d1.cone_dims == d2.cone_dims);
    CHECK(p1.structure_dump() == p2.structure_dump());
    // Cantelli is the more conservative back-off.
    CHECK(d1.G.coeffs().minCoeff() < d2.G.coeffs().minCoeff());

    StochasticProblem bad = cant;
    bad.gauss = true;
    bad.x0 = gen_pce({MeasureSpec::uniform(0.0, 1.0), MeasureSpec::gaussian(0.0, 0.1)});
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("gauss"), std::invalid_argument);
}

TEST_CASE("weight-free program carries a zero objective") {
    StochasticProblem prob = small_stochastic(3);
    prob.Q.reset();
    prob.R.reset();
    prob.QN.reset();
    const ConicProgram prog = build(prob, prob.make_horizon_basis());
    const ConicData& d = prog.conic_data();
    CHECK(d.P.nonZeros() == 0);
    CHECK(d.q.cwiseAbs().maxCoeff() == 0.0);
    const PCESolution sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    // Feasible point: dynamics hold.
    for (int k = 0; k < prob.N; ++k) {
        const HorizonBasis hb = prob.make_horizon_basis();
        const Embedding emb = hb.embed(*prob.x0, *prob.w);
        const Eigen::MatrixXd resid = sol.x[k + 1] - prob.A * sol.x[k] - prob.B * sol.u[k] -
                                      prob.E * emb.w[k];
        CHECK(resid.cwiseAbs().maxCoeff() < 1e-7);
    }
}

TEST_CASE("structure dump is stable") {
    const StochasticProblem prob = reactor_problem();
    const ConicProgram prog = build(prob, prob.make_horizon_basis());
    const std::string dump = prog.structure_dump();
    CHECK(dump.find("variables 8056") != std::string::npos);
    CHECK(dump.find("layout states 2 inputs 1 horizon 50 terms 53") != std::string::npos);
    CHECK(dump == prog.structure_dump());
}

TEST_CASE("validation errors name the offending matrix") {
    StochasticProblem prob = small_stochastic(3);
    prob.B = Eigen::MatrixXd::Zero(3, 1);
    CHECK_THROWS_WITH_AS(prob.validate(), doctest::Contains("B"), std::invalid_argument);
    prob = small_stochastic(3);
    prob.Q = -Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_WITH_AS(prob.validate(), doctest::Contains("Q"), std::invalid_argument);
    prob = small_stochastic(3);
    prob.R = Eigen::MatrixXd::Zero(1, 1);
    CHECK_THROWS_WITH_AS(prob.validate(), doctest::Contains("R"), std::invalid_argument);
    prob = small_stochastic(3);
    prob.ubx = {ChanceBound{1.0, 1.5}, ChanceBound{}};
    CHECK_THROWS_WITH_AS(prob.validate(), doctest::Contains("risk"), std::invalid_argument);
    prob = small_stochastic(3);
    prob.ubx = {ChanceBound{1.0, 0.1}};
    CHECK_THROWS_WITH_AS(prob.validate(), doctest::Contains("per component"),
                         std::invalid_argument);
}
