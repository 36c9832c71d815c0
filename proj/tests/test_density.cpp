#include <doctest.h>

#include <cmath>
#include <complex>

#include "oracles.hpp"
#include "pcmpc/density.hpp"

using namespace pcmpc;

namespace {

PCEVector tank_disturbance() {
    std::vector<Germ> germs{Germ{0, MeasureSpec::gaussian(0.0, 1.0),
                                 make_basis(MeasureSpec::gaussian(0.0, 1.0), 2)}};
    std::vector<MultiBasis::MultiIndex> terms{{0}, {1}, {2}};
    auto basis = std::make_shared<const MultiBasis>(std::move(germs), std::move(terms));
    Eigen::MatrixXd c(1, 3);
    c << 0.05, 0.05, 0.05 * std::sqrt(2.0);
    return PCEVector(std::move(basis), std::move(c));
}

}  // namespace

TEST_CASE("characteristic function of single terms") {
    const UnivariateBasis hermite = make_basis(MeasureSpec::gaussian(0.0, 1.0), 2);

    // Constant term.
    const auto c0 = char_fun_term(hermite, 0, 1.5, 2.0);
    CHECK(std::abs(c0 - std::exp(std::complex<double>(0.0, 3.0))) < 1e-14);

    // Degree-one Gaussian: exp(-c^2 t^2 / 2), checked against the analytic
    // form over a wide frequency range.
    for (double t : {-50.0, -7.3, -1.0, 0.0, 0.4, 12.0, 50.0}) {
        const double c = 0.7;
        const auto cf = char_fun_term(hermite, 1, c, t);
        CHECK(std::abs(cf - std::exp(-0.5 * c * c * t * t)) < 1e-10);
    }

    // Degree-two Gaussian: shifted chi-square characteristic function,
    // cross-checked by quadrature through a Uniform germ detour is not
    // available, so verify against the closed form directly.
    for (double t : {-3.0, -0.5, 0.8, 2.5}) {
        const double c = 0.3;
        const std::complex<double> a(0.0, t * c / std::sqrt(2.0));
        const auto expect = std::exp(-a) * std::pow(1.0 - 2.0 * a, -0.5);
        CHECK(std::abs(char_fun_term(hermite, 2, c, t) - expect) < 1e-10);
    }

    // Non-Gaussian germs, degree one, against direct Monte Carlo.
    for (const auto& germ : {MeasureSpec::uniform(0.0, 1.0), MeasureSpec::beta(2.0, 2.0),
                             MeasureSpec::gamma(2.0, 1.0)}) {
        CAPTURE(germ.to_string());
        const UnivariateBasis basis = make_basis(germ, 1);
        const double c = 0.9, t = 1.7;
        const auto cf = char_fun_term(basis, 1, c, t);
        const QuadratureRule rule = gauss_rule(germ, 60);
        std::complex<double> direct{0.0, 0.0};
        for (int q = 0; q < rule.size(); ++q) {
            direct += rule.weights()[q] *
                      std::exp(std::complex<double>(0.0, t * c * basis.eval_psi(1, rule.nodes()[q])));
        }
        CHECK(std::abs(cf - direct) < 1e-8);
    }
}

TEST_CASE("standard normal density recovery") {
    const PCEVector z = affine_pce(MeasureSpec::gaussian(0.0, 1.0));
    const DensityGrid grid = pdf_from_pce(z);
    CHECK(std::abs(grid.raw_integral - 1.0) < 1e-4);

    // Density at zero.
    int mid = 0;
    for (int i = 0; i < grid.z.size(); ++i) {
        if (std::abs(grid.z(i)) < std::abs(grid.z(mid))) mid = i;
    }
    CHECK(grid.pdf(mid) == doctest::Approx(0.3989422804).epsilon(1e-4));
    CHECK(grid.mean() == doctest::Approx(0.0).scale(1).epsilon(1e-6));
    CHECK(grid.variance() == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("sum of two uniforms gives the triangular density") {
    const PCEVector z = gen_pce({MeasureSpec::uniform(0.0, 1.0), MeasureSpec::uniform(0.0, 1.0)});
    const PCEVector sum = propagate_affine(Eigen::MatrixXd::Ones(1, 2),
                                           Eigen::VectorXd::Zero(1), z);
    DensityGridSpec spec;
    spec.z_lo = -1.0;
    spec.z_hi = 3.0;
    const DensityGrid grid = pdf_from_pce(sum, spec);
    int peak = 0;
    for (int i = 0; i < grid.z.size(); ++i) {
        if (grid.pdf(i) > grid.pdf(peak)) peak = i;
    }
    CHECK(grid.z(peak) == doctest::Approx(1.0).epsilon(2e-3));
    CHECK(grid.pdf(peak) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(grid.mean() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(grid.variance() == doctest::Approx(1.0 / 6.0).epsilon(1e-3));
}

TEST_CASE("grouped terms: the quadratic tank disturbance") {
    // 0.05 (Z^2 + Z) folds the germ, so its density carries an inverse-
    // square-root edge and the characteristic function decays like
    // |t|^(-1/2); the grid below balances truncation against edge ringing.
    const PCEVector w = tank_disturbance();
    DensityGridSpec spec;
    spec.n_points = 16384;
    const DensityGrid grid = pdf_from_pce(w, spec);
    CHECK(std::abs(grid.raw_integral - 1.0) < 1e-4);
    CHECK(std::abs(grid.mean() - w.mean()(0)) < 1e-3);
    CHECK(std::abs(grid.variance() - w.variance()(0)) < 1e-4);

    const Eigen::MatrixXd draws = oracles::germ_draws(w.basis(), 10000, 0xD15C);
    const Eigen::VectorXd samples = w.sample(draws).col(0);
    const double ks_grouped = ks_distance(grid, samples);
    CHECK(ks_grouped < 0.0163);

    // The naive per-term product pretends psi^1 and psi^2 ride independent
    // germs; its density visibly misfits the true samples.
    const PCEVector naive =
        [&] {
            std::vector<Germ> germs{
                Germ{0, MeasureSpec::gaussian(0.0, 1.0),
                     make_basis(MeasureSpec::gaussian(0.0, 1.0), 1)},
                Germ{1, MeasureSpec::gaussian(0.0, 1.0),
                     make_basis(MeasureSpec::gaussian(0.0, 1.0), 2)}};
            std::vector<MultiBasis::MultiIndex> terms{{0, 0}, {1, 0}, {0, 2}};
            Eigen::MatrixXd c(1, 3);
            c << 0.05, 0.05, 0.05 * std::sqrt(2.0);
            return PCEVector(std::make_shared<const MultiBasis>(std::move(germs),
                                                                std::move(terms)),
                             c);
        }();
    const DensityGrid naive_grid = pdf_from_pce(naive, spec);
    const double ks_naive = ks_distance(naive_grid, samples);
    CHECK(ks_naive > 3.0 * ks_grouped);
}

TEST_CASE("degenerate and invalid inputs") {
    const PCEVector dirac = affine_pce(MeasureSpec::dirac(2.0));
    CHECK_THROWS_WITH_AS(pdf_from_pce(dirac), doctest::Contains("deterministic"),
                         std::invalid_argument);

    const PCEVector z = affine_pce(MeasureSpec::gaussian(0.0, 1.0));
    DensityGridSpec narrow;
    narrow.z_lo = -2.0;
    narrow.z_hi = 2.0;
    CHECK_THROWS_WITH_AS(pdf_from_pce(z, narrow), doctest::Contains("too narrow"),
                         std::invalid_argument);

    DensityGridSpec badn;
    badn.n_points = 1000;  // not a power of two
    CHECK_THROWS_AS(pdf_from_pce(z, badn), std::invalid_argument);

    const DensityGrid grid = pdf_from_pce(z);
    CHECK_THROWS_AS(ks_distance(grid, Eigen::VectorXd::Zero(10)), std::invalid_argument);
}

TEST_CASE("KS distance: matching samples small, constant samples near one") {
    const PCEVector z = affine_pce(MeasureSpec::uniform(-1.0, 1.0));
    const DensityGrid grid = pdf_from_pce(z);
    const Eigen::MatrixXd draws = oracles::germ_draws(z.basis(), 10000, 0x4242);
    const Eigen::VectorXd samples = z.sample(draws).col(0);
    CHECK(ks_distance(grid, samples) < 0.0163);  // 99% KS band at n = 1e4

    const Eigen::VectorXd constant = Eigen::VectorXd::Zero(500);
    CHECK(ks_distance(grid, constant) > 0.45);
}

TEST_CASE("characteristic function product is one at t = 0") {
    const PCEVector w = tank_disturbance();
    const UnivariateBasis& basis = w.basis().germs()[0].basis;
    CHECK(std::abs(char_fun_term(basis, 1, 0.7, 0.0) - 1.0) == 0.0);
    CHECK(std::abs(char_fun_term(basis, 2, 0.7, 0.0) - 1.0) == 0.0);
}
