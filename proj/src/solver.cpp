#include "pcmpc/solver.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "pcmpc/transcription.hpp"

namespace pcmpc {

void SolverOptions::validate() const {
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (!(eps_feas > 0.0) || !(eps_gap > 0.0) || !(regularization > 0.0)) {
        throw std::invalid_argument("solver tolerances must be > 0");
    }
}

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::MaxIter: return "max_iter";
        case SolveStatus::NumericalError: return "numerical_error";
    }
    return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Direct KKT solve of  [P A'; A 0] [z; y] = [-q; b]  with static
/// regularization and iterative refinement. Dense factorization below
/// `dense_limit`, sparse LDLT beyond.
RawSolution equality_qp_impl(const ConicData& d, const SolverOptions& opts, int dense_limit) {
    const auto t0 = Clock::now();
    RawSolution out;
    const int n = d.n;
    const int me = d.eq_rows();
    const int dim = n + me;
    const double scale = std::max({1.0, d.q.lpNorm<Eigen::Infinity>(),
                                   me ? d.b.lpNorm<Eigen::Infinity>() : 0.0});
    const double delta = std::max(opts.regularization, 1e-12) * scale;

    Eigen::VectorXd rhs(dim);
    rhs.head(n) = -d.q;
    rhs.tail(me) = d.b;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd sign(dim);
    sign.head(n).setConstant(1.0);
    sign.tail(me).setConstant(-1.0);

    const bool dense = dim <= dense_limit;
    Eigen::MatrixXd Kd;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::SparseMatrix<double> Ks(dim, dim);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;

    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < d.P.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(d.P, k); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                               it.value());
        }
    }
    for (int k = 0; k < d.A.outerSize(); ++k) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(d.A, k); it; ++it) {
            trips.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()),
                               it.value());
            trips.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()),
                               it.value());
        }
    }
    for (int i = 0; i < dim; ++i) trips.emplace_back(i, i, sign(i) * delta);
    Ks.setFromTriplets(trips.begin(), trips.end());

    if (dense) {
        Kd = Eigen::MatrixXd(Ks);
        lu.compute(Kd);
    } else {
        ldlt.compute(Ks);
        if (ldlt.info() != Eigen::Success) {
            out.status = SolveStatus::NumericalError;
            out.message = "equality KKT factorization failed";
            out.solve_ms = elapsed_ms(t0);
            return out;
        }
    }

    // Refinement against the unregularized KKT operator.
    const auto apply_k0 = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        Eigen::VectorXd r = Ks * v - delta * sign.cwiseProduct(v);
        return r;
    };
    x = dense ? lu.solve(rhs).eval() : ldlt.solve(rhs).eval();
    double best_res = kInf;
    Eigen::VectorXd best_x = x;
    for (int it = 0; it < 8; ++it) {
        const Eigen::VectorXd r = rhs - apply_k0(x);
        const double rn = r.lpNorm<Eigen::Infinity>();
        if (rn < best_res) {
            best_res = rn;
            best_x = x;
        }
        if (rn <= 1e-13 * std::max(1.0, rhs.lpNorm<Eigen::Infinity>())) break;
        x += dense ? lu.solve(r).eval() : ldlt.solve(r).eval();
    }
    x = best_x;

    out.z = x.head(n);
    out.y = x.tail(me);
    out.s.resize(0);
    out.zeta.resize(0);
    out.objective = 0.5 * out.z.dot(d.P * out.z) + d.q.dot(out.z) + d.r0;
    const double dres =
        (d.P * out.z + d.q + d.A.transpose() * out.y).lpNorm<Eigen::Infinity>();
    const double pres = me ? (d.A * out.z - d.b).lpNorm<Eigen::Infinity>() : 0.0;
    out.dual_residual = dres;
    out.primal_residual = pres;
    out.iterations = 1;
    const double tol = std::max(opts.eps_feas, 1e-9) * scale * 10.0;
    if (pres <= tol && dres <= tol) {
        out.status = SolveStatus::Optimal;
    } else {
        out.status = SolveStatus::NumericalError;
        std::ostringstream os;
        os << "equality KKT solve did not converge (primal " << pres << ", dual " << dres << ")";
        if (dense) {
            Eigen::FullPivLU<Eigen::MatrixXd> full(Kd);
            os << "; KKT rank " << full.rank() << " of " << dim;
        }
        out.message = os.str();
    }
    out.solve_ms = elapsed_ms(t0);
    return out;
}

/// Interior-point state for the product of second-order cones; a cone of
/// dimension one degenerates to the nonnegative half-line.
class ConeIpm {
public:
    ConeIpm(const ConicData& d, const SolverOptions& opts) : d_(d), opts_(opts) {
        n_ = d.n;
        me_ = d.eq_rows();
        mc_ = d.cone_rows();
        ncones_ = static_cast<int>(d.cone_dims.size());
        offs_.resize(ncones_);
        int off = 0;
        for (int c = 0; c < ncones_; ++c) {
            offs_[c] = off;
            off += d.cone_dims[c];
            if (d.cone_dims[c] >= 2) soc_.push_back(c);
        }
        nkkt_ = n_ + me_ + mc_ + static_cast<int>(soc_.size());
        scal_.resize(ncones_);
        lambda_.resize(mc_);
        delta_ = std::max(opts.regularization, 1e-8);
        sign_ = Eigen::VectorXd::Ones(nkkt_);
        sign_.segment(n_, me_ + mc_).setConstant(-1.0);
        for (int c : soc_) sign_(n_ + me_ + offs_[c]) = 1.0;  // cone first rows carry +eta^2
        data_scale_ = 1.0;
        for (int k = 0; k < d.A.outerSize(); ++k) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(d.A, k); it; ++it) {
                data_scale_ = std::max(data_scale_, std::abs(it.value()));
            }
        }
        for (int k = 0; k < d.G.outerSize(); ++k) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(d.G, k); it; ++it) {
                data_scale_ = std::max(data_scale_, std::abs(it.value()));
            }
        }
    }

    RawSolution run(const Eigen::VectorXd* warm);

private:
    struct Scaling {
        bool soc = false;
        double eta = 1.0;      // SOC magnitude
        Eigen::VectorXd v;     // SOC scaling point square root, det(v) = 1
        Eigen::VectorXd wt;    // SOC scaling point w~ = v o v, det(w~) = 1
        double w1 = 1.0;       // dim-1 scaling W
    };

    // --- cone algebra -------------------------------------------------
    double margin(const Eigen::VectorXd& p, int c) const {
        const int off = offs_[c], m = d_.cone_dims[c];
        if (m == 1) return p(off);
        return p(off) - p.segment(off + 1, m - 1).norm();
    }

    void shift_interior(Eigen::VectorXd& p) const {
        for (int c = 0; c < ncones_; ++c) {
            const double mg = margin(p, c);
            if (mg <= 0.0) p(offs_[c]) += 1.0 - mg;
        }
    }

    double max_step(const Eigen::VectorXd& p, const Eigen::VectorXd& dp) const {
        double alpha = kInf;
        for (int c = 0; c < ncones_; ++c) {
            const int off = offs_[c], m = d_.cone_dims[c];
            if (m == 1) {
                if (dp(off) < 0.0) alpha = std::min(alpha, -p(off) / dp(off));
                continue;
            }
            const auto p1 = p.segment(off + 1, m - 1);
            const auto dp1 = dp.segment(off + 1, m - 1);
            const double a2 = dp(off) * dp(off) - dp1.squaredNorm();
            const double a1 = p(off) * dp(off) - p1.dot(dp1);
            const double a0 = p(off) * p(off) - p1.squaredNorm();
            // Smallest positive root of a0 + 2 a1 t + a2 t^2, if any.
            double root = kInf;
            const double disc = a1 * a1 - a0 * a2;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                if (a2 != 0.0) {
                    const double r1 = (-a1 - sq) / a2;
                    const double r2 = (-a1 + sq) / a2;
                    for (double r : {std::min(r1, r2), std::max(r1, r2)}) {
                        if (r > 0.0) { root = r; break; }
                    }
                } else if (a1 < 0.0) {
                    root = -a0 / (2.0 * a1);
                }
            }
            if (dp(off) < 0.0) root = std::min(root, -p(off) / dp(off));
            alpha = std::min(alpha, root);
        }
        return alpha;
    }

    Eigen::VectorXd jordan_mul(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        Eigen::VectorXd out(mc_);
        for (int c = 0; c < ncones_; ++c) {
            const int off = offs_[c], m = d_.cone_dims[c];
            if (m == 1) {
                out(off) = a(off) * b(off);
                continue;
            }
            out(off) = a.segment(off, m).dot(b.segment(off, m));
            out.segment(off + 1, m - 1) =
                a(off) * b.segment(off + 1, m - 1) + b(off) * a.segment(off + 1, m - 1);
        }
        return out;
    }

    Eigen::VectorXd jordan_div(const Eigen::VectorXd& lam, const Eigen::VectorXd& dd) const {
        Eigen::VectorXd out(mc_);
        for (int c = 0; c < ncones_; ++c) {
            const int off = offs_[c], m = d_.cone_dims[c];
            if (m == 1) {
                out(off) = dd(off) / lam(off);
                continue;
            }
            const auto l1 = lam.segment(off + 1, m - 1);
            const double det = lam(off) * lam(off) - l1.squaredNorm();
            const double x0 = (lam(off) * dd(off) - l1.dot(dd.segment(off + 1, m - 1))) / det;
            out(off) = x0;
            out.segment(off + 1, m - 1) = (dd.segment(off + 1, m - 1) - x0 * l1) / lam(off);
        }
        return out;
    }

    Eigen::VectorXd unit_e() const {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(mc_);
        for (int c = 0; c < ncones_; ++c) e(offs_[c]) = 1.0;
        return e;
    }

    void identity_scaling() {
        for (int c = 0; c < ncones_; ++c) {
            auto& sc = scal_[c];
            const int m = d_.cone_dims[c];
            sc.soc = m >= 2;
            sc.eta = 1.0;
            sc.w1 = 1.0;
            if (sc.soc) {
                sc.v = Eigen::VectorXd::Zero(m);
                sc.v(0) = 1.0;
                sc.wt = sc.v;
            }
        }
    }

    bool compute_scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& zeta) {
        for (int c = 0; c < ncones_; ++c) {
            auto& sc = scal_[c];
            const int off = offs_[c], m = d_.cone_dims[c];
            if (m == 1) {
                sc.soc = false;
                if (!(s(off) > 0.0) || !(zeta(off) > 0.0)) return false;
                sc.w1 = std::sqrt(s(off) / zeta(off));
                lambda_(off) = std::sqrt(s(off) * zeta(off));
                continue;
            }
            sc.soc = true;
            const auto sseg = s.segment(off, m);
            const auto zseg = zeta.segment(off, m);
            const double rs2 = sseg(0) * sseg(0) - sseg.tail(m - 1).squaredNorm();
            const double rz2 = zseg(0) * zseg(0) - zseg.tail(m - 1).squaredNorm();
            if (!(rs2 > 0.0) || !(rz2 > 0.0)) return false;
            const double rs = std::sqrt(rs2), rz = std::sqrt(rz2);
            Eigen::VectorXd sbar = sseg / rs;
            Eigen::VectorXd zbar = zseg / rz;
            const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
            Eigen::VectorXd wtil(m);
            wtil(0) = (sbar(0) + zbar(0)) / (2.0 * gamma);
            wtil.tail(m - 1) = (sbar.tail(m - 1) - zbar.tail(m - 1)) / (2.0 * gamma);
            sc.wt = wtil;
            sc.v = wtil;
            sc.v(0) += 1.0;
            sc.v /= std::sqrt(2.0 * (wtil(0) + 1.0));
            sc.eta = std::sqrt(rs / rz);
            // lambda = W zeta
            const double vz = sc.v.dot(zseg);
            Eigen::VectorXd lz = 2.0 * vz * sc.v;
            lz(0) -= zseg(0);
            lz.tail(m - 1) += zseg.tail(m - 1);
            lambda_.segment(off, m) = sc.eta * lz;
        }
        return lambda_.allFinite();
    }

    void apply_w(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
        out.resize(mc_);
        for (int c = 0; c < ncones_; ++c) {
            const int off = offs_[c], m = d_.cone_dims[c];
            const auto& sc = scal_[c];
            if (!sc.soc) {
                out(off) = sc.w1 * in(off);
                continue;
            }
            const auto seg = in.segment(off, m);
            const double vx = sc.v.dot(seg);
            Eigen::VectorXd r = 2.0 * vx * sc.v;
            r(0) -= seg(0);
            r.tail(m - 1) += seg.tail(m - 1);
            out.segment(off, m) = sc.eta * r;
        }
    }

    void apply_w_inv(const Eigen::VectorXd& in, Eigen::VectorXd& out) const {
        out.resize(mc_);
        for (int c = 0; c < ncones_; ++c) {
            const int off = offs_[c], m = d_.cone_dims[c];
            const auto& sc = scal_[c];
            if (!sc.soc) {
                out(off) = in(off) / sc.w1;
                continue;
            }
            const auto seg = in.segment(off, m);
            // W^{-1} = eta^{-1} (2 (Jv)(Jv)' - J)
            Eigen::VectorXd jv = sc.v;
            jv.tail(m - 1) = -jv.tail(m - 1);
            const double jvx = jv.dot(seg);
            Eigen::VectorXd r = 2.0 * jvx * jv;
            r(0) -= seg(0);
            r.tail(m - 1) += seg.tail(m - 1);
            out.segment(off, m) = r / sc.eta;
        }
    }

    // --- KKT ------------------------------------------------------------
    void assemble(std::vector<Eigen::Triplet<double>>& trips) {
        trips.clear();
        for (int k = 0; k < d_.P.outerSize(); ++k) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(d_.P, k); it; ++it) {
                trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                                   it.value());
            }
        }
        for (int i = 0; i < n_; ++i) trips.emplace_back(i, i, delta_);
        for (int k = 0; k < d_.A.outerSize(); ++k) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(d_.A, k); it; ++it) {
                const int r = n_ + static_cast<int>(it.row());
                const int c = static_cast<int>(it.col());
                trips.emplace_back(r, c, it.value());
                trips.emplace_back(c, r, it.value());
            }
        }
        for (int i = 0; i < me_; ++i) trips.emplace_back(n_ + i, n_ + i, -delta_);
        const int gz = n_ + me_;
        for (int k = 0; k < d_.G.outerSize(); ++k) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(d_.G, k); it; ++it) {
                const int r = gz + static_cast<int>(it.row());
                const int c = static_cast<int>(it.col());
                trips.emplace_back(r, c, it.value());
                trips.emplace_back(c, r, it.value());
            }
        }
        // -W^2 blocks. For a SOC cone the scaling point w~ has unit
        // hyperbolic norm, so W^2 = eta^2 (2 w~ w~' - J) and
        // -W^2 = eta^2 J - u u' with u = sqrt(2) eta w~: one indefinite
        // diagonal plus a single rank-one column per cone.
        int xrow = n_ + me_ + mc_;
        for (int c = 0; c < ncones_; ++c) {
            const int off = offs_[c], m = d_.cone_dims[c];
            const auto& sc = scal_[c];
            if (!sc.soc) {
                trips.emplace_back(gz + off, gz + off, -sc.w1 * sc.w1 - delta_);
                continue;
            }
            const double eta2 = sc.eta * sc.eta;
            trips.emplace_back(gz + off, gz + off, eta2 + delta_);
            for (int i = 1; i < m; ++i) {
                trips.emplace_back(gz + off + i, gz + off + i, -eta2 - delta_);
            }
            const int pcol = xrow++;
            for (int i = 0; i < m; ++i) {
                const double uv = std::sqrt(2.0) * sc.eta * sc.wt(i);
                trips.emplace_back(gz + off + i, pcol, uv);
                trips.emplace_back(pcol, gz + off + i, uv);
            }
            trips.emplace_back(pcol, pcol, 1.0 + delta_);
        }
    }

    bool factorize() {
        assemble(trips_);
        K_.resize(nkkt_, nkkt_);
        K_.setFromTriplets(trips_.begin(), trips_.end());
        if (!analyzed_) {
            ldlt_.analyzePattern(K_);
            analyzed_ = true;
        }
        ldlt_.factorize(K_);
        if (ldlt_.info() != Eigen::Success) {
            // Lift the regularization and retry once before giving up.
            delta_ *= 1e3;
            assemble(trips_);
            K_.setFromTriplets(trips_.begin(), trips_.end());
            ldlt_.factorize(K_);
            return ldlt_.info() == Eigen::Success;
        }
        return true;
    }

    Eigen::VectorXd kkt_solve(const Eigen::VectorXd& rhs) const {
        Eigen::VectorXd x = ldlt_.solve(rhs);
        double best = kInf;
        Eigen::VectorXd best_x = x;
        const double rhs_scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
        for (int it = 0; it < 4; ++it) {
            Eigen::VectorXd r = rhs - K_ * x + delta_ * sign_.cwiseProduct(x);
            const double rn = r.lpNorm<Eigen::Infinity>();
            if (rn < best) {
                best = rn;
                best_x = x;
            } else {
                break;
            }
            if (rn <= 1e-13 * rhs_scale) break;
            x += ldlt_.solve(r).eval();
        }
        return best_x;
    }

    const ConicData& d_;
    SolverOptions opts_;
    int n_, me_, mc_, ncones_, nkkt_;
    std::vector<int> offs_;
    std::vector<int> soc_;
    std::vector<Scaling> scal_;
    Eigen::VectorXd lambda_;
    Eigen::VectorXd sign_;
    double delta_;
    double data_scale_;
    int infeas_streak_ = 0;
    std::vector<Eigen::Triplet<double>> trips_;
    Eigen::SparseMatrix<double> K_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    bool analyzed_ = false;
};

RawSolution ConeIpm::run(const Eigen::VectorXd* warm) {
    const auto t0 = Clock::now();
    RawSolution out;

    Eigen::VectorXd z = Eigen::VectorXd::Zero(n_);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(me_);
    Eigen::VectorXd s(mc_), zeta(mc_);

    // Cold start from one least-squares-flavor KKT solve with W = I.
    identity_scaling();
    if (!factorize()) {
        out.status = SolveStatus::NumericalError;
        out.message = "initial KKT factorization failed";
        out.solve_ms = elapsed_ms(t0);
        return out;
    }
    {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nkkt_);
        rhs.head(n_) = -d_.q;
        rhs.segment(n_, me_) = d_.b;
        rhs.segment(n_ + me_, mc_) = d_.h;
        const Eigen::VectorXd sol = kkt_solve(rhs);
        z = sol.head(n_);
        y = sol.segment(n_, me_);
        zeta = sol.segment(n_ + me_, mc_);
        if (warm && warm->size() == n_ && warm->allFinite()) z = *warm;
        s = d_.h - d_.G * z;
        shift_interior(s);
        shift_interior(zeta);
        if (!s.allFinite() || !zeta.allFinite() || !z.allFinite()) {
            z.setZero();
            y.setZero();
            s = unit_e();
            zeta = unit_e();
        }
    }

    const double bnorm = std::max(1.0, d_.b.norm());
    const double hnorm = std::max(1.0, d_.h.norm());
    const double qnorm = std::max(1.0, d_.q.norm());
    const Eigen::VectorXd e = unit_e();

    int iter = 0;
    for (;; ++iter) {
        const Eigen::VectorXd rx = d_.P * z + d_.q + d_.A.transpose() * y + d_.G.transpose() * zeta;
        const Eigen::VectorXd ry = d_.A * z - d_.b;
        const Eigen::VectorXd rs = d_.G * z + s - d_.h;
        const double gap = s.dot(zeta);
        const double pobj = 0.5 * z.dot(d_.P * z) + d_.q.dot(z);
        const double pres = std::max(ry.norm() / bnorm, rs.norm() / hnorm);
        const double dres = rx.norm() / qnorm;
        const double relgap = std::abs(gap) / std::max(1.0, std::abs(pobj));

        out.primal_residual = pres;
        out.dual_residual = dres;
        out.gap = gap;
        if (opts_.verbosity > 0) {
            std::printf("iter %3d pres %9.2e dres %9.2e gap %9.2e pobj %12.6e\n", iter, pres,
                        dres, gap, pobj);
        }

        if (pres <= opts_.eps_feas && dres <= opts_.eps_feas && relgap <= opts_.eps_gap) {
            out.status = SolveStatus::Optimal;
            break;
        }

        // Farkas-type primal infeasibility certificate on the scaled duals:
        // A'y + G'zeta ~ 0 with b'y + h'zeta < 0 and zeta in the dual cone.
        // Primal infeasibility: exact Farkas certificate on the scaled duals
        // (A'y + G'zeta ~ 0, b'y + h'zeta < 0, zeta in the dual cone), plus
        // a guarded divergence heuristic for instances whose primal iterate
        // blows up along the ray and pollutes the certificate residual.
        const double ip = d_.b.dot(y) + d_.h.dot(zeta);
        if (ip < -1e-10 && pres > 1e-6) {
            const double cert =
                (d_.A.transpose() * y + d_.G.transpose() * zeta).lpNorm<Eigen::Infinity>() /
                (-ip);
            if (cert <= 1e-7 * data_scale_) {
                out.status = SolveStatus::Infeasible;
                out.message = "primal infeasibility certificate found";
                break;
            }
            const double rhs_scale =
                std::max({1.0, me_ ? d_.b.lpNorm<Eigen::Infinity>() : 0.0,
                          d_.h.lpNorm<Eigen::Infinity>()});
            if (-ip > 1e6 * rhs_scale && cert <= 1e-2 * data_scale_) {
                if (++infeas_streak_ >= 3) {
                    out.status = SolveStatus::Infeasible;
                    out.message = "dual variables diverge along an infeasibility ray";
                    break;
                }
            } else {
                infeas_streak_ = 0;
            }
        } else {
            infeas_streak_ = 0;
        }

        if (iter >= opts_.max_iterations) {
            out.status = SolveStatus::MaxIter;
            out.message = "iteration limit reached";
            break;
        }

        const double mu = gap / ncones_;
        if (!compute_scaling(s, zeta)) {
            out.status = SolveStatus::NumericalError;
            out.message = "iterate left the cone interior";
            break;
        }
        if (!factorize()) {
            out.status = SolveStatus::NumericalError;
            out.message = "KKT factorization failed";
            break;
        }

        Eigen::VectorXd rhs(nkkt_);
        rhs.setZero();
        rhs.head(n_) = -rx;
        rhs.segment(n_, me_) = -ry;
        rhs.segment(n_ + me_, mc_) = -rs + s;
        const Eigen::VectorXd aff = kkt_solve(rhs);
        const Eigen::VectorXd dz_a = aff.head(n_);
        const Eigen::VectorXd dzeta_a = aff.segment(n_ + me_, mc_);
        const Eigen::VectorXd ds_a = -rs - d_.G * dz_a;

        const double alpha_aff =
            std::min({1.0, max_step(s, ds_a), max_step(zeta, dzeta_a)});
        const double gap_aff = (s + alpha_aff * ds_a).dot(zeta + alpha_aff * dzeta_a);
        double sigma = std::pow(std::max(0.0, gap_aff / gap), 3.0);
        sigma = std::clamp(sigma, 0.0, 1.0);

        Eigen::VectorXd w_ds, w_dzeta;
        apply_w_inv(ds_a, w_ds);
        apply_w(dzeta_a, w_dzeta);
        const Eigen::VectorXd corr = jordan_mul(w_ds, w_dzeta);
        const Eigen::VectorXd dvec =
            jordan_div(lambda_, sigma * mu * e - jordan_mul(lambda_, lambda_) - corr);
        Eigen::VectorXd wd;
        apply_w(dvec, wd);
        rhs.segment(n_ + me_, mc_) = -rs - wd;
        const Eigen::VectorXd dir = kkt_solve(rhs);
        const Eigen::VectorXd dz = dir.head(n_);
        const Eigen::VectorXd dy = dir.segment(n_, me_);
        const Eigen::VectorXd dzeta = dir.segment(n_ + me_, mc_);
        const Eigen::VectorXd ds = -rs - d_.G * dz;

        double alpha = std::min(max_step(s, ds), max_step(zeta, dzeta));
        alpha = std::min(1.0, 0.99 * alpha);
        if (opts_.verbosity > 1) {
            std::printf("         alpha_aff %9.2e sigma %9.2e alpha %9.2e\n", alpha_aff, sigma,
                        alpha);
        }
        if (!(alpha > 1e-11) || !dz.allFinite()) {
            out.status = SolveStatus::NumericalError;
            out.message = "step length collapsed";
            break;
        }
        z += alpha * dz;
        y += alpha * dy;
        zeta += alpha * dzeta;
        s += alpha * ds;
    }

    out.z = z;
    out.y = y;
    out.zeta = zeta;
    out.s = s;
    out.objective = 0.5 * z.dot(d_.P * z) + d_.q.dot(z) + d_.r0;
    out.iterations = iter;
    out.solve_ms = elapsed_ms(t0);
    return out;
}

std::shared_ptr<SolverBackend> g_backend;  // NOLINT: intentional global registry

}  // namespace

RawSolution solve_conic(const ConicData& data, const SolverOptions& opts,
                        const Eigen::VectorXd* warm) {
    data.validate();
    opts.validate();
    if (data.cone_rows() == 0) {
        return equality_qp_impl(data, opts, 2500);
    }
    ConeIpm ipm(data, opts);
    return ipm.run(warm);
}

RawSolution solve_equality_qp_raw(const ConicData& data, const SolverOptions& opts) {
    data.validate();
    opts.validate();
    return equality_qp_impl(data, opts, 2500);
}

void register_backend(std::shared_ptr<SolverBackend> backend) { g_backend = std::move(backend); }

void clear_backend() { g_backend.reset(); }

std::shared_ptr<SolverBackend> current_backend() { return g_backend; }

namespace {

PCESolution unpack(const ConicProgram& prog, RawSolution&& raw) {
    PCESolution sol;
    sol.status = raw.status;
    sol.objective = raw.objective;
    sol.iterations = raw.iterations;
    sol.primal_residual = raw.primal_residual;
    sol.dual_residual = raw.dual_residual;
    sol.gap = raw.gap;
    sol.solve_ms = raw.solve_ms;
    sol.message = std::move(raw.message);
    sol.z_raw = std::move(raw.z);
    if (sol.z_raw.size() != prog.var_count()) return sol;
    const int L = prog.term_count();
    sol.x.resize(prog.horizon() + 1);
    for (int k = 0; k <= prog.horizon(); ++k) {
        sol.x[k].resize(prog.n_x(), L);
        for (int j = 0; j < L; ++j) {
            for (int i = 0; i < prog.n_x(); ++i) {
                sol.x[k](i, j) = sol.z_raw(prog.x_index(k, j, i));
            }
        }
    }
    sol.u.resize(prog.horizon());
    for (int k = 0; k < prog.horizon(); ++k) {
        sol.u[k].resize(prog.n_u(), L);
        for (int j = 0; j < L; ++j) {
            for (int i = 0; i < prog.n_u(); ++i) {
                sol.u[k](i, j) = sol.z_raw(prog.u_index(k, j, i));
            }
        }
    }
    return sol;
}

}  // namespace

PCESolution solve(const ConicProgram& program, const SolverOptions& opts,
                  const Eigen::VectorXd* warm) {
    const ConicData& data = program.conic_data();
    RawSolution raw = g_backend ? g_backend->solve(data, opts) : solve_conic(data, opts, warm);
    return unpack(program, std::move(raw));
}

PCESolution solve_equality_qp(const ConicProgram& program, const SolverOptions& opts) {
    ConicData data = program.conic_data();
    data.G.resize(0, data.n);
    data.h.resize(0);
    data.cone_dims.clear();
    return unpack(program, solve_equality_qp_raw(data, opts));
}

}  // namespace pcmpc
