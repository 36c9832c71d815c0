#include "pcmpc/transcription.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pcmpc/stats_util.hpp"

namespace pcmpc {

double chance_gamma(double risk, bool two_sided, bool gaussian) {
    if (!(risk > 0.0 && risk < 1.0)) {
        std::ostringstream os;
        os << "chance-constraint risk must lie in (0, 1), got " << risk;
        throw std::invalid_argument(os.str());
    }
    if (gaussian) {
        return two_sided ? normal_quantile(1.0 - risk / 2.0) : normal_quantile(1.0 - risk);
    }
    return two_sided ? std::sqrt((2.0 - risk) / risk) : std::sqrt((1.0 - risk) / risk);
}

namespace {

void check_square(const Eigen::MatrixXd& M, int n, const char* name) {
    if (M.rows() != n || M.cols() != n) {
        std::ostringstream os;
        os << name << " must be " << n << "x" << n << ", got " << M.rows() << "x" << M.cols();
        throw std::invalid_argument(os.str());
    }
}

void check_psd(const Eigen::MatrixXd& M, const char* name) {
    if (!M.isApprox(M.transpose(), 1e-10)) {
        std::ostringstream os;
        os << name << " must be symmetric";
        throw std::invalid_argument(os.str());
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    const double floor = -1e-10 * std::max(1.0, M.cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() < floor).any()) {
        std::ostringstream os;
        os << name << " must be positive semidefinite";
        throw std::invalid_argument(os.str());
    }
}

void check_pd(const Eigen::MatrixXd& M, const char* name) {
    if (!M.isApprox(M.transpose(), 1e-10)) {
        std::ostringstream os;
        os << name << " must be symmetric";
        throw std::invalid_argument(os.str());
    }
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) {
        std::ostringstream os;
        os << name << " must be positive definite";
        throw std::invalid_argument(os.str());
    }
}

bool gaussian_family_only(const MultiBasis& basis) {
    for (const auto& g : basis.germs()) {
        if (g.measure.family() != MeasureFamily::Gaussian &&
            g.measure.family() != MeasureFamily::Dirac) {
            return false;
        }
    }
    return true;
}

void check_bounds(const std::vector<ChanceBound>& bounds, int n, const char* name) {
    if (bounds.empty()) return;
    if (static_cast<int>(bounds.size()) != n) {
        std::ostringstream os;
        os << name << " must have one (bound, risk) pair per component (" << n << "), got "
           << bounds.size();
        throw std::invalid_argument(os.str());
    }
    for (int i = 0; i < n; ++i) {
        if (std::isfinite(bounds[i].bound) && !(bounds[i].risk > 0.0 && bounds[i].risk < 1.0)) {
            std::ostringstream os;
            os << name << "[" << i << "] risk must lie in (0, 1), got " << bounds[i].risk;
            throw std::invalid_argument(os.str());
        }
    }
}

}  // namespace

void StochasticProblem::validate() const {
    if (N < 1) throw std::invalid_argument("horizon N must be >= 1");
    const int nx = n_x();
    if (nx < 1) throw std::invalid_argument("state dimension must be >= 1");
    check_square(A, nx, "A");
    if (B.rows() != nx) {
        std::ostringstream os;
        os << "B must have " << nx << " rows, got " << B.rows();
        throw std::invalid_argument(os.str());
    }
    if (E.rows() != nx) {
        std::ostringstream os;
        os << "E must have " << nx << " rows, got " << E.rows();
        throw std::invalid_argument(os.str());
    }
    if (!x0.has_value()) throw std::invalid_argument("initial-condition PCE missing");
    if (x0->dim() != nx) {
        std::ostringstream os;
        os << "initial-condition PCE dimension " << x0->dim() << " does not match n_x " << nx;
        throw std::invalid_argument(os.str());
    }
    if (!w.has_value() && w_steps.empty()) {
        throw std::invalid_argument("disturbance PCE missing");
    }
    if (w.has_value() && !w_steps.empty()) {
        throw std::invalid_argument("specify either an i.i.d. disturbance or per-step ones");
    }
    const int nw = n_w();
    if (w.has_value() && w->dim() != nw) {
        std::ostringstream os;
        os << "disturbance PCE dimension " << w->dim() << " does not match E columns " << nw;
        throw std::invalid_argument(os.str());
    }
    if (!w_steps.empty()) {
        if (static_cast<int>(w_steps.size()) != N) {
            throw std::invalid_argument("per-step disturbances must provide one PCE per step");
        }
        for (const auto& ws : w_steps) {
            if (ws.dim() != nw) {
                throw std::invalid_argument("per-step disturbance dimension mismatch");
            }
        }
    }
    if (Q.has_value()) { check_square(*Q, nx, "Q"); check_psd(*Q, "Q"); }
    if (QN.has_value()) { check_square(*QN, nx, "QN"); check_psd(*QN, "QN"); }
    if (R.has_value()) { check_square(*R, n_u(), "R"); check_pd(*R, "R"); }
    check_bounds(lbx, nx, "lbx");
    check_bounds(ubx, nx, "ubx");
    check_bounds(lbu, n_u(), "lbu");
    check_bounds(ubu, n_u(), "ubu");
    if (gauss) {
        bool ok = gaussian_family_only(x0->basis());
        if (w.has_value()) ok = ok && gaussian_family_only(w->basis());
        for (const auto& ws : w_steps) ok = ok && gaussian_family_only(ws.basis());
        if (!ok) {
            throw std::invalid_argument(
                "gauss flag requires Gaussian or Dirac initial condition and disturbances");
        }
    }
}

HorizonBasis StochasticProblem::make_horizon_basis() const {
    validate();
    if (w.has_value()) return joint_basis(*x0, *w, N);
    return joint_basis_per_step(*x0, w_steps);
}

ConicProgram::ConicProgram(int n_x, int n_u, int N, int L)
    : n_x_(n_x), n_u_(n_u), N_(N), L_(L) {
    if (n_x < 1 || n_u < 0 || N < 1 || L < 1) {
        throw std::invalid_argument("invalid program dimensions");
    }
    n_vars_ = (N_ + 1) * L_ * n_x_ + N_ * L_ * n_u_;
    q_ = Eigen::VectorXd::Zero(n_vars_);
    term_step_.assign(L_, -1);
}

int ConicProgram::x_index(int k, int j, int i) const {
    if (k < 0 || k > N_ || j < 0 || j >= L_ || i < 0 || i >= n_x_) {
        throw std::out_of_range("x_index out of range");
    }
    return (k * L_ + j) * n_x_ + i;
}

int ConicProgram::u_index(int k, int j, int i) const {
    if (k < 0 || k >= N_ || j < 0 || j >= L_ || i < 0 || i >= n_u_) {
        throw std::out_of_range("u_index out of range");
    }
    return (N_ + 1) * L_ * n_x_ + (k * L_ + j) * n_u_ + i;
}

void ConicProgram::set_objective(std::vector<Eigen::Triplet<double>> P_full, Eigen::VectorXd q,
                                 double r0) {
    if (q.size() != n_vars_) throw std::invalid_argument("objective q dimension mismatch");
    P_trip_ = std::move(P_full);
    q_ = std::move(q);
    r0_ = r0;
    invalidate_cache();
}

int ConicProgram::add_equality(const std::vector<std::pair<int, double>>& row, double rhs) {
    const int r = static_cast<int>(b_.size());
    for (auto [c, v] : row) {
        if (c < 0 || c >= n_vars_) throw std::out_of_range("equality column out of range");
        A_trip_.emplace_back(r, c, v);
    }
    b_.push_back(rhs);
    invalidate_cache();
    return r;
}

void ConicProgram::add_chance(const ChanceSpec& spec) {
    const bool on_state = spec.target == ChanceTarget::State;
    const int dim = on_state ? n_x_ : n_u_;
    if (spec.component < 0 || spec.component >= dim) {
        std::ostringstream os;
        os << "chance constraint component " << spec.component << " out of range [0, " << dim
           << ")";
        throw std::invalid_argument(os.str());
    }
    const int k_max = on_state ? N_ : N_ - 1;
    const int k_begin = spec.k_begin;
    const int k_end = spec.k_end < 0 ? k_max : spec.k_end;
    if (k_begin < 0 || k_end > k_max || k_begin > k_end) {
        std::ostringstream os;
        os << "chance constraint time range [" << k_begin << ", " << k_end
           << "] outside admissible [0, " << k_max << "]";
        throw std::invalid_argument(os.str());
    }
    const bool has_lower = std::isfinite(spec.lower);
    const bool has_upper = std::isfinite(spec.upper);
    if (!has_lower && !has_upper) {
        warnings_.push_back("chance constraint with both bounds infinite skipped");
        return;
    }
    if (has_lower && has_upper && !(spec.lower < spec.upper)) {
        throw std::invalid_argument("chance constraint needs lower < upper");
    }
    const bool two_sided = has_lower && has_upper;
    const double g = chance_gamma(spec.risk, two_sided, gauss_);

    const auto index = [&](int k, int j) {
        return on_state ? x_index(k, j, spec.component) : u_index(k, j, spec.component);
    };
    for (int k = k_begin; k <= k_end; ++k) {
        if (has_upper) {
            // s0 = upper - z0,  s_j = gamma * z^j  ->  z0 + gamma ||z|| <= upper
            int row = static_cast<int>(h_.size());
            G_trip_.emplace_back(row, index(k, 0), 1.0);
            h_.push_back(spec.upper);
            for (int j = 1; j < L_; ++j) {
                G_trip_.emplace_back(row + j, index(k, j), -g);
                h_.push_back(0.0);
            }
            cone_dims_.push_back(L_);
        }
        if (has_lower) {
            // s0 = z0 - lower,  s_j = gamma * z^j  ->  z0 - gamma ||z|| >= lower
            int row = static_cast<int>(h_.size());
            G_trip_.emplace_back(row, index(k, 0), -1.0);
            h_.push_back(-spec.lower);
            for (int j = 1; j < L_; ++j) {
                G_trip_.emplace_back(row + j, index(k, j), -g);
                h_.push_back(0.0);
            }
            cone_dims_.push_back(L_);
        }
    }
    invalidate_cache();
}

void ConicProgram::set_initial_param(const Eigen::MatrixXd& x0_joint) {
    if (init_row_begin_ < 0) {
        throw std::logic_error("program has no initial-condition rows; build it first");
    }
    if (x0_joint.rows() != n_x_ || x0_joint.cols() != L_) {
        std::ostringstream os;
        os << "initial coefficients must be " << n_x_ << "x" << L_ << ", got " << x0_joint.rows()
           << "x" << x0_joint.cols();
        throw std::invalid_argument(os.str());
    }
    for (int j = 0; j < L_; ++j) {
        if (term_step_[j] >= 0 && x0_joint.col(j).cwiseAbs().maxCoeff() > 0.0) {
            throw std::invalid_argument(
                "initial condition cannot load disturbance-block coefficients");
        }
    }
    for (int j = 0; j < L_; ++j) {
        for (int i = 0; i < n_x_; ++i) {
            b_[init_row_begin_ + j * n_x_ + i] = x0_joint(i, j);
        }
    }
    // Only the RHS changed; patch the cache instead of rebuilding.
    if (cache_valid_) {
        for (int j = 0; j < L_; ++j) {
            for (int i = 0; i < n_x_; ++i) {
                cache_.b(init_row_begin_ + j * n_x_ + i) = x0_joint(i, j);
            }
        }
    }
}

void ConicProgram::set_initial_state(const Eigen::VectorXd& measured_state) {
    if (measured_state.size() != n_x_) {
        throw std::invalid_argument("measured state dimension mismatch");
    }
    Eigen::MatrixXd x0 = Eigen::MatrixXd::Zero(n_x_, L_);
    x0.col(0) = measured_state;
    set_initial_param(x0);
}

void ConicProgram::invalidate_cache() const { cache_valid_ = false; }

const ConicData& ConicProgram::conic_data() const {
    if (!cache_valid_) {
        cache_.n = n_vars_;
        cache_.P.resize(n_vars_, n_vars_);
        cache_.P.setFromTriplets(P_trip_.begin(), P_trip_.end());
        cache_.q = q_;
        cache_.r0 = r0_;
        cache_.A.resize(static_cast<int>(b_.size()), n_vars_);
        cache_.A.setFromTriplets(A_trip_.begin(), A_trip_.end());
        cache_.b = Eigen::Map<const Eigen::VectorXd>(b_.data(), b_.size());
        cache_.G.resize(static_cast<int>(h_.size()), n_vars_);
        cache_.G.setFromTriplets(G_trip_.begin(), G_trip_.end());
        cache_.h = Eigen::Map<const Eigen::VectorXd>(h_.data(), h_.size());
        cache_.cone_dims = cone_dims_;
        cache_.validate();
        cache_valid_ = true;
    }
    return cache_;
}

std::string ConicProgram::structure_dump() const {
    const ConicData& d = conic_data();
    std::ostringstream os;
    os << "conic-program v1\n";
    os << "variables " << n_vars_ << "\n";
    os << "layout states " << n_x_ << " inputs " << n_u_ << " horizon " << N_ << " terms " << L_
       << "\n";
    os << "objective nnz " << d.P.nonZeros() << " linear_nnz "
       << (q_.array() != 0.0).count() << " r0 " << r0_ << "\n";
    os << "equalities " << d.eq_rows() << " nnz " << d.A.nonZeros() << "\n";
    os << "cones " << d.cone_dims.size() << " rows " << d.cone_rows() << " nnz " << d.G.nonZeros()
       << "\n";
    os << "cone_dims";
    for (int c : d.cone_dims) os << " " << c;
    os << "\n";
    return os.str();
}

ConicProgram build(const StochasticProblem& prob, const HorizonBasis& hb) {
    prob.validate();
    const int nx = prob.n_x();
    const int nu = prob.n_u();
    const int N = prob.N;
    const int L = hb.term_count();

    Embedding emb = prob.w.has_value() ? hb.embed(*prob.x0, *prob.w)
                                       : hb.embed(*prob.x0, prob.w_steps);
    if (hb.horizon() != N) {
        std::ostringstream os;
        os << "horizon basis spans " << hb.horizon() << " steps but the problem has N = " << N;
        throw std::invalid_argument(os.str());
    }

    ConicProgram prog(nx, nu, N, L);
    prog.gauss_ = prob.gauss;
    for (int j = 0; j < L; ++j) {
        const BlockRef ref = hb.block_of(j);
        prog.term_step_[j] = ref.tag == BlockTag::Disturbance ? ref.step : -1;
    }

    // Objective: sum_j sum_k |x^j(k)|_Q^2 + |u^j(k)|_R^2 + |x^j(N)|_QN^2,
    // i.e. (1/2) z' P z with 2Q / 2R / 2QN blocks.
    auto add_block = [&](const Eigen::MatrixXd& Wm, auto&& idx) {
        for (int r = 0; r < Wm.rows(); ++r) {
            for (int c = 0; c < Wm.cols(); ++c) {
                if (Wm(r, c) != 0.0) {
                    prog.P_trip_.emplace_back(idx(r), idx(c), 2.0 * Wm(r, c));
                }
            }
        }
    };
    for (int k = 0; k <= N; ++k) {
        const Eigen::MatrixXd* Wm = nullptr;
        if (k < N && prob.Q.has_value()) Wm = &*prob.Q;
        if (k == N && prob.QN.has_value()) Wm = &*prob.QN;
        if (!Wm) continue;
        for (int j = 0; j < L; ++j) {
            add_block(*Wm, [&](int i) { return prog.x_index(k, j, i); });
        }
    }
    if (prob.R.has_value()) {
        for (int k = 0; k < N; ++k) {
            for (int j = 0; j < L; ++j) {
                add_block(*prob.R, [&](int i) { return prog.u_index(k, j, i); });
            }
        }
    }

    // Coefficient dynamics x^j(k+1) = A x^j(k) + B u^j(k) + E w^j(k).
    for (int k = 0; k < N; ++k) {
        const Eigen::MatrixXd Ew = prob.E * emb.w[k];
        for (int j = 0; j < L; ++j) {
            for (int i = 0; i < nx; ++i) {
                std::vector<std::pair<int, double>> row;
                row.reserve(1 + nx + nu);
                row.emplace_back(prog.x_index(k + 1, j, i), 1.0);
                for (int c = 0; c < nx; ++c) {
                    if (prob.A(i, c) != 0.0) row.emplace_back(prog.x_index(k, j, c), -prob.A(i, c));
                }
                for (int c = 0; c < nu; ++c) {
                    if (prob.B(i, c) != 0.0) row.emplace_back(prog.u_index(k, j, c), -prob.B(i, c));
                }
                prog.add_equality(row, Ew(i, j));
            }
        }
    }

    // Parametric initial condition x^j(0) = embedded x_ini^j.
    prog.init_row_begin_ = static_cast<int>(prog.b_.size());
    for (int j = 0; j < L; ++j) {
        for (int i = 0; i < nx; ++i) {
            prog.add_equality({{prog.x_index(0, j, i), 1.0}}, emb.x_ini(i, j));
        }
    }

    // Causality: u(k) may not depend on germs of steps >= k.
    for (int k = 0; k < N; ++k) {
        for (int j = 0; j < L; ++j) {
            if (prog.term_step_[j] >= k) {
                for (int i = 0; i < nu; ++i) {
                    prog.add_equality({{prog.u_index(k, j, i), 1.0}}, 0.0);
                }
            }
        }
    }

    // Chance constraints from the per-component bound tables. A pair of
    // finite bounds with equal risk forms one two-sided constraint;
    // otherwise each finite side is one-sided.
    auto attach = [&](const std::vector<ChanceBound>& lo, const std::vector<ChanceBound>& hi,
                      ChanceTarget target, int dim) {
        if (lo.empty() && hi.empty()) return;
        for (int i = 0; i < dim; ++i) {
            const ChanceBound l = lo.empty() ? ChanceBound{-std::numeric_limits<double>::infinity(), 1.0} : lo[i];
            const ChanceBound u = hi.empty() ? ChanceBound{} : hi[i];
            const bool fl = std::isfinite(l.bound);
            const bool fu = std::isfinite(u.bound);
            if (!fl && !fu) continue;
            if (fl && fu && l.risk == u.risk) {
                prog.add_chance({target, i, l.bound, u.bound, l.risk, 0, -1});
            } else {
                if (fl) {
                    prog.add_chance({target, i, l.bound,
                                     std::numeric_limits<double>::infinity(), l.risk, 0, -1});
                }
                if (fu) {
                    prog.add_chance({target, i, -std::numeric_limits<double>::infinity(),
                                     u.bound, u.risk, 0, -1});
                }
            }
        }
    };
    attach(prob.lbx, prob.ubx, ChanceTarget::State, nx);
    attach(prob.lbu, prob.ubu, ChanceTarget::Input, nu);

    return prog;
}

}  // namespace pcmpc
