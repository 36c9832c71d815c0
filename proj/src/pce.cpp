#include "pcmpc/pce.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pcmpc/rng.hpp"

namespace pcmpc {

namespace {

Germ make_germ(int id, const MeasureSpec& measure, int degree) {
    MeasureSpec g = measure.germ();
    UnivariateBasis b = make_basis(g, degree);
    return Germ{id, std::move(g), std::move(b)};
}

}  // namespace

MultiBasis::MultiBasis(std::vector<Germ> germs, std::vector<MultiIndex> terms)
    : germs_(std::move(germs)), terms_(std::move(terms)) {
    if (terms_.empty()) throw std::invalid_argument("basis needs at least one term");
    std::set<int> ids;
    for (const auto& g : germs_) {
        if (!ids.insert(g.id).second) {
            std::ostringstream os;
            os << "duplicate germ id " << g.id << " (independence violated)";
            throw std::invalid_argument(os.str());
        }
    }
    std::set<MultiIndex> seen;
    std::vector<int> need(germs_.size(), 0);
    for (const auto& t : terms_) {
        if (t.size() != germs_.size()) {
            throw std::invalid_argument("multi-index length differs from germ count");
        }
        for (size_t g = 0; g < t.size(); ++g) {
            if (t[g] < 0) throw std::invalid_argument("negative degree in multi-index");
            need[g] = std::max(need[g], t[g]);
        }
        if (!seen.insert(t).second) {
            throw std::invalid_argument("duplicate multi-index in basis");
        }
    }
    for (int d : terms_.front()) {
        if (d != 0) throw std::invalid_argument("first basis term must be the constant 1");
    }
    // Make sure each germ's univariate basis covers the degrees in use.
    for (size_t g = 0; g < germs_.size(); ++g) {
        if (germs_[g].basis.max_degree() < need[g]) {
            germs_[g].basis = UnivariateBasis(germs_[g].measure, need[g]);
        }
    }
    term_factors_.resize(terms_.size());
    for (size_t j = 0; j < terms_.size(); ++j) {
        for (size_t g = 0; g < germs_.size(); ++g) {
            if (terms_[j][g] > 0) {
                term_factors_[j].emplace_back(static_cast<int>(g), terms_[j][g]);
            }
        }
    }
}

MultiBasis MultiBasis::constant() {
    return MultiBasis({}, {MultiIndex{}});
}

int MultiBasis::term_degree(int term) const {
    int d = 0;
    for (int x : terms_.at(term)) d += x;
    return d;
}

int MultiBasis::max_degree() const {
    int d = 0;
    for (int j = 0; j < term_count(); ++j) d = std::max(d, term_degree(j));
    return d;
}

int MultiBasis::max_degree_in_germ(int germ) const {
    int d = 0;
    for (const auto& t : terms_) d = std::max(d, t.at(germ));
    return d;
}

int MultiBasis::find_germ(int id) const {
    for (size_t g = 0; g < germs_.size(); ++g) {
        if (germs_[g].id == id) return static_cast<int>(g);
    }
    return -1;
}

double MultiBasis::eval_term(int term, const Eigen::VectorXd& germ_values) const {
    if (germ_values.size() != germ_count()) {
        throw std::invalid_argument("germ value count mismatch");
    }
    double v = 1.0;
    for (auto [g, d] : term_factors_.at(term)) {
        v *= germs_[g].basis.eval_psi(d, germ_values(g));
    }
    return v;
}

Eigen::MatrixXd MultiBasis::eval_terms(const Eigen::MatrixXd& germ_draws) const {
    if (germ_draws.cols() != germ_count()) {
        std::ostringstream os;
        os << "germ draw columns (" << germ_draws.cols() << ") do not match germ count ("
           << germ_count() << ")";
        throw std::invalid_argument(os.str());
    }
    const auto n = germ_draws.rows();
    Eigen::MatrixXd out(n, term_count());
    // Per-draw tables of psi_d(xi_g) up to each germ's needed degree.
    std::vector<std::vector<double>> psi(germs_.size());
    std::vector<int> maxdeg(germs_.size(), 0);
    for (size_t g = 0; g < germs_.size(); ++g) {
        maxdeg[g] = max_degree_in_germ(static_cast<int>(g));
        psi[g].resize(maxdeg[g] + 1);
    }
    for (Eigen::Index r = 0; r < n; ++r) {
        for (size_t g = 0; g < germs_.size(); ++g) {
            for (int d = 0; d <= maxdeg[g]; ++d) {
                psi[g][d] = germs_[g].basis.eval_psi(d, germ_draws(r, static_cast<int>(g)));
            }
        }
        for (int j = 0; j < term_count(); ++j) {
            double v = 1.0;
            for (auto [g, d] : term_factors_[j]) v *= psi[g][d];
            out(r, j) = v;
        }
    }
    return out;
}

bool MultiBasis::same_structure(const MultiBasis& other) const {
    if (terms_ != other.terms_) return false;
    if (germs_.size() != other.germs_.size()) return false;
    for (size_t g = 0; g < germs_.size(); ++g) {
        if (!(germs_[g].measure == other.germs_[g].measure)) return false;
    }
    return true;
}

PCEVector::PCEVector(std::shared_ptr<const MultiBasis> basis, Eigen::MatrixXd coeffs)
    : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
    if (!basis_) throw std::invalid_argument("null basis");
    if (coeffs_.cols() != basis_->term_count()) {
        std::ostringstream os;
        os << "coefficient columns (" << coeffs_.cols() << ") do not match basis term count ("
           << basis_->term_count() << ")";
        throw std::invalid_argument(os.str());
    }
    if (coeffs_.rows() < 1) throw std::invalid_argument("PCE vector needs dimension >= 1");
    if (!coeffs_.allFinite()) throw std::invalid_argument("non-finite PCE coefficients");
}

Eigen::VectorXd PCEVector::mean() const { return coeffs_.col(0); }

Eigen::VectorXd PCEVector::variance() const {
    if (coeffs_.cols() == 1) return Eigen::VectorXd::Zero(coeffs_.rows());
    return coeffs_.rightCols(coeffs_.cols() - 1).rowwise().squaredNorm();
}

Eigen::MatrixXd PCEVector::sample(const Eigen::MatrixXd& germ_draws) const {
    return basis_->eval_terms(germ_draws) * coeffs_.transpose();
}

bool PCEVector::is_deterministic() const {
    if (coeffs_.cols() == 1) return true;
    return coeffs_.rightCols(coeffs_.cols() - 1).cwiseAbs().maxCoeff() == 0.0;
}

PCEVector affine_pce(const MeasureSpec& measure, int germ_id) {
    if (measure.is_dirac()) {
        auto basis = std::make_shared<const MultiBasis>(MultiBasis::constant());
        Eigen::MatrixXd c(1, 1);
        c(0, 0) = measure.mean();
        return PCEVector(std::move(basis), std::move(c));
    }
    std::vector<Germ> germs{make_germ(germ_id, measure, 1)};
    std::vector<MultiBasis::MultiIndex> terms{{0}, {1}};
    auto basis = std::make_shared<const MultiBasis>(std::move(germs), std::move(terms));
    Eigen::MatrixXd c(1, 2);
    c(0, 0) = measure.mean();
    c(0, 1) = measure.stddev();  // Z = mean + std * psi^1(xi), exact
    return PCEVector(std::move(basis), std::move(c));
}

MultiBasis union_basis(const std::vector<MultiBasis>& components) {
    if (components.empty()) throw std::invalid_argument("union of zero bases");
    std::vector<Germ> germs;
    std::set<int> ids;
    std::vector<int> germ_offset(components.size(), 0);
    for (size_t c = 0; c < components.size(); ++c) {
        germ_offset[c] = static_cast<int>(germs.size());
        for (const auto& g : components[c].germs()) {
            if (!ids.insert(g.id).second) {
                std::ostringstream os;
                os << "duplicate germ id " << g.id << " across union components "
                   << "(independence violated)";
                throw std::invalid_argument(os.str());
            }
            germs.push_back(g);
        }
    }
    const int total_germs = static_cast<int>(germs.size());
    std::vector<MultiBasis::MultiIndex> terms;
    terms.emplace_back(total_germs, 0);  // shared constant
    for (size_t c = 0; c < components.size(); ++c) {
        const auto& comp = components[c];
        for (int j = 1; j < comp.term_count(); ++j) {
            MultiBasis::MultiIndex t(total_germs, 0);
            for (int g = 0; g < comp.germ_count(); ++g) {
                t[germ_offset[c] + g] = comp.terms()[j][g];
            }
            terms.push_back(std::move(t));
        }
    }
    return MultiBasis(std::move(germs), std::move(terms));
}

MultiBasis tensor_basis(std::vector<Germ> germs, int total_degree) {
    if (total_degree < 0) throw std::invalid_argument("total degree must be >= 0");
    const int n = static_cast<int>(germs.size());
    std::vector<int> cap(n);
    for (int g = 0; g < n; ++g) {
        cap[g] = germs[g].measure.is_dirac() ? 0 : total_degree;
        if (germs[g].basis.max_degree() < cap[g]) {
            germs[g].basis = UnivariateBasis(germs[g].measure, cap[g]);
        }
    }
    // Graded enumeration: all indices of exact degree p for p = 0..total,
    // earlier germs carrying the degree first within each grade.
    std::vector<MultiBasis::MultiIndex> terms;
    MultiBasis::MultiIndex idx(n, 0);
    std::function<void(int, int)> emit = [&](int pos, int remaining) {
        if (pos == n) {
            if (remaining == 0) terms.push_back(idx);
            return;
        }
        for (int d = std::min(remaining, cap[pos]); d >= 0; --d) {
            idx[pos] = d;
            emit(pos + 1, remaining - d);
        }
        idx[pos] = 0;
    };
    for (int p = 0; p <= total_degree; ++p) emit(0, p);
    return MultiBasis(std::move(germs), std::move(terms));
}

MultiBasis tensor_basis(const std::vector<MeasureSpec>& measures, int total_degree) {
    std::vector<Germ> germs;
    germs.reserve(measures.size());
    for (size_t i = 0; i < measures.size(); ++i) {
        germs.push_back(make_germ(static_cast<int>(i), measures[i], std::max(total_degree, 0)));
    }
    return tensor_basis(std::move(germs), total_degree);
}

PCEVector gen_pce(const std::vector<MeasureSpec>& specs) {
    if (specs.empty()) throw std::invalid_argument("gen_pce needs at least one component");
    std::vector<PCEVector> comps;
    std::vector<MultiBasis> bases;
    comps.reserve(specs.size());
    for (size_t i = 0; i < specs.size(); ++i) {
        comps.push_back(affine_pce(specs[i], static_cast<int>(i)));
        bases.push_back(comps.back().basis());
    }
    auto joint = std::make_shared<const MultiBasis>(union_basis(bases));
    const int n = static_cast<int>(specs.size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, joint->term_count());
    int col = 1;
    for (int i = 0; i < n; ++i) {
        c(i, 0) = comps[i].coeffs()(0, 0);
        for (int j = 1; j < comps[i].term_count(); ++j) {
            c(i, col++) = comps[i].coeffs()(0, j);
        }
    }
    return PCEVector(std::move(joint), std::move(c));
}

PCEVector gaussian_mv_pce(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance) {
    const int n = static_cast<int>(mean.size());
    if (covariance.rows() != n || covariance.cols() != n) {
        throw std::invalid_argument("covariance dimension does not match mean");
    }
    if (!covariance.isApprox(covariance.transpose(), 1e-12)) {
        throw std::invalid_argument("covariance must be symmetric");
    }
    // Unpivoted Cholesky tolerating semidefiniteness: zero-pivot columns are
    // dropped, so degenerate directions contribute no germ.
    const double scale = std::max(1.0, covariance.diagonal().cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    std::vector<int> kept;
    for (int j = 0; j < n; ++j) {
        double d = covariance(j, j) - L.row(j).head(j).squaredNorm();
        if (d > tol) {
            L(j, j) = std::sqrt(d);
            for (int i = j + 1; i < n; ++i) {
                L(i, j) = (covariance(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
            }
            kept.push_back(j);
        } else if (d > -1e-8 * scale) {
            for (int i = j + 1; i < n; ++i) {
                const double r = covariance(i, j) - L.row(i).head(j).dot(L.row(j).head(j));
                if (std::abs(r) > 1e-6 * scale) {
                    throw std::invalid_argument("covariance is not positive semidefinite");
                }
            }
        } else {
            throw std::invalid_argument("covariance is not positive semidefinite");
        }
    }
    const int r = static_cast<int>(kept.size());
    std::vector<Germ> germs;
    std::vector<MultiBasis::MultiIndex> terms;
    terms.emplace_back(r, 0);
    for (int g = 0; g < r; ++g) {
        germs.push_back(make_germ(g, MeasureSpec::gaussian(0.0, 1.0), 1));
        MultiBasis::MultiIndex t(r, 0);
        t[g] = 1;
        terms.push_back(std::move(t));
    }
    auto basis = std::make_shared<const MultiBasis>(std::move(germs), std::move(terms));
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, 1 + r);
    c.col(0) = mean;
    for (int g = 0; g < r; ++g) c.col(1 + g) = L.col(kept[g]);
    return PCEVector(std::move(basis), std::move(c));
}

PCEVector propagate_affine(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           const PCEVector& Z) {
    if (A.cols() != Z.dim()) {
        std::ostringstream os;
        os << "affine map expects " << Z.dim() << " columns, got " << A.cols();
        throw std::invalid_argument(os.str());
    }
    if (b.size() != A.rows()) {
        throw std::invalid_argument("offset dimension does not match map rows");
    }
    Eigen::MatrixXd c = A * Z.coeffs();
    c.col(0) += b;
    return PCEVector(Z.basis_ptr(), std::move(c));
}

PCEVector galerkin_project(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                           int f_degree, const PCEVector& Z,
                           std::shared_ptr<const MultiBasis> target) {
    if (f_degree < 0) throw std::invalid_argument("map degree must be >= 0");
    if (!target) throw std::invalid_argument("null target basis");
    const MultiBasis& zb = Z.basis();
    const MultiBasis& tb = *target;

    const int required = f_degree * zb.max_degree();
    if (tb.max_degree() < required) {
        std::ostringstream os;
        os << "target basis degree " << tb.max_degree() << " is insufficient; the projection "
           << "needs total degree >= " << required;
        throw std::invalid_argument(os.str());
    }

    // Germ positions in the target for every Z germ, matched by id.
    std::vector<int> z_to_t(zb.germ_count());
    for (int g = 0; g < zb.germ_count(); ++g) {
        const int pos = tb.find_germ(zb.germs()[g].id);
        if (pos < 0) {
            std::ostringstream os;
            os << "target basis is missing germ id " << zb.germs()[g].id;
            throw std::invalid_argument(os.str());
        }
        if (!(tb.germs()[pos].measure == zb.germs()[g].measure)) {
            throw std::invalid_argument("target germ measure differs from source germ");
        }
        z_to_t[g] = pos;
    }

    // Active germs: those Z actually excites. Target terms with degree in any
    // other germ integrate to zero and are skipped.
    std::vector<int> active;  // target positions
    std::vector<int> active_z;
    for (int g = 0; g < zb.germ_count(); ++g) {
        if (zb.max_degree_in_germ(g) > 0) {
            active.push_back(z_to_t[g]);
            active_z.push_back(g);
        }
    }
    std::vector<char> is_active(tb.germ_count(), 0);
    for (int pos : active) is_active[pos] = 1;

    std::vector<char> term_live(tb.term_count(), 1);
    for (int j = 0; j < tb.term_count(); ++j) {
        for (int g = 0; g < tb.germ_count(); ++g) {
            if (tb.terms()[j][g] > 0 && !is_active[g]) {
                term_live[j] = 0;
                break;
            }
        }
    }

    // Tensor Gauss rule, per active germ, exact for the polynomial integrand
    // f(Z) * psi_target.
    const int na = static_cast<int>(active.size());
    std::vector<QuadratureRule> rules;
    rules.reserve(na);
    for (int a = 0; a < na; ++a) {
        const int degz = zb.max_degree_in_germ(active_z[a]) * f_degree;
        const int degt = tb.max_degree_in_germ(active[a]);
        const int nodes = default_node_count(degz, degt);
        rules.push_back(gauss_rule(tb.germs()[active[a]].measure, nodes));
    }

    const int n_out = [&] {
        const Eigen::VectorXd probe = f(Z.mean());
        return static_cast<int>(probe.size());
    }();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_out, tb.term_count());

    Eigen::VectorXd tvals = Eigen::VectorXd::Zero(tb.germ_count());
    Eigen::VectorXd zvals = Eigen::VectorXd::Zero(zb.germ_count());
    std::vector<int> cursor(na, 0);
    while (true) {
        double w = 1.0;
        for (int a = 0; a < na; ++a) {
            const double x = rules[a].nodes()[cursor[a]];
            w *= rules[a].weights()[cursor[a]];
            tvals(active[a]) = x;
            zvals(active_z[a]) = x;
        }
        Eigen::VectorXd zreal = Eigen::VectorXd::Zero(Z.dim());
        for (int j = 0; j < zb.term_count(); ++j) {
            zreal += Z.coeffs().col(j) * zb.eval_term(j, zvals);
        }
        const Eigen::VectorXd fv = f(zreal);
        if (fv.size() != n_out) throw std::invalid_argument("map output dimension varies");
        for (int j = 0; j < tb.term_count(); ++j) {
            if (!term_live[j]) continue;
            out.col(j) += w * tb.eval_term(j, tvals) * fv;
        }
        int a = 0;
        for (; a < na; ++a) {
            if (++cursor[a] < rules[a].size()) break;
            cursor[a] = 0;
        }
        if (a == na) break;
        if (na == 0) break;
    }

    PCEVector projected(target, std::move(out));

    // Exactness probe: a polynomial map of the declared degree must be
    // reproduced pathwise; anything else is out of scope and rejected.
    const std::uint64_t probe_seed = 0x9c0ffeeULL;
    double worst = 0.0, fscale = 1.0;
    for (int trial = 0; trial < 8; ++trial) {
        for (int g = 0; g < zb.germ_count(); ++g) {
            const double x = draw_germ(zb.germs()[g].measure, probe_seed, trial, 0,
                                       static_cast<std::uint64_t>(g));
            zvals(g) = x;
            tvals(z_to_t[g]) = x;
        }
        Eigen::VectorXd zreal = Eigen::VectorXd::Zero(Z.dim());
        for (int j = 0; j < zb.term_count(); ++j) {
            zreal += Z.coeffs().col(j) * zb.eval_term(j, zvals);
        }
        Eigen::VectorXd direct = f(zreal);
        Eigen::VectorXd recon = Eigen::VectorXd::Zero(n_out);
        for (int j = 0; j < tb.term_count(); ++j) {
            if (!term_live[j]) continue;
            recon += projected.coeffs().col(j) * tb.eval_term(j, tvals);
        }
        worst = std::max(worst, (direct - recon).cwiseAbs().maxCoeff());
        fscale = std::max(fscale, direct.cwiseAbs().maxCoeff());
    }
    if (worst > 1e-6 * fscale) {
        std::ostringstream os;
        os << "projection is not exact (residual " << worst << "); the map is not a polynomial "
           << "of degree <= " << f_degree << " or the target basis lacks required terms";
        throw std::invalid_argument(os.str());
    }
    return projected;
}

}  // namespace pcmpc
