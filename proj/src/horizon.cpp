#include "pcmpc/horizon.hpp"

#include <sstream>
#include <stdexcept>

#include "pcmpc/rng.hpp"

namespace pcmpc {

namespace {

void check_orthonormal_structure(const MultiBasis& b, const char* name) {
    // Bases constructed by this library are orthonormal products over
    // independent germs; the structural invariants below are what that
    // requires of user-supplied bases too.
    for (int d : b.terms().front()) {
        if (d != 0) {
            std::ostringstream os;
            os << name << " basis must start with the constant term";
            throw std::invalid_argument(os.str());
        }
    }
}

}  // namespace

int HorizonBasis::step_term_count(int k) const {
    if (k < 0 || k >= horizon_) throw std::out_of_range("step out of range");
    return step_terms_[k];
}

BlockRef HorizonBasis::block_of(int term) const {
    if (term < 0 || term >= term_count()) throw std::out_of_range("term out of range");
    if (term == 0) return {BlockTag::Constant, -1, 0};
    if (term < ini_terms_) return {BlockTag::Ini, -1, term - 1};
    for (int k = horizon_ - 1; k >= 0; --k) {
        if (term >= step_term_begin_[k]) {
            return {BlockTag::Disturbance, k, term - step_term_begin_[k]};
        }
    }
    throw std::logic_error("block map inconsistent");
}

int HorizonBasis::term_of(const BlockRef& ref) const {
    switch (ref.tag) {
        case BlockTag::Constant:
            return 0;
        case BlockTag::Ini:
            if (ref.offset < 0 || ref.offset >= ini_terms_ - 1) {
                throw std::out_of_range("ini block offset out of range");
            }
            return 1 + ref.offset;
        case BlockTag::Disturbance: {
            if (ref.step < 0 || ref.step >= horizon_) {
                throw std::out_of_range("step out of range");
            }
            if (ref.offset < 0 || ref.offset >= step_terms_[ref.step] - 1) {
                throw std::out_of_range("disturbance block offset out of range");
            }
            return step_term_begin_[ref.step] + ref.offset;
        }
    }
    throw std::logic_error("unreachable");
}

std::pair<int, int> HorizonBasis::step_range(int k) const {
    if (k < 0 || k >= horizon_) throw std::out_of_range("step out of range");
    return {step_term_begin_[k], step_term_begin_[k] + step_terms_[k] - 1};
}

std::pair<int, int> HorizonBasis::step_germ_range(int k) const {
    if (k < 0 || k >= horizon_) throw std::out_of_range("step out of range");
    return {step_germ_begin_[k], step_germ_begin_[k] + step_germs_[k]};
}

Embedding HorizonBasis::embed(const PCEVector& ini, const PCEVector& w) const {
    std::vector<PCEVector> steps(horizon_, w);
    return embed(ini, steps);
}

Embedding HorizonBasis::embed(const PCEVector& ini, const std::vector<PCEVector>& w_steps) const {
    if (!ini.basis().same_structure(*src_ini_)) {
        throw std::invalid_argument("initial-condition basis does not match this horizon basis");
    }
    if (static_cast<int>(w_steps.size()) != horizon_) {
        throw std::invalid_argument("one disturbance vector per step required");
    }
    for (int k = 0; k < horizon_; ++k) {
        if (!w_steps[k].basis().same_structure(*src_w_[k])) {
            std::ostringstream os;
            os << "disturbance basis at step " << k << " does not match this horizon basis";
            throw std::invalid_argument(os.str());
        }
    }
    const int L = term_count();
    Embedding out;
    out.x_ini = Eigen::MatrixXd::Zero(ini.dim(), L);
    out.x_ini.col(0) = ini.coeffs().col(0);
    for (int j = 1; j < ini_terms_; ++j) out.x_ini.col(j) = ini.coeffs().col(j);
    out.w.reserve(horizon_);
    for (int k = 0; k < horizon_; ++k) {
        Eigen::MatrixXd wk = Eigen::MatrixXd::Zero(w_steps[k].dim(), L);
        wk.col(0) = w_steps[k].coeffs().col(0);
        const int begin = step_term_begin_[k];
        for (int j = 1; j < step_terms_[k]; ++j) {
            wk.col(begin + j - 1) = w_steps[k].coeffs().col(j);
        }
        out.w.push_back(std::move(wk));
    }
    return out;
}

Eigen::MatrixXd HorizonBasis::draw_germs(int n_draws, std::uint64_t seed,
                                         std::uint64_t first_path) const {
    const auto& germs = joint_->germs();
    Eigen::MatrixXd draws(n_draws, joint_->germ_count());
    for (int r = 0; r < n_draws; ++r) {
        const std::uint64_t path = first_path + static_cast<std::uint64_t>(r);
        for (int g = 0; g < ini_germs_; ++g) {
            draws(r, g) = draw_germ(germs[g].measure, seed, path, -1, g);
        }
        for (int k = 0; k < horizon_; ++k) {
            for (int g = 0; g < step_germs_[k]; ++g) {
                draws(r, step_germ_begin_[k] + g) =
                    draw_germ(germs[step_germ_begin_[k] + g].measure, seed, path, k, g);
            }
        }
    }
    return draws;
}

HorizonBasis joint_basis(const PCEVector& ini, const PCEVector& w, int N) {
    if (N < 1) throw std::invalid_argument("horizon must be >= 1");
    std::vector<PCEVector> steps(N, w);
    return joint_basis_per_step(ini, steps);
}

HorizonBasis joint_basis_per_step(const PCEVector& ini,
                                  const std::vector<PCEVector>& w_steps) {
    if (w_steps.empty()) throw std::invalid_argument("at least one disturbance step required");
    check_orthonormal_structure(ini.basis(), "initial-condition");
    for (const auto& w : w_steps) {
        check_orthonormal_structure(w.basis(), "disturbance");
        if (w.dim() != w_steps.front().dim()) {
            throw std::invalid_argument("disturbance dimension varies across steps");
        }
    }
    const int N = static_cast<int>(w_steps.size());

    HorizonBasis hb;
    hb.horizon_ = N;
    hb.ini_terms_ = ini.term_count();
    hb.ini_germs_ = ini.basis().germ_count();
    hb.src_ini_ = ini.basis_ptr();
    hb.src_w_.reserve(N);

    // Fresh germ ids: ini germs first, then one contiguous range per step.
    std::vector<Germ> germs;
    int next_id = 0;
    for (const auto& g : ini.basis().germs()) {
        germs.push_back(Germ{next_id++, g.measure, g.basis});
    }
    std::vector<MultiBasis::MultiIndex> terms;
    const auto map_term = [&](const MultiBasis::MultiIndex& src, int germ_begin,
                              int total) {
        MultiBasis::MultiIndex t(total, 0);
        for (size_t g = 0; g < src.size(); ++g) t[germ_begin + g] = src[g];
        return t;
    };

    int total_germs = hb.ini_germs_;
    hb.step_germ_begin_.resize(N);
    hb.step_germs_.resize(N);
    for (int k = 0; k < N; ++k) {
        hb.step_germ_begin_[k] = total_germs;
        hb.step_germs_[k] = w_steps[k].basis().germ_count();
        total_germs += hb.step_germs_[k];
    }
    for (int k = 0; k < N; ++k) {
        for (const auto& g : w_steps[k].basis().germs()) {
            germs.push_back(Germ{next_id++, g.measure, g.basis});
        }
    }

    terms.emplace_back(total_germs, 0);
    for (int j = 1; j < hb.ini_terms_; ++j) {
        terms.push_back(map_term(ini.basis().terms()[j], 0, total_germs));
    }
    hb.step_terms_.resize(N);
    hb.step_term_begin_.resize(N);
    int cursor = hb.ini_terms_;
    for (int k = 0; k < N; ++k) {
        const auto& wb = w_steps[k].basis();
        hb.src_w_.push_back(w_steps[k].basis_ptr());
        hb.step_terms_[k] = wb.term_count();
        hb.step_term_begin_[k] = cursor;
        cursor += wb.term_count() - 1;
        for (int j = 1; j < wb.term_count(); ++j) {
            terms.push_back(map_term(wb.terms()[j], hb.step_germ_begin_[k], total_germs));
        }
    }
    hb.joint_ = std::make_shared<const MultiBasis>(std::move(germs), std::move(terms));
    return hb;
}

}  // namespace pcmpc
