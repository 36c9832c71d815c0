#ifndef PCMPC_HORIZON_HPP
#define PCMPC_HORIZON_HPP

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "pcmpc/pce.hpp"

namespace pcmpc {

enum class BlockTag { Constant, Ini, Disturbance };

/// Locates a joint-basis term: the shared constant, a slot of the
/// initial-condition block, or a slot of the disturbance block of step k.
struct BlockRef {
    BlockTag tag;
    int step;    // disturbance step, -1 otherwise
    int offset;  // within-block position, 0-based
};

/// Coefficients of the initial condition and of every disturbance step
/// expressed in joint-basis coordinates. x_ini is nonzero only on the
/// constant and ini block; w[k] only on the constant and the block of
/// germ xi_k.
struct Embedding {
    Eigen::MatrixXd x_ini;
    std::vector<Eigen::MatrixXd> w;
};

/// Joint orthonormal basis over a horizon: the initial-condition terms plus
/// one fresh copy of the disturbance term structure per step. The term count
/// L = L_ini + sum_k (L_wk - 1) grows linearly with the horizon.
class HorizonBasis {
public:
    int horizon() const { return horizon_; }
    int term_count() const { return joint_->term_count(); }
    int ini_term_count() const { return ini_terms_; }
    int step_term_count(int k) const;

    /// Joint term index -> block location; inverse of term_of.
    BlockRef block_of(int term) const;
    int term_of(const BlockRef& ref) const;

    /// Joint index range [begin, end) of the ini block (empty when L_ini = 1).
    std::pair<int, int> ini_range() const { return {1, ini_terms_}; }
    /// Joint index range [begin, end) of the step-k disturbance block.
    std::pair<int, int> step_range(int k) const;

    const MultiBasis& joint() const { return *joint_; }
    const std::shared_ptr<const MultiBasis>& joint_ptr() const { return joint_; }

    int ini_germ_count() const { return ini_germs_; }
    /// Joint germ-position range [begin, end) of step k's germs.
    std::pair<int, int> step_germ_range(int k) const;

    /// Embeds the source coefficient matrices into joint coordinates. The
    /// inputs must match the bases this HorizonBasis was built from.
    Embedding embed(const PCEVector& ini, const PCEVector& w) const;
    Embedding embed(const PCEVector& ini, const std::vector<PCEVector>& w_steps) const;

    /// Germ draws for the whole joint basis, one row per path. Draws are
    /// keyed (seed, path, step, germ) with step -1 for ini germs, so open-
    /// and closed-loop sampling see identical disturbance paths.
    Eigen::MatrixXd draw_germs(int n_draws, std::uint64_t seed,
                               std::uint64_t first_path = 0) const;

    friend HorizonBasis joint_basis(const PCEVector& ini, const PCEVector& w, int N);
    friend HorizonBasis joint_basis_per_step(const PCEVector& ini,
                                             const std::vector<PCEVector>& w_steps);

private:
    HorizonBasis() = default;

    int horizon_ = 0;
    int ini_terms_ = 1;   // L_ini
    int ini_germs_ = 0;
    std::vector<int> step_terms_;       // L_wk per step
    std::vector<int> step_term_begin_;  // joint index of each step block
    std::vector<int> step_germ_begin_;  // joint germ position of each step
    std::vector<int> step_germs_;
    std::shared_ptr<const MultiBasis> joint_;
    // Source structures, kept to validate embed() inputs.
    std::shared_ptr<const MultiBasis> src_ini_;
    std::vector<std::shared_ptr<const MultiBasis>> src_w_;
};

/// Joint basis for i.i.d. disturbances: the per-step block structure is the
/// disturbance basis replicated with fresh germs, L = L_ini + N (L_w - 1).
HorizonBasis joint_basis(const PCEVector& ini, const PCEVector& w, int N);

/// Joint basis for heterogeneous (non-i.i.d.) per-step disturbances.
HorizonBasis joint_basis_per_step(const PCEVector& ini,
                                  const std::vector<PCEVector>& w_steps);

}  // namespace pcmpc

#endif  // PCMPC_HORIZON_HPP
