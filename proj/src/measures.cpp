#include "pcmpc/measures.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pcmpc {

std::string to_string(MeasureFamily family) {
    switch (family) {
        case MeasureFamily::Dirac: return "dirac";
        case MeasureFamily::Gaussian: return "gaussian";
        case MeasureFamily::Uniform: return "uniform";
        case MeasureFamily::Beta: return "beta";
        case MeasureFamily::Gamma: return "gamma";
    }
    return "unknown";
}

MeasureSpec::MeasureSpec(MeasureFamily family, std::vector<double> params)
    : family_(family), params_(std::move(params)) {}

MeasureSpec MeasureSpec::dirac(double point) {
    if (!std::isfinite(point)) {
        throw std::invalid_argument("Dirac point must be finite");
    }
    return MeasureSpec(MeasureFamily::Dirac, {point});
}

MeasureSpec MeasureSpec::gaussian(double mean, double stddev) {
    if (!std::isfinite(mean)) {
        throw std::invalid_argument("Gaussian mean must be finite");
    }
    if (!(stddev > 0.0) || !std::isfinite(stddev)) {
        std::ostringstream os;
        os << "Gaussian stddev must be > 0, got " << stddev;
        throw std::invalid_argument(os.str());
    }
    return MeasureSpec(MeasureFamily::Gaussian, {mean, stddev});
}

MeasureSpec MeasureSpec::uniform(double lo, double hi) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        std::ostringstream os;
        os << "Uniform bounds must satisfy lo < hi, got [" << lo << ", " << hi << "]";
        throw std::invalid_argument(os.str());
    }
    return MeasureSpec(MeasureFamily::Uniform, {lo, hi});
}

MeasureSpec MeasureSpec::beta(double alpha, double beta) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        std::ostringstream os;
        os << "Beta shape alpha must be > 0, got " << alpha;
        throw std::invalid_argument(os.str());
    }
    if (!(beta > 0.0) || !std::isfinite(beta)) {
        std::ostringstream os;
        os << "Beta shape beta must be > 0, got " << beta;
        throw std::invalid_argument(os.str());
    }
    return MeasureSpec(MeasureFamily::Beta, {alpha, beta});
}

MeasureSpec MeasureSpec::gamma(double shape, double scale) {
    if (!(shape > 0.0) || !std::isfinite(shape)) {
        std::ostringstream os;
        os << "Gamma shape must be > 0, got " << shape;
        throw std::invalid_argument(os.str());
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        std::ostringstream os;
        os << "Gamma scale must be > 0, got " << scale;
        throw std::invalid_argument(os.str());
    }
    return MeasureSpec(MeasureFamily::Gamma, {shape, scale});
}

double MeasureSpec::mean() const {
    switch (family_) {
        case MeasureFamily::Dirac: return params_[0];
        case MeasureFamily::Gaussian: return params_[0];
        case MeasureFamily::Uniform: return 0.5 * (params_[0] + params_[1]);
        case MeasureFamily::Beta: return params_[0] / (params_[0] + params_[1]);
        case MeasureFamily::Gamma: return params_[0] * params_[1];
    }
    return 0.0;
}

double MeasureSpec::variance() const {
    switch (family_) {
        case MeasureFamily::Dirac: return 0.0;
        case MeasureFamily::Gaussian: return params_[1] * params_[1];
        case MeasureFamily::Uniform: {
            const double w = params_[1] - params_[0];
            return w * w / 12.0;
        }
        case MeasureFamily::Beta: {
            const double a = params_[0], b = params_[1];
            const double s = a + b;
            return a * b / (s * s * (s + 1.0));
        }
        case MeasureFamily::Gamma:
            return params_[0] * params_[1] * params_[1];
    }
    return 0.0;
}

double MeasureSpec::stddev() const { return std::sqrt(variance()); }

namespace {

// Raw moments of the standardized germs.
double germ_raw_moment(const MeasureSpec& germ, int order) {
    if (order == 0) return 1.0;
    switch (germ.family()) {
        case MeasureFamily::Dirac:
            return germ.params()[0] == 0.0 ? 0.0 : std::pow(germ.params()[0], order);
        case MeasureFamily::Gaussian: {
            if (order % 2 == 1) return 0.0;
            double m = 1.0;  // (order-1)!!
            for (int i = order - 1; i > 1; i -= 2) m *= i;
            return m;
        }
        case MeasureFamily::Uniform:
            return 1.0 / (order + 1.0);
        case MeasureFamily::Beta: {
            const double a = germ.params()[0], b = germ.params()[1];
            double m = 1.0;
            for (int i = 0; i < order; ++i) m *= (a + i) / (a + b + i);
            return m;
        }
        case MeasureFamily::Gamma: {
            const double k = germ.params()[0], th = germ.params()[1];
            double m = 1.0;
            for (int i = 0; i < order; ++i) m *= (k + i) * th;
            return m;
        }
    }
    return 0.0;
}

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r *= static_cast<double>(n - k + i) / i;
    return r;
}

}  // namespace

double MeasureSpec::raw_moment(int order) const {
    if (order < 0) throw std::invalid_argument("moment order must be >= 0");
    if (order == 0) return 1.0;
    // E[(c + s*xi)^m] expanded over germ moments.
    const MeasureSpec g = germ();
    const double c = germ_shift();
    const double s = germ_scale();
    double total = 0.0;
    for (int i = 0; i <= order; ++i) {
        total += binomial(order, i) * std::pow(c, order - i) * std::pow(s, i) *
                 germ_raw_moment(g, i);
    }
    return total;
}

MeasureSpec MeasureSpec::germ() const {
    switch (family_) {
        case MeasureFamily::Dirac: return MeasureSpec::dirac(0.0);
        case MeasureFamily::Gaussian: return MeasureSpec::gaussian(0.0, 1.0);
        case MeasureFamily::Uniform: return MeasureSpec::uniform(0.0, 1.0);
        case MeasureFamily::Beta: return *this;
        case MeasureFamily::Gamma: return *this;
    }
    throw std::logic_error("unreachable");
}

double MeasureSpec::germ_shift() const {
    switch (family_) {
        case MeasureFamily::Dirac: return params_[0];
        case MeasureFamily::Gaussian: return params_[0];
        case MeasureFamily::Uniform: return params_[0];
        case MeasureFamily::Beta: return 0.0;
        case MeasureFamily::Gamma: return 0.0;
    }
    return 0.0;
}

double MeasureSpec::germ_scale() const {
    switch (family_) {
        case MeasureFamily::Dirac: return 1.0;
        case MeasureFamily::Gaussian: return params_[1];
        case MeasureFamily::Uniform: return params_[1] - params_[0];
        case MeasureFamily::Beta: return 1.0;
        case MeasureFamily::Gamma: return 1.0;
    }
    return 1.0;
}

std::pair<double, double> MeasureSpec::recurrence(int j) const {
    if (j < 0) throw std::invalid_argument("recurrence index must be >= 0");
    switch (family_) {
        case MeasureFamily::Dirac:
            // Degenerate measure: the 1x1 Jacobi matrix places the single
            // quadrature node at the point itself.
            return {params_[0], j == 0 ? 1.0 : 0.0};
        case MeasureFamily::Gaussian: {
            const double mu = params_[0], sig = params_[1];
            return {mu, j == 0 ? 1.0 : j * sig * sig};
        }
        case MeasureFamily::Uniform: {
            const double lo = params_[0], w = params_[1] - params_[0];
            const double a = lo + 0.5 * w;
            if (j == 0) return {a, 1.0};
            const double jj = static_cast<double>(j);
            const double b01 = jj * jj / (4.0 * (4.0 * jj * jj - 1.0));
            return {a, w * w * b01};
        }
        case MeasureFamily::Beta: {
            // Jacobi weight (1-x)^a (1+x)^b on [-1,1] with a = beta-1,
            // b = alpha-1, mapped onto [0,1].
            const double a = params_[1] - 1.0;
            const double b = params_[0] - 1.0;
            double aj, bj;
            if (j == 0) {
                aj = (b - a) / (a + b + 2.0);
                bj = 1.0;
                return {(aj + 1.0) / 2.0, bj};
            }
            const double n = static_cast<double>(j);
            const double s = 2.0 * n + a + b;
            aj = (b * b - a * a) / (s * (s + 2.0));
            if (j == 1) {
                bj = 4.0 * (a + 1.0) * (b + 1.0) /
                     ((a + b + 2.0) * (a + b + 2.0) * (a + b + 3.0));
            } else {
                bj = 4.0 * n * (n + a) * (n + b) * (n + a + b) /
                     (s * s * (s + 1.0) * (s - 1.0));
            }
            return {(aj + 1.0) / 2.0, bj / 4.0};
        }
        case MeasureFamily::Gamma: {
            // Generalized Laguerre with alpha = shape-1, scaled by theta.
            const double k = params_[0], th = params_[1];
            const double n = static_cast<double>(j);
            const double aj = th * (2.0 * n + k);
            const double bj = j == 0 ? 1.0 : th * th * n * (n + k - 1.0);
            return {aj, bj};
        }
    }
    throw std::logic_error("unreachable");
}

std::string MeasureSpec::to_string() const {
    std::ostringstream os;
    os << pcmpc::to_string(family_) << "(";
    for (size_t i = 0; i < params_.size(); ++i) {
        if (i) os << ", ";
        os << params_[i];
    }
    os << ")";
    return os.str();
}

bool MeasureSpec::operator==(const MeasureSpec& other) const {
    return family_ == other.family_ && params_ == other.params_;
}

UnivariateBasis::UnivariateBasis(const MeasureSpec& germ_measure, int max_degree)
    : measure_(germ_measure), max_degree_(max_degree) {
    if (max_degree < 0) {
        throw std::invalid_argument("max_degree must be >= 0");
    }
    if (germ_measure.is_dirac() && max_degree > 0) {
        throw std::invalid_argument(
            "Dirac measure supports only the constant basis (max_degree 0)");
    }
    rec_a_.resize(max_degree_ + 1);
    rec_b_.resize(max_degree_ + 1);
    norms_.resize(max_degree_ + 1);
    double norm = 1.0;
    for (int j = 0; j <= max_degree_; ++j) {
        auto [a, b] = measure_.recurrence(j);
        rec_a_[j] = a;
        rec_b_[j] = b;
        if (j >= 1) norm *= b;
        norms_[j] = norm;
    }
}

double UnivariateBasis::eval_phi(int degree, double point) const {
    if (degree < 0 || degree > max_degree_) {
        std::ostringstream os;
        os << "degree " << degree << " out of range [0, " << max_degree_ << "]";
        throw std::out_of_range(os.str());
    }
    double prev = 0.0;
    double cur = 1.0;
    for (int j = 0; j < degree; ++j) {
        const double next = (point - rec_a_[j]) * cur - rec_b_[j] * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

double UnivariateBasis::eval_psi(int degree, double point) const {
    return eval_phi(degree, point) / std::sqrt(norm_squared(degree));
}

double UnivariateBasis::norm_squared(int degree) const {
    if (degree < 0 || degree > max_degree_) {
        std::ostringstream os;
        os << "degree " << degree << " out of range [0, " << max_degree_ << "]";
        throw std::out_of_range(os.str());
    }
    return norms_[degree];
}

std::pair<double, double> UnivariateBasis::recurrence(int j) const {
    if (j < 0 || j > max_degree_) throw std::out_of_range("recurrence index");
    return {rec_a_[j], rec_b_[j]};
}

bool UnivariateBasis::operator==(const UnivariateBasis& other) const {
    return measure_ == other.measure_ && max_degree_ == other.max_degree_;
}

QuadratureRule::QuadratureRule(std::vector<double> nodes, std::vector<double> weights,
                               MeasureSpec measure)
    : nodes_(std::move(nodes)), weights_(std::move(weights)), measure_(std::move(measure)) {
    if (nodes_.size() != weights_.size()) {
        throw std::invalid_argument("quadrature nodes/weights size mismatch");
    }
}

double QuadratureRule::integrate(const std::function<double(double)>& f) const {
    double total = 0.0;
    for (size_t i = 0; i < nodes_.size(); ++i) total += weights_[i] * f(nodes_[i]);
    return total;
}

UnivariateBasis make_basis(const MeasureSpec& measure, int max_degree) {
    if (max_degree < 0) throw std::invalid_argument("max_degree must be >= 0");
    const MeasureSpec germ = measure.germ();
    if (germ.is_dirac()) {
        return UnivariateBasis(germ, 0);
    }
    return UnivariateBasis(germ, max_degree);
}

QuadratureRule gauss_rule(const MeasureSpec& measure, int n_nodes) {
    if (n_nodes < 1) throw std::invalid_argument("n_nodes must be >= 1");
    if (measure.is_dirac()) {
        return QuadratureRule({measure.params()[0]}, {1.0}, measure);
    }
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n_nodes, n_nodes);
    for (int j = 0; j < n_nodes; ++j) {
        jac(j, j) = measure.recurrence(j).first;
        if (j + 1 < n_nodes) {
            const double b = measure.recurrence(j + 1).second;
            const double off = std::sqrt(b);
            jac(j, j + 1) = off;
            jac(j + 1, j) = off;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    if (es.info() != Eigen::Success) {
        std::ostringstream os;
        os << "Gauss rule eigen-decomposition failed for " << measure.to_string()
           << " with " << n_nodes << " nodes";
        throw std::runtime_error(os.str());
    }
    std::vector<double> nodes(n_nodes), weights(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        weights[i] = v0 * v0;  // b_0 = 1 for probability measures
    }
    return QuadratureRule(std::move(nodes), std::move(weights), measure);
}

double inner_product(const std::function<double(double)>& f,
                     const std::function<double(double)>& g,
                     const QuadratureRule& rule) {
    double total = 0.0;
    for (int i = 0; i < rule.size(); ++i) {
        total += rule.weights()[i] * f(rule.nodes()[i]) * g(rule.nodes()[i]);
    }
    return total;
}

int default_node_count(int deg_f, int deg_g) {
    const int d = deg_f + deg_g;
    return (d + 1) / 2 + 1 + 2;
}

}  // namespace pcmpc
