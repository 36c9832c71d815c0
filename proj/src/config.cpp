#include "pcmpc/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace pcmpc {

using nlohmann::json;

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error([&errors] {
          std::ostringstream os;
          os << "configuration invalid (" << errors.size() << " error"
             << (errors.size() == 1 ? "" : "s") << "):";
          for (const auto& e : errors) os << "\n  " << e;
          return os.str();
      }()),
      errors_(std::move(errors)) {}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

namespace {

class Parser {
public:
    explicit Parser(const json& doc) : doc_(doc) {}

    ProblemConfig run();

    std::vector<std::string> errors;

private:
    void fail(const std::string& path, const std::string& what) {
        errors.push_back(path + ": " + what);
    }

    void check_keys(const json& obj, const std::string& path,
                    const std::set<std::string>& allowed) {
        if (!obj.is_object()) {
            fail(path, "expected an object");
            return;
        }
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            if (!allowed.count(it.key())) fail(path + "/" + it.key(), "unknown key");
        }
    }

    /// Numbers may be spelled "inf" / "-inf" as strings.
    double number(const json& v, const std::string& path, bool allow_inf = false) {
        if (v.is_number()) return v.get<double>();
        if (v.is_string() && allow_inf) {
            const std::string s = v.get<std::string>();
            if (s == "inf") return std::numeric_limits<double>::infinity();
            if (s == "-inf") return -std::numeric_limits<double>::infinity();
        }
        fail(path, allow_inf ? "expected a number or \"inf\"/\"-inf\"" : "expected a number");
        return 0.0;
    }

    Eigen::MatrixXd matrix(const json& v, const std::string& path) {
        if (!v.is_array() || v.empty() || !v[0].is_array()) {
            fail(path, "expected a matrix as an array of row arrays");
            return Eigen::MatrixXd();
        }
        const size_t cols = v[0].size();
        Eigen::MatrixXd M(v.size(), cols);
        for (size_t r = 0; r < v.size(); ++r) {
            if (!v[r].is_array() || v[r].size() != cols) {
                fail(path, "rows must all have the same length");
                return Eigen::MatrixXd();
            }
            for (size_t c = 0; c < cols; ++c) {
                M(static_cast<int>(r), static_cast<int>(c)) =
                    number(v[r][c], path + "/" + std::to_string(r) + "/" + std::to_string(c));
            }
        }
        return M;
    }

    Eigen::VectorXd vector(const json& v, const std::string& path) {
        if (!v.is_array()) {
            fail(path, "expected an array of numbers");
            return Eigen::VectorXd();
        }
        Eigen::VectorXd out(v.size());
        for (size_t i = 0; i < v.size(); ++i) {
            out(static_cast<int>(i)) = number(v[i], path + "/" + std::to_string(i));
        }
        return out;
    }

    MeasureSpec measure(const json& v, const std::string& path) {
        check_keys(v, path, {"family", "params"});
        const auto fallback = MeasureSpec::dirac(0.0);
        if (!v.contains("family") || !v["family"].is_string()) {
            fail(path + "/family", "expected a family name string");
            return fallback;
        }
        if (!v.contains("params") || !v["params"].is_array()) {
            fail(path + "/params", "expected a parameter array");
            return fallback;
        }
        std::vector<double> p;
        for (size_t i = 0; i < v["params"].size(); ++i) {
            p.push_back(number(v["params"][i], path + "/params/" + std::to_string(i)));
        }
        const std::string fam = v["family"].get<std::string>();
        try {
            if (fam == "dirac" && p.size() == 1) return MeasureSpec::dirac(p[0]);
            if (fam == "gaussian" && p.size() == 2) return MeasureSpec::gaussian(p[0], p[1]);
            if (fam == "uniform" && p.size() == 2) return MeasureSpec::uniform(p[0], p[1]);
            if (fam == "beta" && p.size() == 2) return MeasureSpec::beta(p[0], p[1]);
            if (fam == "gamma" && p.size() == 2) return MeasureSpec::gamma(p[0], p[1]);
        } catch (const std::exception& e) {
            fail(path, e.what());
            return fallback;
        }
        fail(path, "unknown family or wrong parameter count: " + fam);
        return fallback;
    }

    /// A random-vector block: component measures, a multivariate Gaussian,
    /// or a user-defined PCE on declared germs.
    PCEVector random_vector(const json& v, const std::string& path) {
        const auto fallback = affine_pce(MeasureSpec::dirac(0.0));
        if (!v.is_object()) {
            fail(path, "expected an object");
            return fallback;
        }
        const int forms = v.contains("components") + v.contains("gaussian") +
                          v.contains("custom");
        if (forms != 1) {
            fail(path, "exactly one of \"components\", \"gaussian\", \"custom\" required");
            return fallback;
        }
        if (v.contains("components")) {
            check_keys(v, path, {"components"});
            if (!v["components"].is_array() || v["components"].empty()) {
                fail(path + "/components", "expected a non-empty array");
                return fallback;
            }
            std::vector<MeasureSpec> specs;
            for (size_t i = 0; i < v["components"].size(); ++i) {
                specs.push_back(
                    measure(v["components"][i], path + "/components/" + std::to_string(i)));
            }
            if (!errors.empty()) return fallback;
            return gen_pce(specs);
        }
        if (v.contains("gaussian")) {
            check_keys(v, path, {"gaussian"});
            check_keys(v["gaussian"], path + "/gaussian", {"mean", "cov"});
            if (!v["gaussian"].contains("mean") || !v["gaussian"].contains("cov")) {
                fail(path + "/gaussian", "needs \"mean\" and \"cov\"");
                return fallback;
            }
            const Eigen::VectorXd m = vector(v["gaussian"]["mean"], path + "/gaussian/mean");
            const Eigen::MatrixXd S = matrix(v["gaussian"]["cov"], path + "/gaussian/cov");
            if (!errors.empty()) return fallback;
            try {
                return gaussian_mv_pce(m, S);
            } catch (const std::exception& e) {
                fail(path + "/gaussian", e.what());
                return fallback;
            }
        }
        check_keys(v, path, {"custom"});
        const json& cu = v["custom"];
        check_keys(cu, path + "/custom", {"germs", "coeffs"});
        if (!cu.contains("germs") || !cu.contains("coeffs") || !cu["germs"].is_array()) {
            fail(path + "/custom", "needs \"germs\" and \"coeffs\"");
            return fallback;
        }
        std::vector<Germ> germs;
        std::vector<int> degrees;
        for (size_t g = 0; g < cu["germs"].size(); ++g) {
            const std::string gp = path + "/custom/germs/" + std::to_string(g);
            check_keys(cu["germs"][g], gp, {"family", "params", "degree"});
            json mspec = cu["germs"][g];
            int deg = 1;
            if (mspec.contains("degree")) {
                deg = static_cast<int>(number(mspec["degree"], gp + "/degree"));
                mspec.erase("degree");
            }
            if (deg < 1) {
                fail(gp + "/degree", "degree must be >= 1");
                deg = 1;
            }
            const MeasureSpec ms = measure(mspec, gp);
            if (errors.empty()) {
                germs.push_back(Germ{static_cast<int>(g), ms.germ(), make_basis(ms, deg)});
                degrees.push_back(deg);
            }
        }
        const Eigen::MatrixXd C = matrix(cu["coeffs"], path + "/custom/coeffs");
        if (!errors.empty()) return fallback;
        // Terms: the constant, then degrees 1..d per germ in order.
        std::vector<MultiBasis::MultiIndex> terms;
        const int ng = static_cast<int>(germs.size());
        terms.emplace_back(ng, 0);
        for (int g = 0; g < ng; ++g) {
            for (int d = 1; d <= degrees[g]; ++d) {
                MultiBasis::MultiIndex t(ng, 0);
                t[g] = d;
                terms.push_back(std::move(t));
            }
        }
        try {
            auto basis = std::make_shared<const MultiBasis>(std::move(germs), std::move(terms));
            if (C.cols() != basis->term_count()) {
                std::ostringstream os;
                os << "coefficient columns (" << C.cols() << ") must match basis terms ("
                   << basis->term_count() << "): constant plus degrees 1..d per germ";
                fail(path + "/custom/coeffs", os.str());
                return fallback;
            }
            return PCEVector(std::move(basis), C);
        } catch (const std::exception& e) {
            fail(path + "/custom", e.what());
            return fallback;
        }
    }

    std::vector<ChanceBound> bounds(const json& v, const std::string& path) {
        std::vector<ChanceBound> out;
        if (v.is_null()) return out;
        if (!v.is_array()) {
            fail(path, "expected an array of [bound, risk] pairs");
            return out;
        }
        for (size_t i = 0; i < v.size(); ++i) {
            const std::string bp = path + "/" + std::to_string(i);
            if (!v[i].is_array() || v[i].size() != 2) {
                fail(bp, "expected a [bound, risk] pair");
                continue;
            }
            ChanceBound cb;
            cb.bound = number(v[i][0], bp + "/0", /*allow_inf=*/true);
            cb.risk = number(v[i][1], bp + "/1");
            out.push_back(cb);
        }
        return out;
    }

    const json& doc_;
};

ProblemConfig Parser::run() {
    ProblemConfig cfg;
    check_keys(doc_, "", {"system", "horizon", "x_ini", "disturbance", "weights", "constraints",
                          "gauss", "solver", "simulation"});
    for (const char* req : {"system", "horizon", "x_ini", "disturbance"}) {
        if (!doc_.contains(req)) fail(std::string("/") + req, "required section missing");
    }
    if (!errors.empty()) throw ConfigError(errors);

    StochasticProblem& prob = cfg.problem;
    check_keys(doc_["system"], "/system", {"A", "B", "E"});
    for (const char* req : {"A", "B", "E"}) {
        if (!doc_["system"].contains(req)) {
            fail(std::string("/system/") + req, "required matrix missing");
        }
    }
    if (errors.empty()) {
        prob.A = matrix(doc_["system"]["A"], "/system/A");
        prob.B = matrix(doc_["system"]["B"], "/system/B");
        prob.E = matrix(doc_["system"]["E"], "/system/E");
    }
    prob.N = doc_["horizon"].is_number_integer() ? doc_["horizon"].get<int>()
                                                 : (fail("/horizon", "expected an integer"), 0);
    prob.x0 = random_vector(doc_["x_ini"], "/x_ini");
    if (doc_["disturbance"].is_object() && doc_["disturbance"].contains("per_step")) {
        check_keys(doc_["disturbance"], "/disturbance", {"per_step"});
        const json& steps = doc_["disturbance"]["per_step"];
        if (!steps.is_array() || steps.empty()) {
            fail("/disturbance/per_step", "expected a non-empty array");
        } else {
            for (size_t k = 0; k < steps.size(); ++k) {
                prob.w_steps.push_back(
                    random_vector(steps[k], "/disturbance/per_step/" + std::to_string(k)));
            }
        }
    } else {
        prob.w = random_vector(doc_["disturbance"], "/disturbance");
    }

    if (doc_.contains("weights") && !doc_["weights"].is_null()) {
        check_keys(doc_["weights"], "/weights", {"Q", "R", "QN"});
        const json& w = doc_["weights"];
        if (w.contains("Q") && !w["Q"].is_null()) prob.Q = matrix(w["Q"], "/weights/Q");
        if (w.contains("R") && !w["R"].is_null()) prob.R = matrix(w["R"], "/weights/R");
        if (w.contains("QN") && !w["QN"].is_null()) prob.QN = matrix(w["QN"], "/weights/QN");
        // Either all weights are given or all are left empty (custom-
        // objective mode); anything partial is a mistake.
        const bool any = prob.Q || prob.R || prob.QN;
        if (any) {
            if (!prob.Q) fail("/weights/Q", "missing (required unless all weights are empty)");
            if (!prob.R) fail("/weights/R", "missing (required unless all weights are empty)");
            if (!prob.QN) fail("/weights/QN", "missing (required unless all weights are empty)");
        }
    }
    if (doc_.contains("constraints") && !doc_["constraints"].is_null()) {
        check_keys(doc_["constraints"], "/constraints", {"lbx", "ubx", "lbu", "ubu"});
        const json& c = doc_["constraints"];
        if (c.contains("lbx")) prob.lbx = bounds(c["lbx"], "/constraints/lbx");
        if (c.contains("ubx")) prob.ubx = bounds(c["ubx"], "/constraints/ubx");
        if (c.contains("lbu")) prob.lbu = bounds(c["lbu"], "/constraints/lbu");
        if (c.contains("ubu")) prob.ubu = bounds(c["ubu"], "/constraints/ubu");
    }
    if (doc_.contains("gauss")) {
        if (doc_["gauss"].is_boolean()) {
            prob.gauss = doc_["gauss"].get<bool>();
        } else {
            fail("/gauss", "expected a boolean");
        }
    }
    if (doc_.contains("solver") && !doc_["solver"].is_null()) {
        check_keys(doc_["solver"], "/solver",
                   {"max_iterations", "eps_feas", "eps_gap", "verbosity"});
        const json& s = doc_["solver"];
        if (s.contains("max_iterations")) {
            cfg.solver.max_iterations = static_cast<int>(number(s["max_iterations"],
                                                                "/solver/max_iterations"));
        }
        if (s.contains("eps_feas")) cfg.solver.eps_feas = number(s["eps_feas"], "/solver/eps_feas");
        if (s.contains("eps_gap")) cfg.solver.eps_gap = number(s["eps_gap"], "/solver/eps_gap");
        if (s.contains("verbosity")) {
            cfg.solver.verbosity = static_cast<int>(number(s["verbosity"], "/solver/verbosity"));
        }
    }
    if (doc_.contains("simulation") && !doc_["simulation"].is_null()) {
        check_keys(doc_["simulation"], "/simulation", {"n_paths", "T", "seed", "workers"});
        const json& s = doc_["simulation"];
        if (s.contains("n_paths")) {
            cfg.simulation.n_paths = static_cast<int>(number(s["n_paths"], "/simulation/n_paths"));
        }
        if (s.contains("T")) cfg.simulation.T = static_cast<int>(number(s["T"], "/simulation/T"));
        if (s.contains("seed")) {
            cfg.simulation.seed =
                static_cast<std::uint64_t>(number(s["seed"], "/simulation/seed"));
        }
        if (s.contains("workers")) {
            cfg.simulation.workers = static_cast<int>(number(s["workers"], "/simulation/workers"));
        }
    }
    if (!errors.empty()) throw ConfigError(errors);

    try {
        cfg.solver.validate();
    } catch (const std::exception& e) {
        fail("/solver", e.what());
    }
    try {
        cfg.problem.validate();
    } catch (const std::exception& e) {
        fail("", e.what());
    }
    if (cfg.simulation.n_paths < 1) fail("/simulation/n_paths", "must be >= 1");
    if (cfg.simulation.T < 0) fail("/simulation/T", "must be >= 0");
    if (cfg.simulation.workers < 1) fail("/simulation/workers", "must be >= 1");
    if (!errors.empty()) throw ConfigError(errors);

    cfg.canonical = doc_;
    cfg.hash = fnv1a_hex(doc_.dump());
    return cfg;
}

}  // namespace

ProblemConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path + ": cannot open file"});
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError({path + ": " + e.what()});
    }
    return parse_config_json(doc);
}

ProblemConfig parse_config_json(const nlohmann::json& doc) {
    Parser p(doc);
    return p.run();
}

nlohmann::json to_json(const ProblemConfig& config) { return config.canonical; }

}  // namespace pcmpc
