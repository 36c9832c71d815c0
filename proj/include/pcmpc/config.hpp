#ifndef PCMPC_CONFIG_HPP
#define PCMPC_CONFIG_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcmpc/solver.hpp"
#include "pcmpc/transcription.hpp"

namespace pcmpc {

struct SimulationConfig {
    int n_paths = 100;
    int T = 20;
    std::uint64_t seed = 1;
    int workers = 1;
};

/// Parsed and validated problem description. The raw canonical document is
/// kept for re-emission and hashing.
struct ProblemConfig {
    StochasticProblem problem;
    SolverOptions solver;
    SimulationConfig simulation;
    std::string hash;  // FNV-1a of the canonical document
    nlohmann::json canonical;
};

/// Carries every validation error found, each prefixed with a
/// JSON-pointer-style path.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

ProblemConfig parse_config(const std::string& path);
ProblemConfig parse_config_json(const nlohmann::json& doc);

/// Canonical re-emission of a parsed config; parsing the result yields an
/// identical structure.
nlohmann::json to_json(const ProblemConfig& config);

std::string fnv1a_hex(const std::string& text);

}  // namespace pcmpc

#endif  // PCMPC_CONFIG_HPP
