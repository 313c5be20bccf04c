#ifndef HTSCO_ERRORS_HPP
#define HTSCO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace htsco {

// Rejected solver/mechanism configuration. The message names the violated
// inequality so callers can report it verbatim.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Input problem lacks a structural assumption an algorithm requires
// (e.g. missing Lipschitz overestimates, non-GLM losses).
struct UnsupportedAssumption : std::runtime_error {
    explicit UnsupportedAssumption(const std::string& what) : std::runtime_error(what) {}
};

// Internal privacy-accounting invariant breach. Must not occur under a
// valid configuration.
struct AccountingError : std::logic_error {
    explicit AccountingError(const std::string& what) : std::logic_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline void require_config(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

}  // namespace htsco

#endif
