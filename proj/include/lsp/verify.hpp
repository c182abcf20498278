#ifndef LSP_VERIFY_HPP
#define LSP_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace lsp::verify {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Self-check of the solver against the enumeration and generic-minimizer
// oracles on small built-in instances. Deterministic given the seed.
std::vector<CheckResult> run_all(std::uint64_t seed = 20120626);

}  // namespace lsp::verify

#endif
