#pragma once
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace commitlab {

struct PropertyResult {
    std::string name;
    std::size_t checked = 0;
    std::size_t failed = 0;
    double worst_margin = 0.0;  // smallest (bound - value) seen; negative means a failure
};

struct VerifyOptions {
    std::vector<std::string> suites;  // subset of available_suites()
    std::size_t samples = 1000;
    std::uint64_t seed = 20210705;
    bool perturb_hessian = false;  // negative control: adds 1e-3 I to the Hessian
};

const std::vector<std::string>& available_suites();

// Throws InvalidParameter on an empty or unknown selection.
std::vector<PropertyResult> run_property_suite(const VerifyOptions& opts);

} // namespace commitlab
