#pragma once

#include <functional>
#include <string>
#include <vector>

#include "viewgrid/tape.hpp"

namespace viewgrid {

struct GradCheckOptions {
    double h = 1e-5;
    double tol = 1e-4;
    // Cap on coordinates probed per parameter (evenly strided); 0 = all.
    std::size_t max_coords = 0;
};

struct GradCheckResult {
    std::string name;
    bool pass = false;
    double max_rel_err = 0.0;
    std::string worst_entry;  // "param[flat_index]"
    std::size_t coords_checked = 0;
    std::string error;  // non-empty on determinism failure / exception
};

// Compares analytic grads of fn (rebuilt per call on a fresh tape) against
// central differences (f(x+h)-f(x-h))/(2h) for every listed parameter.
// Relative error: |a-n| / max(|a|,|n|,1e-8). fn must be deterministic; two
// baseline evaluations are compared bitwise and a mismatch fails the check.
GradCheckResult grad_check(const std::string& name, const std::vector<Parameter*>& params,
                           const std::function<Var(Tape&)>& fn,
                           const GradCheckOptions& opts = {});

// Named registry so the CLI and the acceptance suite run one shared list.
struct GradCheckCase {
    std::string name;
    std::function<GradCheckResult()> run;
};

std::vector<GradCheckCase>& gradcheck_registry();
void register_gradcheck(std::string name, std::function<GradCheckResult()> run);
std::vector<GradCheckResult> run_gradchecks();

std::string format_gradcheck_report(const std::vector<GradCheckResult>& results);
bool all_passed(const std::vector<GradCheckResult>& results);

// Populates the registry with every differentiable operation (see
// gradcheck_registry.cpp); idempotent.
void register_builtin_gradchecks();

}  // namespace viewgrid
