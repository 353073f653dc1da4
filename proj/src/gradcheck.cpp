#include "viewgrid/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace viewgrid {

namespace {

double eval_loss(const std::vector<Parameter*>& params, const std::function<Var(Tape&)>& fn) {
    Tape tape;
    Var loss = fn(tape);
    (void)params;
    return loss.item();
}

}  // namespace

GradCheckResult grad_check(const std::string& name, const std::vector<Parameter*>& params,
                           const std::function<Var(Tape&)>& fn, const GradCheckOptions& opts) {
    GradCheckResult r;
    r.name = name;
    try {
        double f0 = eval_loss(params, fn);
        double f1 = eval_loss(params, fn);
        if (f0 != f1) {
            r.error = "non-deterministic function (two evaluations differ)";
            return r;
        }

        // Analytic pass.
        for (Parameter* p : params) p->grad.fill(0.0);
        {
            Tape tape;
            Var loss = fn(tape);
            tape.backward(loss);
        }
        std::vector<Tensor> analytic;
        analytic.reserve(params.size());
        for (Parameter* p : params) {
            analytic.push_back(p->grad);
            p->grad.fill(0.0);
        }

        // Numeric pass, coordinate by coordinate.
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Parameter& p = *params[pi];
            std::size_t n = p.value.size();
            std::size_t stride = 1;
            if (opts.max_coords > 0 && n > opts.max_coords)
                stride = (n + opts.max_coords - 1) / opts.max_coords;
            for (std::size_t i = 0; i < n; i += stride) {
                double saved = p.value[i];
                p.value[i] = saved + opts.h;
                double fp = eval_loss(params, fn);
                p.value[i] = saved - opts.h;
                double fm = eval_loss(params, fn);
                p.value[i] = saved;
                double numeric = (fp - fm) / (2.0 * opts.h);
                double a = analytic[pi][i];
                // Floor keeps near-zero gradients comparable: the difference
                // quotient carries cancellation noise around eps*|terms|/h
                // (~1e-10 for these losses), so magnitudes under 1e-5 are held
                // to an absolute bar of tol*1e-5 instead of a noise ratio.
                double rel = std::abs(a - numeric) /
                             std::max({std::abs(a), std::abs(numeric), 1e-5});
                ++r.coords_checked;
                if (rel > r.max_rel_err) {
                    r.max_rel_err = rel;
                    r.worst_entry = p.name + "[" + std::to_string(i) + "]";
                }
            }
        }
        r.pass = r.max_rel_err <= opts.tol;
    } catch (const std::exception& e) {
        r.error = e.what();
        r.pass = false;
    }
    return r;
}

std::vector<GradCheckCase>& gradcheck_registry() {
    static std::vector<GradCheckCase> registry;
    return registry;
}

void register_gradcheck(std::string name, std::function<GradCheckResult()> run) {
    gradcheck_registry().push_back({std::move(name), std::move(run)});
}

std::vector<GradCheckResult> run_gradchecks() {
    std::vector<GradCheckResult> out;
    for (const GradCheckCase& c : gradcheck_registry()) out.push_back(c.run());
    return out;
}

std::string format_gradcheck_report(const std::vector<GradCheckResult>& results) {
    std::string out;
    char line[256];
    for (const GradCheckResult& r : results) {
        if (!r.error.empty()) {
            std::snprintf(line, sizeof line, "[FAIL] %-28s error: %s\n", r.name.c_str(),
                          r.error.c_str());
        } else {
            std::snprintf(line, sizeof line, "[%s] %-28s max rel err %.3e (%zu coords%s%s)\n",
                          r.pass ? "PASS" : "FAIL", r.name.c_str(), r.max_rel_err,
                          r.coords_checked, r.worst_entry.empty() ? "" : ", worst ",
                          r.worst_entry.c_str());
        }
        out += line;
    }
    return out;
}

bool all_passed(const std::vector<GradCheckResult>& results) {
    if (results.empty()) return false;
    for (const GradCheckResult& r : results)
        if (!r.pass) return false;
    return true;
}

}  // namespace viewgrid
