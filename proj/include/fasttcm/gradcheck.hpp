#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "fasttcm/ops.hpp"

namespace ftcm {

struct GradCheckResult {
    double max_rel_error = 0.0;
    size_t worst_param = 0;
    size_t worst_coord = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    size_t coords_checked = 0;
};

// Compares the analytic gradient of a deterministic scalar function against
// central finite differences over every coordinate of `params`. Relative
// error per coordinate is |analytic - cd| / max(1, |cd|).
inline GradCheckResult grad_check(const std::function<Tensor()>& f,
                                  std::span<Tensor> params, double step = 1e-5) {
    std::vector<std::vector<double>> analytic;
    {
        Graph tape;
        Tensor loss = f();
        tape.backward(loss);
        for (Tensor& p : params) {
            std::vector<double> g(p.size(), 0.0);
            if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), g.begin());
            analytic.push_back(std::move(g));
            p.zero_grad();
        }
    }
    GradCheckResult res;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi];
        for (size_t ci = 0; ci < p.size(); ++ci) {
            const double orig = p.at(ci);
            p.at(ci) = orig + step;
            const double lp = f().item();
            p.at(ci) = orig - step;
            const double lm = f().item();
            p.at(ci) = orig;
            if (!std::isfinite(lp) || !std::isfinite(lm))
                throw ValueError("grad_check: non-finite loss while probing parameter " +
                                 std::to_string(pi) + " coordinate " + std::to_string(ci));
            const double cd = (lp - lm) / (2.0 * step);
            const double rel =
                std::abs(analytic[pi][ci] - cd) / std::max(1.0, std::abs(cd));
            ++res.coords_checked;
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.worst_param = pi;
                res.worst_coord = ci;
                res.analytic = analytic[pi][ci];
                res.numeric = cd;
            }
        }
    }
    return res;
}

} // namespace ftcm
