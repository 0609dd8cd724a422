#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "gsobi/sim.hpp"

namespace gsobi {

struct NelderMeadOptions {
    double initial_step = 0.1;
    /// Stop when f_worst - f_best <= ftol (|f_best| + ftol).
    double ftol = 1e-8;
    int max_evals = 4000;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    int evals = 0;
    bool converged = false;
};

/// Derivative-free simplex minimization. Non-finite objective values are
/// treated as +infinity.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    const std::vector<double>& x0, const NelderMeadOptions& options = {}) {
    const std::size_t dim = x0.size();
    NelderMeadResult result;
    auto eval = [&](const std::vector<double>& x) {
        ++result.evals;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    if (dim == 0) {
        result.x = x0;
        result.value = eval(x0);
        result.converged = true;
        return result;
    }

    std::vector<std::vector<double>> simplex(dim + 1, x0);
    std::vector<double> values(dim + 1);
    for (std::size_t i = 0; i < dim; ++i) {
        simplex[i + 1][i] += options.initial_step;
    }
    for (std::size_t i = 0; i <= dim; ++i) {
        values[i] = eval(simplex[i]);
    }

    std::vector<std::size_t> idx(dim + 1);
    std::vector<double> centroid(dim);
    std::vector<double> trial(dim);
    auto point = [&](double t, const std::vector<double>& worst) {
        std::vector<double> out(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            out[k] = centroid[k] + t * (worst[k] - centroid[k]);
        }
        return out;
    };

    while (result.evals < options.max_evals) {
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = idx.front();
        const std::size_t worst = idx.back();
        const std::size_t second = idx[dim - 1];
        if (std::isfinite(values[worst]) &&
            values[worst] - values[best] <= options.ftol * (std::abs(values[best]) + options.ftol)) {
            result.converged = true;
            break;
        }
        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= dim; ++i) {
            if (i == worst) {
                continue;
            }
            for (std::size_t k = 0; k < dim; ++k) {
                centroid[k] += simplex[i][k] / static_cast<double>(dim);
            }
        }
        const auto reflected = point(-1.0, simplex[worst]);
        const double fr = eval(reflected);
        if (fr < values[best]) {
            const auto expanded = point(-2.0, simplex[worst]);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        const auto contracted = point(outside ? -0.5 : 0.5, simplex[worst]);
        const double fc = eval(contracted);
        if (fc < std::min(fr, values[worst])) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= dim; ++i) {
            if (i == best) {
                continue;
            }
            for (std::size_t k = 0; k < dim; ++k) {
                simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
            }
            values[i] = eval(simplex[i]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    result.x = simplex[best];
    result.value = values[best];
    return result;
}

/// Nelder-Mead from x0 followed by `restarts` runs started at random
/// perturbations of the best point so far; returns the best run.
inline NelderMeadResult minimize_with_restarts(const std::function<double(const std::vector<double>&)>& f,
                                               const std::vector<double>& x0, int restarts, std::uint64_t seed,
                                               const NelderMeadOptions& options = {}) {
    NelderMeadResult best = nelder_mead(f, x0, options);
    int evals = best.evals;
    NormalStream rng(seed);
    for (int r = 0; r < restarts; ++r) {
        std::vector<double> start = best.x;
        for (double& v : start) {
            v += 0.5 * rng();
        }
        NelderMeadResult run = nelder_mead(f, start, options);
        evals += run.evals;
        if (run.value < best.value) {
            best = std::move(run);
        }
    }
    best.evals = evals;
    return best;
}

}  // namespace gsobi
