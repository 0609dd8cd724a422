#pragma once

// Univariate ARMA(p, q) fitting by conditional sum of squares with AIC order
// selection, and GARCH(1,1) Gaussian quasi-maximum likelihood.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsobi/error.hpp"
#include "gsobi/optimize.hpp"
#include "gsobi/sim.hpp"

namespace gsobi {

struct ArmaFit {
    ArmaParams params;
    int p = 0;
    int q = 0;
    double mean = 0.0;
    double sigma2 = 0.0;
    double aic = 0.0;  ///< n log(sigma2) + 2 (p + q + 1)
    std::vector<double> residuals;
    bool converged = true;
};

struct GarchFit {
    GarchParams params;
    double loglik = 0.0;  ///< -1/2 sum (log sigma_t^2 + x_t^2 / sigma_t^2)
    std::vector<double> volatility;  ///< sigma_t, t = 1..n
    bool converged = true;
    bool boundary = false;  ///< alpha + beta > 0.999
};

inline constexpr int kArmaRestarts = 3;
/// Bound on fitted partial autocorrelations; keeps AR and MA roots off the
/// unit circle where nearly cancelling factors would chase sampling noise.
inline constexpr double kMaxPartialAutocorrelation = 0.95;

namespace detail {

/// z_t = x_t - sum phi_i x_{t-i} - sum theta_j z_{t-j}, zero pre-sample values.
inline void css_residuals(std::span<const double> x, const std::vector<double>& phi,
                          const std::vector<double>& theta, std::vector<double>& z) {
    const std::size_t n = x.size();
    z.resize(n);
    const std::size_t p = phi.size();
    const std::size_t q = theta.size();
    for (std::size_t t = 0; t < n; ++t) {
        double v = x[t];
        for (std::size_t i = 1; i <= p && i <= t; ++i) {
            v -= phi[i - 1] * x[t - i];
        }
        for (std::size_t j = 1; j <= q && j <= t; ++j) {
            v -= theta[j - 1] * z[t - j];
        }
        z[t] = v;
    }
}

inline double mean_square(const std::vector<double>& z) {
    double s = 0.0;
    for (double v : z) {
        s += v * v;
    }
    return s / static_cast<double>(z.size());
}

/// Causal AR coefficients from unconstrained values through tanh-mapped
/// partial autocorrelations.
inline std::vector<double> constrained_ar(std::span<const double> u) {
    std::vector<double> r(u.size());
    std::transform(u.begin(), u.end(), r.begin(), [](double v) { return kMaxPartialAutocorrelation * std::tanh(v); });
    return partial_autocorrelations_to_ar(r);
}

/// Inverse of constrained_ar; shrinks non-causal input towards zero first.
inline std::vector<double> unconstrained_ar(std::vector<double> phi) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        if (auto r = ar_to_partial_autocorrelations(phi)) {
            std::vector<double> u(r->size());
            std::transform(r->begin(), r->end(), u.begin(),
                           [](double v) { return std::atanh(std::clamp(v / kMaxPartialAutocorrelation, -0.98, 0.98)); });
            return u;
        }
        for (double& v : phi) {
            v *= 0.9;
        }
    }
    return std::vector<double>(phi.size(), 0.0);
}

/// Long-autoregression residuals for Hannan-Rissanen initialization.
struct LongArResiduals {
    std::size_t order = 0;
    std::vector<double> residuals;
};

inline LongArResiduals long_ar_residuals(std::span<const double> x) {
    const std::size_t n = x.size();
    const auto order = static_cast<std::size_t>(
        std::max(1.0, std::min(std::ceil(10.0 * std::log10(static_cast<double>(n))), static_cast<double>(n) / 5.0)));
    // Yule-Walker by Levinson-Durbin on the sample autocovariances.
    std::vector<double> acov(order + 1, 0.0);
    for (std::size_t k = 0; k <= order; ++k) {
        double s = 0.0;
        for (std::size_t t = k; t < n; ++t) {
            s += x[t] * x[t - k];
        }
        acov[k] = s / static_cast<double>(n);
    }
    std::vector<double> phi;
    double err = acov[0];
    for (std::size_t k = 1; k <= order && err > 0.0; ++k) {
        double acc = acov[k];
        for (std::size_t i = 1; i < k; ++i) {
            acc -= phi[i - 1] * acov[k - i];
        }
        const double r = acc / err;
        std::vector<double> next(k);
        next[k - 1] = r;
        for (std::size_t i = 1; i < k; ++i) {
            next[i - 1] = phi[i - 1] - r * phi[k - i - 1];
        }
        phi = std::move(next);
        err *= (1.0 - r * r);
    }
    LongArResiduals out{phi.size(), std::vector<double>(n, 0.0)};
    for (std::size_t t = out.order; t < n; ++t) {
        double v = x[t];
        for (std::size_t i = 1; i <= out.order; ++i) {
            v -= phi[i - 1] * x[t - i];
        }
        out.residuals[t] = v;
    }
    return out;
}

/// Hannan-Rissanen regression of x_t on lagged x and lagged long-AR residuals.
inline ArmaParams hannan_rissanen(std::span<const double> x, const LongArResiduals& longar, int p, int q) {
    const std::size_t start = longar.order + static_cast<std::size_t>(std::max(p, q));
    const std::size_t n = x.size();
    const auto k = static_cast<Eigen::Index>(p + q);
    if (k == 0 || start + static_cast<std::size_t>(k) + 1 >= n) {
        return {std::vector<double>(static_cast<std::size_t>(p), 0.0),
                std::vector<double>(static_cast<std::size_t>(q), 0.0)};
    }
    const auto rows = static_cast<Eigen::Index>(n - start);
    Eigen::MatrixXd design(rows, k);
    Eigen::VectorXd target(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t t = start + static_cast<std::size_t>(r);
        target[r] = x[t];
        for (int i = 1; i <= p; ++i) {
            design(r, i - 1) = x[t - static_cast<std::size_t>(i)];
        }
        for (int j = 1; j <= q; ++j) {
            design(r, p + j - 1) = longar.residuals[t - static_cast<std::size_t>(j)];
        }
    }
    const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(target);
    ArmaParams out;
    for (int i = 0; i < p; ++i) {
        out.phi.push_back(coef[i]);
    }
    for (int j = 0; j < q; ++j) {
        out.theta.push_back(coef[p + j]);
    }
    return out;
}

inline void check_arma_orders(std::size_t n, int p, int q) {
    if (p < 0 || q < 0 || p > 5 || q > 5) {
        throw ValidationError("ARMA orders must lie in 0..5");
    }
    if (n <= static_cast<std::size_t>(10 * (p + q + 1))) {
        throw InsufficientDataError("ARMA(" + std::to_string(p) + "," + std::to_string(q) + ") needs n > " +
                                    std::to_string(10 * (p + q + 1)));
    }
}

inline ArmaFit arma_fit_centered(std::span<const double> xc, double mean, const LongArResiduals& longar, int p,
                                 int q) {
    const std::size_t n = xc.size();
    ArmaFit fit;
    fit.p = p;
    fit.q = q;
    fit.mean = mean;
    if (p == 0 && q == 0) {
        fit.residuals.assign(xc.begin(), xc.end());
        fit.sigma2 = mean_square(fit.residuals);
        fit.aic = static_cast<double>(n) * std::log(fit.sigma2) + 2.0;
        return fit;
    }
    const ArmaParams start = hannan_rissanen(xc, longar, p, q);
    std::vector<double> u0 = unconstrained_ar(start.phi);
    std::vector<double> neg_theta(start.theta.size());
    std::transform(start.theta.begin(), start.theta.end(), neg_theta.begin(), [](double v) { return -v; });
    const std::vector<double> u_ma = unconstrained_ar(neg_theta);
    u0.insert(u0.end(), u_ma.begin(), u_ma.end());

    auto unpack = [p, q](const std::vector<double>& u) {
        ArmaParams params;
        params.phi = constrained_ar(std::span<const double>(u.data(), static_cast<std::size_t>(p)));
        params.theta = constrained_ar(std::span<const double>(u.data() + p, static_cast<std::size_t>(q)));
        for (double& v : params.theta) {
            v = -v;
        }
        return params;
    };
    std::vector<double> z;
    auto objective = [&](const std::vector<double>& u) {
        const ArmaParams params = unpack(u);
        css_residuals(xc, params.phi, params.theta, z);
        return mean_square(z);
    };
    const NelderMeadResult best =
        minimize_with_restarts(objective, u0, kArmaRestarts, derive_seed(n, p, q), NelderMeadOptions{0.1, 1e-8, 4000});
    fit.params = unpack(best.x);
    css_residuals(xc, fit.params.phi, fit.params.theta, fit.residuals);
    fit.sigma2 = mean_square(fit.residuals);
    fit.aic = static_cast<double>(n) * std::log(fit.sigma2) + 2.0 * (p + q + 1);
    fit.converged = best.converged;
    return fit;
}

inline std::vector<double> center(std::span<const double> x, double& mean) {
    mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    std::vector<double> xc(x.begin(), x.end());
    for (double& v : xc) {
        v -= mean;
    }
    return xc;
}

}  // namespace detail

/// Conditional-sum-of-squares ARMA(p, q) fit of the centered series,
/// started from Hannan-Rissanen estimates. Causality and invertibility are
/// enforced through a partial-autocorrelation parameterization.
inline ArmaFit arma_fit(std::span<const double> x, int p, int q) {
    detail::check_arma_orders(x.size(), p, q);
    double mean = 0.0;
    const std::vector<double> xc = detail::center(x, mean);
    const detail::LongArResiduals longar =
        (p + q > 0) ? detail::long_ar_residuals(xc) : detail::LongArResiduals{};
    return detail::arma_fit_centered(xc, mean, longar, p, q);
}

/// Minimum-AIC fit over p <= p_max, q <= q_max. Ties prefer smaller p + q, then smaller p.
inline ArmaFit arma_select(std::span<const double> x, int p_max = 3, int q_max = 3) {
    if (x.size() < 2) {
        throw InsufficientDataError("ARMA order selection needs at least two observations");
    }
    double mean = 0.0;
    const std::vector<double> xc = detail::center(x, mean);
    const detail::LongArResiduals longar = detail::long_ar_residuals(xc);
    std::optional<ArmaFit> best;
    for (int total = 0; total <= p_max + q_max; ++total) {
        for (int p = 0; p <= std::min(total, p_max); ++p) {
            const int q = total - p;
            if (q > q_max) {
                continue;
            }
            try {
                detail::check_arma_orders(x.size(), p, q);
                ArmaFit fit = detail::arma_fit_centered(xc, mean, longar, p, q);
                if (std::isfinite(fit.aic) && (!best || fit.aic < best->aic)) {
                    best = std::move(fit);
                }
            } catch (const ValidationError&) {
                // order not admissible for this sample size
            }
        }
    }
    if (!best) {
        throw NumericalError("no admissible ARMA order could be fitted");
    }
    return std::move(*best);
}

namespace detail {

struct GarchTransform {
    double scale;  ///< sample second moment

    [[nodiscard]] GarchParams params(const std::vector<double>& u) const {
        const double s = 1.0 / (1.0 + std::exp(-u[1]));
        const double share = 1.0 / (1.0 + std::exp(-u[2]));
        GarchParams g;
        g.omega = scale * std::exp(u[0]);
        g.alpha = s * share;
        g.beta = s - g.alpha;
        return g;
    }

    [[nodiscard]] std::vector<double> unconstrained(const GarchParams& g) const {
        const double s = g.alpha + g.beta;
        const double share = g.alpha / s;
        return {std::log(g.omega / scale), std::log(s / (1.0 - s)), std::log(share / (1.0 - share))};
    }
};

/// -1/2 sum (log sigma_t^2 + x_t^2 / sigma_t^2) with sigma_1^2 = `initial`.
inline double garch_loglik(std::span<const double> x, const GarchParams& g, double initial,
                           std::vector<double>* sigma2 = nullptr) {
    double s2 = initial;
    double ll = 0.0;
    if (sigma2 != nullptr) {
        sigma2->resize(x.size());
    }
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (t > 0) {
            s2 = g.omega + g.alpha * x[t - 1] * x[t - 1] + g.beta * s2;
        }
        if (sigma2 != nullptr) {
            (*sigma2)[t] = s2;
        }
        ll -= 0.5 * (std::log(s2) + x[t] * x[t] / s2);
    }
    return ll;
}

}  // namespace detail

/// Gaussian quasi-likelihood value of given GARCH(1,1) parameters, started at the sample variance.
inline double garch11_loglik(std::span<const double> x, const GarchParams& g) {
    double m2 = 0.0;
    for (double v : x) {
        m2 += v * v;
    }
    return detail::garch_loglik(x, g, m2 / static_cast<double>(x.size()));
}

/// GARCH(1,1) quasi-maximum likelihood for a centered series. omega is
/// searched relative to the sample variance, so fitting a*x rescales omega
/// by a^2 and leaves alpha and beta unchanged.
inline GarchFit garch11_fit(std::span<const double> x) {
    if (x.size() < 200) {
        throw InsufficientDataError("GARCH(1,1) fit needs at least 200 observations");
    }
    double m2 = 0.0;
    for (double v : x) {
        m2 += v * v;
    }
    m2 /= static_cast<double>(x.size());
    if (!(m2 > 0.0) || !std::isfinite(m2)) {
        throw DegenerateVarianceError("GARCH(1,1) fit needs a series with positive finite variance");
    }
    const detail::GarchTransform transform{m2};
    auto objective = [&](const std::vector<double>& u) {
        return -detail::garch_loglik(x, transform.params(u), m2);
    };

    std::vector<double> start;
    double start_value = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : {std::pair{0.05, 0.90}, std::pair{0.10, 0.80}, std::pair{0.02, 0.50},
                               std::pair{0.20, 0.70}}) {
        const std::vector<double> u = transform.unconstrained(GarchParams{a, b, m2 * (1.0 - a - b)});
        const double v = objective(u);
        if (v < start_value) {
            start_value = v;
            start = u;
        }
    }
    const NelderMeadResult best =
        minimize_with_restarts(objective, start, kArmaRestarts, derive_seed(x.size(), 11), NelderMeadOptions{0.2, 1e-10, 4000});

    GarchFit fit;
    fit.params = transform.params(best.x);
    std::vector<double> sigma2;
    fit.loglik = detail::garch_loglik(x, fit.params, m2, &sigma2);
    fit.volatility.resize(sigma2.size());
    std::transform(sigma2.begin(), sigma2.end(), fit.volatility.begin(), [](double v) { return std::sqrt(v); });
    fit.converged = best.converged;
    fit.boundary = fit.params.alpha + fit.params.beta > 0.999;
    return fit;
}

}  // namespace gsobi
