#pragma once

// Portmanteau tests for linear autocorrelation (modified and classical
// Ljung-Box) and volatility clustering, and volatility-based ordering of
// estimated components.

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsobi/error.hpp"
#include "gsobi/matrixops.hpp"
#include "gsobi/modelfit.hpp"

namespace gsobi {

enum class TestVariant { Modified, Classical, Q };

inline std::string to_string(TestVariant v) {
    switch (v) {
        case TestVariant::Modified:
            return "modified";
        case TestVariant::Classical:
            return "classical";
        case TestVariant::Q:
            return "Q";
    }
    return "unknown";
}

struct TestResult {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    std::vector<double> per_lag;
    TestVariant variant = TestVariant::Modified;
    /// Lags at which the variance estimate was not positive and 1 was used instead.
    std::vector<Eigen::Index> variance_fallback_lags;

    [[nodiscard]] bool rejects(double level) const { return p_value < level; }
};

inline constexpr int kDefaultVarianceTruncation = 20;

/// Upper tail of the chi-squared distribution.
inline double chi2_sf(double x, int df) {
    if (df < 1) {
        throw ValidationError("chi-squared degrees of freedom must be positive");
    }
    if (std::isnan(x)) {
        throw ValidationError("chi-squared argument is NaN");
    }
    if (x <= 0.0) {
        return 1.0;
    }
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

namespace detail {

inline void check_lags(std::span<const Eigen::Index> lags) {
    if (lags.empty()) {
        throw ValidationError("lag set must not be empty");
    }
    for (Eigen::Index lag : lags) {
        if (lag < 1) {
            throw ValidationError("lags must be positive");
        }
    }
}

/// Mean 0, variance 1 (divisor n) copy of x.
inline std::vector<double> standardize(std::span<const double> x) {
    const auto n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double var = 0.0;
    for (double v : x) {
        var += (v - mean) * (v - mean);
    }
    var /= n;
    if (!(var > 0.0) || !std::isfinite(var) || var <= 1e-28 * std::max(1.0, mean * mean)) {
        throw DegenerateVarianceError("series has zero variance");
    }
    const double sd = std::sqrt(var);
    std::vector<double> z(x.size());
    std::transform(x.begin(), x.end(), z.begin(), [&](double v) { return (v - mean) / sd; });
    return z;
}

inline double lag_mean(const std::vector<double>& a, const std::vector<double>& b, std::size_t lag) {
    const std::size_t m = a.size() - lag;
    double s = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        s += a[t] * b[t + lag];
    }
    return s / static_cast<double>(m);
}

inline TestResult finish_test(std::vector<double> per_lag, TestVariant variant) {
    TestResult r;
    r.per_lag = std::move(per_lag);
    r.statistic = std::accumulate(r.per_lag.begin(), r.per_lag.end(), 0.0);
    r.df = static_cast<int>(r.per_lag.size());
    r.p_value = chi2_sf(r.statistic, r.df);
    r.variant = variant;
    return r;
}

inline TestResult ljung_box(std::span<const double> x, std::span<const Eigen::Index> lags, int k_max, bool modified) {
    check_lags(lags);
    if (k_max < 0) {
        throw ValidationError("variance truncation must be non-negative");
    }
    const Eigen::Index max_lag = *std::max_element(lags.begin(), lags.end());
    const std::size_t n = x.size();
    if (n <= static_cast<std::size_t>(max_lag + (modified ? k_max : 0))) {
        throw InsufficientDataError("series of length " + std::to_string(n) + " too short for lag " +
                                    std::to_string(max_lag));
    }
    const std::vector<double> z = standardize(x);
    const auto nd = static_cast<double>(n);
    std::vector<double> per_lag;
    std::vector<Eigen::Index> fallback;
    for (Eigen::Index lag : lags) {
        const auto tau = static_cast<std::size_t>(lag);
        const double r = lag_mean(z, z, tau);
        double v = 1.0;
        if (modified) {
            std::vector<double> prod(n - tau);
            for (std::size_t t = 0; t < n - tau; ++t) {
                prod[t] = z[t] * z[t + tau];
            }
            v = lag_mean(prod, prod, 0);
            const std::size_t k_top = std::min(static_cast<std::size_t>(k_max), n - tau - 1);
            for (std::size_t k = 1; k <= k_top; ++k) {
                v += 2.0 * (nd - static_cast<double>(k)) / nd * lag_mean(prod, prod, k);
            }
            if (!(v > 0.0)) {
                fallback.push_back(lag);
                v = 1.0;
            }
        }
        per_lag.push_back(nd * r * r / v);
    }
    TestResult out = finish_test(std::move(per_lag), modified ? TestVariant::Modified : TestVariant::Classical);
    out.variance_fallback_lags = std::move(fallback);
    return out;
}

}  // namespace detail

/// Ljung-Box statistic with a heteroscedasticity-robust variance per lag.
inline TestResult ljung_box_modified(std::span<const double> x, std::span<const Eigen::Index> lags,
                                     int k_max = kDefaultVarianceTruncation) {
    return detail::ljung_box(x, lags, k_max, true);
}

/// Ljung-Box statistic with unit variance per lag.
inline TestResult ljung_box_classical(std::span<const double> x, std::span<const Eigen::Index> lags) {
    return detail::ljung_box(x, lags, 0, false);
}

/// Test for volatility clustering based on lagged products of squares.
inline TestResult vol_clustering_q(std::span<const double> x, std::span<const Eigen::Index> lags) {
    detail::check_lags(lags);
    const Eigen::Index max_lag = *std::max_element(lags.begin(), lags.end());
    if (x.size() <= static_cast<std::size_t>(max_lag)) {
        throw InsufficientDataError("series of length " + std::to_string(x.size()) + " too short for lag " +
                                    std::to_string(max_lag));
    }
    std::vector<double> sq = detail::standardize(x);
    for (double& v : sq) {
        v *= v;
    }
    const auto nd = static_cast<double>(x.size());
    std::vector<double> per_lag;
    for (Eigen::Index lag : lags) {
        const double d = detail::lag_mean(sq, sq, static_cast<std::size_t>(lag)) - 1.0;
        per_lag.push_back(nd * d * d / 4.0);
    }
    return detail::finish_test(std::move(per_lag), TestVariant::Q);
}

/// Sum over lags of (mean of lagged products of squares - 1)^2 for a standardized copy of x.
inline double volatility_criterion(std::span<const double> x, std::span<const Eigen::Index> lags) {
    detail::check_lags(lags);
    std::vector<double> sq = detail::standardize(x);
    for (double& v : sq) {
        v *= v;
    }
    double total = 0.0;
    for (Eigen::Index lag : lags) {
        if (static_cast<std::size_t>(lag) >= sq.size()) {
            throw InsufficientDataError("series too short for lag " + std::to_string(lag));
        }
        const double d = detail::lag_mean(sq, sq, static_cast<std::size_t>(lag)) - 1.0;
        total += d * d;
    }
    return total;
}

struct OrderingOptions {
    std::vector<Eigen::Index> linear_lags{1, 2, 3, 4, 5};
    std::vector<Eigen::Index> volatility_lags{1, 2, 3};
    double level = 0.05;
    int k_max = kDefaultVarianceTruncation;
    int p_max = 3;
    int q_max = 3;
};

struct ComponentReport {
    Eigen::Index index = 0;
    std::optional<TestResult> linear;
    std::optional<ArmaFit> arma;  ///< present when the linear test rejected
    std::optional<TestResult> volatility;
    double criterion = 0.0;
    std::vector<double> residuals;
    std::optional<std::string> error;  ///< fitting or testing failure; raw series used where possible
};

struct VolatilityOrdering {
    std::vector<Eigen::Index> order;  ///< component indices, most volatile first
    std::vector<ComponentReport> reports;  ///< indexed by original component
};

/// Tests each component for linear autocorrelation, replaces rejected ones by
/// ARMA residuals, and sorts components by descending Q statistic.
inline VolatilityOrdering order_by_volatility(const TimeSeriesMatrix& components, const OrderingOptions& options = {}) {
    VolatilityOrdering out;
    const Eigen::Index p = components.p();
    out.reports.resize(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        ComponentReport& rep = out.reports[static_cast<std::size_t>(j)];
        rep.index = j;
        const std::span<const double> series = components.column(j);
        rep.residuals.assign(series.begin(), series.end());
        try {
            rep.linear = ljung_box_modified(series, options.linear_lags, options.k_max);
        } catch (const Error& e) {
            rep.error = std::string("linear test: ") + e.what();
        }
        if (rep.linear && rep.linear->rejects(options.level)) {
            try {
                rep.arma = arma_select(series, options.p_max, options.q_max);
                rep.residuals = rep.arma->residuals;
            } catch (const Error& e) {
                rep.error = std::string("ARMA fit: ") + e.what();
            }
        }
        try {
            rep.volatility = vol_clustering_q(rep.residuals, options.volatility_lags);
            rep.criterion = volatility_criterion(rep.residuals, options.volatility_lags);
        } catch (const Error& e) {
            rep.error = std::string("volatility test: ") + e.what();
        }
    }
    out.order.resize(static_cast<std::size_t>(p));
    std::iota(out.order.begin(), out.order.end(), Eigen::Index{0});
    auto q_of = [&](Eigen::Index j) {
        const auto& v = out.reports[static_cast<std::size_t>(j)].volatility;
        return v ? v->statistic : -1.0;
    };
    std::stable_sort(out.order.begin(), out.order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return q_of(a) > q_of(b); });
    return out;
}

}  // namespace gsobi
