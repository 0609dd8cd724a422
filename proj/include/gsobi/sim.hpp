#pragma once

// Independent ARMA-GARCH(1,1) sources, mixing, and closed-form GARCH(1,1)
// moments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gsobi/error.hpp"
#include "gsobi/matrixops.hpp"

namespace gsobi {

inline constexpr Eigen::Index kDefaultBurnIn = 2000;

/// splitmix64 finalizer; used to derive well-separated seeds from tuples.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Rest... rest) noexcept {
    std::uint64_t h = mix_seed(seed);
    ((h = mix_seed(h ^ static_cast<std::uint64_t>(rest))), ...);
    return h;
}

/// Seeded standard-normal stream.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double operator()() { return dist_(engine_); }
    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

struct GarchParams {
    double alpha = 0.0;
    double beta = 0.0;
    double omega = 1.0;

    /// omega = 1 - alpha - beta, giving unit unconditional variance.
    static GarchParams unit_variance(double alpha, double beta) {
        return {alpha, beta, 1.0 - alpha - beta};
    }

    [[nodiscard]] bool valid() const noexcept {
        return std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(omega) && alpha >= 0.0 &&
               beta >= 0.0 && omega > 0.0 && alpha + beta < 1.0;
    }

    void validate() const {
        if (!valid()) {
            throw ValidationError("invalid GARCH(1,1) parameters: alpha=" + std::to_string(alpha) +
                                  " beta=" + std::to_string(beta) + " omega=" + std::to_string(omega));
        }
    }

    [[nodiscard]] double unconditional_variance() const { return omega / (1.0 - alpha - beta); }
};

/// Partial autocorrelations of an AR polynomial 1 - sum phi_i z^i
/// (inverse Durbin-Levinson). Returns nullopt when a step hits |r| >= 1.
inline std::optional<std::vector<double>> ar_to_partial_autocorrelations(std::vector<double> phi) {
    const std::size_t p = phi.size();
    std::vector<double> r(p);
    for (std::size_t k = p; k >= 1; --k) {
        const double rk = phi[k - 1];
        if (!(std::abs(rk) < 1.0)) {
            return std::nullopt;
        }
        r[k - 1] = rk;
        std::vector<double> prev(k - 1);
        for (std::size_t i = 1; i < k; ++i) {
            prev[i - 1] = (phi[i - 1] + rk * phi[k - i - 1]) / (1.0 - rk * rk);
        }
        phi = std::move(prev);
    }
    return r;
}

/// Durbin-Levinson map from partial autocorrelations in (-1, 1) to a causal AR polynomial.
inline std::vector<double> partial_autocorrelations_to_ar(const std::vector<double>& r) {
    std::vector<double> phi;
    for (std::size_t k = 1; k <= r.size(); ++k) {
        std::vector<double> next(k);
        next[k - 1] = r[k - 1];
        for (std::size_t i = 1; i < k; ++i) {
            next[i - 1] = phi[i - 1] - r[k - 1] * phi[k - i - 1];
        }
        phi = std::move(next);
    }
    return phi;
}

/// True when 1 - sum phi_i z^i has every root strictly outside the unit circle.
inline bool is_causal(const std::vector<double>& phi) {
    for (double v : phi) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return ar_to_partial_autocorrelations(phi).has_value();
}

struct ArmaParams {
    std::vector<double> phi;
    std::vector<double> theta;

    [[nodiscard]] bool valid() const {
        for (double v : theta) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return is_causal(phi);
    }

    void validate() const {
        if (!valid()) {
            throw ValidationError("ARMA parameters are not causal (AR root on or inside the unit circle)");
        }
    }
};

/// MA(infinity) weights psi_0 = 1, psi_j = theta_j + sum_i phi_i psi_{j-i},
/// accumulated until sum psi_j^2 changes by less than `tol` over a full
/// AR-order window past the MA part (at most `cap` terms).
inline std::vector<double> ma_infinity_weights(const ArmaParams& arma, double tol = 1e-14,
                                               std::size_t cap = 100000) {
    arma.validate();
    const std::size_t p = arma.phi.size();
    const std::size_t q = arma.theta.size();
    const std::size_t window = std::max<std::size_t>(p, 1);
    std::vector<double> psi{1.0};
    std::size_t quiet = 0;
    for (std::size_t j = 1; j < cap; ++j) {
        double v = j <= q ? arma.theta[j - 1] : 0.0;
        for (std::size_t i = 1; i <= p && i <= j; ++i) {
            v += arma.phi[i - 1] * psi[j - i];
        }
        psi.push_back(v);
        quiet = (j > q && v * v < tol) ? quiet + 1 : 0;
        if (quiet >= window) {
            break;
        }
    }
    return psi;
}

inline double ma_infinity_square_sum(const ArmaParams& arma) {
    double s = 0.0;
    for (double v : ma_infinity_weights(arma)) {
        s += v * v;
    }
    return s;
}

struct SourceComponent {
    std::optional<ArmaParams> arma;
    std::optional<GarchParams> garch;
};

struct SourceSpec {
    std::vector<SourceComponent> components;
    Eigen::Index n = 0;
    Eigen::Index burn_in = kDefaultBurnIn;
    std::uint64_t seed = 0;

    void validate() const {
        if (components.empty()) {
            throw ValidationError("source spec has no components");
        }
        if (n < 2) {
            throw InsufficientDataError("source spec needs n >= 2");
        }
        if (burn_in < 0) {
            throw ValidationError("burn-in must be non-negative");
        }
        for (const auto& c : components) {
            if (!c.arma && !c.garch) {
                throw ValidationError("each source component needs ARMA or GARCH parameters");
            }
            if (c.arma) {
                c.arma->validate();
            }
            if (c.garch) {
                c.garch->validate();
            }
        }
    }
};

namespace detail {

/// GARCH(1,1) innovations started at sigma^2 = omega / (1 - alpha - beta);
/// the first `burn_in` draws are generated and discarded.
inline std::vector<double> garch_innovations(const GarchParams& g, Eigen::Index n, Eigen::Index burn_in,
                                             NormalStream& rng) {
    std::vector<double> out(static_cast<std::size_t>(n));
    double sigma2 = g.unconditional_variance();
    const Eigen::Index total = n + burn_in;
    for (Eigen::Index t = 0; t < total; ++t) {
        const double z = std::sqrt(sigma2) * rng();
        if (t >= burn_in) {
            out[static_cast<std::size_t>(t - burn_in)] = z;
        }
        sigma2 = g.omega + g.alpha * z * z + g.beta * sigma2;
    }
    return out;
}

}  // namespace detail

inline std::vector<double> garch11_simulate(const GarchParams& g, Eigen::Index n,
                                            Eigen::Index burn_in, std::uint64_t seed) {
    g.validate();
    if (n < 1) {
        throw InsufficientDataError("garch11_simulate needs n >= 1");
    }
    if (burn_in < 0) {
        throw ValidationError("burn-in must be non-negative");
    }
    NormalStream rng(seed);
    return detail::garch_innovations(g, n, burn_in, rng);
}

/// Component j uses the RNG stream seeded with spec.seed + j. Each component
/// is scaled to unit stationary variance.
inline TimeSeriesMatrix armagarch_simulate(const SourceSpec& spec) {
    spec.validate();
    const Eigen::Index p = static_cast<Eigen::Index>(spec.components.size());
    Eigen::MatrixXd out(spec.n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const SourceComponent& comp = spec.components[static_cast<std::size_t>(j)];
        const GarchParams g = comp.garch.value_or(GarchParams{0.0, 0.0, 1.0});
        NormalStream rng(spec.seed + static_cast<std::uint64_t>(j));
        if (!comp.arma) {
            const auto z = detail::garch_innovations(g, spec.n, spec.burn_in, rng);
            const double scale = std::sqrt(g.unconditional_variance());
            for (Eigen::Index t = 0; t < spec.n; ++t) {
                out(t, j) = scale == 1.0 ? z[static_cast<std::size_t>(t)]
                                         : z[static_cast<std::size_t>(t)] / scale;
            }
            continue;
        }
        const ArmaParams& arma = *comp.arma;
        const Eigen::Index total = spec.n + spec.burn_in;
        const auto z = detail::garch_innovations(g, total, 0, rng);
        std::vector<double> x(static_cast<std::size_t>(total), 0.0);
        for (Eigen::Index t = 0; t < total; ++t) {
            double v = z[static_cast<std::size_t>(t)];
            for (std::size_t i = 1; i <= arma.phi.size() && static_cast<Eigen::Index>(i) <= t; ++i) {
                v += arma.phi[i - 1] * x[static_cast<std::size_t>(t) - i];
            }
            for (std::size_t i = 1; i <= arma.theta.size() && static_cast<Eigen::Index>(i) <= t; ++i) {
                v += arma.theta[i - 1] * z[static_cast<std::size_t>(t) - i];
            }
            x[static_cast<std::size_t>(t)] = v;
        }
        const double scale = std::sqrt(ma_infinity_square_sum(arma) * g.unconditional_variance());
        for (Eigen::Index t = 0; t < spec.n; ++t) {
            out(t, j) = x[static_cast<std::size_t>(t + spec.burn_in)] / scale;
        }
    }
    return TimeSeriesMatrix(std::move(out));
}

/// Row-wise x_t = Omega s_t.
inline TimeSeriesMatrix mix(const TimeSeriesMatrix& s, const Eigen::MatrixXd& omega) {
    if (omega.rows() != s.p() || omega.cols() != s.p()) {
        throw ValidationError("mixing matrix must be p x p with p = " + std::to_string(s.p()));
    }
    if (!omega.allFinite()) {
        throw ValidationError("mixing matrix has non-finite entries");
    }
    // Hadamard's bound: |det| <= prod of row norms.
    const double bound = omega.rowwise().norm().prod();
    if (!(bound > 0.0) || std::abs(omega.determinant()) <= 1e-12 * bound) {
        throw ValidationError("mixing matrix is singular");
    }
    return TimeSeriesMatrix(Eigen::MatrixXd(s.data() * omega.transpose()));
}

/// Finite moment of the given even order (2, 4, 6, 8) for GARCH(1,1) with Gaussian errors.
inline bool moment_condition(const GarchParams& g, int order) {
    const double a = g.alpha;
    const double b = g.beta;
    switch (order) {
        case 2:
            return a + b < 1.0;
        case 4:
            return 3 * a * a + 2 * a * b + b * b < 1.0;
        case 6:
            return 15 * a * a * a + 9 * a * a * b + 3 * a * b * b + b * b * b < 1.0;
        case 8:
            return b * b * b * b + 4 * b * b * b * a + 18 * b * b * a * a + 60 * b * a * a * a +
                       105 * a * a * a * a <
                   1.0;
        default:
            throw ValidationError("moment order must be one of 2, 4, 6, 8");
    }
}

enum class ZMoment {
    E4,       ///< E[z_t^4]
    E6,       ///< E[z_t^6]
    Cross22,  ///< E[z_t^2 z_{t+tau}^2]
    Cross42,  ///< E[z_t^4 z_{t+tau}^2]
    Cross24,  ///< E[z_t^2 z_{t+tau}^4]
};

/// Closed-form moments of the GARCH(1,1) innovation z_t = sigma_t eps_t.
///
/// All lagged moments follow from conditioning on F_{t+tau-1}:
///   E[z_t^2 sigma^2_{t+tau}] = omega m2 + (alpha + beta) E[z_t^2 sigma^2_{t+tau-1}],
///   E[z_t^2 sigma^4_{t+tau}] = omega^2 m2 + 2 omega (alpha + beta) E[z_t^2 z_{t+tau-1}^2]
///                              + (3 alpha^2 + 2 alpha beta + beta^2) E[z_t^2 sigma^4_{t+tau-1}],
/// with m2 = omega / (1 - alpha - beta) the unconditional variance (1 under the
/// unit-variance convention).
inline double garch_z_moment(const GarchParams& g, ZMoment kind, int tau = 0) {
    g.validate();
    const bool cross = kind == ZMoment::Cross22 || kind == ZMoment::Cross42 || kind == ZMoment::Cross24;
    if (cross && tau < 1) {
        throw ValidationError("lagged GARCH moments need tau >= 1");
    }
    const int needed = (kind == ZMoment::E4 || kind == ZMoment::Cross22) ? 4 : 6;
    if (!moment_condition(g, needed)) {
        throw DivergentMomentError("GARCH(1,1) moment of order " + std::to_string(needed) +
                                   " is infinite for alpha=" + std::to_string(g.alpha) +
                                   " beta=" + std::to_string(g.beta));
    }
    const double a = g.alpha;
    const double b = g.beta;
    const double w = g.omega;
    const double m2 = g.unconditional_variance();
    const double k4 = 3 * a * a + 2 * a * b + b * b;
    const double k6 = 15 * a * a * a + 9 * a * a * b + 3 * a * b * b + b * b * b;

    const double sigma4 = (w * w + 2 * w * (a + b) * m2) / (1.0 - k4);
    const double e4 = 3.0 * sigma4;
    if (kind == ZMoment::E4) {
        return e4;
    }
    if (kind == ZMoment::Cross22) {
        double v = w * m2 + (a + b / 3.0) * e4;
        for (int k = 2; k <= tau; ++k) {
            v = w * m2 + (a + b) * v;
        }
        return v;
    }

    const double sigma6 = (w * w * w + 3 * w * w * (a + b) * m2 + 3 * w * k4 * sigma4) / (1.0 - k6);
    const double e6 = 15.0 * sigma6;
    switch (kind) {
        case ZMoment::E6:
            return e6;
        case ZMoment::Cross42: {
            double v = w * e4 + (a + b / 5.0) * e6;
            for (int k = 2; k <= tau; ++k) {
                v = w * e4 + (a + b) * v;
            }
            return v;
        }
        case ZMoment::Cross24: {
            // c = E[z_t^2 sigma^4_{t+k}], cross22 = E[z_t^2 z^2_{t+k}] for the current k.
            double c = w * w * m2 + 2 * w * (a + b / 3.0) * e4 +
                       (a * a + 2 * a * b / 5.0 + b * b / 15.0) * e6;
            double cross22 = w * m2 + (a + b / 3.0) * e4;
            for (int k = 2; k <= tau; ++k) {
                c = w * w * m2 + 2 * w * (a + b) * cross22 + k4 * c;
                cross22 = w * m2 + (a + b) * cross22;
            }
            return 3.0 * c;
        }
        default:
            break;
    }
    throw ValidationError("unknown GARCH moment kind");
}

}  // namespace gsobi
