#pragma once

// Unmixing-matrix estimators for stationary time series: AMUSE, SOBI, vSOBI,
// gSOBI and PVC. Every estimator whitens the data first and then looks for
// an orthogonal rotation U, so that Gamma_hat = U S^{-1/2} satisfies
// Gamma_hat S Gamma_hat^T = I.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gsobi/error.hpp"
#include "gsobi/matrixops.hpp"
#include "gsobi/sim.hpp"

namespace gsobi {

enum class Method { Amuse, Sobi, VSobi, GSobi, Pvc };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::Amuse:
            return "amuse";
        case Method::Sobi:
            return "sobi";
        case Method::VSobi:
            return "vsobi";
        case Method::GSobi:
            return "gsobi";
        case Method::Pvc:
            return "pvc";
    }
    return "unknown";
}

inline Method parse_method(std::string_view name) {
    for (Method m : {Method::Amuse, Method::Sobi, Method::VSobi, Method::GSobi, Method::Pvc}) {
        if (name == to_string(m)) {
            return m;
        }
    }
    throw ValidationError("unknown method '" + std::string(name) + "'");
}

/// Lags of the linear part (T1), of the quadratic part (T2) and the weight b of the linear part.
struct LagSets {
    std::vector<Eigen::Index> linear;
    std::vector<Eigen::Index> quadratic;
    double b = 0.9;

    void validate(Eigen::Index n) const {
        if (!(b >= 0.0 && b <= 1.0)) {
            throw ValidationError("weight b must lie in [0, 1]");
        }
        if (b > 0.0 && linear.empty()) {
            throw ValidationError("linear lag set must be nonempty when b > 0");
        }
        if (b < 1.0 && quadratic.empty()) {
            throw ValidationError("quadratic lag set must be nonempty when b < 1");
        }
        for (const auto* set : {&linear, &quadratic}) {
            for (Eigen::Index tau : *set) {
                if (tau < 1) {
                    throw ValidationError("lags must be positive");
                }
                if (tau >= n) {
                    throw LagTooLargeError("lag " + std::to_string(tau) + " is not smaller than n = " +
                                           std::to_string(n));
                }
            }
        }
    }
};

/// 1, 2, ..., k.
inline std::vector<Eigen::Index> lag_range(Eigen::Index k) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 1; i <= k; ++i) {
        out.push_back(i);
    }
    return out;
}

struct UnmixingEstimate {
    Eigen::MatrixXd gamma;  ///< rows are unmixing vectors
    Eigen::VectorXd mean;
    Method method = Method::GSobi;
    int iterations = 0;
    int restarts = 0;
    bool converged = true;
    double criterion = 0.0;  ///< final objective value
    std::optional<Eigen::VectorXd> eigenvalues;
    /// max_{j<l} |u_j^T T(u_l) - u_l^T T(u_j)| in whitened coordinates (gSOBI only).
    double equation_residual = 0.0;
    /// Smallest pairwise separation of the components under the method's criterion.
    double identifiability_gap = std::numeric_limits<double>::infinity();
    bool near_unidentifiable = false;

    /// Estimated sources (x_t - mean) Gamma^T.
    [[nodiscard]] TimeSeriesMatrix apply(const TimeSeriesMatrix& x) const {
        if (x.p() != gamma.cols()) {
            throw ValidationError("data dimension does not match the unmixing matrix");
        }
        Eigen::MatrixXd s = (x.data().rowwise() - mean.transpose()) * gamma.transpose();
        return TimeSeriesMatrix(std::move(s));
    }
};

struct GsobiOptions {
    std::optional<Eigen::MatrixXd> init;  ///< orthogonal rotation in whitened coordinates
    double tol = 1e-6;
    int max_iter = 1000;
    int max_restarts = 10;
    std::uint64_t seed = 0;  ///< stream for random restarts
};

namespace detail {

inline Eigen::MatrixXd random_orthogonal(Eigen::Index p, std::uint64_t seed) {
    NormalStream rng(seed);
    Eigen::MatrixXd a(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < p; ++i) {
            a(i, j) = rng();
        }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p, p);
    // Fix column signs against diag(R) so the draw is Haar distributed.
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (r(j, j) < 0.0) {
            q.col(j) *= -1.0;
        }
    }
    return q;
}

/// Symmetric orthogonalization (T T^T)^{-1/2} T. Returns nullopt when T is rank deficient.
inline std::optional<Eigen::MatrixXd> polar_rows(const Eigen::MatrixXd& t) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t * t.transpose());
    const Eigen::VectorXd& d = eig.eigenvalues();
    if (!(d.maxCoeff() > 0.0) || d.minCoeff() <= 1e-12 * d.maxCoeff() || !t.allFinite()) {
        return std::nullopt;
    }
    const Eigen::MatrixXd inv_sqrt =
        eig.eigenvectors() * d.array().rsqrt().matrix().asDiagonal() * eig.eigenvectors().transpose();
    return Eigen::MatrixXd(inv_sqrt * t);
}

/// Sample lag moments of a univariate series y:
/// mu_tau = mean(y_t y_{t+tau}), nu_tau = mean(y_t^2 y_{t+tau}^2) - 1 (sums over n - tau terms).
inline double lag_product_mean(const Eigen::VectorXd& y, Eigen::Index tau) {
    const Eigen::Index m = y.size() - tau;
    return y.head(m).dot(y.tail(m)) / static_cast<double>(m);
}

inline double lag_square_product_mean(const Eigen::VectorXd& y, Eigen::Index tau) {
    const Eigen::Index m = y.size() - tau;
    return y.head(m).cwiseAbs2().dot(y.tail(m).cwiseAbs2()) / static_cast<double>(m) - 1.0;
}

struct GsobiMap {
    Eigen::MatrixXd t;             ///< row j is T(u_j)^T
    Eigen::VectorXd contribution;  ///< per-component objective summand
};

/// Sample analogues of T(u) = b T^s(u) + (1 - b) T^v(u) for each row u of `u`,
/// evaluated on whitened data z.
inline GsobiMap gsobi_map(const Eigen::MatrixXd& z, const Eigen::MatrixXd& u, const LagSets& lags) {
    const Eigen::Index n = z.rows();
    const Eigen::Index p = z.cols();
    const Eigen::MatrixXd y_all = z * u.transpose();
    GsobiMap out{Eigen::MatrixXd::Zero(p, p), Eigen::VectorXd::Zero(p)};
    for (Eigen::Index j = 0; j < p; ++j) {
        const Eigen::VectorXd y = y_all.col(j);
        Eigen::VectorXd ts = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd tv = Eigen::VectorXd::Zero(p);
        double lin = 0.0;
        double quad = 0.0;
        if (lags.b > 0.0) {
            for (Eigen::Index tau : lags.linear) {
                const Eigen::Index m = n - tau;
                const auto ya = y.head(m);
                const auto yb = y.tail(m);
                const double mu = ya.dot(yb) / static_cast<double>(m);
                const Eigen::VectorXd v =
                    (z.topRows(m).transpose() * yb + z.bottomRows(m).transpose() * ya) / static_cast<double>(m);
                ts += mu * v;
                lin += mu * mu;
            }
        }
        if (lags.b < 1.0) {
            for (Eigen::Index tau : lags.quadratic) {
                const Eigen::Index m = n - tau;
                const Eigen::ArrayXd ya = y.head(m).array();
                const Eigen::ArrayXd yb = y.tail(m).array();
                const double nu = (ya.square() * yb.square()).sum() / static_cast<double>(m) - 1.0;
                const Eigen::VectorXd wa = (ya * yb.square()).matrix();
                const Eigen::VectorXd wb = (ya.square() * yb).matrix();
                const Eigen::VectorXd v =
                    (z.topRows(m).transpose() * wa + z.bottomRows(m).transpose() * wb) / static_cast<double>(m);
                tv += 2.0 * nu * v;
                quad += nu * nu;
            }
        }
        out.t.row(j) = (lags.b * ts + (1.0 - lags.b) * tv).transpose();
        out.contribution[j] = lags.b * lin + (1.0 - lags.b) * quad;
    }
    return out;
}

/// max_{j<l} |u_j^T T(u_l) - u_l^T T(u_j)|.
inline double estimating_equation_residual(const Eigen::MatrixXd& u, const Eigen::MatrixXd& t) {
    const Eigen::MatrixXd a = u * t.transpose();  // a(j, l) = u_j . T(u_l)
    return (a - a.transpose()).cwiseAbs().maxCoeff();
}

/// Smallest pairwise separation of components y (columns) in the sense of
/// the gSOBI identifiability condition, and the level expected for pairs of
/// iid Gaussian components (twice the null mean of each squared term).
inline std::pair<double, double> identifiability_gap(const Eigen::MatrixXd& y, const LagSets& lags) {
    const Eigen::Index p = y.cols();
    const auto n = static_cast<double>(y.rows());
    const double threshold =
        (8.0 * lags.b * static_cast<double>(lags.linear.size()) +
         128.0 * (1.0 - lags.b) * static_cast<double>(lags.quadratic.size())) /
        n;
    if (p < 2) {
        return {std::numeric_limits<double>::infinity(), threshold};
    }
    std::vector<std::vector<double>> mu_lin(static_cast<std::size_t>(p));
    std::vector<std::vector<double>> mu_quad(static_cast<std::size_t>(p));
    std::vector<std::vector<double>> nu(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        const Eigen::VectorXd col = y.col(j);
        for (Eigen::Index tau : lags.linear) {
            mu_lin[static_cast<std::size_t>(j)].push_back(lag_product_mean(col, tau));
        }
        for (Eigen::Index tau : lags.quadratic) {
            mu_quad[static_cast<std::size_t>(j)].push_back(lag_product_mean(col, tau));
            nu[static_cast<std::size_t>(j)].push_back(lag_square_product_mean(col, tau));
        }
    }
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < static_cast<std::size_t>(p); ++j) {
        for (std::size_t l = j + 1; l < static_cast<std::size_t>(p); ++l) {
            double lin = 0.0;
            for (std::size_t k = 0; k < lags.linear.size(); ++k) {
                const double d = mu_lin[j][k] - mu_lin[l][k];
                lin += d * d;
            }
            double quad = 0.0;
            for (std::size_t k = 0; k < lags.quadratic.size(); ++k) {
                quad += nu[j][k] * nu[j][k] + nu[l][k] * nu[l][k] -
                        2.0 * (nu[j][k] + nu[l][k]) * mu_quad[j][k] * mu_quad[l][k];
            }
            gap = std::min(gap, 2.0 * lags.b * lin + 4.0 * (1.0 - lags.b) * quad);
        }
    }
    return {gap, threshold};
}

/// Joint diagonalizer of symmetrized autocovariances of whitened data.
inline JointDiagonalization sobi_rotation(const TimeSeriesMatrix& z, const std::vector<Eigen::Index>& lags) {
    std::vector<SymmetricMatrix> mats;
    mats.reserve(lags.size());
    for (Eigen::Index tau : lags) {
        mats.push_back(symmetric_autocovariance(z, tau));
    }
    return joint_diagonalize(mats);
}

inline void finish_estimate(UnmixingEstimate& est, const Eigen::MatrixXd& rotation,
                            const WhiteningResult& w) {
    est.gamma = rotation * w.transform;
    fix_row_signs(est.gamma);
    est.mean = w.mean;
}

inline void set_gap(UnmixingEstimate& est, const TimeSeriesMatrix& z, const Eigen::MatrixXd& rotation,
                    const LagSets& lags) {
    const Eigen::MatrixXd y = z.data() * rotation.transpose();
    const auto [gap, threshold] = identifiability_gap(y, lags);
    est.identifiability_gap = gap;
    est.near_unidentifiable = gap < threshold;
}

}  // namespace detail

/// Lag-l generalized kurtosis matrix sum_{i,j} C_ij C_ij^T with
/// C_ij = cov(x_t x_t^T, x_{t-l,i} x_{t-l,j}); i and j both run over 1..p.
inline SymmetricMatrix kurtosis_matrix(const TimeSeriesMatrix& xst, Eigen::Index lag) {
    if (lag < 1) {
        throw ValidationError("kurtosis matrix lag must be positive");
    }
    if (lag >= xst.n()) {
        throw LagTooLargeError("lag " + std::to_string(lag) + " is not smaller than n = " +
                               std::to_string(xst.n()));
    }
    const Eigen::Index p = xst.p();
    const Eigen::Index m = xst.n() - lag;
    const auto current = xst.data().bottomRows(m);
    const auto lagged = xst.data().topRows(m);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = i; j < p; ++j) {
            Eigen::ArrayXd y = lagged.col(i).array() * lagged.col(j).array();
            y -= y.mean();
            y /= static_cast<double>(m);
            const Eigen::MatrixXd c = current.transpose() * (y.matrix().asDiagonal() * current);
            g += (i == j ? 1.0 : 2.0) * (c * c.transpose());
        }
    }
    return SymmetricMatrix::symmetrize(g);
}

inline UnmixingEstimate amuse(const TimeSeriesMatrix& x, Eigen::Index tau = 1) {
    if (tau < 1) {
        throw ValidationError("AMUSE lag must be positive");
    }
    if (tau >= x.n()) {
        throw LagTooLargeError("AMUSE lag is not smaller than n");
    }
    const WhiteningResult w = whiten(x);
    const EigenDecomposition eig = eigen_symmetric(symmetric_autocovariance(w.whitened, tau));
    UnmixingEstimate est;
    est.method = Method::Amuse;
    const Eigen::MatrixXd rotation = eig.vectors.transpose();
    detail::finish_estimate(est, rotation, w);
    est.eigenvalues = eig.values;
    est.criterion = eig.values.squaredNorm();
    detail::set_gap(est, w.whitened, rotation, LagSets{{tau}, {}, 1.0});
    return est;
}

inline UnmixingEstimate sobi(const TimeSeriesMatrix& x, const std::vector<Eigen::Index>& lags) {
    LagSets sets{lags, {}, 1.0};
    sets.validate(x.n());
    const WhiteningResult w = whiten(x);
    const JointDiagonalization jd = detail::sobi_rotation(w.whitened, lags);
    UnmixingEstimate est;
    est.method = Method::Sobi;
    est.iterations = jd.sweeps;
    detail::finish_estimate(est, jd.rotation, w);
    est.criterion = detail::gsobi_map(w.whitened.data(), jd.rotation, sets).contribution.sum();
    detail::set_gap(est, w.whitened, jd.rotation, sets);
    return est;
}

namespace detail {

inline Eigen::MatrixXd pvc_start(const TimeSeriesMatrix& z, const std::vector<Eigen::Index>& quadratic) {
    const Eigen::Index m = quadratic.empty() ? 1 : *std::max_element(quadratic.begin(), quadratic.end());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(z.p(), z.p());
    for (Eigen::Index l = 1; l <= m; ++l) {
        g += kurtosis_matrix(z, l).matrix();
    }
    return eigen_symmetric(SymmetricMatrix::symmetrize(g)).vectors.transpose();
}

}  // namespace detail

/// gSOBI by fixed-point iteration U <- (T T^T)^{-1/2} T on the whitened data.
///
/// Rows of each new iterate are sign-aligned with the previous one, since
/// T is odd in u. Iteration stops once the max-abs change of U is below
/// `tol` and the estimating equations hold to `tol`. Without an explicit
/// init the start is the SOBI rotation on the linear lags (b > 0) or the
/// PVC rotation with m = max(T2) (b = 0, or SOBI not converging);
/// rank-deficient T triggers a
/// restart from a random orthogonal matrix. Non-convergence returns the
/// iterate with the largest objective and converged = false.
inline UnmixingEstimate gsobi(const TimeSeriesMatrix& x, const LagSets& lags, const GsobiOptions& options = {}) {
    lags.validate(x.n());
    const WhiteningResult w = whiten(x);
    const Eigen::MatrixXd& z = w.whitened.data();
    const Eigen::Index p = x.p();

    UnmixingEstimate est;
    est.method = Method::GSobi;

    Eigen::MatrixXd u;
    if (options.init) {
        if (options.init->rows() != p || options.init->cols() != p) {
            throw ValidationError("initial rotation must be p x p");
        }
        auto polar = detail::polar_rows(*options.init);
        if (!polar) {
            throw ValidationError("initial rotation is singular");
        }
        u = *polar;
    } else if (p == 1) {
        u = Eigen::MatrixXd::Identity(1, 1);
    } else {
        if (lags.b > 0.0) {
            try {
                u = detail::sobi_rotation(w.whitened, lags.linear).rotation;
            } catch (const ConvergenceError&) {
                u.resize(0, 0);
            }
        }
        if (u.size() == 0) {
            u = detail::pvc_start(w.whitened, lags.quadratic);
        }
    }

    Eigen::MatrixXd best_u = u;
    double best_objective = -std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
    int restarts = 0;
    if (p == 1) {
        converged = true;
    }
    while (!converged && iterations < options.max_iter) {
        ++iterations;
        const detail::GsobiMap map = detail::gsobi_map(z, u, lags);
        const double objective = map.contribution.sum();
        if (objective > best_objective) {
            best_objective = objective;
            best_u = u;
        }
        auto next = detail::polar_rows(map.t);
        if (!next) {
            if (restarts >= options.max_restarts) {
                throw ConvergenceError("gSOBI map stayed rank deficient after " + std::to_string(restarts) +
                                           " random restarts",
                                       objective);
            }
            ++restarts;
            u = detail::random_orthogonal(p, derive_seed(options.seed, restarts));
            continue;
        }
        Eigen::MatrixXd u_new = std::move(*next);
        for (Eigen::Index j = 0; j < p; ++j) {
            if (u_new.row(j).dot(u.row(j)) < 0.0) {
                u_new.row(j) *= -1.0;
            }
        }
        const double change = (u_new - u).cwiseAbs().maxCoeff();
        const double residual = detail::estimating_equation_residual(u, map.t);
        u = std::move(u_new);
        if (change < options.tol && residual <= options.tol) {
            converged = true;
        }
    }
    if (!converged) {
        u = best_u;
    }

    const detail::GsobiMap final_map = detail::gsobi_map(z, u, lags);
    const auto order = descending_order(final_map.contribution);
    const Eigen::MatrixXd rotation = permute_rows(u, order);
    detail::finish_estimate(est, rotation, w);
    est.iterations = iterations;
    est.restarts = restarts;
    est.converged = converged;
    est.criterion = final_map.contribution.sum();
    est.equation_residual = p > 1 ? detail::estimating_equation_residual(u, final_map.t) : 0.0;
    detail::set_gap(est, w.whitened, rotation, lags);
    return est;
}

/// gSOBI with b = 0 (quadratic autocovariances only).
inline UnmixingEstimate vsobi(const TimeSeriesMatrix& x, const std::vector<Eigen::Index>& lags,
                              const GsobiOptions& options = {}) {
    UnmixingEstimate est = gsobi(x, LagSets{{}, lags, 0.0}, options);
    est.method = Method::VSobi;
    return est;
}

/// Principal volatility components: eigenvectors of the cumulative
/// generalized kurtosis matrix G_m of the whitened data, ordered by
/// descending eigenvalue.
inline UnmixingEstimate pvc(const TimeSeriesMatrix& x, Eigen::Index m = 5) {
    if (m < 1) {
        throw ValidationError("PVC needs m >= 1");
    }
    if (m >= x.n()) {
        throw LagTooLargeError("PVC lag m is not smaller than n");
    }
    const WhiteningResult w = whiten(x);
    const Eigen::Index p = x.p();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index l = 1; l <= m; ++l) {
        g += kurtosis_matrix(w.whitened, l).matrix();
    }
    const EigenDecomposition eig = eigen_symmetric(SymmetricMatrix::symmetrize(g));
    UnmixingEstimate est;
    est.method = Method::Pvc;
    detail::finish_estimate(est, eig.vectors.transpose(), w);
    est.eigenvalues = eig.values;
    est.criterion = eig.values.sum();
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k + 1 < p; ++k) {
        gap = std::min(gap, eig.values[k] - eig.values[k + 1]);
    }
    est.identifiability_gap = gap;
    // Null level: E[G_m] diagonal for iid Gaussian data is m p (p + 1)^2 / n.
    const double null_level = static_cast<double>(m) * static_cast<double>(p * (p + 1) * (p + 1)) /
                              static_cast<double>(x.n());
    est.near_unidentifiable = gap < std::max(1e-8, null_level);
    return est;
}

}  // namespace gsobi
