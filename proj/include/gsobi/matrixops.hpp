#pragma once

// Dense symmetric-matrix primitives shared by every estimator: sample
// (auto)covariances, inverse square roots, whitening and orthogonal joint
// diagonalization by cyclic Jacobi rotations.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gsobi/error.hpp"

namespace gsobi {

/// n x p real matrix of observations; rows index time, columns index series.
class TimeSeriesMatrix {
public:
    TimeSeriesMatrix() = default;

    explicit TimeSeriesMatrix(Eigen::MatrixXd data) : data_(std::move(data)) {
        if (data_.cols() < 1) {
            throw ValidationError("time series matrix needs at least one column");
        }
        if (data_.rows() < 2) {
            throw InsufficientDataError("time series matrix needs at least two rows, got " +
                                        std::to_string(data_.rows()));
        }
        if (!data_.allFinite()) {
            throw ValidationError("time series matrix contains non-finite entries");
        }
    }

    [[nodiscard]] Eigen::Index n() const noexcept { return data_.rows(); }
    [[nodiscard]] Eigen::Index p() const noexcept { return data_.cols(); }
    [[nodiscard]] const Eigen::MatrixXd& data() const noexcept { return data_; }

    /// Column j as a contiguous span (storage is column-major).
    [[nodiscard]] std::span<const double> column(Eigen::Index j) const {
        return {data_.col(j).data(), static_cast<std::size_t>(data_.rows())};
    }

    [[nodiscard]] double operator()(Eigen::Index t, Eigen::Index j) const { return data_(t, j); }

private:
    Eigen::MatrixXd data_;
};

/// Real symmetric p x p matrix.
class SymmetricMatrix {
public:
    static constexpr double kSymmetryTolerance = 1e-12;

    SymmetricMatrix() = default;

    explicit SymmetricMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols()) {
            throw ValidationError("symmetric matrix must be square");
        }
        if (!m_.allFinite()) {
            throw ValidationError("symmetric matrix contains non-finite entries");
        }
        const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
        if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
            throw ValidationError("matrix is not symmetric");
        }
    }

    /// (M + M^T) / 2 of an arbitrary square matrix.
    static SymmetricMatrix symmetrize(const Eigen::MatrixXd& m) {
        if (m.rows() != m.cols()) {
            throw ValidationError("symmetrize needs a square matrix");
        }
        return SymmetricMatrix(Eigen::MatrixXd(0.5 * (m + m.transpose())));
    }

    [[nodiscard]] Eigen::Index size() const noexcept { return m_.rows(); }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return m_; }
    [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
    Eigen::MatrixXd m_;
};

struct EigenDecomposition {
    Eigen::VectorXd values;   ///< descending
    Eigen::MatrixXd vectors;  ///< column k belongs to values[k]
};

struct WhiteningResult {
    TimeSeriesMatrix whitened;
    Eigen::MatrixXd transform;  ///< S^{-1/2}
    Eigen::VectorXd mean;
};

struct JointDiagonalizationOptions {
    double tol = 1e-10;  ///< smallest Givens angle (|sin|) still applied
    int max_sweeps = 100;
};

struct JointDiagonalization {
    Eigen::MatrixXd rotation;  ///< orthogonal U; U M_k U^T approximately diagonal
    int sweeps = 0;
    double off_diagonal_mass = 0.0;
};

inline Eigen::VectorXd sample_mean(const TimeSeriesMatrix& x) {
    return x.data().colwise().mean().transpose();
}

inline Eigen::MatrixXd centered(const TimeSeriesMatrix& x) {
    return x.data().rowwise() - x.data().colwise().mean();
}

/// Covariance with divisor n.
inline SymmetricMatrix sample_covariance(const TimeSeriesMatrix& x) {
    if (x.n() < 2) {
        throw InsufficientDataError("sample covariance needs n >= 2");
    }
    const Eigen::MatrixXd xc = centered(x);
    const Eigen::MatrixXd s = (xc.transpose() * xc) / static_cast<double>(x.n());
    return SymmetricMatrix::symmetrize(s);
}

/// Lag-tau autocovariance (1/(n-tau)) sum_t (x_t - xbar)(x_{t+tau} - xbar)^T.
inline Eigen::MatrixXd autocovariance(const TimeSeriesMatrix& x, Eigen::Index tau) {
    if (tau < 1) {
        throw ValidationError("autocovariance lag must be positive");
    }
    if (tau >= x.n()) {
        throw LagTooLargeError("lag " + std::to_string(tau) + " is not smaller than n = " +
                               std::to_string(x.n()));
    }
    const Eigen::MatrixXd xc = centered(x);
    const Eigen::Index m = x.n() - tau;
    return (xc.topRows(m).transpose() * xc.bottomRows(m)) / static_cast<double>(m);
}

inline SymmetricMatrix symmetric_autocovariance(const TimeSeriesMatrix& x, Eigen::Index tau) {
    return SymmetricMatrix::symmetrize(autocovariance(x, tau));
}

/// Eigenvalues in descending order with matching eigenvector columns.
inline EigenDecomposition eigen_symmetric(const SymmetricMatrix& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.matrix());
    if (solver.info() != Eigen::Success) {
        throw NumericalError("symmetric eigendecomposition failed");
    }
    const Eigen::Index p = a.size();
    EigenDecomposition out{Eigen::VectorXd(p), Eigen::MatrixXd(p, p)};
    for (Eigen::Index k = 0; k < p; ++k) {
        out.values[k] = solver.eigenvalues()[p - 1 - k];
        out.vectors.col(k) = solver.eigenvectors().col(p - 1 - k);
    }
    return out;
}

inline SymmetricMatrix inv_sqrt(const SymmetricMatrix& a) {
    const EigenDecomposition eig = eigen_symmetric(a);
    const double largest = eig.values.maxCoeff();
    const double smallest = eig.values.minCoeff();
    if (!(largest > 0.0) || smallest <= 1e-12 * largest) {
        throw SingularMatrixError("matrix is not positive definite: eigenvalue " +
                                      std::to_string(smallest) + " against largest " +
                                      std::to_string(largest),
                                  smallest);
    }
    const Eigen::VectorXd d = eig.values.array().rsqrt();
    const Eigen::MatrixXd b = eig.vectors * d.asDiagonal() * eig.vectors.transpose();
    return SymmetricMatrix::symmetrize(b);
}

inline WhiteningResult whiten(const TimeSeriesMatrix& x) {
    const SymmetricMatrix cov = sample_covariance(x);
    const SymmetricMatrix transform = inv_sqrt(cov);
    Eigen::MatrixXd z = centered(x) * transform.matrix();
    return {TimeSeriesMatrix(std::move(z)), transform.matrix(), sample_mean(x)};
}

/// Sum of squared off-diagonal entries over all matrices.
inline double off_diagonal_mass(std::span<const Eigen::MatrixXd> matrices) {
    double mass = 0.0;
    for (const auto& m : matrices) {
        mass += m.squaredNorm() - m.diagonal().squaredNorm();
    }
    return mass;
}

/// Flips each row so that its largest-magnitude entry is positive.
/// Ties go to the lowest column index.
inline void fix_row_signs(Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < m.cols(); ++j) {
            if (std::abs(m(i, j)) > std::abs(m(i, best))) {
                best = j;
            }
        }
        if (m(i, best) < 0.0) {
            m.row(i) *= -1.0;
        }
    }
}

/// Reorders rows of m by the given permutation: row k of the result is row order[k].
inline Eigen::MatrixXd permute_rows(const Eigen::MatrixXd& m, std::span<const Eigen::Index> order) {
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
        out.row(k) = m.row(order[static_cast<std::size_t>(k)]);
    }
    return out;
}

/// Indices sorting `score` descending; equal scores keep index order.
inline std::vector<Eigen::Index> descending_order(const Eigen::VectorXd& score) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(score.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return score[a] > score[b]; });
    return order;
}

/// Orthogonal U minimizing the off-diagonal mass of {U M_k U^T} by cyclic
/// Jacobi sweeps (closed-form Givens angle over all matrices at once).
/// Rows come out ordered by descending sum_k (U M_k U^T)_jj^2, each with its
/// largest-magnitude entry positive.
inline JointDiagonalization joint_diagonalize(std::span<const SymmetricMatrix> matrices,
                                              const JointDiagonalizationOptions& options = {}) {
    if (matrices.empty()) {
        throw ValidationError("joint diagonalization needs at least one matrix");
    }
    const Eigen::Index p = matrices.front().size();
    std::vector<Eigen::MatrixXd> work;
    work.reserve(matrices.size());
    for (const auto& m : matrices) {
        if (m.size() != p) {
            throw ValidationError("joint diagonalization inputs differ in size");
        }
        work.push_back(m.matrix());
    }

    // Columns of v accumulate the rotations: v^T M_k v -> diagonal.
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(p, p);
    const auto k_count = static_cast<Eigen::Index>(work.size());
    int sweeps = 0;
    bool rotated = true;
    while (rotated) {
        if (sweeps >= options.max_sweeps) {
            throw ConvergenceError("joint diagonalization did not converge in " +
                                       std::to_string(options.max_sweeps) + " sweeps",
                                   off_diagonal_mass(work));
        }
        ++sweeps;
        rotated = false;
        for (Eigen::Index i = 0; i + 1 < p; ++i) {
            for (Eigen::Index j = i + 1; j < p; ++j) {
                Eigen::Matrix2Xd g(2, k_count);
                for (Eigen::Index k = 0; k < k_count; ++k) {
                    const auto& m = work[static_cast<std::size_t>(k)];
                    g(0, k) = m(i, i) - m(j, j);
                    g(1, k) = m(i, j) + m(j, i);
                }
                const Eigen::Matrix2d gg = g * g.transpose();
                const double ton = gg(0, 0) - gg(1, 1);
                const double toff = gg(0, 1) + gg(1, 0);
                const double theta = 0.25 * std::atan2(toff, ton);
                const double c = std::cos(theta);
                const double s = std::sin(theta);
                if (std::abs(s) <= options.tol) {
                    continue;
                }
                rotated = true;
                for (auto& m : work) {
                    const Eigen::VectorXd ci = m.col(i);
                    const Eigen::VectorXd cj = m.col(j);
                    m.col(i) = c * ci + s * cj;
                    m.col(j) = c * cj - s * ci;
                    const Eigen::RowVectorXd ri = m.row(i);
                    const Eigen::RowVectorXd rj = m.row(j);
                    m.row(i) = c * ri + s * rj;
                    m.row(j) = c * rj - s * ri;
                }
                const Eigen::VectorXd vi = v.col(i);
                const Eigen::VectorXd vj = v.col(j);
                v.col(i) = c * vi + s * vj;
                v.col(j) = c * vj - s * vi;
            }
        }
    }

    Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
    for (const auto& m : work) {
        score += m.diagonal().cwiseAbs2();
    }
    const auto order = descending_order(score);
    Eigen::MatrixXd u = permute_rows(Eigen::MatrixXd(v.transpose()), order);
    fix_row_signs(u);
    return {std::move(u), sweeps, off_diagonal_mass(work)};
}

inline JointDiagonalization joint_diagonalize(const std::vector<SymmetricMatrix>& matrices,
                                              const JointDiagonalizationOptions& options = {}) {
    return joint_diagonalize(std::span<const SymmetricMatrix>(matrices), options);
}

}  // namespace gsobi
