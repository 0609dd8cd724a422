#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gsobi/error.hpp"

namespace gsobi {

/// Exact minimum-cost perfect matching on a square cost matrix (Kuhn-Munkres
/// with potentials, O(p^3)). Returns column assigned to each row.
inline std::vector<Eigen::Index> solve_assignment(const Eigen::MatrixXd& cost) {
    const Eigen::Index n = cost.rows();
    if (cost.cols() != n) {
        throw ValidationError("assignment cost matrix must be square");
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; column 0 is the virtual source.
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<Eigen::Index> match(static_cast<std::size_t>(n + 1), 0);  // column -> row
    std::vector<Eigen::Index> way(static_cast<std::size_t>(n + 1), 0);
    for (Eigen::Index i = 1; i <= n; ++i) {
        match[0] = i;
        Eigen::Index j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const Eigen::Index i0 = match[static_cast<std::size_t>(j0)];
            double delta = inf;
            Eigen::Index j1 = 0;
            for (Eigen::Index j = 1; j <= n; ++j) {
                const auto js = static_cast<std::size_t>(j);
                if (used[js]) {
                    continue;
                }
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[js];
                if (cur < minv[js]) {
                    minv[js] = cur;
                    way[js] = j0;
                }
                if (minv[js] < delta) {
                    delta = minv[js];
                    j1 = j;
                }
            }
            for (Eigen::Index j = 0; j <= n; ++j) {
                const auto js = static_cast<std::size_t>(j);
                if (used[js]) {
                    u[static_cast<std::size_t>(match[js])] += delta;
                    v[js] -= delta;
                } else {
                    minv[js] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            const Eigen::Index j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Eigen::Index> row_to_col(static_cast<std::size_t>(n));
    for (Eigen::Index j = 1; j <= n; ++j) {
        row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
    }
    return row_to_col;
}

/// Cost of assigning row i of the gain matrix to unit vector e_j after the
/// optimal row scaling: 1 - g_ij^2 / ||g_i||^2 (zero rows cost 1 everywhere).
inline Eigen::MatrixXd mdi_cost_matrix(const Eigen::MatrixXd& gain) {
    Eigen::MatrixXd cost = Eigen::MatrixXd::Ones(gain.rows(), gain.cols());
    for (Eigen::Index i = 0; i < gain.rows(); ++i) {
        const double norm2 = gain.row(i).squaredNorm();
        if (norm2 > 0.0) {
            cost.row(i) -= gain.row(i).cwiseAbs2() / norm2;
        }
    }
    return cost;
}

/// Source index (column of gain = Gamma_hat * Omega) matched to each estimated row.
inline std::vector<Eigen::Index> match_components(const Eigen::MatrixXd& gain) {
    return solve_assignment(mdi_cost_matrix(gain));
}

/// Minimum distance index of a gain matrix Gamma_hat * Omega; in [0, 1], zero
/// for a scaled permutation.
inline double mdi(const Eigen::MatrixXd& gain) {
    const Eigen::Index p = gain.rows();
    if (gain.cols() != p) {
        throw ValidationError("gain matrix must be square");
    }
    if (p < 2) {
        throw ValidationError("minimum distance index needs p >= 2");
    }
    if (!gain.allFinite()) {
        throw ValidationError("gain matrix has non-finite entries");
    }
    const Eigen::MatrixXd cost = mdi_cost_matrix(gain);
    const auto assignment = solve_assignment(cost);
    double total = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        total += cost(i, assignment[static_cast<std::size_t>(i)]);
    }
    return std::sqrt(std::max(0.0, total) / static_cast<double>(p - 1));
}

/// n (p - 1) MDI^2.
inline double scaled_mdi(const Eigen::MatrixXd& gain, Eigen::Index n) {
    const double d = mdi(gain);
    return static_cast<double>(n) * static_cast<double>(gain.rows() - 1) * d * d;
}

}  // namespace gsobi
