#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace gsobi;
using testing_support::random_mixing;
using testing_support::random_orthogonal;
using testing_support::simulate_model;

namespace {

const LagSets kDefaultLags{{1, 2, 3}, {1, 2, 3}, 0.9};

UnmixingEstimate estimate(Method m, const TimeSeriesMatrix& x) {
    switch (m) {
        case Method::Amuse:
            return amuse(x, 1);
        case Method::Sobi:
            return sobi(x, {1, 2, 3});
        case Method::VSobi:
            return vsobi(x, {1, 2, 3});
        case Method::GSobi:
            return gsobi::gsobi(x, kDefaultLags);
        case Method::Pvc:
            return pvc(x, 5);
    }
    return {};
}

constexpr Method kAllMethods[] = {Method::Amuse, Method::Sobi, Method::VSobi, Method::GSobi, Method::Pvc};

}  // namespace

TEST(Method, ParseAndPrint) {
    for (Method m : kAllMethods) {
        EXPECT_EQ(parse_method(to_string(m)), m);
    }
    EXPECT_THROW(parse_method("fastica"), ValidationError);
}

TEST(LagSets, Validation) {
    EXPECT_THROW((LagSets{{1}, {1}, 1.5}.validate(100)), ValidationError);
    EXPECT_THROW((LagSets{{}, {1}, 0.5}.validate(100)), ValidationError);
    EXPECT_THROW((LagSets{{1}, {}, 0.5}.validate(100)), ValidationError);
    EXPECT_THROW((LagSets{{0}, {1}, 0.5}.validate(100)), ValidationError);
    EXPECT_THROW((LagSets{{100}, {1}, 0.5}.validate(100)), LagTooLargeError);
    EXPECT_NO_THROW((LagSets{{1}, {}, 1.0}.validate(100)));
    EXPECT_NO_THROW((LagSets{{}, {2}, 0.0}.validate(100)));
    EXPECT_EQ(lag_range(3), (std::vector<Eigen::Index>{1, 2, 3}));
}

TEST(Estimators, RecoverSources) {
    const TimeSeriesMatrix s3 = simulate_model(BuiltinModel::III, 10000, 21);
    const TimeSeriesMatrix s2 = simulate_model(BuiltinModel::II, 10000, 22);
    const TimeSeriesMatrix s1 = simulate_model(BuiltinModel::I, 10000, 23);
    const Eigen::MatrixXd omega = random_mixing(3, 24);
    const TimeSeriesMatrix x3 = mix(s3, omega);
    const TimeSeriesMatrix x2 = mix(s2, omega);
    const TimeSeriesMatrix x1 = mix(s1, omega);
    EXPECT_LT(mdi(gsobi::gsobi(x3, kDefaultLags).gamma * omega), 0.1);
    EXPECT_LT(mdi(gsobi::gsobi(x2, kDefaultLags).gamma * omega), 0.1);
    EXPECT_LT(mdi(gsobi::gsobi(x1, kDefaultLags).gamma * omega), 0.1);
    EXPECT_LT(mdi(vsobi(x3, {1, 2, 3}).gamma * omega), 0.1);
    EXPECT_LT(mdi(sobi(x2, {1, 2, 3}).gamma * omega), 0.1);
    EXPECT_LT(mdi(amuse(x2, 1).gamma * omega), 0.2);
    // second-order methods cannot separate sources without linear autocorrelation
    EXPECT_GT(mdi(sobi(x3, {1, 2, 3}).gamma * omega), 0.3);
}

TEST(Estimators, PvcSeparatesGarchSources) {
    const TimeSeriesMatrix s = simulate_model(BuiltinModel::III, 12800, 25);
    const Eigen::MatrixXd omega = random_mixing(3, 26);
    const UnmixingEstimate est = pvc(mix(s, omega), 5);
    EXPECT_LT(mdi(est.gamma * omega), 0.3);
    ASSERT_TRUE(est.eigenvalues.has_value());
    for (Eigen::Index k = 1; k < 3; ++k) {
        EXPECT_GE((*est.eigenvalues)[k - 1], (*est.eigenvalues)[k]);
    }
}

TEST(Estimators, AffineEquivariance) {
    const TimeSeriesMatrix s = simulate_model(BuiltinModel::I, 2000, 27);
    for (Method m : kAllMethods) {
        const double base = mdi(estimate(m, s).gamma);
        for (std::uint64_t k = 0; k < 5; ++k) {
            const Eigen::MatrixXd omega = random_mixing(3, 100 + k);
            const double mixed = mdi(estimate(m, mix(s, omega)).gamma * omega);
            EXPECT_NEAR(mixed, base, 1e-8) << to_string(m) << " mixing " << k;
        }
    }
}

TEST(Estimators, EquivarianceOfEstimatedSources) {
    // location and scale: sources from x Omega^T + c coincide with sources from x up to sign
    const TimeSeriesMatrix s = simulate_model(BuiltinModel::III, 3000, 28);
    const Eigen::MatrixXd omega = random_mixing(3, 29);
    Eigen::MatrixXd shifted = mix(s, omega).data();
    shifted.rowwise() += Eigen::RowVector3d(5.0, -1.0, 2.0);
    const UnmixingEstimate a = gsobi::gsobi(s, kDefaultLags);
    const UnmixingEstimate b = gsobi::gsobi(TimeSeriesMatrix(shifted), kDefaultLags);
    const Eigen::MatrixXd ya = a.apply(s).data();
    const Eigen::MatrixXd yb = b.apply(TimeSeriesMatrix(shifted)).data();
    for (Eigen::Index j = 0; j < 3; ++j) {
        const double sign = ya.col(j).dot(yb.col(j)) > 0 ? 1.0 : -1.0;
        EXPECT_LE((ya.col(j) - sign * yb.col(j)).cwiseAbs().maxCoeff(), 1e-8) << j;
    }
}

TEST(Estimators, WhiteningConstraint) {
    const TimeSeriesMatrix s = simulate_model(BuiltinModel::IV, 2000, 30);
    const TimeSeriesMatrix x = mix(s, random_mixing(4, 31));
    const Eigen::MatrixXd cov = sample_covariance(x).matrix();
    for (Method m : kAllMethods) {
        const UnmixingEstimate est = estimate(m, x);
        EXPECT_LE((est.gamma * cov * est.gamma.transpose() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(),
                  1e-6)
            << to_string(m);
        const Eigen::MatrixXd y = est.apply(x).data();
        EXPECT_LE(y.colwise().mean().cwiseAbs().maxCoeff(), 1e-10) << to_string(m);
    }
}

TEST(Estimators, MethodTags) {
    const TimeSeriesMatrix x = simulate_model(BuiltinModel::III, 800, 32);
    for (Method m : kAllMethods) {
        EXPECT_EQ(estimate(m, x).method, m);
    }
    EXPECT_EQ(gsobi::gsobi(x, LagSets{{}, {1, 2}, 0.0}).method, Method::GSobi);
}

TEST(Gsobi, EstimatingEquationResidualAtConvergence) {
    for (BuiltinModel model : {BuiltinModel::I, BuiltinModel::II, BuiltinModel::III, BuiltinModel::IV}) {
        const TimeSeriesMatrix x = simulate_model(model, 3000, 33);
        for (double tol : {1e-6, 1e-9}) {
            GsobiOptions opt;
            opt.tol = tol;
            const UnmixingEstimate est = gsobi::gsobi(x, kDefaultLags, opt);
            ASSERT_TRUE(est.converged) << to_string(model);
            EXPECT_LE(est.equation_residual, 10.0 * tol) << to_string(model);
            EXPECT_GE(est.iterations, 1);
        }
    }
}

TEST(Gsobi, NonConvergenceReportsBestIterate) {
    const TimeSeriesMatrix x = simulate_model(BuiltinModel::III, 1000, 34);
    GsobiOptions opt;
    opt.max_iter = 1;
    opt.tol = 1e-14;
    const UnmixingEstimate est = gsobi::gsobi(x, kDefaultLags, opt);
    EXPECT_FALSE(est.converged);
    EXPECT_EQ(est.iterations, 1);
    EXPECT_TRUE(est.gamma.allFinite());
}

TEST(Gsobi, ExplicitInitialization) {
    const TimeSeriesMatrix x = simulate_model(BuiltinModel::III, 4000, 35);
    GsobiOptions opt;
    opt.init = random_orthogonal(3, 36);
    const UnmixingEstimate a = gsobi::gsobi(x, kDefaultLags, opt);
    EXPECT_TRUE(a.converged);
    EXPECT_LT(mdi(a.gamma), 0.15);
    opt.init = Eigen::MatrixXd::Zero(3, 3);
    EXPECT_THROW(gsobi::gsobi(x, kDefaultLags, opt), ValidationError);
    opt.init = Eigen::MatrixXd::Identity(2, 2);
    EXPECT_THROW(gsobi::gsobi(x, kDefaultLags, opt), ValidationError);
}

TEST(Gsobi, SlowSobiStartFallsBackToPvcStart) {
    // a sample whose linear autocovariances need more than 100 Jacobi sweeps
    const TimeSeriesMatrix x =
        simulate_model(BuiltinModel::III, 1600, derive_seed(17, Eigen::Index{1600}, 93));
    EXPECT_THROW(sobi(x, {1, 2, 3}), ConvergenceError);
    const UnmixingEstimate est = gsobi::gsobi(x, kDefaultLags);
    EXPECT_TRUE(est.converged);
    GsobiOptions opt;
    opt.init = Eigen::MatrixXd::Identity(3, 3);
    EXPECT_NEAR(est.criterion, gsobi::gsobi(x, kDefaultLags, opt).criterion, 1e-9);
}

TEST(Gsobi, WeightEndpoints) {
    const TimeSeriesMatrix x = simulate_model(BuiltinModel::II, 4000, 37);
    // b = 1 uses only linear autocovariances and agrees with SOBI's separation
    const UnmixingEstimate g1 = gsobi::gsobi(x, LagSets{{1, 2, 3}, {}, 1.0});
    EXPECT_LT(mdi(g1.gamma), 0.1);
    EXPECT_LT(mdi(sobi(x, {1, 2, 3}).gamma), 0.1);
}

TEST(Gsobi, SingleComponent) {
    Eigen::MatrixXd m(500, 1);
    m.col(0) = Eigen::Map<const Eigen::VectorXd>(testing_support::iid_normal(500, 38).data(), 500) * 3.0;
    m.array() += 2.0;
    const UnmixingEstimate est = gsobi::gsobi(TimeSeriesMatrix(m), kDefaultLags);
    ASSERT_EQ(est.gamma.rows(), 1);
    EXPECT_TRUE(est.converged);
    const Eigen::MatrixXd y = est.apply(TimeSeriesMatrix(m)).data();
    EXPECT_NEAR(y.col(0).squaredNorm() / 500.0, 1.0, 1e-10);
}

TEST(Identifiability, IdenticalGaussianComponentsFlagged) {
    Eigen::MatrixXd m(4000, 2);
    m.col(0) = Eigen::Map<const Eigen::VectorXd>(testing_support::iid_normal(4000, 39).data(), 4000);
    m.col(1) = Eigen::Map<const Eigen::VectorXd>(testing_support::iid_normal(4000, 40).data(), 4000);
    const TimeSeriesMatrix x(m);
    const UnmixingEstimate g = gsobi::gsobi(x, kDefaultLags);
    EXPECT_TRUE(g.converged);
    EXPECT_TRUE(g.near_unidentifiable);
    EXPECT_TRUE(pvc(x, 5).near_unidentifiable);
    EXPECT_TRUE(sobi(x, {1, 2, 3}).near_unidentifiable);
    // distinct GARCH sources are clearly separated
    const TimeSeriesMatrix s = simulate_model(BuiltinModel::III, 6400, 41);
    EXPECT_FALSE(gsobi::gsobi(s, kDefaultLags).near_unidentifiable);
}

TEST(KurtosisMatrix, OrthogonalEquivariance) {
    const TimeSeriesMatrix z = whiten(simulate_model(BuiltinModel::III, 2000, 42)).whitened;
    for (std::uint64_t seed : {43, 44, 45}) {
        const Eigen::MatrixXd u = random_orthogonal(3, seed);
        const TimeSeriesMatrix rotated(Eigen::MatrixXd(z.data() * u.transpose()));
        for (Eigen::Index lag : {1, 3}) {
            const Eigen::MatrixXd k = kurtosis_matrix(z, lag).matrix();
            const Eigen::MatrixXd kr = kurtosis_matrix(rotated, lag).matrix();
            EXPECT_LE((kr - u * k * u.transpose()).cwiseAbs().maxCoeff(), 1e-10);
        }
    }
}

TEST(KurtosisMatrix, BruteForceDefinition) {
    const TimeSeriesMatrix z = whiten(simulate_model(BuiltinModel::III, 300, 46)).whitened;
    const Eigen::Index lag = 2;
    const Eigen::Index m = z.n() - lag;
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 3);
    for (Eigen::Index i = 0; i < 3; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) {
            double ybar = 0.0;
            for (Eigen::Index t = 0; t < m; ++t) {
                ybar += z(t, i) * z(t, j) / static_cast<double>(m);
            }
            Eigen::MatrixXd c = Eigen::MatrixXd::Zero(3, 3);
            for (Eigen::Index t = 0; t < m; ++t) {
                const Eigen::Vector3d v = z.data().row(t + lag).transpose();
                c += v * v.transpose() * (z(t, i) * z(t, j) - ybar) / static_cast<double>(m);
            }
            expected += c * c.transpose();
        }
    }
    EXPECT_LE((kurtosis_matrix(z, lag).matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(kurtosis_matrix(z, 0), ValidationError);
    EXPECT_THROW(kurtosis_matrix(z, 300), LagTooLargeError);
}

TEST(Estimators, InputErrors) {
    const TimeSeriesMatrix x = simulate_model(BuiltinModel::III, 200, 47);
    EXPECT_THROW(amuse(x, 0), ValidationError);
    EXPECT_THROW(amuse(x, 200), LagTooLargeError);
    EXPECT_THROW(pvc(x, 0), ValidationError);
    EXPECT_THROW(sobi(x, {}), ValidationError);
    Eigen::MatrixXd collinear = x.data();
    collinear.col(2) = collinear.col(0);
    EXPECT_THROW(gsobi::gsobi(TimeSeriesMatrix(collinear), kDefaultLags), SingularMatrixError);
    const UnmixingEstimate est = gsobi::gsobi(x, kDefaultLags);
    EXPECT_THROW(est.apply(TimeSeriesMatrix(Eigen::MatrixXd::Ones(10, 2))), ValidationError);
}
