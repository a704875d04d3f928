#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "qbell/bell_ops.hpp"
#include "qbell/core.hpp"

using namespace qbell;

namespace {

Matrix2 to_m2(const oracle::M2& a) {
    Matrix2 m;
    m << a[0][0], a[0][1], a[1][0], a[1][1];
    return m;
}

Eigen::MatrixXcd kron_any(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace

// ---------- tensor_product ----------

TEST(TensorProduct, IdentityTimesIdentity) {
    const Operator4 id = tensor_product(Matrix2::Identity(), Matrix2::Identity());
    EXPECT_LT(max_abs_diff(id.matrix(), Matrix4::Identity()), kAlgebraTol);
}

TEST(TensorProduct, DiagonalCase) {
    Matrix2 z;
    z << 1, 0, 0, -1;
    const Operator4 zz = tensor_product(z, z);
    Matrix4 expected = Matrix4::Zero();
    expected.diagonal() << 1, -1, -1, 1;
    EXPECT_LT(max_abs_diff(zz.matrix(), expected), kAlgebraTol);
}

TEST(TensorProduct, XxFixesPhiPlus) {
    Matrix2 x;
    x << 0, 1, 1, 0;
    const Operator4 xx = tensor_product(x, x);
    const oracle::V4 phi = oracle::phi(+1);
    // dense 4x4 multiply oracle
    const oracle::V4 out = oracle::apply(oracle::from_eigen(xx.matrix()), phi);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(out[i] - phi[i]), 0.0, kAlgebraTol) << i;
}

TEST(TensorProduct, MatchesOracleAndIsTraceMultiplicativeAndAssociative) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = oracle::random_m2(rng), b = oracle::random_m2(rng), c = oracle::random_m2(rng);
        const Operator4 ab = tensor_product(to_m2(a), to_m2(b));
        EXPECT_LT(oracle::max_abs_diff(oracle::from_eigen(ab.matrix()), oracle::kron(a, b)), kAlgebraTol);

        const Complex tr_ab = ab.matrix().trace();
        const Complex tr_a = a[0][0] + a[1][1], tr_b = b[0][0] + b[1][1];
        EXPECT_LT(std::abs(tr_ab - tr_a * tr_b), kAlgebraTol * (1 + std::abs(tr_a * tr_b)));

        // (a⊗b)⊗c == a⊗(b⊗c), lifting the library products to 8x8 with a generic Kronecker.
        const auto left = kron_any(ab.matrix(), to_m2(c));
        const auto right = kron_any(to_m2(a), tensor_product(to_m2(b), to_m2(c)).matrix());
        EXPECT_LT((left - right).cwiseAbs().maxCoeff(), kAlgebraTol);

        // mixed-product rule (a⊗b)(c⊗d) = (ac)⊗(bd)
        const auto d = oracle::random_m2(rng);
        const Operator4 lhs = tensor_product(to_m2(a), to_m2(b)) * tensor_product(to_m2(c), to_m2(d));
        const Operator4 rhs = tensor_product(to_m2(a) * to_m2(c), to_m2(b) * to_m2(d));
        EXPECT_LT(max_abs_diff(lhs.matrix(), rhs.matrix()), 1e-11);
    }
}

TEST(TensorProduct, NonFiniteInputRejected) {
    Matrix2 a = Matrix2::Identity();
    a(0, 1) = Complex(std::nan(""), 0);
    EXPECT_THROW(tensor_product(a, Matrix2::Identity()), UsageError);
}

// ---------- validate_density ----------

TEST(ValidateDensity, AcceptsMaximallyMixed) {
    const DensityMatrix rho = validate_density(Matrix4(Matrix4::Identity() * 0.25));
    EXPECT_FALSE(rho.repaired());
    EXPECT_NEAR(rho(2, 2).real(), 0.25, 1e-15);
}

TEST(ValidateDensity, AcceptsPureProjector) {
    const auto phi = oracle::outer(oracle::phi(+1));
    EXPECT_NO_THROW(validate_density(oracle::to_eigen(phi)));
}

TEST(ValidateDensity, RejectsNegativeEigenvalue) {
    Matrix4 m = Matrix4::Zero();
    m.diagonal() << 0.5, 0.6, 0.0, -0.1;
    try {
        validate_density(m);
        FAIL() << "expected rejection";
    } catch (const StateError& e) {
        EXPECT_NE(std::string(e.what()).find("positive semidefinite"), std::string::npos);
    }
}

TEST(ValidateDensity, RejectsNonHermitian) {
    Matrix4 m = Matrix4::Identity() * 0.25;
    m(0, 1) = 0.1;
    try {
        validate_density(m);
        FAIL();
    } catch (const StateError& e) {
        EXPECT_NE(std::string(e.what()).find("Hermitian"), std::string::npos);
    }
}

TEST(ValidateDensity, RejectsWrongTrace) {
    try {
        validate_density(Matrix4(Matrix4::Identity() * 0.3));
        FAIL();
    } catch (const StateError& e) {
        EXPECT_NE(std::string(e.what()).find("trace"), std::string::npos);
    }
}

TEST(ValidateDensity, ClampsTinyNegativeEigenvalues) {
    Matrix4 m = Matrix4::Zero();
    m.diagonal() << 0.5 + 5e-10, 0.5, 0.0, -5e-10;
    const DensityMatrix rho = validate_density(m);
    EXPECT_TRUE(rho.repaired());
    Eigen::SelfAdjointEigenSolver<Matrix4> eig(rho.matrix());
    EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-15);
    EXPECT_NEAR(rho.matrix().trace().real(), 1.0, 1e-15);
}

TEST(ValidateDensity, RejectsJustBeyondTolerance) {
    Matrix4 m = Matrix4::Zero();
    m.diagonal() << 0.5 + 2e-9, 0.5, 0.0, -2e-9;
    EXPECT_THROW(validate_density(m), StateError);
}

// ---------- pure_to_density ----------

TEST(PureToDensity, BasisKet) {
    const DensityMatrix rho = pure_to_density(PureState4{1, 0, 0, 0});
    Matrix4 expected = Matrix4::Zero();
    expected(0, 0) = 1;
    EXPECT_LT(max_abs_diff(rho.matrix(), expected), kAlgebraTol);
}

TEST(PureToDensity, PhiPlusCorners) {
    const double r = 1 / kSqrt2;
    const DensityMatrix rho = pure_to_density(PureState4{r, 0, 0, r});
    for (auto [i, j] : {std::pair{0, 0}, {0, 3}, {3, 0}, {3, 3}}) EXPECT_NEAR(rho(i, j).real(), 0.5, 1e-15);
    EXPECT_NEAR(std::abs(rho(1, 1)), 0.0, 1e-15);
}

TEST(PureToDensity, SingletMatchesOuterProductOracle) {
    const double r = 1 / kSqrt2;
    const DensityMatrix rho = pure_to_density(PureState4{0, r, -r, 0});
    const auto expected = oracle::outer(oracle::psi(-1));
    EXPECT_LT(oracle::max_abs_diff(oracle::from_eigen(rho.matrix()), expected), kAlgebraTol);
    EXPECT_NEAR(rho(1, 2).real(), -0.5, 1e-15);
    EXPECT_NEAR(rho(2, 1).real(), -0.5, 1e-15);
}

TEST(PureToDensity, RejectsUnnormalized) { EXPECT_THROW((PureState4{1, 1, 0, 0}), StateError); }

TEST(PureToDensity, RandomPureStatesAreIdempotentAndNeedNoClamping) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0, 1);
    for (int t = 0; t < 200; ++t) {
        Vector4 v;
        for (int i = 0; i < 4; ++i) v(i) = Complex(n(rng), n(rng));
        v.normalize();
        const DensityMatrix rho = pure_to_density(PureState4(v));
        EXPECT_FALSE(rho.repaired());
        EXPECT_LT(max_abs_diff(rho.matrix() * rho.matrix(), rho.matrix()), kStateTol);
        EXPECT_NO_THROW(validate_density(rho.matrix()));
    }
}

// ---------- expectation ----------

TEST(Expectation, IdentityGivesOne) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        const DensityMatrix rho = validate_density(oracle::to_eigen(oracle::random_state(rng)));
        EXPECT_NEAR(expectation(rho, Operator4::identity()), 1.0, kStateTol);
    }
}

TEST(Expectation, PhiPlusCorrelations) {
    const DensityMatrix phi = pure_to_density(bell_state(kPhiPlus, Basis::HV));
    EXPECT_NEAR(expectation(phi, correlation_operator(0, 0)), 1.0, 1e-12);
    // dense matrix-product oracle
    const auto rho = oracle::outer(oracle::phi(+1));
    const double want = oracle::trace(oracle::mul(rho, oracle::correlation(0, kPi / 8))).real();
    EXPECT_NEAR(want, 0.70710678, 1e-8);
    EXPECT_NEAR(expectation(phi, correlation_operator(0, kPi / 8)), want, 1e-12);
}

TEST(Expectation, RandomHermitianObservablesGiveRealValues) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0, 1);
    for (int t = 0; t < 100; ++t) {
        const DensityMatrix rho = validate_density(oracle::to_eigen(oracle::random_state(rng)));
        Matrix4 g;
        for (int i = 0; i < 16; ++i) g.data()[i] = Complex(n(rng), n(rng));
        const Operator4 obs(Matrix4(g + g.adjoint()));
        const Complex full = (rho.matrix() * obs.matrix()).trace();
        EXPECT_LE(std::abs(full.imag()), kStateTol);
        EXPECT_DOUBLE_EQ(expectation(rho, obs), full.real());
    }
}

TEST(Expectation, RejectsNonHermitianObservable) {
    Matrix4 m = Matrix4::Identity();
    m(0, 1) = 1.0;
    EXPECT_THROW(expectation(DensityMatrix::maximally_mixed(), Operator4(m)), ObservableError);
}

TEST(Expectation, RawMatrixOverloadValidatesState) {
    Matrix4 bad = Matrix4::Zero();
    bad.diagonal() << 0.5, 0.6, 0.0, -0.1;
    EXPECT_THROW(expectation(bad, Operator4::identity()), StateError);
}
