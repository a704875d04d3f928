#pragma once

// Fixed-dimension complex linear algebra for one- and two-photon
// polarization spaces.
//
// Two-photon product basis ordering is Alice-major:
//   index 0 = |hh>, 1 = |hv>, 2 = |vh>, 3 = |vv>
// so that (a ⊗ b)(2i+k, 2j+l) = a(i,j) * b(k,l) with Alice's factor first.

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "qbell/error.hpp"

namespace qbell {

using Complex = std::complex<double>;
using Matrix2 = Eigen::Matrix2cd;
using Matrix4 = Eigen::Matrix4cd;
using Vector4 = Eigen::Vector4cd;

// Tolerance for physical-state validity checks.
inline constexpr double kStateTol = 1e-9;
// Tolerance for algebraic identities between operators.
inline constexpr double kAlgebraTol = 1e-12;
// Rounding floor of the 4x4 Hermitian eigensolver on unit-trace input.
inline constexpr double kEigenNoise = 1e-14;

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const Complex z = m.derived().data()[i];
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
}

template <typename Derived>
double hermiticity_defect(const Eigen::MatrixBase<Derived>& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace detail

// Largest entrywise magnitude of a - b.
inline double max_abs_diff(const Matrix4& a, const Matrix4& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

// A normalized pure state of two photons. The global phase is kept as given.
class PureState4 {
public:
    explicit PureState4(const Vector4& amplitudes) : amp_(amplitudes) {
        if (!detail::all_finite(amp_)) throw StateError("pure state: non-finite amplitude");
        const double norm2 = amp_.squaredNorm();
        if (std::abs(norm2 - 1.0) > kStateTol)
            throw StateError("pure state: not normalized (sum |amp|^2 = " + std::to_string(norm2) + ")");
    }

    PureState4(std::initializer_list<Complex> amplitudes) : PureState4(from_list(amplitudes)) {}

    const Vector4& amplitudes() const noexcept { return amp_; }
    Complex operator[](int i) const { return amp_(i); }

    PureState4 operator-() const { return PureState4(Vector4(-amp_)); }

private:
    static Vector4 from_list(std::initializer_list<Complex> amplitudes) {
        if (amplitudes.size() != 4) throw StateError("pure state: expected 4 amplitudes");
        Vector4 v;
        std::copy(amplitudes.begin(), amplitudes.end(), v.data());
        return v;
    }

    Vector4 amp_;
};

// A 4x4 operator on the two-photon polarization space with finite entries.
class Operator4 {
public:
    explicit Operator4(const Matrix4& m) : m_(m) {
        if (!detail::all_finite(m_)) throw UsageError("operator: non-finite entry");
    }

    static Operator4 identity() { return Operator4(Matrix4::Identity()); }

    const Matrix4& matrix() const noexcept { return m_; }
    Complex operator()(int row, int col) const { return m_(row, col); }

    bool is_hermitian(double tol = kStateTol) const { return detail::hermiticity_defect(m_) <= tol; }

    Operator4 operator+(const Operator4& o) const { return Operator4(Matrix4(m_ + o.m_)); }
    Operator4 operator-(const Operator4& o) const { return Operator4(Matrix4(m_ - o.m_)); }
    Operator4 operator-() const { return Operator4(Matrix4(-m_)); }
    Operator4 operator*(const Operator4& o) const { return Operator4(Matrix4(m_ * o.m_)); }
    friend Operator4 operator*(double s, const Operator4& o) { return Operator4(Matrix4(s * o.m_)); }

private:
    Matrix4 m_;
};

// Kronecker product a ⊗ b, Alice's factor first.
inline Operator4 tensor_product(const Matrix2& a, const Matrix2& b) {
    Matrix4 out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) out(2 * i + k, 2 * j + l) = a(i, j) * b(k, l);
    return Operator4(out);
}

// Hermitian, unit-trace, positive-semidefinite 4x4 matrix. Only obtainable
// through validate_density() or pure_to_density().
class DensityMatrix {
public:
    const Matrix4& matrix() const noexcept { return m_; }
    Complex operator()(int row, int col) const { return m_(row, col); }

    // True when small negative eigenvalues were clamped on construction.
    bool repaired() const noexcept { return repaired_; }

    static DensityMatrix maximally_mixed() { return DensityMatrix(Matrix4(Matrix4::Identity() * 0.25), false); }

private:
    DensityMatrix(const Matrix4& m, bool repaired) : m_(m), repaired_(repaired) {}

    friend DensityMatrix validate_density(const Matrix4& m);

    Matrix4 m_;
    bool repaired_ = false;
};

// Accepts m iff it is Hermitian, unit-trace and PSD within kStateTol.
// Eigenvalues in [-kStateTol, -kEigenNoise) are clamped to zero and the trace
// restored; anything above -kEigenNoise is eigensolver rounding and is left alone.
inline DensityMatrix validate_density(const Matrix4& m) {
    if (!detail::all_finite(m)) throw StateError("density matrix: non-finite entry");

    const double herm = detail::hermiticity_defect(m);
    if (herm > kStateTol)
        throw StateError("density matrix: not Hermitian (max |m - m^dagger| = " + std::to_string(herm) + ")");

    const double trace = m.trace().real();
    if (std::abs(trace - 1.0) > kStateTol)
        throw StateError("density matrix: trace is " + std::to_string(trace) + ", expected 1");

    const Matrix4 h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix4> eig(h);
    const Eigen::Vector4d& lambda = eig.eigenvalues();
    const double min_eig = lambda.minCoeff();
    if (min_eig < -kStateTol)
        throw StateError("density matrix: not positive semidefinite (min eigenvalue " + std::to_string(min_eig) + ")");

    if (min_eig >= -kEigenNoise) return DensityMatrix(h, false);

    Eigen::Vector4d clamped = lambda.cwiseMax(0.0);
    clamped /= clamped.sum();
    const Matrix4& v = eig.eigenvectors();
    const Matrix4 repaired = v * clamped.cast<Complex>().asDiagonal() * v.adjoint();
    return DensityMatrix(Matrix4(0.5 * (repaired + repaired.adjoint())), true);
}

// |psi><psi|.
inline DensityMatrix pure_to_density(const PureState4& psi) {
    const Vector4& a = psi.amplitudes();
    return validate_density(a * a.adjoint());
}

// Mixture sum_i w_i rho_i; weights must be non-negative and sum to one.
inline DensityMatrix mix(std::initializer_list<std::pair<double, DensityMatrix>> parts) {
    Matrix4 acc = Matrix4::Zero();
    for (const auto& [w, rho] : parts) {
        if (!(w >= 0.0)) throw UsageError("mix: negative weight");
        acc += w * rho.matrix();
    }
    return validate_density(acc);
}

// Tr(rho * obs) for a Hermitian observable.
inline double expectation(const DensityMatrix& rho, const Operator4& obs) {
    const double herm = detail::hermiticity_defect(obs.matrix());
    if (herm > kStateTol)
        throw ObservableError("expectation: observable not Hermitian (defect " + std::to_string(herm) + ")");
    const Complex value = (rho.matrix() * obs.matrix()).trace();
    if (std::abs(value.imag()) > kStateTol)
        throw ObservableError("expectation: imaginary residue " + std::to_string(value.imag()));
    return value.real();
}

// Validates a raw matrix before taking the expectation value.
inline double expectation(const Matrix4& rho, const Operator4& obs) {
    return expectation(validate_density(rho), obs);
}

}  // namespace qbell
