#pragma once

// Bell states in the HV and 45-degree (ST) bases, the polarization
// correlation operator, the CHSH and two-setting Bell operators, coincidence
// operators, and sign-pattern classification of Bell states.
//
// All angles are analysis angles in radians: the polarization direction
// actually analysed, which is twice the half-wave-plate rotation.

#include <array>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "qbell/core.hpp"

namespace qbell {

inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kTsirelson = 2.0 * std::numbers::sqrt2;
inline constexpr double kPi = std::numbers::pi;

enum class Family { Phi, Psi };
enum class Sign { plus, minus };
enum class Basis { HV, ST };

inline constexpr double sign_factor(Sign s) noexcept { return s == Sign::plus ? 1.0 : -1.0; }

inline std::string_view to_string(Sign s) noexcept { return s == Sign::plus ? "plus" : "minus"; }
inline std::string_view to_string(Basis b) noexcept { return b == Basis::HV ? "HV" : "ST"; }

struct BellKind {
    Family family;
    Sign sign;

    friend constexpr bool operator==(const BellKind&, const BellKind&) = default;
};

inline constexpr BellKind kPhiPlus{Family::Phi, Sign::plus};
inline constexpr BellKind kPhiMinus{Family::Phi, Sign::minus};
inline constexpr BellKind kPsiPlus{Family::Psi, Sign::plus};
inline constexpr BellKind kPsiMinus{Family::Psi, Sign::minus};
inline constexpr std::array<BellKind, 4> kAllBellKinds{kPhiPlus, kPsiPlus, kPhiMinus, kPsiMinus};

// "phi+", "psi-", ...
inline std::string to_string(BellKind k) {
    std::string out = k.family == Family::Phi ? "phi" : "psi";
    out += k.sign == Sign::plus ? '+' : '-';
    return out;
}

inline std::optional<BellKind> parse_bell_kind(std::string_view text) {
    for (BellKind k : kAllBellKinds)
        if (text == to_string(k)) return k;
    return std::nullopt;
}

// Row label of the sign-pattern table, naming both bases.
inline std::string_view table_label(BellKind k) noexcept {
    if (k == kPhiPlus) return "Phi+^HV = Phi+^ST";
    if (k == kPsiPlus) return "Psi+^HV = Phi-^ST";
    if (k == kPhiMinus) return "Phi-^HV = -Psi+^ST";
    return "Psi-^HV = Psi-^ST";
}

// Single-photon polarization letters: h, v in the HV basis; s, t in the ST basis.
enum class Pol { h, v, s, t };

inline Basis basis_of(Pol p) noexcept { return (p == Pol::h || p == Pol::v) ? Basis::HV : Basis::ST; }

// Single-photon state in (h, v) coordinates. s = (h+v)/√2, t = (-h+v)/√2.
inline Eigen::Vector2cd polarization_vector(Pol p) {
    const double r = 1.0 / kSqrt2;
    switch (p) {
        case Pol::h: return {1.0, 0.0};
        case Pol::v: return {0.0, 1.0};
        case Pol::s: return {r, r};
        case Pol::t: return {-r, r};
    }
    return {};
}

inline Vector4 product_ket(Pol alice, Pol bob) {
    const Eigen::Vector2cd a = polarization_vector(alice);
    const Eigen::Vector2cd b = polarization_vector(bob);
    Vector4 out;
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) out(2 * i + k) = a(i) * b(k);
    return out;
}

// Bell state of the given kind in the given basis, in HV product coordinates.
// ST states are built from s/t kets, so global signs follow from the basis map
// (e.g. Psi+^ST comes out as -Phi-^HV).
inline PureState4 bell_state(BellKind kind, Basis basis) {
    const Pol first = basis == Basis::HV ? Pol::h : Pol::s;
    const Pol second = basis == Basis::HV ? Pol::v : Pol::t;
    const double s = sign_factor(kind.sign);
    Vector4 v = kind.family == Family::Phi ? Vector4(product_ket(first, first) + s * product_ket(second, second))
                                           : Vector4(product_ket(first, second) + s * product_ket(second, first));
    return PureState4(Vector4(v / kSqrt2));
}

// ±1-valued single-photon polarization observable for analysis angle theta:
// cos2θ (|h><h| - |v><v|) + sin2θ (|h><v| + |v><h|).
inline Matrix2 analyzer_axis(double angle) {
    if (!std::isfinite(angle)) throw UsageError("analyzer_axis: non-finite angle");
    const double c = std::cos(2.0 * angle);
    const double s = std::sin(2.0 * angle);
    Matrix2 m;
    m << c, s, s, -c;
    return m;
}

enum class Outcome { pass, reject };

// Projector onto the transmitted (pass) or orthogonal (reject) port of a
// linear polarizer at analysis angle theta.
inline Matrix2 polarizer_projector(double angle, Outcome outcome) {
    if (!std::isfinite(angle)) throw UsageError("polarizer_projector: non-finite angle");
    const double theta = outcome == Outcome::pass ? angle : angle + kPi / 2.0;
    const Eigen::Vector2cd u(std::cos(theta), std::sin(theta));
    return u * u.adjoint();
}

// Correlation operator for Alice at alpha and Bob at beta.
inline Operator4 correlation_operator(double alpha, double beta) {
    return tensor_product(analyzer_axis(alpha), analyzer_axis(beta));
}

// CHSH Bell operator: ±(E(0,π/8) - E(0,3π/8)) + E(π/4,π/8) + E(π/4,3π/8).
inline Operator4 chsh_operator(Sign sign) {
    const double s = sign_factor(sign);
    return s * (correlation_operator(0.0, kPi / 8) - correlation_operator(0.0, 3 * kPi / 8)) +
           correlation_operator(kPi / 4, kPi / 8) + correlation_operator(kPi / 4, 3 * kPi / 8);
}

// Two-setting Bell operator: √2 (±E(0,0) + E(π/4,π/4)).
inline Operator4 simplified_operator(Sign sign) {
    const double s = sign_factor(sign);
    return kSqrt2 * (s * correlation_operator(0.0, 0.0) + correlation_operator(kPi / 4, kPi / 4));
}

// Projector onto the HV Bell state of the given kind (occupation of that Bell state).
inline Operator4 bell_number_operator(BellKind kind) {
    const Vector4& a = bell_state(kind, Basis::HV).amplitudes();
    return Operator4(Matrix4(a * a.adjoint()));
}

// |a><a| ⊗ |b><b|; both letters must come from the same basis.
inline Operator4 coincidence_operator(Pol a, Pol b) {
    if (basis_of(a) != basis_of(b))
        throw UsageError("coincidence_operator: letters from different bases");
    const Vector4 ket = product_ket(a, b);
    return Operator4(Matrix4(ket * ket.adjoint()));
}

// Matches (S'+, S'-) against the four Bell-state signatures
//   Phi+: (2√2, 0)   Psi+: (0, 2√2)   Phi-: (0, -2√2)   Psi-: (-2√2, 0)
// requiring both components within tol. Returns nullopt when no row (or more
// than one row) matches.
inline std::optional<BellKind> classify_bell_state(double s_plus, double s_minus, double tol) {
    if (!(tol > 0.0)) throw UsageError("classify_bell_state: tol must be positive");
    struct Row {
        BellKind kind;
        double plus, minus;
    };
    constexpr std::array<Row, 4> rows{{{kPhiPlus, kTsirelson, 0.0},
                                       {kPsiPlus, 0.0, kTsirelson},
                                       {kPhiMinus, 0.0, -kTsirelson},
                                       {kPsiMinus, -kTsirelson, 0.0}}};
    std::optional<BellKind> found;
    for (const Row& r : rows) {
        if (std::abs(s_plus - r.plus) <= tol && std::abs(s_minus - r.minus) <= tol) {
            if (found) return std::nullopt;
            found = r.kind;
        }
    }
    return found;
}

}  // namespace qbell
