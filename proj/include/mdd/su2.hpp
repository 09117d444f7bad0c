#pragma once

#include <array>
#include <complex>

namespace mdd {

using cplx = std::complex<double>;

/// Coefficients of a 2x2 Hermitian generator H = h0*I + (hx*sx + hy*sy + hz*sz)/2,
/// in rad/us.
struct PauliCoeffs {
  double h0 = 0.0;
  double hx = 0.0;
  double hy = 0.0;
  double hz = 0.0;
};

/// Dense 2x2 complex matrix, row-major.
struct Mat2 {
  std::array<cplx, 4> e{};

  constexpr cplx& operator()(int r, int c) { return e[2 * r + c]; }
  constexpr const cplx& operator()(int r, int c) const { return e[2 * r + c]; }

  static constexpr Mat2 identity() { return Mat2{{cplx{1, 0}, cplx{0, 0}, cplx{0, 0}, cplx{1, 0}}}; }
  static constexpr Mat2 pauli_x() { return Mat2{{cplx{0, 0}, cplx{1, 0}, cplx{1, 0}, cplx{0, 0}}}; }
  static constexpr Mat2 pauli_y() { return Mat2{{cplx{0, 0}, cplx{0, -1}, cplx{0, 1}, cplx{0, 0}}}; }
  static constexpr Mat2 pauli_z() { return Mat2{{cplx{1, 0}, cplx{0, 0}, cplx{0, 0}, cplx{-1, 0}}}; }
};

Mat2 operator*(const Mat2& a, const Mat2& b);
Mat2 operator+(const Mat2& a, const Mat2& b);
Mat2 operator-(const Mat2& a, const Mat2& b);
Mat2 operator*(cplx s, const Mat2& a);
Mat2 adjoint(const Mat2& a);
cplx trace(const Mat2& a);
cplx det(const Mat2& a);
double max_abs_diff(const Mat2& a, const Mat2& b);

/// Hermitian matrix for the given coefficients.
Mat2 to_matrix(const PauliCoeffs& h);
/// Inverse of to_matrix; the anti-Hermitian part of `m` is discarded.
PauliCoeffs from_matrix(const Mat2& m);

/// A 2x2 unitary propagator.
struct Unitary2 {
  Mat2 m = Mat2::identity();

  static Unitary2 identity() { return Unitary2{}; }
  constexpr const cplx& operator()(int r, int c) const { return m(r, c); }
};

/// 2x2 density matrix (Hermitian, unit trace).
struct Density2 {
  Mat2 m;

  constexpr const cplx& operator()(int r, int c) const { return m(r, c); }
};

struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const;
};

/// exp(-i H dt) in closed form. Throws std::invalid_argument for dt < 0 or
/// non-finite input.
Unitary2 pauli_expm(const PauliCoeffs& h, double dt);

/// Returns a*b, i.e. `b` acts first.
Unitary2 compose(const Unitary2& a, const Unitary2& b);

Unitary2 adjoint(const Unitary2& u);

/// Largest entrywise deviation of U^dagger U from the identity.
double unitarity_residual(const Unitary2& u);

/// Nearest unitary (polar factor) of a slightly drifted propagator.
Unitary2 reunitarize(const Unitary2& u);

/// Re-unitarizes only when the residual exceeds this threshold.
inline constexpr double kUnitarityTolerance = 1e-10;
Unitary2 reunitarize_if_drifted(const Unitary2& u);

/// U rho U^dagger.
Density2 evolve_density(const Density2& rho, const Unitary2& u);

/// State-independent fidelity: mean of Tr(U rho_k U^dagger rho_k) over the
/// three axial pure states rho_k = (I + sigma_k)/2.
double fidelity_axial(const Unitary2& u);

BlochVector bloch_vector(const Density2& rho);

/// (I + r.sigma)/2. Throws std::invalid_argument if |r| > 1 + 1e-10.
Density2 density_from_bloch(const BlochVector& r);

inline Density2 rho_x() { return density_from_bloch({1, 0, 0}); }
inline Density2 rho_y() { return density_from_bloch({0, 1, 0}); }
inline Density2 rho_z() { return density_from_bloch({0, 0, 1}); }

}  // namespace mdd
