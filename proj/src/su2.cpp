#include "mdd/su2.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mdd {

Mat2 operator*(const Mat2& a, const Mat2& b) {
  Mat2 r;
  r(0, 0) = a(0, 0) * b(0, 0) + a(0, 1) * b(1, 0);
  r(0, 1) = a(0, 0) * b(0, 1) + a(0, 1) * b(1, 1);
  r(1, 0) = a(1, 0) * b(0, 0) + a(1, 1) * b(1, 0);
  r(1, 1) = a(1, 0) * b(0, 1) + a(1, 1) * b(1, 1);
  return r;
}

Mat2 operator+(const Mat2& a, const Mat2& b) {
  Mat2 r;
  for (int i = 0; i < 4; ++i) r.e[i] = a.e[i] + b.e[i];
  return r;
}

Mat2 operator-(const Mat2& a, const Mat2& b) {
  Mat2 r;
  for (int i = 0; i < 4; ++i) r.e[i] = a.e[i] - b.e[i];
  return r;
}

Mat2 operator*(cplx s, const Mat2& a) {
  Mat2 r;
  for (int i = 0; i < 4; ++i) r.e[i] = s * a.e[i];
  return r;
}

Mat2 adjoint(const Mat2& a) {
  return Mat2{{std::conj(a(0, 0)), std::conj(a(1, 0)), std::conj(a(0, 1)), std::conj(a(1, 1))}};
}

cplx trace(const Mat2& a) { return a(0, 0) + a(1, 1); }

cplx det(const Mat2& a) { return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0); }

double max_abs_diff(const Mat2& a, const Mat2& b) {
  double d = 0.0;
  for (int i = 0; i < 4; ++i) d = std::max(d, std::abs(a.e[i] - b.e[i]));
  return d;
}

Mat2 to_matrix(const PauliCoeffs& h) {
  // H = h0 I + (hx sx + hy sy + hz sz)/2
  return Mat2{{cplx{h.h0 + 0.5 * h.hz, 0.0}, cplx{0.5 * h.hx, -0.5 * h.hy},
               cplx{0.5 * h.hx, 0.5 * h.hy}, cplx{h.h0 - 0.5 * h.hz, 0.0}}};
}

PauliCoeffs from_matrix(const Mat2& m) {
  PauliCoeffs h;
  h.h0 = 0.5 * (m(0, 0).real() + m(1, 1).real());
  h.hz = m(0, 0).real() - m(1, 1).real();
  // Off-diagonal average keeps only the Hermitian part.
  const cplx off = 0.5 * (m(1, 0) + std::conj(m(0, 1)));
  h.hx = 2.0 * off.real();
  h.hy = 2.0 * off.imag();
  return h;
}

double BlochVector::norm() const { return std::sqrt(x * x + y * y + z * z); }

Unitary2 pauli_expm(const PauliCoeffs& h, double dt) {
  if (!std::isfinite(h.h0) || !std::isfinite(h.hx) || !std::isfinite(h.hy) ||
      !std::isfinite(h.hz) || !std::isfinite(dt)) {
    throw std::invalid_argument("pauli_expm: non-finite generator or step");
  }
  if (dt < 0.0) throw std::invalid_argument("pauli_expm: negative time step");

  // exp(-i (|h| dt / 2) n.sigma) = cos(theta) I - i sin(theta) n.sigma
  const double norm = std::sqrt(h.hx * h.hx + h.hy * h.hy + h.hz * h.hz);
  const double theta = 0.5 * norm * dt;
  const double c = std::cos(theta);
  // sin(theta)/|h|, finite as |h| -> 0
  const double s_over = norm > 0.0 ? std::sin(theta) / norm : 0.5 * dt;

  const double ax = h.hx * s_over;
  const double ay = h.hy * s_over;
  const double az = h.hz * s_over;

  Unitary2 u;
  u.m(0, 0) = cplx{c, -az};
  u.m(0, 1) = cplx{-ay, -ax};
  u.m(1, 0) = cplx{ay, -ax};
  u.m(1, 1) = cplx{c, az};
  if (h.h0 != 0.0) {
    const cplx phase = std::polar(1.0, -h.h0 * dt);
    u.m = phase * u.m;
  }
  return u;
}

Unitary2 compose(const Unitary2& a, const Unitary2& b) { return Unitary2{a.m * b.m}; }

Unitary2 adjoint(const Unitary2& u) { return Unitary2{adjoint(u.m)}; }

double unitarity_residual(const Unitary2& u) {
  return max_abs_diff(adjoint(u.m) * u.m, Mat2::identity());
}

Unitary2 reunitarize(const Unitary2& u) {
  // Newton iteration for the polar factor: X <- (X + X^{-dagger})/2.
  Mat2 x = u.m;
  for (int it = 0; it < 6; ++it) {
    const cplx d = det(x);
    if (std::abs(d) == 0.0) throw std::invalid_argument("reunitarize: singular matrix");
    // inverse = adj/det; inverse^dagger = adj^dagger / conj(det)
    const Mat2 adj{{x(1, 1), -x(0, 1), -x(1, 0), x(0, 0)}};
    const Mat2 inv_dag = (1.0 / std::conj(d)) * adjoint(adj);
    const Mat2 next = 0.5 * (x + inv_dag);
    const double change = max_abs_diff(next, x);
    x = next;
    if (change < 1e-16) break;
  }
  return Unitary2{x};
}

Unitary2 reunitarize_if_drifted(const Unitary2& u) {
  return unitarity_residual(u) > kUnitarityTolerance ? reunitarize(u) : u;
}

Density2 evolve_density(const Density2& rho, const Unitary2& u) {
  return Density2{u.m * rho.m * adjoint(u.m)};
}

double fidelity_axial(const Unitary2& u) {
  static const std::array<Mat2, 3> states = {rho_x().m, rho_y().m, rho_z().m};
  double sum = 0.0;
  for (const Mat2& rho : states) {
    sum += trace(u.m * rho * adjoint(u.m) * rho).real();
  }
  return sum / 3.0;
}

BlochVector bloch_vector(const Density2& rho) {
  return BlochVector{trace(rho.m * Mat2::pauli_x()).real(), trace(rho.m * Mat2::pauli_y()).real(),
                     trace(rho.m * Mat2::pauli_z()).real()};
}

Density2 density_from_bloch(const BlochVector& r) {
  if (r.norm() > 1.0 + 1e-10) throw std::invalid_argument("density_from_bloch: |r| > 1");
  return Density2{0.5 * (Mat2::identity() + cplx{r.x, 0} * Mat2::pauli_x() +
                         cplx{r.y, 0} * Mat2::pauli_y() + cplx{r.z, 0} * Mat2::pauli_z())};
}

}  // namespace mdd
