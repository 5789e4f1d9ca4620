#pragma once

#include <array>
#include <cmath>
#include <utility>

#include "agora/common.hpp"

namespace agora {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

// Row-major 2x2 with rows (a b; c d).
struct Mat2 {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  double trace() const { return a + d; }
  double det() const { return a * d - b * c; }
};

inline Vec2 operator*(const Mat2& m, Vec2 v) {
  return {m.a * v.x + m.b * v.y, m.c * v.x + m.d * v.y};
}
inline Mat2 transpose(const Mat2& m) { return {m.a, m.c, m.b, m.d}; }

// Largest real part among the eigenvalues of a general 2x2 matrix.
inline double max_eig_real(const Mat2& m) {
  const double h = 0.5 * m.trace();
  const double disc = h * h - m.det();
  return disc <= 0.0 ? h : h + std::sqrt(disc);
}

// Unit eigenvector for a real eigenvalue of a general 2x2 matrix.
inline Vec2 eigenvector(const Mat2& m, double lambda) {
  // (m - lambda I) v = 0; pick the better-conditioned row.
  const Vec2 r1{m.a - lambda, m.b};
  const Vec2 r2{m.c, m.d - lambda};
  const Vec2 r = norm(r1) >= norm(r2) ? r1 : r2;
  Vec2 v{-r.y, r.x};
  const double n = norm(v);
  if (n == 0.0) return {1.0, 0.0};
  return (1.0 / n) * v;
}

// Symmetric 2x2.
struct Sym2 {
  double xx = 0.0, xy = 0.0, yy = 0.0;
  double trace() const { return xx + yy; }
  double det() const { return xx * yy - xy * xy; }
  double quad(Vec2 v) const {
    return v.x * v.x * xx + 2.0 * v.x * v.y * xy + v.y * v.y * yy;
  }
  double min_eig() const {
    return 0.5 * (xx + yy) - std::hypot(0.5 * (xx - yy), xy);
  }
};

inline Sym2 operator+(Sym2 a, Sym2 b) { return {a.xx + b.xx, a.xy + b.xy, a.yy + b.yy}; }
inline Sym2 operator*(double s, Sym2 m) { return {s * m.xx, s * m.xy, s * m.yy}; }
inline Vec2 operator*(const Sym2& m, Vec2 v) {
  return {m.xx * v.x + m.xy * v.y, m.xy * v.x + m.yy * v.y};
}

// Eigenvalues clamped from below; the matrix is rebuilt in its own eigenbasis.
inline Sym2 floor_eigenvalues(const Sym2& m, double floor) {
  const double h = 0.5 * (m.xx + m.yy);
  const double r = std::hypot(0.5 * (m.xx - m.yy), m.xy);
  if (h - r >= floor) return m;
  const double c2 = r > 0.0 ? 0.5 * (m.xx - m.yy) / r : 1.0;  // cos of twice the basis angle
  const double s2 = r > 0.0 ? m.xy / r : 0.0;
  const double l1 = std::max(h + r, floor);
  const double l2 = std::max(h - r, floor);
  const double mean = 0.5 * (l1 + l2);
  const double half = 0.5 * (l1 - l2);
  return {mean + half * c2, half * s2, mean - half * c2};
}

inline Sym2 inverse(const Sym2& m) {
  const double d = m.det();
  if (d == 0.0) throw NumericalError("Sym2 inverse: singular matrix");
  return {m.yy / d, -m.xy / d, m.xx / d};
}

// Solve a 3x3 linear system by Gaussian elimination with partial pivoting.
inline std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> m,
                                    std::array<double, 3> rhs) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int rw = col + 1; rw < 3; ++rw)
      if (std::abs(m[rw][col]) > std::abs(m[piv][col])) piv = rw;
    if (m[piv][col] == 0.0) throw NumericalError("solve3: singular system");
    std::swap(m[col], m[piv]);
    std::swap(rhs[col], rhs[piv]);
    for (int rw = col + 1; rw < 3; ++rw) {
      const double f = m[rw][col] / m[col][col];
      for (int k = col; k < 3; ++k) m[rw][k] -= f * m[col][k];
      rhs[rw] -= f * rhs[col];
    }
  }
  std::array<double, 3> u{};
  for (int rw = 2; rw >= 0; --rw) {
    double s = rhs[rw];
    for (int k = rw + 1; k < 3; ++k) s -= m[rw][k] * u[k];
    u[rw] = s / m[rw][rw];
  }
  return u;
}

}  // namespace agora
