#pragma once

#include <Eigen/Dense>
#include <random>
#include <stdexcept>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace hytl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Closed-form flow of dx = A x + b over time tau, via the augmented
/// matrix exponential exp([[A, b], [0, 0]] tau).
inline Vector affine_flow(const Matrix& A, const Vector& b, const Vector& x0, double tau) {
  const int n = static_cast<int>(x0.size());
  Matrix aug = Matrix::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = A * tau;
  aug.topRightCorner(n, 1) = b * tau;
  Matrix E = aug.exp();
  return E.topLeftCorner(n, n) * x0 + E.topRightCorner(n, 1);
}

/// Fixed-step propagator x_{k+1} = E x_k + f for dx = A x + b.
struct AffineStepper {
  Matrix E;
  Vector f;

  AffineStepper(const Matrix& A, const Vector& b, double h) {
    const int n = static_cast<int>(b.size());
    Matrix aug = Matrix::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = A * h;
    aug.topRightCorner(n, 1) = b * h;
    Matrix Ea = aug.exp();
    E = Ea.topLeftCorner(n, n);
    f = Ea.topRightCorner(n, 1);
  }

  Vector step(const Vector& x) const { return E * x + f; }
};

inline double lambda_min(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  return es.eigenvalues().minCoeff();
}

inline double lambda_max(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  return es.eigenvalues().maxCoeff();
}

inline bool is_hurwitz(const Matrix& A, double tol = 1e-9) {
  Eigen::EigenSolver<Matrix> es(A);
  return es.eigenvalues().real().maxCoeff() < -tol;
}

/// Symmetric square root inverse of an SPD matrix.
inline Matrix inv_sqrt(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(M);
  if (es.eigenvalues().minCoeff() <= 0) throw std::domain_error("matrix is not positive definite");
  return es.operatorInverseSqrt();
}

/// Quadratic form norm Phi(x, y) = sqrt((x-y)^T M (x-y)).
inline double bisim_dist(const Matrix& M, const Vector& x, const Vector& y) {
  Vector d = x - y;
  return std::sqrt(std::max(0.0, d.dot(M * d)));
}

/// Uniform point on the unit sphere.
inline Vector sphere_sample(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector u(n);
  for (int i = 0; i < n; ++i) u(i) = gauss(rng);
  double nrm = u.norm();
  if (nrm < 1e-300) return sphere_sample(n, rng);
  return u / nrm;
}

/// Point on the boundary of the ellipsoid {x : Phi_M(x, c) = r}.
inline Vector ellipsoid_boundary_sample(const Matrix& M, const Vector& center, double r,
                                        std::mt19937_64& rng) {
  return center + r * (inv_sqrt(M) * sphere_sample(static_cast<int>(center.size()), rng));
}

/// Uniform point inside the ellipsoid {x : Phi_M(x, c) < r}.
inline Vector ellipsoid_interior_sample(const Matrix& M, const Vector& center, double r,
                                        std::mt19937_64& rng) {
  const int n = static_cast<int>(center.size());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double radius = r * std::pow(uni(rng), 1.0 / n);
  return center + radius * (inv_sqrt(M) * sphere_sample(n, rng));
}

/// Deterministic derived seed for sub-streams (splitmix64 mix).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace hytl
