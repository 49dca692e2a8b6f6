#include "noisetensor/spin_isotropic.hpp"

#include <cmath>
#include <stdexcept>

#include "noisetensor/rng.hpp"
#include "noisetensor/stats.hpp"

namespace noisetensor::spin {

namespace {

constexpr Cx kI{0.0, 1.0};

std::array<Matrix, 3> make_paulis() {
  std::array<Matrix, 3> s;
  s[0] = Matrix{{0.0, 1.0}, {1.0, 0.0}};
  s[1] = Matrix{{0.0, -kI}, {kI, 0.0}};
  s[2] = Matrix{{1.0, 0.0}, {0.0, -1.0}};
  return s;
}

// sigma_{i1j1} . sigma_{i2j2}
Cx sigma_dot(int i1, int j1, int i2, int j2) {
  const auto& s = paulis();
  Cx acc = 0.0;
  for (int r = 0; r < 3; ++r) acc += s[static_cast<std::size_t>(r)](i1, j1) *
                                     s[static_cast<std::size_t>(r)](i2, j2);
  return acc;
}

double kron(int i, int j) { return i == j ? 1.0 : 0.0; }

}  // namespace

const std::array<Matrix, 3>& paulis() {
  static const std::array<Matrix, 3> s = make_paulis();
  return s;
}

Matrix bloch_density(const Eigen::Vector3d& v) {
  const auto& s = paulis();
  Matrix rho = 0.5 * Matrix::Identity(2, 2);
  for (int r = 0; r < 3; ++r) rho += 0.5 * v(r) * s[static_cast<std::size_t>(r)];
  return rho;
}

Vector bloch_state(const Eigen::Vector3d& v) {
  const double theta = std::acos(std::clamp(v(2), -1.0, 1.0));
  const double phi = std::atan2(v(1), v(0));
  Vector psi(2);
  psi(0) = std::cos(theta / 2);
  psi(1) = std::exp(kI * phi) * std::sin(theta / 2);
  return psi;
}

PairTensor analytic_tensor(int order) {
  if (order < 1 || order > 3) {
    throw std::invalid_argument("analytic spin tensors are available for orders 1..3");
  }
  PairTensor out(order, 2, Flavor::classical);
  noisetensor::detail::for_each_multi_index(
      2 * order, 2, [&](std::span<const int> x, std::size_t flat) {
        const int i1 = x[0], j1 = x[1];
        if (order == 1) {
          out[flat] = 0.5 * kron(i1, j1);
          return;
        }
        const int i2 = x[2], j2 = x[3];
        if (order == 2) {
          out[flat] = 0.25 * (kron(i1, j1) * kron(i2, j2) +
                              sigma_dot(i1, j1, i2, j2) / 3.0);
          return;
        }
        const int i3 = x[4], j3 = x[5];
        out[flat] = 0.125 * (kron(i1, j1) * kron(i2, j2) * kron(i3, j3) +
                             (kron(i1, j1) * sigma_dot(i2, j2, i3, j3) +
                              kron(i2, j2) * sigma_dot(i1, j1, i3, j3) +
                              kron(i3, j3) * sigma_dot(i1, j1, i2, j2)) /
                                 3.0);
      });
  return out;
}

namespace detail {

Cx sinhc_sqrt_series(Cx x) {
  // sum_k x^k/(2k+1)!; twelve terms reach full precision for |x| <= 1.
  Cx term = 1.0;
  Cx acc = 1.0;
  for (int k = 1; k <= 12; ++k) {
    term *= x / static_cast<double>(2 * k * (2 * k + 1));
    acc += term;
  }
  return acc;
}

Cx sinhc_sqrt_closed(Cx x) {
  const Cx s = std::sqrt(x);
  return std::sinh(s) / s;
}

}  // namespace detail

namespace {

Cx sinhc_sqrt(Cx x) {
  return std::abs(x) < 1e-2 ? detail::sinhc_sqrt_series(x) : detail::sinhc_sqrt_closed(x);
}

}  // namespace

Cx analytic_generating(const Matrix& a) {
  if (a.rows() != 2 || a.cols() != 2) {
    throw std::invalid_argument("source matrix must be 2x2");
  }
  const auto& s = paulis();
  Cx a2 = 0.0;
  for (int r = 0; r < 3; ++r) {
    const Cx ar = 0.5 * s[static_cast<std::size_t>(r)].cwiseProduct(a).sum();
    a2 += ar * ar;
  }
  return std::exp(0.5 * a.trace()) * sinhc_sqrt(a2);
}

double radial_ode_residual(double x) {
  Cx f, f1, f2;
  if (std::abs(x) < 0.1) {
    // Series derivatives: f = sum x^k/(2k+1)!.
    f = 0.0;
    f1 = 0.0;
    f2 = 0.0;
    double c = 1.0;  // 1/(2k+1)!
    double xk = 1.0, xkm1 = 0.0, xkm2 = 0.0;
    for (int k = 0; k <= 20; ++k) {
      if (k >= 2) f2 += static_cast<double>(k) * static_cast<double>(k - 1) * c * xkm2;
      if (k >= 1) f1 += static_cast<double>(k) * c * xkm1;
      f += c * xk;
      xkm2 = xkm1;
      xkm1 = xk;
      xk *= x;
      c /= static_cast<double>((2 * k + 2) * (2 * k + 3));
    }
  } else {
    const Cx s = std::sqrt(Cx(x));
    const Cx sh = std::sinh(s), ch = std::cosh(s);
    f = sh / s;
    f1 = ch / (2.0 * s * s) - sh / (2.0 * s * s * s);
    f2 = sh / (4.0 * s * s * s) - 3.0 * ch / (4.0 * s * s * s * s) +
         3.0 * sh / (4.0 * s * s * s * s * s);
  }
  return std::abs(x * f2 + 1.5 * f1 - 0.25 * f);
}

std::vector<Eigen::Vector3d> sample_sphere(std::uint64_t seed, std::size_t n) {
  if (n == 0) throw std::invalid_argument("sample count must be positive");
  std::vector<Eigen::Vector3d> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    RngStream rng = RngStream::labeled(seed, "spin-sphere", k);
    Eigen::Vector3d g;
    double norm = 0.0;
    do {
      g << rng.normal(), rng.normal(), rng.normal();
      norm = g.norm();
    } while (norm < 1e-12);
    out[k] = g / norm;
  }
  return out;
}

WeightedEnsemble sphere_ensemble(std::uint64_t seed, std::size_t n) {
  const auto vs = sample_sphere(seed, n);
  std::vector<EnsembleMember> members;
  members.reserve(n);
  const double w = 1.0 / static_cast<double>(n);
  for (const auto& v : vs) members.push_back({w, bloch_state(v)});
  return WeightedEnsemble(2, std::move(members));
}

std::vector<TensorEstimate> mc_tensors(std::uint64_t seed, std::size_t n_samples,
                                       int max_order, int n_batches) {
  if (max_order < 1 || max_order > 3) {
    throw std::invalid_argument("mc_tensors supports orders 1..3");
  }
  const auto vs = sample_sphere(seed, n_samples);
  std::vector<BatchVectorStats> acc;
  for (int ord = 1; ord <= max_order; ++ord) {
    acc.emplace_back(n_batches, static_cast<Eigen::Index>(1) << (2 * ord));
  }
  Vector flat1(4), flat2(16), flat3(64);
  for (std::size_t k = 0; k < n_samples; ++k) {
    const Matrix rho = bloch_density(vs[k]);
    const int batch = static_cast<int>(k * static_cast<std::size_t>(n_batches) / n_samples);
    int w1 = 0;
    for (int i1 = 0; i1 < 2; ++i1) {
      for (int j1 = 0; j1 < 2; ++j1) flat1(w1++) = rho(i1, j1);
    }
    acc[0].add(batch, flat1);
    if (max_order >= 2) {
      int w2 = 0;
      for (int p = 0; p < 4; ++p) {
        for (int q = 0; q < 4; ++q) flat2(w2++) = flat1(p) * flat1(q);
      }
      acc[1].add(batch, flat2);
    }
    if (max_order >= 3) {
      int w3 = 0;
      for (int p = 0; p < 4; ++p) {
        for (int q = 0; q < 16; ++q) flat3(w3++) = flat1(p) * flat2(q);
      }
      acc[2].add(batch, flat3);
    }
  }
  std::vector<TensorEstimate> out;
  for (int ord = 1; ord <= max_order; ++ord) {
    TensorEstimate est{PairTensor(ord, 2, Flavor::classical),
                       acc[static_cast<std::size_t>(ord - 1)].std_error()};
    const Vector mean = acc[static_cast<std::size_t>(ord - 1)].mean();
    for (std::size_t f = 0; f < est.mean.size(); ++f) est.mean[f] = mean(static_cast<Eigen::Index>(f));
    out.push_back(std::move(est));
  }
  return out;
}

}  // namespace noisetensor::spin
