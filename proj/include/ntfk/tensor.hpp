#ifndef NTFK_TENSOR_HPP
#define NTFK_TENSOR_HPP

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <vector>

namespace ntfk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Mode { Time = 0, X = 1, Y = 2 };

/// Dense 3-way array X(t, x, y). Index order (i, j, l) = (time, x, y) with
/// time slowest-varying, y fastest. Immutable by convention once filled;
/// all operations below are reentrant.
class Tensor3 {
 public:
  Tensor3() : dims_{0, 0, 0} {}
  Tensor3(std::size_t K, std::size_t M, std::size_t N)
      : dims_{K, M, N}, values_(K * M * N, 0.0) {}

  std::size_t dim(int mode) const { return dims_[static_cast<std::size_t>(mode)]; }
  const std::array<std::size_t, 3>& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t l) {
    return values_[(i * dims_[1] + j) * dims_[2] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t l) const {
    return values_[(i * dims_[1] + j) * dims_[2] + l];
  }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double frobeniusNorm() const;
  double maxAbs() const;
  double minValue() const;
  double maxValue() const;
  bool allFinite() const;

 private:
  std::array<std::size_t, 3> dims_;  // (K, M, N)
  std::vector<double> values_;
};

/// Tucker-3 model: X ~ core x0 W x1 H x2 V. All blocks entrywise >= 0.
/// After normalize(), the columns of W, H, V have unit Euclidean norm and the
/// scale lives in the core.
struct TuckerModel {
  Tensor3 core;  // (k, m, n)
  Matrix W;      // K x k, temporal factor
  Matrix H;      // M x m, x factor
  Matrix V;      // N x n, y factor

  std::size_t rank(int mode) const { return core.dim(mode); }

  // Absorbs factor-column norms into the core. Zero columns are left alone
  // (their core slices must already be zero for the model to be meaningful).
  void normalize();
};

// Mode-n unfoldings. Column ordering is fixed and cyclic:
//   Time: rows K, column (j, l) -> j*N + l   (x slowest, y fastest)
//   X:    rows M, column (l, i) -> l*K + i   (y slowest, time fastest)
//   Y:    rows N, column (i, j) -> i*M + j   (time slowest, x fastest)
// fold(unfold(X, mode), mode, dims) == X exactly.
Matrix unfold(const Tensor3& x, Mode mode);
Tensor3 fold(const Matrix& m, Mode mode, const std::array<std::size_t, 3>& dims);

// Mode product: contracts `a` (newDim x oldDim) against the given mode.
Tensor3 modeProduct(const Tensor3& x, const Matrix& a, Mode mode);

// Tucker-3 estimate: Xhat_ijl = sum_pqr core_pqr W_ip H_jq V_lr.
Tensor3 reconstruct(const TuckerModel& model);

// R = ||x - xhat||_F / ||x||_F. Throws ValidationError when ||x|| == 0.
double relativeError(const Tensor3& x, const Tensor3& xhat);

// Entrywise difference x - y; throws ValidationError on dim mismatch.
Tensor3 subtract(const Tensor3& x, const Tensor3& y);

}  // namespace ntfk

#endif  // NTFK_TENSOR_HPP
