#ifndef NTFK_TENSOR_IO_HPP
#define NTFK_TENSOR_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>

#include "ntfk/tensor.hpp"

namespace ntfk {

// Binary tensor file layout: magic "NTK1", three little-endian uint64 dims
// (K, M, N), then K*M*N little-endian IEEE-754 doubles in (time, x, y) order
// with y fastest. Matrices are stored as degenerate 3-way tensors with
// trailing dim 1.
void writeTensor(const std::filesystem::path& path, const Tensor3& x);
Tensor3 readTensor(const std::filesystem::path& path);

// One row per entry: i,j,l,value.
void writeTensorCsv(const std::filesystem::path& path, const Tensor3& x);

struct ModelMeta {
  std::size_t ranks[3] = {0, 0, 0};
  double sparsityWeight = 0.0;
  std::uint64_t seed = 0;
  double finalR = 0.0;
  std::size_t sweepCount = 0;
};

// Model directory: core.ntk, W.ntk, H.ntk, V.ntk plus metadata.txt.
void writeModel(const std::filesystem::path& dir, const TuckerModel& model,
                const ModelMeta& meta);
TuckerModel readModel(const std::filesystem::path& dir, ModelMeta* meta = nullptr);

Matrix matrixFromTensor(const Tensor3& t);
Tensor3 tensorFromMatrix(const Matrix& m);

}  // namespace ntfk

#endif  // NTFK_TENSOR_IO_HPP
