#include "ntfk/tensor_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ntfk/errors.hpp"

namespace ntfk {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'K', '1'};

void putU64le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t getU64le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void putF64le(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  putU64le(os, bits);
}

double getF64le(std::istream& is) {
  const std::uint64_t bits = getU64le(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void writeTensor(const std::filesystem::path& path, const Tensor3& x) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("writeTensor: cannot open " + path.string());
  os.write(kMagic, 4);
  putU64le(os, x.dim(0));
  putU64le(os, x.dim(1));
  putU64le(os, x.dim(2));
  const double* d = x.data();
  for (std::size_t t = 0; t < x.size(); ++t) putF64le(os, d[t]);
  if (!os) throw ValidationError("writeTensor: write failed for " + path.string());
}

Tensor3 readTensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("readTensor: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("readTensor: corrupt header (bad magic) in " + path.string());
  const std::uint64_t K = getU64le(is), M = getU64le(is), N = getU64le(is);
  if (!is || K == 0 || M == 0 || N == 0 || K * M * N > (1ULL << 32))
    throw ValidationError("readTensor: corrupt header (bad dims) in " + path.string());
  Tensor3 x(K, M, N);
  double* d = x.data();
  for (std::size_t t = 0; t < x.size(); ++t) d[t] = getF64le(is);
  if (!is) throw ValidationError("readTensor: truncated payload in " + path.string());
  if (!x.allFinite())
    throw ValidationError("readTensor: non-finite entries in " + path.string());
  return x;
}

void writeTensorCsv(const std::filesystem::path& path, const Tensor3& x) {
  std::ofstream os(path);
  if (!os) throw ValidationError("writeTensorCsv: cannot open " + path.string());
  os << "i,j,l,value\n";
  char buf[64];
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < x.dim(1); ++j)
      for (std::size_t l = 0; l < x.dim(2); ++l) {
        std::snprintf(buf, sizeof(buf), "%.17g", x(i, j, l));
        os << i << ',' << j << ',' << l << ',' << buf << '\n';
      }
}

Matrix matrixFromTensor(const Tensor3& t) {
  if (t.dim(2) != 1)
    throw ValidationError("matrixFromTensor: trailing dimension must be 1");
  Matrix m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t(i, j, 0);
  return m;
}

Tensor3 tensorFromMatrix(const Matrix& m) {
  Tensor3 t(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), 1);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      t(static_cast<std::size_t>(i), static_cast<std::size_t>(j), 0) = m(i, j);
  return t;
}

void writeModel(const std::filesystem::path& dir, const TuckerModel& model,
                const ModelMeta& meta) {
  std::filesystem::create_directories(dir);
  writeTensor(dir / "core.ntk", model.core);
  writeTensor(dir / "W.ntk", tensorFromMatrix(model.W));
  writeTensor(dir / "H.ntk", tensorFromMatrix(model.H));
  writeTensor(dir / "V.ntk", tensorFromMatrix(model.V));
  std::ofstream os(dir / "metadata.txt");
  if (!os) throw ValidationError("writeModel: cannot open metadata.txt");
  char buf[64];
  os << "rankTime " << meta.ranks[0] << "\n";
  os << "rankX " << meta.ranks[1] << "\n";
  os << "rankY " << meta.ranks[2] << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", meta.sparsityWeight);
  os << "sparsityWeight " << buf << "\n";
  os << "seed " << meta.seed << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", meta.finalR);
  os << "finalR " << buf << "\n";
  os << "sweepCount " << meta.sweepCount << "\n";
}

TuckerModel readModel(const std::filesystem::path& dir, ModelMeta* meta) {
  TuckerModel model;
  model.core = readTensor(dir / "core.ntk");
  model.W = matrixFromTensor(readTensor(dir / "W.ntk"));
  model.H = matrixFromTensor(readTensor(dir / "H.ntk"));
  model.V = matrixFromTensor(readTensor(dir / "V.ntk"));
  if (meta != nullptr) {
    std::ifstream is(dir / "metadata.txt");
    if (!is) throw ValidationError("readModel: cannot open metadata.txt");
    std::string key;
    while (is >> key) {
      if (key == "rankTime") is >> meta->ranks[0];
      else if (key == "rankX") is >> meta->ranks[1];
      else if (key == "rankY") is >> meta->ranks[2];
      else if (key == "sparsityWeight") is >> meta->sparsityWeight;
      else if (key == "seed") is >> meta->seed;
      else if (key == "finalR") is >> meta->finalR;
      else if (key == "sweepCount") is >> meta->sweepCount;
      else { std::string skip; is >> skip; }
    }
  }
  return model;
}

}  // namespace ntfk
