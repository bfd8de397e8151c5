#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace atlab {

using Index = Eigen::Index;
using ArrayX = Eigen::ArrayXd;
using VectorX = Eigen::VectorXd;
// Row-major throughout: tensors are flat row-major buffers and maps must agree.
using MatrixR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatR = Eigen::Map<MatrixR>;
using MapConstMatR = Eigen::Map<const MatrixR>;

// Data/format problems (bad magic, truncated files, schema mismatch). CLI exit code 2.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures (non-finite values, degenerate inputs). CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string shape_to_string(const std::vector<Index>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

// splitmix64 step; used to derive independent sub-streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Fixed-size block decomposition so results do not depend on the thread count.
// fn(begin, end) is called over disjoint [begin, end) ranges.
void parallel_for(Index n, int threads, const std::function<void(Index, Index)>& fn);

// Global worker-count knob set by the CLI --threads flag; defaults to 1.
int default_threads();
void set_default_threads(int n);

// FNV-1a 64-bit; manifest content hashes.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string fnv1a64_hex(const std::string& bytes);
std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace atlab
