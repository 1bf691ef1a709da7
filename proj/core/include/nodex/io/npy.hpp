#pragma once

#include <filesystem>
#include <vector>

#include "nodex/common.hpp"

namespace nodex::io {

/// Dense little-endian arrays in NPY v1.0 format ('<f4' or '<f8', C order).
/// 2D arrays round-trip through Eigen matrices (row-major on disk); 3D
/// arrays through a flat buffer plus dims.

struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<Scalar> data;  // C order
};

void write_npy(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
               const std::vector<Scalar>& data, bool as_float32 = true);
NpyArray read_npy(const std::filesystem::path& path);

void write_npy_matrix(const std::filesystem::path& path, const Matrix& m, bool as_float32 = true);
Matrix read_npy_matrix(const std::filesystem::path& path);

}  // namespace nodex::io
