#include "nodex/data/volume.hpp"

#include <cmath>

namespace nodex::data {

namespace {

std::size_t out_len(std::size_t n, Scalar spacing) {
  return static_cast<std::size_t>(std::floor(static_cast<Scalar>(n - 1) * spacing)) + 1;
}

}  // namespace

Volume resample_to_isotropic(const Volume& in) {
  NODEX_CHECK(in.nz > 0 && in.ny > 0 && in.nx > 0, "resample: degenerate axis");
  NODEX_CHECK(in.spacing_z > 0 && in.spacing_y > 0 && in.spacing_x > 0,
              "resample: spacings must be positive");
  NODEX_CHECK(in.values.size() == in.size(), "resample: value buffer size mismatch");

  if (in.spacing_z == 1.0 && in.spacing_y == 1.0 && in.spacing_x == 1.0) {
    return in;  // already isotropic
  }

  Volume out;
  out.nz = out_len(in.nz, in.spacing_z);
  out.ny = out_len(in.ny, in.spacing_y);
  out.nx = out_len(in.nx, in.spacing_x);
  out.spacing_z = out.spacing_y = out.spacing_x = 1.0;
  out.values.resize(out.size());

  auto prep = [](std::size_t j, Scalar spacing, std::size_t n, std::size_t& i0, std::size_t& i1,
                 Scalar& w) {
    Scalar pos = static_cast<Scalar>(j) / spacing;
    if (pos >= static_cast<Scalar>(n - 1)) {
      i0 = i1 = n - 1;
      w = 0.0;
      return;
    }
    i0 = static_cast<std::size_t>(std::floor(pos));
    i1 = i0 + 1;
    w = pos - static_cast<Scalar>(i0);
  };

  for (std::size_t z = 0; z < out.nz; ++z) {
    std::size_t z0, z1;
    Scalar wz;
    prep(z, in.spacing_z, in.nz, z0, z1, wz);
    for (std::size_t y = 0; y < out.ny; ++y) {
      std::size_t y0, y1;
      Scalar wy;
      prep(y, in.spacing_y, in.ny, y0, y1, wy);
      for (std::size_t x = 0; x < out.nx; ++x) {
        std::size_t x0, x1;
        Scalar wx;
        prep(x, in.spacing_x, in.nx, x0, x1, wx);
        Scalar c00 = in.at(z0, y0, x0) * (1 - wx) + in.at(z0, y0, x1) * wx;
        Scalar c01 = in.at(z0, y1, x0) * (1 - wx) + in.at(z0, y1, x1) * wx;
        Scalar c10 = in.at(z1, y0, x0) * (1 - wx) + in.at(z1, y0, x1) * wx;
        Scalar c11 = in.at(z1, y1, x0) * (1 - wx) + in.at(z1, y1, x1) * wx;
        Scalar c0 = c00 * (1 - wy) + c01 * wy;
        Scalar c1 = c10 * (1 - wy) + c11 * wy;
        out.at(z, y, x) = c0 * (1 - wz) + c1 * wz;
      }
    }
  }
  return out;
}

Matrix extract_patch(const Volume& vol, Scalar cz, Scalar cy, Scalar cx, int size) {
  NODEX_CHECK(vol.nz > 0 && vol.ny > 0 && vol.nx > 0, "extract_patch: empty volume");
  NODEX_CHECK(cz >= 0 && cz <= static_cast<Scalar>(vol.nz - 1) && cy >= 0 &&
                  cy <= static_cast<Scalar>(vol.ny - 1) && cx >= 0 &&
                  cx <= static_cast<Scalar>(vol.nx - 1),
              "extract_patch: centroid outside volume");

  std::size_t z = static_cast<std::size_t>(std::llround(cz));
  long icy = std::lround(cy);
  long icx = std::lround(cx);
  int half = size / 2;

  Matrix patch = Matrix::Zero(size, size);
  for (int r = 0; r < size; ++r) {
    long y = icy - half + r;
    if (y < 0 || y >= static_cast<long>(vol.ny)) continue;
    for (int c = 0; c < size; ++c) {
      long x = icx - half + c;
      if (x < 0 || x >= static_cast<long>(vol.nx)) continue;
      patch(r, c) = vol.at(z, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
    }
  }
  return patch;
}

Matrix normalize_window(const Matrix& patch, Scalar window_lo, Scalar window_hi) {
  NODEX_CHECK(window_hi > window_lo, "normalize_window: empty window");
  Matrix out = patch;
  Scalar span = window_hi - window_lo;
  for (Eigen::Index r = 0; r < out.rows(); ++r)
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      Scalar v = std::min(std::max(out(r, c), window_lo), window_hi);
      out(r, c) = (v - window_lo) / span;
    }
  return out;
}

}  // namespace nodex::data
