#pragma once

#include <vector>

#include "nodex/common.hpp"

namespace nodex::data {

/// Dense 3D intensity array, C order (z, y, x).
struct Volume {
  std::size_t nz = 0, ny = 0, nx = 0;
  Scalar spacing_z = 1, spacing_y = 1, spacing_x = 1;  // mm per voxel
  std::vector<Scalar> values;

  Scalar& at(std::size_t z, std::size_t y, std::size_t x) {
    return values[(z * ny + y) * nx + x];
  }
  Scalar at(std::size_t z, std::size_t y, std::size_t x) const {
    return values[(z * ny + y) * nx + x];
  }
  std::size_t size() const { return nz * ny * nx; }
};

/// Trilinear resampling onto a 1mm isotropic grid. Node-centred: output
/// index j along an axis with input spacing s samples input coordinate j/s;
/// output length is floor((n-1)*s)+1, so the sampled extent is preserved
/// within one voxel and an already-isotropic volume passes through
/// unchanged.
Volume resample_to_isotropic(const Volume& in);

/// Extracts a size x size axial patch centred on the (z,y,x) voxel centroid
/// of a 1mm volume. The centroid lands on the patch centre (size/2, size/2);
/// out-of-bounds pixels are zero. Throws if the centroid is outside the
/// volume.
Matrix extract_patch(const Volume& vol, Scalar cz, Scalar cy, Scalar cx, int size = kPatchSize);

/// Clips intensities to [window_lo, window_hi] and rescales to [0,1].
Matrix normalize_window(const Matrix& patch, Scalar window_lo, Scalar window_hi);

}  // namespace nodex::data
