#include "nodex/data/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "nodex/rng.hpp"

namespace nodex::data {

namespace {

Scalar lerp5(int ordinal, Scalar at1, Scalar at5) {
  return at1 + (at5 - at1) * (static_cast<Scalar>(ordinal) - 1.0) / 4.0;
}

/// Low-frequency noise: seeded 8x8 grid bilinearly upsampled to 32x32.
Matrix smooth_noise(Rng& rng, int size) {
  constexpr int g = 8;
  Matrix grid(g, g);
  for (int r = 0; r < g; ++r)
    for (int c = 0; c < g; ++c) grid(r, c) = rng.uniform(-1.0, 1.0);
  Matrix out(size, size);
  Scalar scale = static_cast<Scalar>(g - 1) / static_cast<Scalar>(size - 1);
  for (int r = 0; r < size; ++r) {
    Scalar fy = r * scale;
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, g - 1);
    Scalar wy = fy - y0;
    for (int c = 0; c < size; ++c) {
      Scalar fx = c * scale;
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, g - 1);
      Scalar wx = fx - x0;
      out(r, c) = grid(y0, x0) * (1 - wy) * (1 - wx) + grid(y0, x1) * (1 - wy) * wx +
                  grid(y1, x0) * wy * (1 - wx) + grid(y1, x1) * wy * wx;
    }
  }
  return out;
}

}  // namespace

Malignancy synthetic_malignancy_rule(const std::array<int, kNumAttributes>& attrs) {
  int margin = attrs[static_cast<std::size_t>(attribute_index("margin"))];
  int lobulation = attrs[static_cast<std::size_t>(attribute_index("lobulation"))];
  int spiculation = attrs[static_cast<std::size_t>(attribute_index("spiculation"))];
  int risk = spiculation + lobulation + (6 - margin);
  if (risk >= 10) return Malignancy::malignant;
  if (risk <= 8) return Malignancy::benign;
  return Malignancy::excluded;
}

Matrix render_synthetic_patch(const std::array<int, kNumAttributes>& attrs,
                              std::uint64_t style_seed, std::uint64_t noise_seed, Scalar shift_y,
                              Scalar shift_x) {
  const int size = kPatchSize;
  Rng style(style_seed);
  Rng noise_rng(noise_seed);

  const int subtlety = attrs[0], internal = attrs[1], calcification = attrs[2],
            sphericity = attrs[3], margin = attrs[4], lobulation = attrs[5],
            spiculation = attrs[6], texture = attrs[7];

  const Scalar radius = 9.0;
  const Scalar axis_ratio = lerp5(sphericity, 0.45, 1.0);
  const Scalar edge_soft = lerp5(margin, 0.30, 0.02);  // in elliptic-radius units
  const Scalar lob_amp = lerp5(lobulation, 0.0, 0.32);
  const Scalar spic_amp = lerp5(spiculation, 0.0, 0.55);
  const Scalar contrast = lerp5(subtlety, 0.35, 1.0);
  const Scalar interior_base = lerp5(texture, 0.55, 0.90);
  const Scalar interior_noise = lerp5(texture, 0.30, 0.02);

  const Scalar rot = style.uniform(0.0, M_PI);
  const Scalar lob_phase = style.uniform(0.0, 2.0 * M_PI);
  const Scalar spic_phase = style.uniform(0.0, 2.0 * M_PI);
  const Scalar bg_phase1 = style.uniform(0.0, 2.0 * M_PI);
  const Scalar bg_phase2 = style.uniform(0.0, 2.0 * M_PI);

  // Speckle positions live inside 0.55 of the elliptic radius.
  const int n_speckles = calcification == 6 ? 0 : 7 - calcification;
  std::vector<std::pair<Scalar, Scalar>> speckles;
  for (int i = 0; i < n_speckles; ++i) {
    Scalar a = style.uniform(0.0, 2.0 * M_PI);
    Scalar rr = 0.55 * std::sqrt(style.uniform(0.05, 1.0));
    speckles.emplace_back(rr * std::sin(a), rr * std::cos(a));
  }
  // Hole positions for the "air" motif (fixed pattern per nodule).
  Scalar hole_angle = style.uniform(0.0, 2.0 * M_PI);

  const Scalar cy = (size - 1) / 2.0 + shift_y;
  const Scalar cx = (size - 1) / 2.0 + shift_x;
  const Scalar cos_r = std::cos(rot), sin_r = std::sin(rot);

  Matrix blotch = smooth_noise(noise_rng, size);
  Matrix patch(size, size);

  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      Scalar dy = (r - cy) / radius;
      Scalar dx = (c - cx) / radius;
      // Rotate into the ellipse frame.
      Scalar u = cos_r * dx + sin_r * dy;
      Scalar v = -sin_r * dx + cos_r * dy;
      Scalar rho = std::sqrt(u * u + (v / axis_ratio) * (v / axis_ratio));
      Scalar theta = std::atan2(v, u);

      Scalar boundary = 1.0 + lob_amp * std::sin(3.0 * theta + lob_phase) +
                        spic_amp * std::pow(std::max(0.0, std::cos(9.0 * theta + spic_phase)), 8.0);
      Scalar alpha = 1.0 / (1.0 + std::exp((rho - boundary) / edge_soft));

      Scalar interior = interior_base + interior_noise * blotch(r, c);
      if (internal == 2) {
        interior *= 0.70 + 0.30 * std::min(1.0, rho);  // fluid: darker core
      } else if (internal == 3) {
        interior *= 1.0 + 0.14 * std::sin(2.0 * M_PI * r / 4.0);  // fat: stripes
      } else if (internal == 4) {
        // Air pockets: two dark holes offset from the centre.
        for (int h = 0; h < 2; ++h) {
          Scalar ha = hole_angle + h * M_PI;
          Scalar hy = 0.4 * std::sin(ha), hx = 0.4 * std::cos(ha);
          Scalar d2 = (u - hx) * (u - hx) + (v - hy) * (v - hy);
          if (d2 < 0.05) interior *= 0.35;
        }
      }

      Scalar bg = 0.18 + 0.05 * std::sin(2.0 * M_PI * c / 16.0 + bg_phase1) *
                             std::sin(2.0 * M_PI * r / 13.0 + bg_phase2);
      Scalar value = bg + contrast * alpha * (interior - bg);

      // Calcifications render as bright dots on top of everything.
      for (const auto& [sy, sx] : speckles) {
        Scalar d2 = (u - sx) * (u - sx) + (v - sy) * (v - sy);
        if (d2 < 0.018) value = std::max(value, 0.97);
      }

      value += 0.015 * noise_rng.uniform(-1.0, 1.0);
      patch(r, c) = std::min(1.0, std::max(0.0, value));
    }
  }
  return patch;
}

std::vector<AggregatedNodule> generate_synthetic_nodules(int n_nodules, std::uint64_t seed) {
  NODEX_CHECK(n_nodules >= 10, "generate_synthetic_nodules: need at least 10 nodules");
  std::vector<AggregatedNodule> out;
  out.reserve(static_cast<std::size_t>(n_nodules));
  for (int i = 0; i < n_nodules; ++i) {
    Rng attr_rng(derive_seed(seed, "synth-attrs", static_cast<std::uint64_t>(i)));
    AggregatedNodule nodule;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "syn%05d", i);
    nodule.nodule_id = buf;
    for (int a = 0; a < kNumAttributes; ++a)
      nodule.labels.attributes[static_cast<std::size_t>(a)] =
          static_cast<int>(attr_rng.uniform_int(1, kAttributeClassCounts[a]));
    nodule.labels.malignancy = synthetic_malignancy_rule(nodule.labels.attributes);
    nodule.labels.reader_count = 3;
    nodule.patch = render_synthetic_patch(
        nodule.labels.attributes, derive_seed(seed, "synth-style", static_cast<std::uint64_t>(i)),
        derive_seed(seed, "synth-noise", static_cast<std::uint64_t>(i), 0));
    out.push_back(std::move(nodule));
  }
  return out;
}

Dataset generate_synthetic_dataset(int n_nodules, std::uint64_t seed, int readers_per_nodule) {
  NODEX_CHECK(readers_per_nodule >= 1, "generate_synthetic_dataset: need at least 1 reader");
  auto nodules = generate_synthetic_nodules(n_nodules, seed);
  Dataset ds;
  for (int i = 0; i < n_nodules; ++i) {
    const auto& nod = nodules[static_cast<std::size_t>(i)];
    ds.labels[nod.nodule_id] = nod.labels;
    for (int r = 0; r < readers_per_nodule; ++r) {
      Matrix patch;
      if (r == 0) {
        patch = nod.patch;
      } else {
        Rng jitter(derive_seed(seed, "synth-reader", static_cast<std::uint64_t>(i),
                               static_cast<std::uint64_t>(r)));
        Scalar sy = jitter.uniform(-1.0, 1.0);
        Scalar sx = jitter.uniform(-1.0, 1.0);
        patch = render_synthetic_patch(
            nod.labels.attributes,
            derive_seed(seed, "synth-style", static_cast<std::uint64_t>(i)),
            derive_seed(seed, "synth-noise", static_cast<std::uint64_t>(i),
                        static_cast<std::uint64_t>(r)),
            sy, sx);
      }
      ds.samples.push_back({nod.nodule_id, "r" + std::to_string(r), std::move(patch)});
    }
  }
  return ds;
}

}  // namespace nodex::data
