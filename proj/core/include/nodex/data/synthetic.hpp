#pragma once

#include "nodex/data/types.hpp"

namespace nodex::data {

/// Procedural 32x32 nodule renderer. Each attribute ordinal drives one
/// visual factor so all labels are recoverable from pixels:
///   subtlety      -> nodule/background contrast
///   internalStructure -> interior motif (plain / dark core / stripes / holes)
///   calcification -> count of bright speckles (6 = none)
///   sphericity    -> ellipse axis ratio
///   margin        -> edge softness (1 = most blurred)
///   lobulation    -> low-frequency boundary bumps
///   spiculation   -> sharp radial spikes
///   texture       -> interior brightness and noise (1 = ground glass)
Matrix render_synthetic_patch(const std::array<int, kNumAttributes>& attrs,
                              std::uint64_t style_seed, std::uint64_t noise_seed,
                              Scalar shift_y = 0, Scalar shift_x = 0);

/// Documented label rule: risk = spiculation + lobulation + (6 - margin);
/// risk >= 10 is malignant, risk <= 8 benign, risk == 9 excluded.
Malignancy synthetic_malignancy_rule(const std::array<int, kNumAttributes>& attrs);

/// One aggregated record per nodule, attributes uniform over their ordinal
/// ranges, malignancy from the rule above. Bit-identical for a fixed seed.
std::vector<AggregatedNodule> generate_synthetic_nodules(int n_nodules, std::uint64_t seed);

/// Dataset view of the same cohort with `readers_per_nodule` images per
/// nodule: reader r0 is the canonical render, later readers get a centroid
/// jitter and an independent noise stream.
Dataset generate_synthetic_dataset(int n_nodules, std::uint64_t seed, int readers_per_nodule = 3);

}  // namespace nodex::data
