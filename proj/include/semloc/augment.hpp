#pragma once

#include <cstdint>

#include "semloc/mask.hpp"
#include "semloc/rng.hpp"

namespace semloc {

struct AugmentConfig {
    double min_crop_ratio = 0.6;
    double max_rotation_deg = 3.0;
    int out_w = 80;
    int out_h = 64;
    ClassId fill_class = 0;
    std::uint64_t seed = 0;

    /// Throws Error(config) when a field is out of range.
    void validate() const;
};

struct CropRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    double area_fraction(int src_w, int src_h) const {
        return static_cast<double>(w) * h / (static_cast<double>(src_w) * src_h);
    }
};

struct CropResult {
    SemanticMask mask;
    CropRect rect;
};

/// Crops a rectangle covering at least `min_ratio` of the area, aspect ratio in [3/4, 4/3],
/// and resizes it back to the source size. Falls back to the full frame after 10 rejected draws.
CropResult random_resized_crop(const SemanticMask& mask, double min_ratio, Rng& rng);

/// Rotates about the centre by `angle_deg`; pixels whose preimage leaves the frame get `fill`.
SemanticMask rotate_mask(const SemanticMask& mask, double angle_deg, ClassId fill = 0);

struct RotationResult {
    SemanticMask mask;
    double angle_deg = 0.0;
};

/// Rotation by an angle drawn uniformly from [-max_deg, +max_deg].
RotationResult random_rotation(const SemanticMask& mask, double max_deg, Rng& rng, ClassId fill = 0);

struct AugmentedPair {
    SemanticMask first;
    SemanticMask second;
    CropRect crops[2];
    double angles_deg[2] = {0.0, 0.0};
};

/// Two independent crop -> rotate -> resize draws of the same source.
AugmentedPair make_pair(const SemanticMask& mask, const AugmentConfig& config, Rng& rng);

}  // namespace semloc
