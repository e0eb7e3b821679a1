#include "semloc/augment.hpp"

#include <cmath>
#include <numbers>

#include "semloc/error.hpp"

namespace semloc {

void AugmentConfig::validate() const {
    if (!(min_crop_ratio > 0.0 && min_crop_ratio <= 1.0)) {
        throw Error(ErrorKind::config, "min_crop_ratio must lie in (0, 1]");
    }
    if (!(max_rotation_deg >= 0.0)) throw Error(ErrorKind::config, "max_rotation_deg must be >= 0");
    if (out_w <= 0 || out_h <= 0) throw Error(ErrorKind::config, "augmentation output size must be positive");
}

CropResult random_resized_crop(const SemanticMask& mask, double min_ratio, Rng& rng) {
    if (!(min_ratio > 0.0 && min_ratio <= 1.0)) {
        throw Error(ErrorKind::config, "min crop ratio must lie in (0, 1]");
    }
    const int sw = mask.width();
    const int sh = mask.height();
    const double area = static_cast<double>(sw) * sh;
    const double log_lo = std::log(3.0 / 4.0);
    const double log_hi = std::log(4.0 / 3.0);

    CropRect rect{0, 0, sw, sh};
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target = area * rng.uniform(min_ratio, 1.0);
        const double aspect = std::exp(rng.uniform(log_lo, log_hi));
        const int w = static_cast<int>(std::lround(std::sqrt(target * aspect)));
        const int h = static_cast<int>(std::lround(std::sqrt(target / aspect)));
        if (w < 1 || h < 1 || w > sw || h > sh) continue;
        if (static_cast<double>(w) * h < min_ratio * area) continue;
        rect = {static_cast<int>(rng.below(static_cast<std::uint64_t>(sw - w + 1))),
                static_cast<int>(rng.below(static_cast<std::uint64_t>(sh - h + 1))), w, h};
        break;
    }

    std::vector<ClassId> cropped(static_cast<std::size_t>(rect.w) * rect.h);
    for (int y = 0; y < rect.h; ++y) {
        for (int x = 0; x < rect.w; ++x) {
            cropped[static_cast<std::size_t>(y) * rect.w + x] = mask.at(rect.x + x, rect.y + y);
        }
    }
    SemanticMask crop(rect.w, rect.h, mask.palette_size(), std::move(cropped), mask.palette_id());
    return {resize_nearest(crop, sw, sh), rect};
}

SemanticMask rotate_mask(const SemanticMask& mask, double angle_deg, ClassId fill) {
    if (fill >= mask.palette_size()) throw Error(ErrorKind::palette, "fill class outside palette");
    if (angle_deg == 0.0) return mask;
    const int w = mask.width();
    const int h = mask.height();
    const double a = angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(a);
    const double s = std::sin(a);
    const double cx = 0.5 * w;
    const double cy = 0.5 * h;
    std::vector<ClassId> out(mask.size(), fill);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            // Inverse map of the output pixel centre.
            const double dx = x + 0.5 - cx;
            const double dy = y + 0.5 - cy;
            const double sx = c * dx + s * dy + cx;
            const double sy = -s * dx + c * dy + cy;
            const int ix = static_cast<int>(std::floor(sx));
            const int iy = static_cast<int>(std::floor(sy));
            if (ix >= 0 && ix < w && iy >= 0 && iy < h) {
                out[static_cast<std::size_t>(y) * w + x] = mask.at(ix, iy);
            }
        }
    }
    return SemanticMask(w, h, mask.palette_size(), std::move(out), mask.palette_id());
}

RotationResult random_rotation(const SemanticMask& mask, double max_deg, Rng& rng, ClassId fill) {
    if (!(max_deg >= 0.0)) throw Error(ErrorKind::config, "max rotation must be >= 0");
    const double angle = rng.uniform(-max_deg, max_deg);
    return {rotate_mask(mask, angle, fill), angle};
}

AugmentedPair make_pair(const SemanticMask& mask, const AugmentConfig& config, Rng& rng) {
    config.validate();
    AugmentedPair pair;
    SemanticMask* outputs[2] = {&pair.first, &pair.second};
    for (int k = 0; k < 2; ++k) {
        CropResult crop = random_resized_crop(mask, config.min_crop_ratio, rng);
        RotationResult rot = random_rotation(crop.mask, config.max_rotation_deg, rng, config.fill_class);
        *outputs[k] = resize_nearest(rot.mask, config.out_w, config.out_h);
        pair.crops[k] = crop.rect;
        pair.angles_deg[k] = rot.angle_deg;
    }
    return pair;
}

}  // namespace semloc
