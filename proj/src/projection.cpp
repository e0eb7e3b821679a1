#include "semloc/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "semloc/error.hpp"

namespace semloc {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void check_spec(const ViewSpec& spec) {
    if (!(spec.fov_deg > 0.0 && spec.fov_deg < 180.0)) {
        throw Error(ErrorKind::invalid_argument, "fov must lie in (0, 180) degrees");
    }
    if (spec.out_w <= 0 || spec.out_h <= 0) {
        throw Error(ErrorKind::invalid_argument, "view size must be positive");
    }
}

}  // namespace

RayAngles view_ray(const ViewSpec& spec, double px, double py) {
    const double focal = 0.5 * spec.out_w / std::tan(0.5 * spec.fov_deg * kDeg);
    // Camera frame: forward, right, up.
    const double right = px - 0.5 * spec.out_w;
    const double up = 0.5 * spec.out_h - py;
    const double cp = std::cos(spec.pitch_deg * kDeg);
    const double sp = std::sin(spec.pitch_deg * kDeg);
    const double fwd = focal * cp - up * sp;
    const double upw = focal * sp + up * cp;
    const double lon = spec.yaw_deg + std::atan2(right, fwd) / kDeg;
    const double lat = std::atan2(upw, std::hypot(right, fwd)) / kDeg;
    return {lon, lat};
}

ViewRecord gnomonic_view(const PanoramaRecord& pano, const ViewSpec& spec) {
    check_spec(spec);
    check_equirectangular(pano.mask, pano.id);
    const int pw = pano.mask.width();
    const int ph = pano.mask.height();
    const double cols_per_deg = pw / 360.0;
    const double rows_per_deg = ph / 180.0;

    // Yaw enters as a separate column offset so that a whole-column yaw change shifts
    // every sample by exactly that many columns.
    ViewSpec unrotated = spec;
    unrotated.yaw_deg = 0.0;
    double yaw_cols = spec.yaw_deg * pw / 360.0;
    if (std::abs(yaw_cols - std::round(yaw_cols)) < 1e-9) yaw_cols = std::round(yaw_cols);

    std::vector<ClassId> out(static_cast<std::size_t>(spec.out_w) * spec.out_h);
    for (int y = 0; y < spec.out_h; ++y) {
        for (int x = 0; x < spec.out_w; ++x) {
            const RayAngles ray = view_ray(unrotated, x + 0.5, y + 0.5);
            long long col = static_cast<long long>(std::floor(yaw_cols + ray.lon_deg * cols_per_deg)) % pw;
            if (col < 0) col += pw;
            const int row = std::clamp(static_cast<int>(std::floor((90.0 - ray.lat_deg) * rows_per_deg)), 0, ph - 1);
            out[static_cast<std::size_t>(y) * spec.out_w + x] = pano.mask.at(static_cast<int>(col), row);
        }
    }
    ViewRecord v;
    v.id = pano.id + "_view";
    v.parent_pano = pano.id;
    v.yaw_deg = normalize_yaw(spec.yaw_deg);
    v.fov_deg = spec.fov_deg;
    v.position = pano.position;
    v.mask = SemanticMask(spec.out_w, spec.out_h, pano.mask.palette_size(), std::move(out), pano.mask.palette_id());
    return v;
}

std::string view_id(const std::string& pano_id, int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_v%02d", index);
    return pano_id + buf;
}

std::vector<ViewRecord> generate_database_views(const PanoramaRecord& pano, int count, double fov_deg,
                                                int out_w, int out_h) {
    if (count < 1) throw Error(ErrorKind::invalid_argument, "view count must be >= 1");
    std::vector<ViewRecord> views;
    views.reserve(count);
    for (int k = 0; k < count; ++k) {
        ViewSpec spec;
        spec.yaw_deg = k * (360.0 / count);
        spec.fov_deg = fov_deg;
        spec.out_w = out_w;
        spec.out_h = out_h;
        ViewRecord v = gnomonic_view(pano, spec);
        v.id = view_id(pano.id, k);
        views.push_back(std::move(v));
    }
    return views;
}

std::vector<ViewRecord> neighbors_of(const std::string& id, const std::vector<ViewRecord>& all_views) {
    auto it = std::find_if(all_views.begin(), all_views.end(), [&](const ViewRecord& v) { return v.id == id; });
    if (it == all_views.end()) throw Error(ErrorKind::unknown_id, "unknown view id '" + id + "'");
    const std::string parent = it->parent_pano;
    std::vector<ViewRecord> out;
    std::copy_if(all_views.begin(), all_views.end(), std::back_inserter(out),
                 [&](const ViewRecord& v) { return v.parent_pano == parent; });
    return out;
}

}  // namespace semloc
