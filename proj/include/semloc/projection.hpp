#pragma once

#include <string>
#include <vector>

#include "semloc/dataset.hpp"

namespace semloc {

/// Virtual pinhole camera looking out of the panorama centre.
///
/// Longitude convention: panorama column 0 starts at longitude 0 and longitude grows
/// eastward (to the right in both panorama and view). The vertical field of view follows
/// from the output aspect ratio with square pixels.
struct ViewSpec {
    double yaw_deg = 0.0;
    double pitch_deg = 0.0;
    double fov_deg = 90.0;
    int out_w = 640;
    int out_h = 480;
};

/// Spherical direction of the ray through view pixel centre (x + 0.5, y + 0.5), in degrees.
struct RayAngles {
    double lon_deg;
    double lat_deg;
};

RayAngles view_ray(const ViewSpec& spec, double px, double py);

/// Renders one gnomonic view by nearest-neighbour sampling of the panorama.
ViewRecord gnomonic_view(const PanoramaRecord& pano, const ViewSpec& spec);

/// `count` views at yaw k * 360 / count. View ids are `<pano>_v<kk>`.
std::vector<ViewRecord> generate_database_views(const PanoramaRecord& pano, int count = 12,
                                                double fov_deg = 90.0, int out_w = 640,
                                                int out_h = 480);

/// Every view sharing `view_id`'s parent panorama, including itself, in input order.
std::vector<ViewRecord> neighbors_of(const std::string& view_id, const std::vector<ViewRecord>& all_views);

std::string view_id(const std::string& pano_id, int index);

}  // namespace semloc
