#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semloc/mask.hpp"

namespace semloc {

/// Local planar coordinates in meters.
struct Position {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Position&) const = default;
};

double distance(const Position& a, const Position& b);

/// Geo-tagged equirectangular panorama; mask width is exactly twice its height.
struct PanoramaRecord {
    std::string id;
    Position position;
    SemanticMask mask;
};

/// Gnomonic view cut from a panorama.
struct ViewRecord {
    std::string id;
    std::string parent_pano;
    double yaw_deg = 0.0;
    double fov_deg = 90.0;
    Position position;
    SemanticMask mask;
};

struct QueryRecord {
    std::string id;
    Position position;
    SemanticMask mask;
};

/// Throws ErrorKind::aspect unless width == 2 * height.
void check_equirectangular(const SemanticMask& mask, const std::string& id);

/// Wraps any angle into [0, 360).
double normalize_yaw(double yaw_deg);

struct Dataset {
    std::vector<PanoramaRecord> panoramas;
    std::vector<QueryRecord> queries;
    std::vector<ViewRecord> views;

    const PanoramaRecord& panorama(const std::string& id) const;
    const ViewRecord& view(const std::string& id) const;
    const QueryRecord& query(const std::string& id) const;

    /// Rebuilds the id lookup tables; call after mutating the record vectors.
    void reindex();

private:
    std::map<std::string, std::size_t> pano_index_;
    std::map<std::string, std::size_t> view_index_;
    std::map<std::string, std::size_t> query_index_;
};

/// Options recorded in the manifest's leading `# key=value` comment line.
struct ManifestMeta {
    std::string coords = "planar_m";
    std::optional<std::string> palette_file;
    double view_fov_deg = 90.0;
};

/// Result of reading a manifest: records plus the palette they were validated against.
struct LoadedDataset {
    Dataset dataset;
    ClassPalette palette;
    ManifestMeta meta;
};

/// Reads `kind,id,x_m,y_m,mask_path,parent_pano,yaw_deg`. Mask paths are relative to the
/// manifest directory. If `palette` is empty the manifest's `palette=` entry is used, falling
/// back to the street palette.
LoadedDataset load_dataset(const std::filesystem::path& manifest,
                           const std::optional<ClassPalette>& palette = std::nullopt);

/// Writes masks (PNG) under `mask_dir` relative to the manifest and the manifest itself.
void save_dataset(const Dataset& dataset, const ClassPalette& palette,
                  const std::filesystem::path& manifest, const std::string& mask_dir = "masks");

}  // namespace semloc
