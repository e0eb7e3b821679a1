#include "semloc/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "semloc/error.hpp"
#include "semloc/text.hpp"

namespace semloc {

namespace fs = std::filesystem;

double distance(const Position& a, const Position& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

void check_equirectangular(const SemanticMask& mask, const std::string& id) {
    if (mask.width() != 2 * mask.height()) {
        throw Error(ErrorKind::aspect, "panorama '" + id + "' is " + std::to_string(mask.width()) +
                                           "x" + std::to_string(mask.height()) +
                                           "; equirectangular masks need width = 2*height");
    }
}

double normalize_yaw(double yaw_deg) {
    double y = std::fmod(yaw_deg, 360.0);
    if (y < 0.0) y += 360.0;
    if (y >= 360.0) y = 0.0;
    return y;
}

namespace {

template <typename Records>
const auto& lookup(const Records& records, const std::map<std::string, std::size_t>& index,
                   const std::string& id, const char* what) {
    auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorKind::unknown_id, std::string("unknown ") + what + " id '" + id + "'");
    return records[it->second];
}

}  // namespace

const PanoramaRecord& Dataset::panorama(const std::string& id) const {
    return lookup(panoramas, pano_index_, id, "panorama");
}

const ViewRecord& Dataset::view(const std::string& id) const {
    return lookup(views, view_index_, id, "view");
}

const QueryRecord& Dataset::query(const std::string& id) const {
    return lookup(queries, query_index_, id, "query");
}

void Dataset::reindex() {
    pano_index_.clear();
    view_index_.clear();
    query_index_.clear();
    std::set<std::string> all;
    auto add = [&](std::map<std::string, std::size_t>& index, const std::string& id, std::size_t i) {
        if (!all.insert(id).second) throw Error(ErrorKind::duplicate_id, "duplicate id '" + id + "'");
        index.emplace(id, i);
    };
    for (std::size_t i = 0; i < panoramas.size(); ++i) add(pano_index_, panoramas[i].id, i);
    for (std::size_t i = 0; i < queries.size(); ++i) add(query_index_, queries[i].id, i);
    for (std::size_t i = 0; i < views.size(); ++i) add(view_index_, views[i].id, i);
}

namespace {

constexpr const char* kHeader = "kind,id,x_m,y_m,mask_path,parent_pano,yaw_deg";

ManifestMeta parse_meta(const std::string& comment) {
    ManifestMeta meta;
    for (const auto& tok : text::split(comment, ' ')) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq);
        const auto value = tok.substr(eq + 1);
        if (key == "coords") {
            meta.coords = value;
        } else if (key == "palette") {
            meta.palette_file = value;
        } else if (key == "view_fov_deg") {
            meta.view_fov_deg = text::parse_double(value, "view_fov_deg");
        }
    }
    if (meta.coords != "planar_m") {
        throw Error(ErrorKind::format, "unsupported coordinate convention '" + meta.coords +
                                           "' (only planar_m is supported)");
    }
    return meta;
}

}  // namespace

LoadedDataset load_dataset(const fs::path& manifest, const std::optional<ClassPalette>& palette) {
    std::ifstream in(manifest);
    if (!in) throw Error(ErrorKind::io, "cannot open manifest " + manifest.string());
    const fs::path base = manifest.parent_path();

    ManifestMeta meta;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    struct Row {
        std::vector<std::string> cols;
        std::size_t line_no;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = text::trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            if (!header_seen) meta = parse_meta(t.substr(1));
            continue;
        }
        if (!header_seen) {
            if (t != kHeader) {
                throw Error(ErrorKind::format, manifest.string() + ": expected header '" + kHeader + "'");
            }
            header_seen = true;
            continue;
        }
        auto cols = text::split(t, ',');
        if (cols.size() != 7) {
            throw Error(ErrorKind::format, manifest.string() + ":" + std::to_string(line_no) +
                                               ": expected 7 columns, got " + std::to_string(cols.size()));
        }
        rows.push_back({std::move(cols), line_no});
    }
    if (!header_seen) throw Error(ErrorKind::format, manifest.string() + ": missing header");

    ClassPalette pal = palette ? *palette
                               : (meta.palette_file ? ClassPalette::load(base / *meta.palette_file)
                                                    : ClassPalette::street());
    LoadedDataset out{Dataset{}, pal, meta};
    Dataset& ds = out.dataset;
    for (const auto& row : rows) {
        const auto& c = row.cols;
        const std::string where = manifest.string() + ":" + std::to_string(row.line_no);
        const Position pos{text::parse_double(c[2], where + " x_m"), text::parse_double(c[3], where + " y_m")};
        const fs::path mask_path = base / c[4];
        if (!fs::exists(mask_path)) throw Error(ErrorKind::io, where + ": missing mask file " + mask_path.string());
        SemanticMask mask = load_mask(mask_path, pal);
        if (c[0] == "pano") {
            check_equirectangular(mask, c[1]);
            ds.panoramas.push_back({c[1], pos, std::move(mask)});
        } else if (c[0] == "query") {
            ds.queries.push_back({c[1], pos, std::move(mask)});
        } else if (c[0] == "view") {
            ViewRecord v;
            v.id = c[1];
            v.parent_pano = c[5];
            v.yaw_deg = normalize_yaw(text::parse_double(c[6], where + " yaw_deg"));
            v.fov_deg = meta.view_fov_deg;
            v.position = pos;
            v.mask = std::move(mask);
            ds.views.push_back(std::move(v));
        } else {
            throw Error(ErrorKind::format, where + ": unknown row kind '" + c[0] + "'");
        }
    }
    ds.reindex();
    for (const auto& v : ds.views) {
        const auto& p = ds.panorama(v.parent_pano);  // throws unknown_id
        if (!(p.position == v.position)) {
            throw Error(ErrorKind::format, "view '" + v.id + "' position differs from its panorama");
        }
    }
    return out;
}

void save_dataset(const Dataset& dataset, const ClassPalette& palette, const fs::path& manifest,
                  const std::string& mask_dir) {
    const fs::path base = manifest.parent_path();
    if (!base.empty()) fs::create_directories(base);
    fs::create_directories(base / mask_dir);
    palette.save(base / "palette.txt");

    double fov = 90.0;
    if (!dataset.views.empty()) fov = dataset.views.front().fov_deg;
    for (const auto& v : dataset.views) {
        if (v.fov_deg != fov) {
            throw Error(ErrorKind::invalid_argument, "manifest views must share one fov");
        }
    }

    std::ofstream out(manifest);
    if (!out) throw Error(ErrorKind::io, "cannot write manifest " + manifest.string());
    out << "# coords=planar_m palette=palette.txt view_fov_deg=" << text::format_double(fov) << '\n';
    out << kHeader << '\n';
    auto write = [&](const char* kind, const std::string& id, const Position& p, const SemanticMask& m,
                     const std::string& parent, const std::string& yaw) {
        const std::string rel = mask_dir + "/" + id + ".png";
        save_mask(m, base / rel);
        out << kind << ',' << id << ',' << text::format_double(p.x) << ',' << text::format_double(p.y)
            << ',' << rel << ',' << parent << ',' << yaw << '\n';
    };
    for (const auto& p : dataset.panoramas) write("pano", p.id, p.position, p.mask, "", "");
    for (const auto& q : dataset.queries) write("query", q.id, q.position, q.mask, "", "");
    for (const auto& v : dataset.views) {
        write("view", v.id, v.position, v.mask, v.parent_pano, text::format_double(v.yaw_deg));
    }
}

}  // namespace semloc
