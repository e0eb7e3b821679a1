#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace semloc {

using ClassId = std::uint8_t;

/// Ordered class vocabulary. Line/position index is the class id.
class ClassPalette {
public:
    explicit ClassPalette(std::vector<std::string> names);

    /// Content-derived identifier; palettes with equal names share an id.
    const std::string& id() const noexcept { return id_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t size() const noexcept { return names_.size(); }

    /// Index of `name`, or -1 if absent.
    int index_of(const std::string& name) const;

    static ClassPalette load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// void, road, sidewalk, building, sky, tree, car, sign, pole.
    static ClassPalette street();

    bool operator==(const ClassPalette& other) const = default;

private:
    std::string id_;
    std::vector<std::string> names_;
};

/// Row-major raster of class ids. Immutable size, validated against its palette size.
class SemanticMask {
public:
    SemanticMask() = default;
    SemanticMask(int width, int height, std::size_t palette_size, ClassId fill = 0,
                 std::string palette_id = {});
    SemanticMask(int width, int height, std::size_t palette_size, std::vector<ClassId> classes,
                 std::string palette_id = {});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return classes_.size(); }
    bool empty() const noexcept { return classes_.empty(); }
    std::size_t palette_size() const noexcept { return palette_size_; }
    const std::string& palette_id() const noexcept { return palette_id_; }

    ClassId at(int x, int y) const { return classes_[static_cast<std::size_t>(y) * width_ + x]; }
    void set(int x, int y, ClassId c);

    std::span<const ClassId> classes() const noexcept { return classes_; }

    /// Sorted set of class ids present.
    std::vector<ClassId> class_set() const;

    bool same_palette(const SemanticMask& other) const noexcept {
        return palette_size_ == other.palette_size_ && palette_id_ == other.palette_id_;
    }

    bool operator==(const SemanticMask& other) const = default;

private:
    void validate() const;

    int width_ = 0;
    int height_ = 0;
    std::size_t palette_size_ = 0;
    std::string palette_id_;
    std::vector<ClassId> classes_;
};

/// Reads an 8-bit single-channel PGM (P5) or PNG; the pixel value is the class id.
SemanticMask load_mask(const std::filesystem::path& path, const ClassPalette& palette);

/// Writes PNG when the extension is `.png`, binary PGM otherwise.
void save_mask(const SemanticMask& mask, const std::filesystem::path& path);

/// Nearest-neighbour resampling; never interpolates class ids.
SemanticMask resize_nearest(const SemanticMask& mask, int out_w, int out_h);

}  // namespace semloc
