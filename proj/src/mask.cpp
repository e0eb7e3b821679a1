#include "semloc/mask.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "semloc/error.hpp"

namespace semloc {

namespace fs = std::filesystem;

ClassPalette::ClassPalette(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() < 2 || names_.size() > 255) {
        throw Error(ErrorKind::palette, "palette must have between 2 and 255 classes, got " +
                                            std::to_string(names_.size()));
    }
    std::set<std::string> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw Error(ErrorKind::palette, "empty class name in palette");
        if (!seen.insert(n).second) {
            throw Error(ErrorKind::palette, "duplicate class name '" + n + "'");
        }
    }
    // FNV-1a over the newline-joined names.
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& n : names_) {
        for (unsigned char ch : n + '\n') {
            h ^= ch;
            h *= 1099511628211ULL;
        }
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "p%zu-%08llx", names_.size(),
                  static_cast<unsigned long long>(h & 0xffffffffULL));
    id_ = buf;
}

int ClassPalette::index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

ClassPalette ClassPalette::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open palette file " + path.string());
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        names.push_back(line);
    }
    return ClassPalette(std::move(names));
}

void ClassPalette::save(const fs::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write palette file " + path.string());
    for (const auto& n : names_) out << n << '\n';
}

ClassPalette ClassPalette::street() {
    return ClassPalette({"void", "road", "sidewalk", "building", "sky", "tree", "car", "sign", "pole"});
}

SemanticMask::SemanticMask(int width, int height, std::size_t palette_size, ClassId fill,
                           std::string palette_id)
    : SemanticMask(width, height, palette_size,
                   std::vector<ClassId>(width > 0 && height > 0
                                            ? static_cast<std::size_t>(width) * height
                                            : 0,
                                        fill),
                   std::move(palette_id)) {}

SemanticMask::SemanticMask(int width, int height, std::size_t palette_size,
                           std::vector<ClassId> classes, std::string palette_id)
    : width_(width),
      height_(height),
      palette_size_(palette_size),
      palette_id_(std::move(palette_id)),
      classes_(std::move(classes)) {
    validate();
}

void SemanticMask::validate() const {
    if (width_ <= 0 || height_ <= 0) {
        throw Error(ErrorKind::shape, "mask dimensions must be positive, got " +
                                          std::to_string(width_) + "x" + std::to_string(height_));
    }
    if (classes_.size() != static_cast<std::size_t>(width_) * height_) {
        throw Error(ErrorKind::shape, "mask data length does not match width*height");
    }
    if (palette_size_ < 2 || palette_size_ > 255) {
        throw Error(ErrorKind::palette, "palette size must be in [2, 255]");
    }
    for (ClassId c : classes_) {
        if (c >= palette_size_) {
            throw Error(ErrorKind::palette, "class id " + std::to_string(c) +
                                                " exceeds palette size " +
                                                std::to_string(palette_size_));
        }
    }
}

void SemanticMask::set(int x, int y, ClassId c) {
    if (c >= palette_size_) {
        throw Error(ErrorKind::palette, "class id " + std::to_string(c) + " outside palette");
    }
    classes_[static_cast<std::size_t>(y) * width_ + x] = c;
}

std::vector<ClassId> SemanticMask::class_set() const {
    std::array<bool, 256> seen{};
    for (ClassId c : classes_) seen[c] = true;
    std::vector<ClassId> out;
    for (int c = 0; c < 256; ++c) {
        if (seen[c]) out.push_back(static_cast<ClassId>(c));
    }
    return out;
}

namespace {

struct Raster {
    int width = 0;
    int height = 0;
    std::vector<ClassId> data;
};

Raster read_pgm(const fs::path& path, const std::string& bytes) {
    std::istringstream in(bytes);
    auto next_token = [&]() {
        std::string tok;
        while (in) {
            int ch = in.peek();
            if (ch == '#') {
                std::string skip;
                std::getline(in, skip);
            } else if (std::isspace(ch)) {
                in.get();
            } else {
                break;
            }
        }
        in >> tok;
        return tok;
    };
    const std::string magic = next_token();
    if (magic != "P5") throw Error(ErrorKind::format, path.string() + ": not a binary PGM (P5)");
    Raster r;
    int maxval = 0;
    try {
        r.width = std::stoi(next_token());
        r.height = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw Error(ErrorKind::format, path.string() + ": malformed PGM header");
    }
    if (r.width <= 0 || r.height <= 0 || maxval <= 0 || maxval > 255) {
        throw Error(ErrorKind::format, path.string() + ": PGM must be 8-bit with positive size");
    }
    in.get();  // single whitespace before the raster
    const auto n = static_cast<std::size_t>(r.width) * r.height;
    r.data.resize(n);
    in.read(reinterpret_cast<char*>(r.data.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw Error(ErrorKind::format, path.string() + ": truncated PGM raster");
    }
    return r;
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports through callbacks; keep the message for the exception instead of printing it.
thread_local std::string png_message;

void png_error_fn(png_structp png, png_const_charp msg) {
    png_message = msg;
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

Raster read_png(const fs::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw Error(ErrorKind::io, "cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::io, "libpng initialisation failed");
    }
    Raster r;
    std::vector<png_bytep> rows;
    volatile bool bad_type = false;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorKind::format, path.string() + ": corrupt PNG (" + png_message + ")");
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(png, info) != 8) {
        bad_type = true;
    } else {
        r.width = static_cast<int>(png_get_image_width(png, info));
        r.height = static_cast<int>(png_get_image_height(png, info));
        r.data.resize(static_cast<std::size_t>(r.width) * r.height);
        rows.resize(r.height);
        for (int y = 0; y < r.height; ++y) rows[y] = r.data.data() + static_cast<std::size_t>(y) * r.width;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (bad_type) {
        throw Error(ErrorKind::format, path.string() + ": PNG must be 8-bit single-channel grayscale");
    }
    return r;
}

void write_png(const SemanticMask& mask, const fs::path& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw Error(ErrorKind::io, "cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::io, "libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorKind::io, "failed writing " + path.string() + " (" + png_message + ")");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, mask.width(), mask.height(), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const auto data = mask.classes();
    for (int y = 0; y < mask.height(); ++y) {
        png_write_row(png, const_cast<png_bytep>(data.data() + static_cast<std::size_t>(y) * mask.width()));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

SemanticMask load_mask(const fs::path& path, const ClassPalette& palette) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open mask " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.empty()) throw Error(ErrorKind::format, path.string() + ": empty file");

    static constexpr unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    Raster r;
    if (bytes.size() >= 8 && std::equal(png_sig, png_sig + 8, bytes.begin(),
                                        [](unsigned char a, char b) { return a == static_cast<unsigned char>(b); })) {
        r = read_png(path);
    } else {
        r = read_pgm(path, bytes);
    }
    for (ClassId c : r.data) {
        if (c >= palette.size()) {
            throw Error(ErrorKind::palette, path.string() + ": class id " + std::to_string(c) +
                                                " not in palette of size " +
                                                std::to_string(palette.size()));
        }
    }
    return SemanticMask(r.width, r.height, palette.size(), std::move(r.data), palette.id());
}

void save_mask(const SemanticMask& mask, const fs::path& path) {
    if (path.extension() == ".png") {
        write_png(mask, path);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    out << "P5\n" << mask.width() << ' ' << mask.height() << "\n255\n";
    const auto data = mask.classes();
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

SemanticMask resize_nearest(const SemanticMask& mask, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) {
        throw Error(ErrorKind::invalid_argument, "resize target must be positive");
    }
    if (out_w == mask.width() && out_h == mask.height()) return mask;
    std::vector<ClassId> out(static_cast<std::size_t>(out_w) * out_h);
    const long long sw = mask.width();
    const long long sh = mask.height();
    std::vector<int> src_x(out_w);
    for (int x = 0; x < out_w; ++x) {
        src_x[x] = static_cast<int>(((2LL * x + 1) * sw) / (2LL * out_w));
    }
    for (int y = 0; y < out_h; ++y) {
        const int sy = static_cast<int>(((2LL * y + 1) * sh) / (2LL * out_h));
        for (int x = 0; x < out_w; ++x) {
            out[static_cast<std::size_t>(y) * out_w + x] = mask.at(src_x[x], sy);
        }
    }
    return SemanticMask(out_w, out_h, mask.palette_size(), std::move(out), mask.palette_id());
}

}  // namespace semloc
