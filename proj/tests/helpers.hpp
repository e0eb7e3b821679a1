#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unistd.h>

#include "semloc/error.hpp"
#include "semloc/mask.hpp"
#include "semloc/rng.hpp"

namespace testutil {

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("semloc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Kind of the semloc::Error thrown by fn, or nullopt if it does not throw one.
inline std::optional<semloc::ErrorKind> kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const semloc::Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

inline semloc::SemanticMask random_mask(int w, int h, std::size_t palette, semloc::Rng& rng) {
    std::vector<semloc::ClassId> px(static_cast<std::size_t>(w) * h);
    for (auto& v : px) v = static_cast<semloc::ClassId>(rng.below(palette));
    return semloc::SemanticMask(w, h, palette, std::move(px));
}

/// Random mask made of a few axis-aligned blocks so it has spatial structure.
inline semloc::SemanticMask blocky_mask(int w, int h, std::size_t palette, semloc::Rng& rng, int blocks = 6) {
    semloc::SemanticMask m(w, h, palette, static_cast<semloc::ClassId>(rng.below(palette)));
    for (int b = 0; b < blocks; ++b) {
        const int x0 = static_cast<int>(rng.below(w)), y0 = static_cast<int>(rng.below(h));
        const int bw = 1 + static_cast<int>(rng.below(w / 2 + 1)), bh = 1 + static_cast<int>(rng.below(h / 2 + 1));
        const auto c = static_cast<semloc::ClassId>(rng.below(palette));
        for (int y = y0; y < std::min(h, y0 + bh); ++y)
            for (int x = x0; x < std::min(w, x0 + bw); ++x) m.set(x, y, c);
    }
    return m;
}

}  // namespace testutil
