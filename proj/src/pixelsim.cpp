#include "semloc/pixelsim.hpp"

#include "semloc/error.hpp"

namespace semloc {

double pixelwise_similarity(const SemanticMask& query, const SemanticMask& db) {
    if (query.width() != db.width() || query.height() != db.height()) {
        throw Error(ErrorKind::shape, "pixel-wise similarity needs equal mask sizes, got " +
                                          std::to_string(query.width()) + "x" + std::to_string(query.height()) +
                                          " and " + std::to_string(db.width()) + "x" + std::to_string(db.height()));
    }
    if (!query.same_palette(db)) throw Error(ErrorKind::palette, "masks use different palettes");
    const auto q = query.classes();
    const auto d = db.classes();
    std::size_t matches = 0;
    for (std::size_t i = 0; i < q.size(); ++i) matches += (q[i] == d[i]);
    return static_cast<double>(matches) / static_cast<double>(q.size());
}

}  // namespace semloc
