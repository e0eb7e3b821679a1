#pragma once

#include "semloc/mask.hpp"

namespace semloc {

/// Fraction of co-located pixels carrying the same class id. Masks must share size and palette.
double pixelwise_similarity(const SemanticMask& query, const SemanticMask& db);

}  // namespace semloc
