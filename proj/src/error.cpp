#include "semloc/error.hpp"

namespace semloc {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::format: return "format";
        case ErrorKind::palette: return "palette";
        case ErrorKind::io: return "io";
        case ErrorKind::duplicate_id: return "duplicate_id";
        case ErrorKind::aspect: return "aspect";
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::shape: return "shape";
        case ErrorKind::unknown_id: return "unknown_id";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::config: return "config";
        case ErrorKind::numeric: return "numeric";
    }
    return "unknown";
}

}  // namespace semloc
