#include "tkre/errors.hpp"

namespace tkre {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Config: return "config";
    case ErrorKind::Data: return "data";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::State: return "state";
    case ErrorKind::Io: return "io";
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Compat: return "compat";
    case ErrorKind::EmptySupport: return "empty-support";
    case ErrorKind::Comparability: return "comparability";
    case ErrorKind::Training: return "training";
  }
  return "unknown";
}

}  // namespace tkre
