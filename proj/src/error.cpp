#include "omrkit/error.hpp"

namespace omrkit {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::malformed_label: return "MalformedLabel";
    case Errc::io_error: return "IoError";
    case Errc::schema_error: return "SchemaError";
    case Errc::validation_error: return "ValidationError";
    case Errc::empty_stats: return "EmptyStats";
    case Errc::missing_image: return "MissingImage";
    case Errc::empty_bank: return "EmptyBank";
    case Errc::does_not_fit: return "DoesNotFit";
    case Errc::missing_cache_entry: return "MissingCacheEntry";
    case Errc::no_matches: return "NoMatches";
    case Errc::degenerate_image: return "DegenerateImage";
    case Errc::no_overlap: return "NoOverlap";
    case Errc::unknown_class: return "UnknownClass";
  }
  return "Error";
}

}  // namespace omrkit
