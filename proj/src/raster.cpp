#include "involukit/raster.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace involukit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateHistogram: return "DegenerateHistogram";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::EmptyTissue: return "EmptyTissue";
    case ErrorCode::ZeroAdjustedArea: return "ZeroAdjustedArea";
    case ErrorCode::NoRegions: return "NoRegions";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::DegenerateAgreement: return "DegenerateAgreement";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::AllValuesIdentical: return "AllValuesIdentical";
    case ErrorCode::ZeroMarginal: return "ZeroMarginal";
    case ErrorCode::PlacementExhausted: return "PlacementExhausted";
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::UnknownGroup: return "UnknownGroup";
    case ErrorCode::UnreadableInput: return "UnreadableInput";
  }
  return "Unknown";
}

void RasterMeta::validate() const {
  require(width > 0 && height > 0, "raster must have positive width and height");
  require(std::isfinite(microns_per_pixel) && microns_per_pixel > 0.0, "microns_per_pixel must be positive");
}

void PredictionMap::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const float v = data_[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      std::ostringstream os;
      os << "prediction map value " << v << " at index " << i << " is outside [0,1] or not finite";
      fail(ErrorCode::InvalidArgument, os.str());
    }
  }
}

std::int64_t BinaryMask::count() const {
  std::int64_t n = 0;
  for (auto b : data_) n += b != 0;
  return n;
}

void require_same_geometry(const RasterMeta& a, const RasterMeta& b, const char* what) {
  const bool same_mpp =
      std::abs(a.microns_per_pixel - b.microns_per_pixel) <= 1e-9 * std::max(a.microns_per_pixel, b.microns_per_pixel);
  if (a.width != b.width || a.height != b.height || !same_mpp) {
    std::ostringstream os;
    os << what << ": " << a.width << "x" << a.height << "@" << a.microns_per_pixel << " vs " << b.width << "x"
       << b.height << "@" << b.microns_per_pixel;
    fail(ErrorCode::GeometryMismatch, os.str());
  }
}

}  // namespace involukit
