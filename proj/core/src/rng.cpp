#include "fedsim/rng.hpp"

#include "fedsim/error.hpp"
#include "fedsim/linalg.hpp"

#include <string>

namespace fedsim {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidScheme: return "invalid-scheme";
    case ErrorCode::kEmptyUpdates: return "empty-update-set";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kInvalidConstants: return "invalid-constants";
    case ErrorCode::kNanDetected: return "nan-detected";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kMissingAuditLog: return "missing-audit-log";
    case ErrorCode::kMissingPrev: return "missing-prev";
    case ErrorCode::kWeightOverflow: return "weight-overflow";
    case ErrorCode::kUnknownConstants: return "unknown-constants";
    case ErrorCode::kInconsistent: return "inconsistent";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

void require_dim(const Vector& v, Eigen::Index dim, std::string_view what) {
  if (v.size() != dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": expected dimension " + std::to_string(dim) +
                    ", got " + std::to_string(v.size()));
  }
}

bool all_finite(const Vector& v) noexcept { return v.allFinite(); }

double max_norm(const Vector& v) noexcept {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint64_t a,
                          std::uint64_t b) noexcept {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ static_cast<std::uint64_t>(tag));
  h = mix64(h ^ a);
  h = mix64(h ^ (b + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace fedsim
