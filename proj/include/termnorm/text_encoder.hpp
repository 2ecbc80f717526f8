#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace termnorm {

/// Unicode NFKC, full lowercase, whitespace runs collapsed to one ASCII space, trimmed.
std::string normalize_text(std::string_view s);

/// 64-bit FNV-1a over raw bytes.
///   offset basis 0xcbf29ce484222325, prime 0x100000001b3
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct NgramRange {
  int lo = 2;
  int hi = 4;
  friend bool operator==(const NgramRange&, const NgramRange&) = default;
};

struct FeaturizerConfig {
  std::uint32_t dim = 1u << 16;
  NgramRange ngrams;
  friend bool operator==(const FeaturizerConfig&, const FeaturizerConfig&) = default;
};

/// Sparse feature vector. Entries are sorted by index with no duplicates.
class FeatureVector {
 public:
  using Entry = std::pair<std::uint32_t, double>;

  FeatureVector() = default;
  explicit FeatureVector(std::uint32_t dim) : dim_(dim) {}
  /// Builds from unsorted (index, weight) entries, summing duplicates.
  FeatureVector(std::uint32_t dim, std::vector<Entry> entries);

  std::uint32_t dim() const { return dim_; }
  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  double weight(std::uint32_t index) const;
  double total_mass() const;
  double norm() const;
  FeatureVector normalized() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::uint32_t dim_ = 0;
  std::vector<Entry> entries_;
};

/// Character n-gram counts of "^" + normalize_text(s) + "$", n over the
/// inclusive range, where characters are Unicode code points. Each n-gram's
/// UTF-8 bytes are hashed with fnv1a64 and reduced modulo dim. Empty
/// normalized text yields an empty vector.
///
/// Throws InvalidArgument when dim is not a power of two or the range is invalid.
FeatureVector featurize(std::string_view s, std::uint32_t dim, NgramRange range);

inline FeatureVector featurize(std::string_view s, const FeaturizerConfig& cfg) {
  return featurize(s, cfg.dim, cfg.ngrams);
}

void validate(const FeaturizerConfig& cfg);

}  // namespace termnorm
