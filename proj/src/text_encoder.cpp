#include "termnorm/text_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/locid.h>

#include "termnorm/error.hpp"

namespace termnorm {

namespace {

const icu::Normalizer2& nfkc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw Error("ICU NFKC normalizer unavailable");
  return *n;
}

bool is_power_of_two(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

// Splits valid UTF-8 into code point byte slices. Input comes from ICU, so it is well formed.
std::vector<std::string_view> code_points(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, s.size() - i);
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace

std::string normalize_text(std::string_view s) {
  if (s.empty()) return {};
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString in = icu::UnicodeString::fromUTF8(
      icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  icu::UnicodeString folded = nfkc().normalize(in, status);
  if (U_FAILURE(status)) throw Error("NFKC normalization failed");
  folded.toLower(icu::Locale::getRoot());

  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (int32_t i = 0; i < folded.length();) {
    const UChar32 c = folded.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = !collapsed.isEmpty();
      continue;
    }
    if (pending_space) collapsed.append(static_cast<UChar>(' '));
    pending_space = false;
    collapsed.append(c);
  }
  std::string out;
  collapsed.toUTF8String(out);
  return out;
}

FeatureVector::FeatureVector(std::uint32_t dim, std::vector<Entry> entries) : dim_(dim) {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.first < b.first; });
  for (const auto& e : entries) {
    if (e.first >= dim) throw InvalidArgument("feature index out of range");
    if (!entries_.empty() && entries_.back().first == e.first) {
      entries_.back().second += e.second;
    } else {
      entries_.push_back(e);
    }
  }
}

double FeatureVector::weight(std::uint32_t index) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                             [](const Entry& e, std::uint32_t i) { return e.first < i; });
  return (it != entries_.end() && it->first == index) ? it->second : 0.0;
}

double FeatureVector::total_mass() const {
  double m = 0.0;
  for (const auto& e : entries_) m += e.second;
  return m;
}

double FeatureVector::norm() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.second * e.second;
  return std::sqrt(s);
}

FeatureVector FeatureVector::normalized() const {
  FeatureVector out(dim_);
  const double n = norm();
  if (n == 0.0) return out;
  out.entries_ = entries_;
  for (auto& e : out.entries_) e.second /= n;
  return out;
}

void validate(const FeaturizerConfig& cfg) {
  if (!is_power_of_two(cfg.dim)) throw InvalidArgument("feature dim must be a power of two");
  if (cfg.ngrams.lo < 1 || cfg.ngrams.hi < cfg.ngrams.lo) {
    throw InvalidArgument("n-gram range must satisfy 1 <= lo <= hi");
  }
}

FeatureVector featurize(std::string_view s, std::uint32_t dim, NgramRange range) {
  validate(FeaturizerConfig{dim, range});
  const std::string text = normalize_text(s);
  if (text.empty()) return FeatureVector(dim);

  const std::string padded = "^" + text + "$";
  const auto cps = code_points(padded);
  std::vector<FeatureVector::Entry> entries;
  const std::uint32_t mask = dim - 1;
  for (int n = range.lo; n <= range.hi; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (cps.size() < un) break;
    for (std::size_t start = 0; start + un <= cps.size(); ++start) {
      const char* first = cps[start].data();
      const char* last = cps[start + un - 1].data() + cps[start + un - 1].size();
      const std::string_view gram(first, static_cast<std::size_t>(last - first));
      entries.emplace_back(static_cast<std::uint32_t>(fnv1a64(gram) & mask), 1.0);
    }
  }
  return FeatureVector(dim, std::move(entries));
}

}  // namespace termnorm
