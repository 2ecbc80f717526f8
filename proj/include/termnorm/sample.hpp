#pragma once

#include <optional>
#include <string>
#include <vector>

namespace termnorm {

/// One labeled adverse-event mention: surface text mapped to a PT id.
struct Sample {
  std::string id;
  std::string text;
  std::string label;                      // PT id
  std::optional<std::string> group;       // document / post / transcript key
  std::optional<std::string> source_llt;  // LLT the text was derived from, when known

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  std::string name;
  std::vector<Sample> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  const Sample* find(const std::string& id) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

}  // namespace termnorm
