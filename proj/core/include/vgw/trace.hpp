#pragma once

#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vgw/model.hpp"

namespace vgw {

using Json = nlohmann::json;

/// Append-only event trace. Every event carries "t" (scenario ms) and "type".
/// Keys serialize in sorted order, so equal traces produce equal bytes.
class Trace {
 public:
  void record(Millis t, std::string_view type, Json fields = Json::object());

  std::vector<Json> events() const;
  /// Events recorded at or after position `index`.
  std::vector<Json> events_since(std::size_t index) const;
  std::size_t size() const;
  std::size_t count(std::string_view type) const;

  /// One JSON object per line.
  std::string to_jsonl() const;
  static std::vector<Json> parse_jsonl(std::string_view text);

 private:
  mutable std::mutex mu_;
  std::vector<Json> events_;
};

}  // namespace vgw
