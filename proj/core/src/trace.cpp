#include "vgw/trace.hpp"

#include <sstream>

namespace vgw {

void Trace::record(Millis t, std::string_view type, Json fields) {
  if (!fields.is_object()) fields = Json::object();
  fields["t"] = t;
  fields["type"] = std::string(type);
  std::lock_guard lock(mu_);
  events_.push_back(std::move(fields));
}

std::vector<Json> Trace::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::vector<Json> Trace::events_since(std::size_t index) const {
  std::lock_guard lock(mu_);
  if (index >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(index), events_.end()};
}

std::size_t Trace::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

std::size_t Trace::count(std::string_view type) const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& e : events_) {
    if (e.value("type", "") == type) ++n;
  }
  return n;
}

std::string Trace::to_jsonl() const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const auto& e : events_) {
    out += e.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<Json> Trace::parse_jsonl(std::string_view text) {
  std::vector<Json> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw Error(Errc::InvalidArgument, "trace line " + std::to_string(lineno) + " is not a JSON object");
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace vgw
