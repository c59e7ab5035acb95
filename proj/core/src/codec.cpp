#include "vgw/codec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace vgw {

namespace {

[[noreturn]] void frame_error(const std::string& detail) { throw Error(Errc::FrameError, detail); }

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string format_cents(std::int64_t cents) {
  std::string out;
  if (cents < 0) out.push_back('-');
  std::uint64_t mag = cents < 0 ? static_cast<std::uint64_t>(-(cents + 1)) + 1 : static_cast<std::uint64_t>(cents);
  out += std::to_string(mag / 100);
  out.push_back('.');
  auto frac = mag % 100;
  out.push_back(static_cast<char>('0' + frac / 10));
  out.push_back(static_cast<char>('0' + frac % 10));
  return out;
}

// "-?digits.dd" -> cents
std::int64_t parse_cents(std::string_view s) {
  bool negative = false;
  if (!s.empty() && s.front() == '-') {
    negative = true;
    s.remove_prefix(1);
  }
  auto dot = s.find('.');
  if (dot == std::string_view::npos) frame_error("value has no decimal point");
  auto whole = s.substr(0, dot);
  auto frac = s.substr(dot + 1);
  if (!all_digits(whole) || frac.size() != 2 || !all_digits(frac)) frame_error("value is not a 2-decimal number");
  std::int64_t units = 0;
  if (whole.size() > 15 || !parse_int(whole, units)) frame_error("value out of range");
  std::int64_t cents = units * 100 + (frac[0] - '0') * 10 + (frac[1] - '0');
  return negative ? -cents : cents;
}

std::string capitalize_header(std::string_view lower) {
  std::string out(lower);
  bool start = true;
  for (auto& c : out) {
    if (start && c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    start = (c == '-');
  }
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

std::string to_string(std::span<const std::uint8_t> bytes) { return std::string(bytes.begin(), bytes.end()); }

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  Bytes out;
  int pending = -1;
  for (char c : hex) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t') continue;
    int v = nibble(c);
    if (v < 0) throw Error(Errc::InvalidArgument, "bad hex digit");
    if (pending < 0) {
      pending = v;
    } else {
      out.push_back(static_cast<std::uint8_t>((pending << 4) | v));
      pending = -1;
    }
  }
  if (pending >= 0) throw Error(Errc::InvalidArgument, "odd number of hex digits");
  return out;
}

// ---- BrandA

std::string_view brand_a_code(Quantity q) noexcept {
  switch (q) {
    case Quantity::Temperature: return "temp";
    case Quantity::Humidity: return "hum";
    case Quantity::WindSpeed: return "wind";
    case Quantity::CO2: return "co2";
    case Quantity::Rainfall: return "rain";
  }
  return "?";
}

Bytes encode_brand_a(const SensorReading& reading) {
  if (reading.sensor_id.empty() || reading.sensor_id.find_first_of(",\n\r") != std::string::npos)
    throw Error(Errc::InvalidArgument, "BrandA sensor id must be non-empty without ',' or newlines");
  if (!std::isfinite(reading.value) || std::fabs(reading.value) > 1e13)
    throw Error(Errc::InvalidArgument, "BrandA value out of range");
  if (reading.timestamp <= 0) throw Error(Errc::InvalidArgument, "timestamp must be > 0");

  std::string line = "SPOT,";
  line += reading.sensor_id;
  line += ',';
  line += brand_a_code(reading.quantity);
  line += ',';
  line += format_cents(std::llround(reading.value * 100.0));
  line += ',';
  line += std::to_string(reading.timestamp);
  line += '\n';
  if (line.size() > 0xFFFF) throw Error(Errc::InvalidArgument, "BrandA payload too long");

  Bytes out;
  out.reserve(line.size() + 2);
  put_u16(out, static_cast<std::uint16_t>(line.size()));
  out.insert(out.end(), line.begin(), line.end());
  return out;
}

SensorReading decode_brand_a(std::span<const std::uint8_t> frame) {
  if (frame.size() < 2) frame_error("BrandA frame shorter than length prefix");
  const std::size_t declared = get_u16(frame, 0);
  if (declared != frame.size() - 2)
    frame_error("BrandA length prefix " + std::to_string(declared) + " != payload " +
                std::to_string(frame.size() - 2));
  std::string_view line(reinterpret_cast<const char*>(frame.data() + 2), declared);
  if (line.empty() || line.back() != '\n') frame_error("BrandA line not newline terminated");
  line.remove_suffix(1);

  auto fields = split(line, ',');
  if (fields.size() != 5) frame_error("BrandA line needs 5 fields");
  if (fields[0] != "SPOT") frame_error("BrandA line does not start with SPOT");
  if (fields[1].empty()) frame_error("BrandA sensor id empty");

  SensorReading r;
  r.sensor_id = std::string(fields[1]);
  r.brand = SensorBrand::BrandA;
  bool known = false;
  for (Quantity q : kAllQuantities) {
    if (brand_a_code(q) == fields[2]) {
      r.quantity = q;
      known = true;
    }
  }
  if (!known) frame_error("unknown BrandA quantity code '" + std::string(fields[2]) + "'");
  r.value = static_cast<double>(parse_cents(fields[3])) / 100.0;
  if (!all_digits(fields[4]) || !parse_int(fields[4], r.timestamp) || r.timestamp <= 0)
    frame_error("BrandA timestamp is not a positive integer");
  return r;
}

// ---- BrandB

Bytes encode_brand_b(const BrandBRecord& record) {
  Bytes out;
  out.reserve(kBrandBFrameSize);
  out.push_back(kBrandBMagic);
  put_u16(out, record.sensor_id);
  out.push_back(record.sensor_code);
  put_u16(out, record.raw_adc);
  put_u32(out, record.epoch_s);
  std::uint8_t checksum = 0;
  for (auto b : out) checksum ^= b;
  out.push_back(checksum);
  return out;
}

BrandBRecord decode_brand_b(std::span<const std::uint8_t> frame) {
  if (frame.size() != kBrandBFrameSize)
    frame_error("BrandB frame must be 11 bytes, got " + std::to_string(frame.size()));
  std::uint8_t checksum = 0;
  for (std::size_t i = 0; i + 1 < kBrandBFrameSize; ++i) checksum ^= frame[i];
  if (checksum != frame[kBrandBFrameSize - 1]) frame_error("BrandB checksum mismatch");
  if (frame[0] != kBrandBMagic) frame_error("BrandB bad magic");
  BrandBRecord r;
  r.sensor_id = get_u16(frame, 1);
  r.sensor_code = frame[3];
  r.raw_adc = get_u16(frame, 4);
  r.epoch_s = get_u32(frame, 6);
  if (r.sensor_code != kBrandBTemperature && r.sensor_code != kBrandBHumidity)
    frame_error("unknown BrandB sensor code");
  return r;
}

double convert_brand_b(std::uint16_t raw_adc, std::uint8_t sensor_code) {
  const double raw = raw_adc;
  switch (sensor_code) {
    case kBrandBTemperature: return -39.6 + 0.01 * raw;
    case kBrandBHumidity: return -2.0468 + 0.0367 * raw - 1.5955e-6 * raw * raw;
    default: throw Error(Errc::UnknownSensorCode, "code " + std::to_string(sensor_code));
  }
}

Quantity brand_b_quantity(std::uint8_t sensor_code) {
  if (sensor_code == kBrandBTemperature) return Quantity::Temperature;
  if (sensor_code == kBrandBHumidity) return Quantity::Humidity;
  throw Error(Errc::UnknownSensorCode, "code " + std::to_string(sensor_code));
}

std::uint8_t brand_b_code(Quantity q) {
  if (q == Quantity::Temperature) return kBrandBTemperature;
  if (q == Quantity::Humidity) return kBrandBHumidity;
  throw Error(Errc::UnknownSensorCode, "BrandB has no code for " + std::string(to_string(q)));
}

// ---- CoAP-lite

Bytes encode_coaplite(const CoapLiteMessage& msg) {
  const auto type = static_cast<std::uint8_t>(msg.type);
  if (type > 2) throw Error(Errc::InvalidArgument, "CoAP-lite type out of range");
  Bytes out;
  out.reserve(4 + (msg.payload.empty() ? 0 : msg.payload.size() + 1));
  out.push_back(static_cast<std::uint8_t>((1u << 6) | (type << 4)));
  out.push_back(msg.code);
  put_u16(out, msg.message_id);
  if (!msg.payload.empty()) {
    out.push_back(kCoapPayloadMarker);
    out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  }
  return out;
}

CoapLiteMessage decode_coaplite(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) frame_error("CoAP-lite message shorter than header");
  const std::uint8_t first = bytes[0];
  if ((first >> 6) != 1) frame_error("CoAP-lite version must be 1");
  const std::uint8_t type = (first >> 4) & 0x3;
  if (type > 2) frame_error("CoAP-lite type RST not supported");
  if ((first & 0x0F) != 0) frame_error("CoAP-lite token length must be 0");
  CoapLiteMessage msg;
  msg.type = static_cast<CoapType>(type);
  msg.code = bytes[1];
  msg.message_id = get_u16(bytes, 2);
  if (bytes.size() > 4) {
    if (bytes[4] != kCoapPayloadMarker) frame_error("CoAP-lite payload without 0xFF marker");
    if (bytes.size() == 5) frame_error("CoAP-lite payload marker with empty payload");
    msg.payload.assign(bytes.begin() + 5, bytes.end());
  }
  return msg;
}

// ---- SenML

std::string encode_senml(std::span<const SensorReading> readings) {
  if (readings.empty()) throw Error(Errc::EmptyInput, "no readings to encode");
  const auto& id = readings.front().sensor_id;
  for (const auto& r : readings) {
    if (r.sensor_id != id) throw Error(Errc::MixedSensorIds, id + " vs " + r.sensor_id);
  }
  auto pack = nlohmann::ordered_json::array();
  bool first = true;
  for (const auto& r : readings) {
    nlohmann::ordered_json rec;
    if (first) rec["bn"] = "urn:dev:sn:" + id;
    rec["n"] = std::string(to_string(r.quantity));
    rec["u"] = std::string(senml_unit(r.quantity));
    rec["v"] = r.value;
    rec["t"] = r.timestamp / 1000;
    pack.push_back(std::move(rec));
    first = false;
  }
  return pack.dump();
}

std::vector<std::string> senml_violations(std::string_view body) {
  std::vector<std::string> out;
  auto pack = nlohmann::json::parse(body, nullptr, false);
  if (pack.is_discarded()) return {"not valid JSON"};
  if (!pack.is_array()) return {"pack is not a JSON array"};
  if (pack.empty()) return {"pack is empty"};
  static const std::vector<std::string> kUnits{"Cel", "%RH", "m/s", "ppm", "mm"};
  for (std::size_t i = 0; i < pack.size(); ++i) {
    const auto& rec = pack[i];
    const std::string at = "record " + std::to_string(i) + ": ";
    if (!rec.is_object()) {
      out.push_back(at + "not an object");
      continue;
    }
    for (const auto& [key, _] : rec.items()) {
      if (key != "bn" && key != "n" && key != "u" && key != "v" && key != "t") out.push_back(at + "unexpected key " + key);
    }
    if (i == 0) {
      if (!rec.contains("bn") || !rec["bn"].is_string() ||
          rec["bn"].get<std::string>().rfind("urn:dev:sn:", 0) != 0 ||
          rec["bn"].get<std::string>().size() == std::string_view("urn:dev:sn:").size())
        out.push_back(at + "first record needs bn urn:dev:sn:<id>");
    } else if (rec.contains("bn")) {
      out.push_back(at + "bn only allowed on first record");
    }
    if (!rec.contains("n") || !rec["n"].is_string() || rec["n"].get<std::string>().empty())
      out.push_back(at + "missing n");
    if (!rec.contains("u") || !rec["u"].is_string() ||
        std::find(kUnits.begin(), kUnits.end(), rec["u"].get<std::string>()) == kUnits.end())
      out.push_back(at + "missing or unknown u");
    if (!rec.contains("v") || !rec["v"].is_number()) out.push_back(at + "missing numeric v");
    if (!rec.contains("t") || !rec["t"].is_number_integer()) out.push_back(at + "missing integer t");
  }
  return out;
}

std::vector<SenmlRecord> decode_senml(std::string_view body) {
  auto problems = senml_violations(body);
  if (!problems.empty()) frame_error("invalid SenML: " + problems.front());
  auto pack = nlohmann::json::parse(body);
  std::vector<SenmlRecord> out;
  for (const auto& rec : pack) {
    SenmlRecord r;
    if (rec.contains("bn")) r.base_name = rec["bn"].get<std::string>();
    r.name = rec["n"].get<std::string>();
    r.unit = rec["u"].get<std::string>();
    r.value = rec["v"].get<double>();
    r.time_s = rec["t"].get<std::int64_t>();
    out.push_back(std::move(r));
  }
  return out;
}

// ---- HTTP

std::string Url::hostname() const {
  auto colon = host.rfind(':');
  return colon == std::string::npos ? host : host.substr(0, colon);
}

int Url::port() const {
  auto colon = host.rfind(':');
  if (colon == std::string::npos) return 80;
  int p = 80;
  parse_int(std::string_view(host).substr(colon + 1), p);
  return p;
}

Url parse_url(std::string_view url) {
  auto sep = url.find("://");
  if (sep == std::string_view::npos) throw Error(Errc::BadUrl, "missing scheme in '" + std::string(url) + "'");
  Url out;
  out.scheme = to_lower(url.substr(0, sep));
  if (out.scheme != "http") throw Error(Errc::BadUrl, "unsupported scheme '" + out.scheme + "'");
  auto rest = url.substr(sep + 3);
  auto slash = rest.find('/');
  out.host = std::string(rest.substr(0, slash));
  out.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  if (out.host.empty() || out.host.find_first_of(" \r\n@") != std::string::npos)
    throw Error(Errc::BadUrl, "bad host in '" + std::string(url) + "'");
  auto colon = out.host.rfind(':');
  if (colon != std::string::npos) {
    int port = 0;
    auto digits = std::string_view(out.host).substr(colon + 1);
    if (colon == 0 || !all_digits(digits) || !parse_int(digits, port) || port <= 0 || port > 65535)
      throw Error(Errc::BadUrl, "bad port in '" + std::string(url) + "'");
  }
  if (out.path.find_first_of(" \r\n") != std::string::npos) throw Error(Errc::BadUrl, "bad path");
  return out;
}

std::string frame_http_post(std::string_view url, std::string_view content_type, std::string_view body) {
  const Url u = parse_url(url);
  std::string out;
  out.reserve(128 + body.size());
  out += "POST ";
  out += u.path;
  out += " HTTP/1.1\r\nHost: ";
  out += u.host;
  out += "\r\nContent-Type: ";
  out += content_type;
  out += "\r\nContent-Length: ";
  out += std::to_string(body.size());
  out += "\r\n\r\n";
  out += body;
  return out;
}

std::string HttpRequest::header(const std::string& lower_name) const {
  auto it = headers.find(lower_name);
  return it == headers.end() ? std::string{} : it->second;
}

std::string serialize_http_request(const HttpRequest& req) {
  std::string out = req.method + " " + req.path + " HTTP/1.1\r\nHost: " + req.host + "\r\n";
  for (const auto& [name, value] : req.headers) {
    if (name == "host" || name == "content-length") continue;
    out += capitalize_header(name);
    out += ": ";
    out += value;
    out += "\r\n";
  }
  if (!req.body.empty() || req.method == "POST" || req.method == "PUT") {
    out += "Content-Length: " + std::to_string(req.body.size()) + "\r\n";
  }
  out += "\r\n";
  out += req.body;
  return out;
}

HttpRequest parse_http_request(std::string_view wire) {
  auto head_end = wire.find("\r\n\r\n");
  if (head_end == std::string_view::npos) frame_error("HTTP request without header terminator");
  auto head = wire.substr(0, head_end);
  auto body = wire.substr(head_end + 4);

  HttpRequest req;
  auto line_end = head.find("\r\n");
  auto request_line = head.substr(0, line_end);
  auto parts = split(request_line, ' ');
  if (parts.size() != 3 || parts[0].empty() || parts[1].empty() || parts[2] != "HTTP/1.1")
    frame_error("bad HTTP request line");
  req.method = std::string(parts[0]);
  req.path = std::string(parts[1]);

  std::string_view rest = line_end == std::string_view::npos ? std::string_view{} : head.substr(line_end + 2);
  while (!rest.empty()) {
    auto eol = rest.find("\r\n");
    auto line = rest.substr(0, eol);
    rest = eol == std::string_view::npos ? std::string_view{} : rest.substr(eol + 2);
    auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) frame_error("bad HTTP header line");
    auto value = line.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    req.headers[to_lower(line.substr(0, colon))] = std::string(value);
  }
  req.host = req.header("host");

  auto length = req.header("content-length");
  std::size_t n = 0;
  if (!length.empty() && (!all_digits(length) || !parse_int(std::string_view(length), n)))
    frame_error("bad Content-Length");
  if (n != body.size()) frame_error("Content-Length does not match body size");
  req.body = std::string(body);
  return req;
}

}  // namespace vgw
