#pragma once

// Wire formats: the two sensor brand framings, CoAP-lite, SenML JSON and the
// fixed HTTP POST template. All multi-byte integers are big-endian.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vgw/model.hpp"

namespace vgw {

using Bytes = std::vector<std::uint8_t>;

Bytes to_bytes(std::string_view s);
std::string to_string(std::span<const std::uint8_t> bytes);
/// Lowercase hex, two digits per byte, no separators.
std::string to_hex(std::span<const std::uint8_t> bytes);
Bytes from_hex(std::string_view hex);

// ---- BrandA: "SPOT,<id>,<qty>,<value>,<epoch_ms>\n" behind a u16 length prefix.

/// temp, hum, wind, co2, rain
std::string_view brand_a_code(Quantity q) noexcept;

/// Value is written with exactly two fraction digits (rounded half away from zero).
Bytes encode_brand_a(const SensorReading& reading);
SensorReading decode_brand_a(std::span<const std::uint8_t> frame);

// ---- BrandB: 11-byte binary record with trailing XOR checksum.

inline constexpr std::uint8_t kBrandBMagic = 0xAD;
inline constexpr std::size_t kBrandBFrameSize = 11;
inline constexpr std::uint8_t kBrandBTemperature = 0x01;
inline constexpr std::uint8_t kBrandBHumidity = 0x02;

struct BrandBRecord {
  std::uint16_t sensor_id = 0;
  std::uint8_t sensor_code = kBrandBTemperature;
  std::uint16_t raw_adc = 0;
  std::uint32_t epoch_s = 0;

  friend bool operator==(const BrandBRecord&, const BrandBRecord&) = default;
};

Bytes encode_brand_b(const BrandBRecord& record);
BrandBRecord decode_brand_b(std::span<const std::uint8_t> frame);

/// SHT11-style raw to physical conversion. Throws UnknownSensorCode.
double convert_brand_b(std::uint16_t raw_adc, std::uint8_t sensor_code);
Quantity brand_b_quantity(std::uint8_t sensor_code);
std::uint8_t brand_b_code(Quantity q);

// ---- CoAP-lite: 4-byte header, no token, no options, 0xFF payload marker.

enum class CoapType : std::uint8_t { CON = 0, NON = 1, ACK = 2 };

inline constexpr std::uint8_t kCoapPost = 0x02;
inline constexpr std::uint8_t kCoapPayloadMarker = 0xFF;

struct CoapLiteMessage {
  CoapType type = CoapType::CON;
  std::uint8_t code = kCoapPost;
  std::uint16_t message_id = 0;
  Bytes payload;

  friend bool operator==(const CoapLiteMessage&, const CoapLiteMessage&) = default;
};

Bytes encode_coaplite(const CoapLiteMessage& msg);
CoapLiteMessage decode_coaplite(std::span<const std::uint8_t> bytes);

// ---- SenML

/// Encodes readings of a single sensor as a flat SenML array. Record keys are
/// emitted in the fixed order (bn,) n, u, v, t so output is byte-stable.
std::string encode_senml(std::span<const SensorReading> readings);

/// Schema check for a SenML pack as produced by encode_senml. Empty result
/// means valid.
std::vector<std::string> senml_violations(std::string_view body);

struct SenmlRecord {
  std::string base_name;  // first record only
  std::string name;
  std::string unit;
  double value = 0.0;
  std::int64_t time_s = 0;
};

/// Parses a pack that passes senml_violations; throws FrameError otherwise.
std::vector<SenmlRecord> decode_senml(std::string_view body);

// ---- HTTP

struct Url {
  std::string scheme;
  std::string host;  // authority, including ":port" when present
  std::string path;

  /// Host name without port.
  std::string hostname() const;
  /// Explicit port, or 80.
  int port() const;
};

/// Accepts "http://authority[/path]". Throws BadUrl.
Url parse_url(std::string_view url);

std::string frame_http_post(std::string_view url, std::string_view content_type, std::string_view body);

struct HttpRequest {
  std::string method;
  std::string path;
  std::string host;
  // Header names are stored lowercase.
  std::map<std::string, std::string> headers;
  std::string body;

  std::string header(const std::string& lower_name) const;
};

/// Serializes a request: request line, Host, the remaining headers in name
/// order, Content-Length, blank line, body.
std::string serialize_http_request(const HttpRequest& req);
/// Parses a complete request with a Content-Length delimited body. Throws FrameError.
HttpRequest parse_http_request(std::string_view wire);

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  bool ok() const { return status >= 200 && status < 300; }
};

}  // namespace vgw
