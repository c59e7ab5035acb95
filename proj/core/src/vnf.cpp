#include "vgw/vnf.hpp"

#include <sstream>

namespace vgw {

namespace {

[[noreturn]] void drop(const Error& cause) { throw Error(Errc::DropWithError, cause.what()); }

VnfMessage with_senml(VnfMessage msg, const SensorReading& reading, VnfType type) {
  msg.payload = to_bytes(encode_senml(std::span<const SensorReading>(&reading, 1)));
  if (msg.meta.find(meta::kSensorId) == msg.meta.end()) msg.meta[meta::kSensorId] = reading.sensor_id;
  msg.append_stage(stage_tag(type));
  return msg;
}

VnfMessage to_http(VnfMessage msg, std::string_view senml, std::string_view target, VnfType type) {
  try {
    auto framed = frame_http_post(target, kSenmlContentType, senml);
    msg.payload = to_bytes(framed);
  } catch (const Error& e) {
    drop(e);
  }
  msg.append_stage(stage_tag(type));
  return msg;
}

}  // namespace

std::string VnfMessage::get(const std::string& key) const {
  auto it = meta.find(key);
  return it == meta.end() ? std::string{} : it->second;
}

std::vector<std::string> VnfMessage::stages() const {
  std::vector<std::string> out;
  std::stringstream ss(get(meta::kStages));
  std::string tag;
  while (std::getline(ss, tag, ',')) {
    if (!tag.empty()) out.push_back(tag);
  }
  return out;
}

void VnfMessage::append_stage(std::string_view tag) {
  auto& list = meta[meta::kStages];
  if (!list.empty()) list.push_back(',');
  list += tag;
}

VnfMessage imp1_handle(VnfMessage msg) {
  SensorReading reading;
  try {
    reading = decode_brand_a(msg.payload);
  } catch (const Error& e) {
    drop(e);
  }
  return with_senml(std::move(msg), reading, VnfType::InfoModelProcessor1);
}

VnfMessage imp2_handle(VnfMessage msg) {
  SensorReading reading;
  try {
    auto record = decode_brand_b(msg.payload);
    reading.sensor_id = std::to_string(record.sensor_id);
    reading.brand = SensorBrand::BrandB;
    reading.quantity = brand_b_quantity(record.sensor_code);
    reading.value = convert_brand_b(record.raw_adc, record.sensor_code);
    reading.timestamp = static_cast<Millis>(record.epoch_s) * 1000;
  } catch (const Error& e) {
    drop(e);
  }
  return with_senml(std::move(msg), reading, VnfType::InfoModelProcessor2);
}

VnfMessage pc1_handle(VnfMessage msg, std::string_view target) {
  if (msg.payload.empty()) drop(Error(Errc::FrameError, "empty datagram"));
  auto senml = to_string(msg.payload);
  return to_http(std::move(msg), senml, target, VnfType::ProtocolConverter1);
}

VnfMessage pc2_handle(VnfMessage msg, std::string_view target) {
  CoapLiteMessage coap;
  try {
    coap = decode_coaplite(msg.payload);
  } catch (const Error& e) {
    drop(e);
  }
  if (coap.code != kCoapPost) drop(Error(Errc::FrameError, "CoAP-lite code is not POST"));
  auto senml = to_string(coap.payload);
  return to_http(std::move(msg), senml, target, VnfType::ProtocolConverter2);
}

VnfFunction make_vnf_function(VnfType type) {
  switch (type) {
    case VnfType::InfoModelProcessor1:
      return {type, [](VnfMessage m, const VnfConfig&) { return std::vector{imp1_handle(std::move(m))}; }};
    case VnfType::InfoModelProcessor2:
      return {type, [](VnfMessage m, const VnfConfig&) { return std::vector{imp2_handle(std::move(m))}; }};
    case VnfType::ProtocolConverter1:
      return {type,
              [](VnfMessage m, const VnfConfig& c) { return std::vector{pc1_handle(std::move(m), c.target_url)}; }};
    case VnfType::ProtocolConverter2:
      return {type,
              [](VnfMessage m, const VnfConfig& c) { return std::vector{pc2_handle(std::move(m), c.target_url)}; }};
  }
  throw Error(Errc::InvalidArgument, "unknown VNF type");
}

VnfMessage link_between_stages(Domain domain, VnfMessage msg) {
  if (domain != Domain::VWSN2) return msg;
  CoapLiteMessage coap;
  coap.type = CoapType::NON;
  coap.code = kCoapPost;
  std::uint64_t seq = 0;
  auto s = msg.get(meta::kSeq);
  if (!s.empty()) seq = std::stoull(s);
  coap.message_id = static_cast<std::uint16_t>(seq & 0xFFFF);
  coap.payload = std::move(msg.payload);
  msg.payload = encode_coaplite(coap);
  return msg;
}

void stamp_stage_entry(VnfMessage& msg, VnfType type, Millis now) {
  msg.meta[std::string(meta::kStageTimePrefix) + std::string(stage_tag(type))] = std::to_string(now);
}

VnfMessage chain_execute(const ServiceChain& chain, VnfMessage msg, const VnfConfig& config, Millis now) {
  auto violations = validate_chain(chain);
  if (!violations.empty()) {
    bool only_liveness = true;
    std::string names;
    for (auto v : violations) {
      if (v != ChainViolation::StageNotRunning) only_liveness = false;
      if (!names.empty()) names += ", ";
      names += to_string(v);
    }
    if (only_liveness) throw Error(Errc::ChainUnavailable, chain.chain_id + ": stage not running");
    throw Error(Errc::InvalidArgument, chain.chain_id + ": " + names);
  }
  for (std::size_t i = 0; i < chain.stages.size(); ++i) {
    const auto type = chain.stages[i].descriptor.vnf_type;
    if (i > 0) msg = link_between_stages(chain.domain, std::move(msg));
    stamp_stage_entry(msg, type, now);
    auto out = make_vnf_function(type).handler(std::move(msg), config);
    msg = std::move(out.front());
  }
  return msg;
}

}  // namespace vgw
