#pragma once

// The four gateway VNFs and the static IMP -> PC chain.

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vgw/codec.hpp"
#include "vgw/model.hpp"

namespace vgw {

/// Well-known meta keys.
namespace meta {
inline constexpr const char* kTraceId = "trace_id";
inline constexpr const char* kSensorId = "sensor_id";
inline constexpr const char* kDomain = "domain";
inline constexpr const char* kSeq = "seq";
inline constexpr const char* kStages = "stages";
/// Prefix for per-stage entry timestamps, e.g. "t.IMP1".
inline constexpr const char* kStageTimePrefix = "t.";
inline constexpr const char* kEmitTime = "t.emit";
inline constexpr const char* kIngressTime = "t.ingress";
inline constexpr const char* kEgressTime = "t.egress";
}  // namespace meta

struct VnfMessage {
  Bytes payload;
  std::map<std::string, std::string> meta;

  std::string get(const std::string& key) const;
  /// Stage tags in the order the message visited them.
  std::vector<std::string> stages() const;
  void append_stage(std::string_view tag);
};

struct VnfConfig {
  /// Where protocol converters address their HTTP POST.
  std::string target_url;

  friend bool operator==(const VnfConfig&, const VnfConfig&) = default;
};

inline constexpr std::string_view kSenmlContentType = "application/senml+json";

// Each handler throws Error(DropWithError) when the message must be dropped.
VnfMessage imp1_handle(VnfMessage msg);
VnfMessage imp2_handle(VnfMessage msg);
VnfMessage pc1_handle(VnfMessage msg, std::string_view target);
VnfMessage pc2_handle(VnfMessage msg, std::string_view target);

using VnfHandler = std::function<std::vector<VnfMessage>(VnfMessage, const VnfConfig&)>;

struct VnfFunction {
  VnfType vnf_type;
  VnfHandler handler;
};

VnfFunction make_vnf_function(VnfType type);

/// Intra-domain transport between the IMP and PC stages. VWSN2 carries the
/// SenML pack inside a CoAP-lite NON POST; VWSN1 passes the pack through as
/// a datagram.
VnfMessage link_between_stages(Domain domain, VnfMessage msg);

/// Records the stage entry time in meta ("t.<TAG>").
void stamp_stage_entry(VnfMessage& msg, VnfType type, Millis now);

/// Runs stage 0 then stage 1 synchronously. Throws ChainUnavailable when a
/// stage is not Running, InvalidArgument for a structurally invalid chain,
/// and propagates DropWithError from the stages.
VnfMessage chain_execute(const ServiceChain& chain, VnfMessage msg, const VnfConfig& config, Millis now = 0);

}  // namespace vgw
