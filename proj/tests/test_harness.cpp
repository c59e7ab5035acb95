#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include "vgw/harness.hpp"

using namespace vgw;

namespace {

Errc error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::InvalidArgument;
}

Json control(Millis t, const std::string& kind, const std::string& provider = "VWSN1") {
  return {{"t", t}, {"type", "control"}, {"kind", kind}, {"provider", provider}, {"request_id", "r"},
          {"service", "svc"}, {"purpose", "service"}, {"dup", false}};
}

std::vector<Json> nominal_legs() {
  return {control(0, "rq-s"), control(1, "rq-g"), control(3000, "g-i"), control(3001, "ack")};
}

bool starts_with(const std::vector<std::string>& v, const std::string& prefix) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.rfind(prefix, 0) == 0; });
}

ScenarioConfig short_prototype(Millis duration) {
  auto c = ScenarioConfig::prototype();
  c.duration_ms = duration;
  return c;
}

}  // namespace

TEST(Emulator, OnceAndPeriodic) {
  SensorSpec once{SensorBrand::BrandA, "A1", {Quantity::Temperature}, CollectionPattern::once()};
  EXPECT_EQ(emulate_sensor(once, 1, 0, 500, 60000).size(), 1u);

  SensorSpec periodic{SensorBrand::BrandA, "A2", {Quantity::Humidity}, CollectionPattern::periodic(1000)};
  const auto frames = emulate_sensor(periodic, 1, 1'700'000'000'000, 0, 10000);
  ASSERT_EQ(frames.size(), 10u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    EXPECT_EQ(frames[i].t, static_cast<Millis>(i) * 1000);
    EXPECT_EQ(frames[i].seq, i + 1);
    const auto r = decode_brand_a(frames[i].bytes);
    EXPECT_EQ(r.sensor_id, "A2");
    EXPECT_EQ(r.quantity, Quantity::Humidity);
    EXPECT_EQ(r.timestamp, 1'700'000'000'000 + frames[i].t);
    EXPECT_GE(r.value, 20.0);
    EXPECT_LE(r.value, 95.0);
  }
}

TEST(Emulator, BrandBFramesStayInRawRange) {
  SensorSpec b{SensorBrand::BrandB, "7", {Quantity::Temperature, Quantity::Humidity},
               CollectionPattern::periodic(1000)};
  const auto frames = emulate_sensor(b, 5, 1'700'000'000'000, 0, 200000);
  ASSERT_EQ(frames.size(), 200u);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto r = decode_brand_b(frames[i].bytes);
    EXPECT_EQ(r.sensor_id, 7);
    EXPECT_EQ(r.sensor_code, i % 2 == 0 ? kBrandBTemperature : kBrandBHumidity);
    if (r.sensor_code == kBrandBTemperature) {
      EXPECT_GE(r.raw_adc, 5460);
      EXPECT_LE(r.raw_adc, 8460);
    } else {
      EXPECT_GE(r.raw_adc, 600);
      EXPECT_LE(r.raw_adc, 3000);
    }
    EXPECT_EQ(r.epoch_s, 1'700'000'000u + i);
  }
}

TEST(Emulator, DeterministicPerSeedAndSensor) {
  SensorSpec a{SensorBrand::BrandA, "A1", {Quantity::CO2}, CollectionPattern::periodic(500)};
  const Millis base = 1'700'000'000'000;
  const auto x = emulate_sensor(a, sensor_seed(3, "A1"), base, 0, 20000);
  const auto y = emulate_sensor(a, sensor_seed(3, "A1"), base, 0, 20000);
  const auto z = emulate_sensor(a, sensor_seed(4, "A1"), base, 0, 20000);
  ASSERT_EQ(x.size(), 40u);
  bool differs = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].bytes, y[i].bytes);
    differs = differs || x[i].bytes != z[i].bytes;
  }
  EXPECT_TRUE(differs);
  EXPECT_NE(sensor_seed(3, "A1"), sensor_seed(3, "A2"));
}

TEST(Config, JsonRoundTrip) {
  for (const auto& c : {ScenarioConfig::prototype(), ScenarioConfig::elasticity()}) {
    const auto j = c.to_json();
    EXPECT_EQ(ScenarioConfig::from_json(j).to_json(), j);
  }
  const auto partial = ScenarioConfig::from_json(Json{{"seed", 9}, {"duration_ms", 1000}});
  EXPECT_EQ(partial.seed, 9u);
  EXPECT_EQ(partial.duration_ms, 1000);
  EXPECT_EQ(partial.nodes.at(Domain::VWSN1).size(), 2u);
}

TEST(Config, ShippedFilesMatchPresets) {
  for (const auto& [file, preset] : {std::pair{"prototype.json", ScenarioConfig::prototype()},
                                     std::pair{"elasticity.json", ScenarioConfig::elasticity()}}) {
    std::ifstream in(std::string(VGW_FIXTURE_DIR) + "/../../configs/" + file);
    ASSERT_TRUE(in.good()) << file;
    EXPECT_EQ(ScenarioConfig::from_json(Json::parse(in)).to_json(), preset.to_json()) << file;
  }
}

TEST(Config, ValidationErrors) {
  auto split_virtual = ScenarioConfig::prototype();
  split_virtual.processes = ProcessMode::Split;
  EXPECT_EQ(error_of([&] { split_virtual.validate(); }), Errc::InvalidConfig);

  auto bad_brand = ScenarioConfig::prototype();
  bad_brand.sensors.push_back({SensorBrand::BrandB, "9", {Quantity::WindSpeed}, CollectionPattern::periodic(1000)});
  EXPECT_EQ(error_of([&] { bad_brand.validate(); }), Errc::InvalidConfig);

  auto warm = ScenarioConfig::prototype();
  warm.cost.state_transfer_ms = 5000;
  EXPECT_EQ(error_of([&] { warm.validate(); }), Errc::InvalidConfig);

  auto dup = ScenarioConfig::prototype();
  dup.sensors.push_back(dup.sensors.front());
  EXPECT_EQ(error_of([&] { dup.validate(); }), Errc::InvalidConfig);

  std::ifstream in(std::string(VGW_FIXTURE_DIR) + "/bad_config.json");
  const auto bad = Json::parse(in);
  EXPECT_EQ(error_of([&] { ScenarioConfig::from_json(bad); }), Errc::InvalidConfig);
  EXPECT_EQ(error_of([] { ScenarioConfig::from_json(Json{{"clock", "sundial"}}); }), Errc::InvalidConfig);
  EXPECT_EQ(error_of([] { ScenarioConfig::from_json(Json::array()); }), Errc::InvalidConfig);
}

TEST(Config, EffectiveProviders) {
  auto c = ScenarioConfig::prototype();
  EXPECT_EQ(c.effective_providers(), (std::vector<Domain>{Domain::VWSN1, Domain::VWSN2}));
  c.sensors.resize(1);
  EXPECT_EQ(c.effective_providers(), std::vector<Domain>{Domain::VWSN1});
  c.sensors.clear();
  EXPECT_EQ(c.effective_providers(), (std::vector<Domain>{Domain::VWSN1, Domain::VWSN2}));
}

TEST(Metrics, NearestRankPercentile) {
  std::vector<double> v{10, 1, 9, 2, 8, 3, 7, 4, 6, 5};
  EXPECT_EQ(percentile(v, 50), 5.0);
  EXPECT_EQ(percentile(v, 95), 10.0);
  EXPECT_EQ(percentile(v, 100), 10.0);
  EXPECT_EQ(percentile(v, 10), 1.0);
  EXPECT_FALSE(percentile({}, 50).has_value());
}

TEST(VerifyTrace, AcceptsNominalOrder) { EXPECT_TRUE(verify_trace(nominal_legs()).empty()); }

TEST(VerifyTrace, AckBeforeGiIsCausalViolation) {
  auto ev = nominal_legs();
  std::swap(ev[2], ev[3]);
  EXPECT_TRUE(starts_with(verify_trace(ev), "causal order"));
}

TEST(VerifyTrace, EmitBeforeAckIsCausalViolation) {
  auto ev = nominal_legs();
  ev.insert(ev.begin() + 2, Json{{"t", 5}, {"type", "emit"}, {"domain", "VWSN1"}, {"sensor_id", "A1"}, {"seq", 1}});
  EXPECT_TRUE(starts_with(verify_trace(ev), "causal order"));
}

TEST(VerifyTrace, PcBeforeImpIsStageViolation) {
  auto ev = nominal_legs();
  ev.push_back({{"t", 4000}, {"type", "deliver"}, {"trace_id", "x"}, {"domain", "VWSN1"}, {"stages", "PC1,IMP1"}});
  EXPECT_TRUE(starts_with(verify_trace(ev), "stage order"));
  ev.back()["stages"] = "IMP2,PC2";
  EXPECT_TRUE(starts_with(verify_trace(ev), "stage order"));
  ev.back()["stages"] = "IMP1,PC1";
  EXPECT_TRUE(verify_trace(ev).empty());
}

TEST(VerifyTrace, LifecycleAndCapacityViolations) {
  std::vector<Json> ev{
      {{"t", 0}, {"type", "lifecycle"}, {"instance", "i"}, {"from", "Requested"}, {"event", "InstantiateDone"},
       {"to", "Instantiated"}},
      {{"t", 1}, {"type", "lifecycle"}, {"instance", "i"}, {"from", "Instantiated"}, {"event", "MigrateDone"},
       {"to", "Running"}}};
  EXPECT_TRUE(starts_with(verify_trace(ev), "lifecycle replay"));
  std::vector<Json> cap{{{"t", 0}, {"type", "capacity"}, {"node", "n"}, {"cpu_used", 9}, {"mem_used", 1},
                         {"cpu_cap", 8}, {"mem_cap", 8}}};
  EXPECT_TRUE(starts_with(verify_trace(cap), "capacity conservation"));
  cap[0]["cpu_used"] = 8;
  EXPECT_TRUE(verify_trace(cap).empty());
}

TEST(Scenario, ZeroSensorsHasNoOverhead) {
  auto c = ScenarioConfig::prototype();
  c.sensors.clear();
  c.duration_ms = 0;
  const auto r = run_scenario(c);
  EXPECT_EQ(r.report.delivered, 0u);
  EXPECT_FALSE(r.report.overhead.has_value());
  EXPECT_TRUE(r.report.to_json()["overhead"].is_null());
  EXPECT_GT(r.report.control_messages, 0u);
  EXPECT_NO_THROW(r.require_pass());
}

TEST(Scenario, ShortPrototypeConservesMessages) {
  Scenario s(short_prototype(10000));
  s.run();
  s.stop();
  const auto r = s.report();
  EXPECT_EQ(r.emitted, 80u);
  EXPECT_EQ(r.emitted, r.delivered + r.dropped + r.refused + r.in_flight);
  EXPECT_EQ(r.delivered, 80u);
  EXPECT_EQ(r.in_flight, 0u);
  EXPECT_EQ(r.delivered_by_domain.at("VWSN1"), 60u);
  EXPECT_EQ(r.delivered_by_domain.at("VWSN2"), 20u);
  EXPECT_TRUE(verify_trace(s.trace().events()).empty());

  ASSERT_GT(r.last_delivery, r.first_emit);
  EXPECT_DOUBLE_EQ(r.throughput_msgs_per_s,
                   static_cast<double>(r.delivered) / (static_cast<double>(r.last_delivery - r.first_emit) / 1000.0));
  ASSERT_TRUE(r.overhead.has_value());
  EXPECT_DOUBLE_EQ(*r.overhead, static_cast<double>(r.control_messages) / static_cast<double>(r.delivered));

  std::vector<double> lat;
  for (const auto& d : s.app().deliveries())
    lat.push_back(static_cast<double>(d.arrival) - std::stod(d.meta.at(meta::kEmitTime)));
  const double mean = std::accumulate(lat.begin(), lat.end(), 0.0) / static_cast<double>(lat.size());
  const auto& b = r.breakdown;
  EXPECT_NEAR(b.ingress_ms + b.imp_ms + b.pc_ms + b.egress_ms, mean, 1.0);
  EXPECT_GE(b.ingress_ms, 0.0);
  EXPECT_GE(b.imp_ms, 0.0);
  EXPECT_GE(b.pc_ms, 0.0);
  EXPECT_GE(b.egress_ms, 0.0);
  EXPECT_LE(*r.latency_p50_ms, *r.latency_p95_ms);
  EXPECT_LE(*r.latency_p95_ms, *r.latency_max_ms);
}

TEST(Scenario, SameSeedSameTraceBytes) {
  const auto a = run_scenario(short_prototype(5000));
  const auto b = run_scenario(short_prototype(5000));
  EXPECT_EQ(a.trace_jsonl, b.trace_jsonl);
}

TEST(Scenario, SeedChangesSensorValues) {
  auto body = [](std::uint64_t seed) {
    auto c = short_prototype(3000);
    c.seed = seed;
    Scenario s(c);
    s.run();
    s.stop();
    std::string all;
    for (const auto& d : s.app().deliveries()) all += d.body;
    return all;
  };
  EXPECT_EQ(body(1), body(1));
  EXPECT_NE(body(1), body(2));
}

TEST(Scenario, KillStageCountsDrops) {
  auto c = short_prototype(10000);
  FaultSpec f;
  f.kind = FaultSpec::Kind::KillStage;
  f.domain = Domain::VWSN2;
  f.vnf_type = VnfType::ProtocolConverter2;
  f.at_ms = 9000;
  c.faults.push_back(f);
  Scenario s(c);
  s.run();
  s.stop();
  const auto r = s.report();
  EXPECT_EQ(r.emitted, r.delivered + r.dropped + r.refused + r.in_flight);
  EXPECT_GT(r.delivered_by_domain.at("VWSN2"), 0u);
  EXPECT_LT(r.delivered_by_domain.at("VWSN2"), 20u);
  EXPECT_GT(r.dropped + r.refused, 0u);
  EXPECT_EQ(s.trace().count("fault"), 1u);
  EXPECT_EQ(r.delivered_by_domain.at("VWSN1"), 60u);
}

TEST(Scenario, ElasticityFollowsLoadSteps) {
  Scenario s(ScenarioConfig::elasticity());
  s.run();
  s.stop();
  const auto r = s.report();
  EXPECT_TRUE(verify_trace(s.trace().events()).empty());
  int peak = 0;
  for (Millis t = 30000; t <= 70000; t += 500) peak = std::max(peak, r.running_at("VWSN1", "InfoModelProcessor1", t));
  EXPECT_EQ(peak, 5);
  EXPECT_EQ(r.running_at("VWSN1", "InfoModelProcessor1", 69000), 5);
  EXPECT_EQ(r.running_at("VWSN1", "InfoModelProcessor1", 102000), 1);
  EXPECT_EQ(r.running_at("VWSN1", "InfoModelProcessor1", 25000), 1);
}

TEST(Scenario, SplitProcessesOverLoopbackTcp) {
  auto c = ScenarioConfig::prototype();
  c.clock = ClockMode::Real;
  c.processes = ProcessMode::Split;
  c.duration_ms = 2000;
  c.cost.boot_time_ms = 100;
  for (auto& [t, v] : c.vnfs) v.image_size_bytes = 1'000'000;
  c.sensors.resize(1);
  c.sensors.push_back({SensorBrand::BrandB, "7", {Quantity::Temperature}, CollectionPattern::periodic(1000)});
  const auto r = run_scenario(c);
  EXPECT_NO_THROW(r.require_pass());
  EXPECT_EQ(r.report.sequences.at("VWSN1").status, "complete");
  EXPECT_EQ(r.report.sequences.at("VWSN2").status, "complete");
  EXPECT_EQ(r.report.emitted, 4u);
  EXPECT_EQ(r.report.delivered, 4u);
}
