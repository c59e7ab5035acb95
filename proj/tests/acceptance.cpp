// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "vgw/harness.hpp"

using namespace vgw;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

// 1. prototype shape
Outcome prototype_shape() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const auto r = run_scenario(ScenarioConfig::prototype());
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& m = r.report;
  auto by = [&](const char* d) { return m.delivered_by_domain.count(d) ? m.delivered_by_domain.at(d) : 0; };
  o.check(by("VWSN1") == 360, "BrandA delivered " + std::to_string(by("VWSN1")) + " != 360");
  o.check(by("VWSN2") == 120, "BrandB delivered " + std::to_string(by("VWSN2")) + " != 120");
  o.check(m.delivered == 480 && m.emitted == 480 && m.lost == 0, "total " + std::to_string(m.delivered) + "/480");
  o.check(m.invalid_deliveries == 0, std::to_string(m.invalid_deliveries) + " invalid SenML deliveries");
  o.check(m.duplicate_deliveries == 0, "duplicate deliveries");
  for (const auto& v : r.violations) {
    if (v.rfind("stage order", 0) == 0) {
      o.check(false, v);
      break;
    }
  }
  o.check(wall < 10.0, "wall time " + fmt(wall) + " s");
  o.detail = o.pass ? "360 BrandA + 120 BrandB delivered, all valid SenML, [IMP,PC] order, wall " + fmt(wall) + " s"
                    : o.detail;
  return o;
}

// 2. control sequence per provider
Outcome control_sequence() {
  Outcome o;
  const auto r = initiation_sequence(ScenarioConfig::prototype(), {Domain::VWSN1, Domain::VWSN2});
  std::map<std::string, std::vector<std::pair<std::string, Millis>>> legs;
  std::map<std::string, int> kinds;
  for (const auto& e : r.trace) {
    if (e.value("type", "") != "control" || e.value("dup", false) || e.value("purpose", "") != "service") continue;
    legs[e["provider"].get<std::string>()].emplace_back(e["kind"].get<std::string>(), e["t"].get<Millis>());
    ++kinds[e["kind"].get<std::string>()];
  }
  const std::vector<std::string> want{"rq-s", "rq-g", "g-i", "ack"};
  for (const char* p : {"VWSN1", "VWSN2"}) {
    std::vector<std::string> seen;
    Millis last = -1;
    for (const auto& [k, t] : legs[p]) {
      seen.push_back(k);
      o.check(t > last, std::string(p) + " " + k + " not strictly after previous leg");
      last = t;
    }
    o.check(seen == want, std::string(p) + " legs out of order");
  }
  for (const auto& k : want) o.check(kinds[k] == 2, k + " seen " + std::to_string(kinds[k]) + " times");
  const auto v = verify_trace(r.trace);
  o.check(v.empty(), v.empty() ? "" : v.front());
  if (o.pass) o.detail = "Rq-S < Rq-G < G-I < ACK for both providers, 2 of each kind, verify_trace clean";
  return o;
}

// 3. migration cost ordering
Outcome migration_cost() {
  Outcome o;
  auto c = ScenarioConfig::prototype();
  c.sensors.clear();
  c.duration_ms = 0;
  c.providers = {Domain::VWSN1};
  Scenario s(c);
  s.boot();
  auto req = [](const std::string& id) {
    return ServiceRequest{id, base_url(Domain::Application), {Quantity::Temperature}, CollectionPattern::once()};
  };
  s.app().request_service(Domain::VWSN1, req("svc-cold"));
  s.advance_to(s.now() + 20000);
  s.app().request_service(Domain::VWSN1, req("svc-warm"));
  s.advance_to(s.now() + 20000);
  std::vector<std::pair<std::string, Millis>> mig;
  for (const auto& e : s.trace().events()) {
    if (e.value("type", "") == "migration") mig.emplace_back(e["cache"].get<std::string>(), e["delay_ms"].get<Millis>());
  }
  s.stop();
  o.check(mig.size() == 4, std::to_string(mig.size()) + " migrations recorded");
  if (mig.size() == 4) {
    for (int i = 0; i < 2; ++i) {
      o.check(mig[i].first == "miss" && std::llabs(mig[i].second - 3000) <= 1,
              "cold migration " + mig[i].first + " " + std::to_string(mig[i].second) + " ms");
      o.check(mig[2 + i].first == "hit" && std::llabs(mig[2 + i].second - 2000) <= 1,
              "warm migration " + mig[2 + i].first + " " + std::to_string(mig[2 + i].second) + " ms");
    }
  }
  std::mt19937_64 rng(2024);
  int held = 0;
  for (int i = 0; i < 100;) {
    MigrationCostModel m{static_cast<std::int64_t>(1'000'000 + rng() % 1'000'000'000),
                         static_cast<Millis>(rng() % 5000), static_cast<Millis>(rng() % 3000)};
    const auto size = static_cast<std::int64_t>(1 + rng() % 5'000'000'000LL);
    if (!(oracle::warm_ms(m.state_transfer_ms, m.boot_time_ms) <
          oracle::cold_ms(size, m.bandwidth_bytes_per_s, m.boot_time_ms)))
      continue;
    ++i;
    try {
      m.validate_image(size);
      if (m.delay_ms(size, CacheResult::Hit) <= m.delay_ms(size, CacheResult::Miss) &&
          m.warm_cost_ms() < m.cold_cost_ms(size))
        ++held;
    } catch (const Error&) {
    }
  }
  o.check(held == 100, "warm < cold held for " + std::to_string(held) + "/100 models");
  if (o.pass) o.detail = "cold 3000 ms, warm 2000 ms from trace; warm < cold for 100/100 random models";
  return o;
}

// 4. elasticity
Outcome elasticity() {
  Outcome o;
  const auto cfg = ScenarioConfig::elasticity();
  const auto r = run_scenario(cfg);
  const auto& m = r.report;
  const Millis high_start = cfg.load->steps[1].at_ms;
  const Millis step_down = cfg.load->steps[2].at_ms;
  const Millis deadline =
      step_down + static_cast<Millis>(cfg.scaling.down_window_s) * 1000 + 2 * cfg.scaling.reconcile_period_ms;
  const int expected = static_cast<int>(std::ceil(200.0 / (cfg.scaling.util_target * 50.0)));
  for (const char* type : {"InfoModelProcessor1", "ProtocolConverter1"}) {
    int peak = 0;
    for (Millis t = high_start; t <= step_down; t += 100) peak = std::max(peak, m.running_at("VWSN1", type, t));
    const int plateau = m.running_at("VWSN1", type, step_down);
    o.check(peak == expected && plateau == expected,
            std::string(type) + " plateau " + std::to_string(plateau) + " peak " + std::to_string(peak));
    Millis back = -1;
    for (Millis t = step_down; t <= cfg.load->end_ms; t += 100) {
      if (m.running_at("VWSN1", type, t) == 1) {
        back = t;
        break;
      }
    }
    o.check(back >= 0 && back <= deadline, std::string(type) + " back to 1 at " + std::to_string(back));
  }
  for (const auto& v : r.violations) {
    if (v.rfind("capacity", 0) == 0 || v.rfind("lifecycle", 0) == 0) {
      o.check(false, v);
      break;
    }
  }
  if (o.pass)
    o.detail = "plateau " + std::to_string(expected) + ", back to 1 within " +
               std::to_string((deadline - step_down) / 1000) + " s of step down, capacity held";
  return o;
}

// 5. codec suite
Outcome codecs() {
  Outcome o;
  std::mt19937_64 rng(55);
  int fails = 0;
  for (int i = 0; i < 10000; ++i) {
    SensorReading r{"S" + std::to_string(rng() % 1000), SensorBrand::BrandA, kAllQuantities[rng() % 5],
                    static_cast<double>(static_cast<std::int64_t>(rng() % 2'000'001) - 1'000'000) / 100.0,
                    static_cast<Millis>(rng() % 4'000'000'000'000ULL)};
    try {
      if (!(decode_brand_a(encode_brand_a(r)) == r)) ++fails;
    } catch (const Error&) {
      ++fails;
    }
  }
  o.check(fails == 0, "BrandA round trip failures " + std::to_string(fails));
  fails = 0;
  for (int i = 0; i < 10000; ++i) {
    BrandBRecord r{static_cast<std::uint16_t>(rng()), static_cast<std::uint8_t>(1 + rng() % 2),
                   static_cast<std::uint16_t>(rng()), static_cast<std::uint32_t>(rng())};
    try {
      const auto f = encode_brand_b(r);
      if (f != oracle::brand_b_frame(r.sensor_id, r.sensor_code, r.raw_adc, r.epoch_s) || !(decode_brand_b(f) == r))
        ++fails;
    } catch (const Error&) {
      ++fails;
    }
  }
  o.check(fails == 0, "BrandB round trip failures " + std::to_string(fails));
  fails = 0;
  for (int i = 0; i < 10000; ++i) {
    CoapLiteMessage m{static_cast<CoapType>(rng() % 3), static_cast<std::uint8_t>(rng()),
                      static_cast<std::uint16_t>(rng()), {}};
    m.payload.resize(rng() % 128);
    for (auto& b : m.payload) b = static_cast<std::uint8_t>(rng());
    try {
      if (!(decode_coaplite(encode_coaplite(m)) == m)) ++fails;
    } catch (const Error&) {
      ++fails;
    }
  }
  o.check(fails == 0, "CoAP-lite round trip failures " + std::to_string(fails));
  int detected = 0;
  for (int i = 0; i < 10000; ++i) {
    auto f = oracle::brand_b_frame(static_cast<std::uint16_t>(rng()), static_cast<std::uint8_t>(1 + rng() % 2),
                                   static_cast<std::uint16_t>(rng()), static_cast<std::uint32_t>(rng()));
    const auto bit = rng() % 80;
    f[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    try {
      decode_brand_b(f);
    } catch (const Error&) {
      ++detected;
    }
  }
  o.check(detected == 10000, "corruption detected " + std::to_string(detected) + "/10000");
  double worst = 0.0;
  for (std::uint32_t raw = 0; raw <= 0xFFFF; ++raw) {
    const auto r = static_cast<std::uint16_t>(raw);
    worst = std::max(worst, std::abs(convert_brand_b(r, kBrandBTemperature) - oracle::temperature(r)));
    worst = std::max(worst, std::abs(convert_brand_b(r, kBrandBHumidity) - oracle::humidity(r)));
  }
  o.check(worst <= 1e-9, "conversion max error " + fmt(worst));
  if (o.pass)
    o.detail = "3 x 10^4 round trips, 10^4/10^4 bit flips detected, conversion max error " + fmt(worst);
  return o;
}

// 6. lifecycle
Outcome lifecycle() {
  Outcome o;
  int mismatches = 0;
  int legal = 0;
  for (auto s : kAllLifecycleStates) {
    for (auto e : kAllLifecycleEvents) {
      std::string want;
      for (const auto& [fs, fe, ft] : oracle::lifecycle_table()) {
        if (fs == to_string(s) && fe == to_string(e)) want = ft;
      }
      std::string got;
      try {
        got = std::string(to_string(lifecycle_next(s, e)));
      } catch (const Error& err) {
        if (err.code() != Errc::IllegalTransition) ++mismatches;
      }
      if (got != want) ++mismatches;
      if (!want.empty()) ++legal;
    }
  }
  o.check(mismatches == 0, std::to_string(mismatches) + " table cells differ");
  std::mt19937_64 rng(66);
  int escapes = 0;
  for (int n = 0; n < 100000; ++n) {
    auto s = LifecycleState::Requested;
    const int len = 1 + static_cast<int>(rng() % 20);
    for (int k = 0; k < len; ++k) {
      const auto e = kAllLifecycleEvents[rng() % kAllLifecycleEvents.size()];
      try {
        const auto next = lifecycle_next(s, e);
        if (is_absorbing(s)) ++escapes;
        bool tabulated = false;
        for (const auto& [fs, fe, ft] : oracle::lifecycle_table()) {
          if (fs == to_string(s) && fe == to_string(e) && ft == to_string(next)) tabulated = true;
        }
        if (!tabulated) ++escapes;
        s = next;
      } catch (const Error&) {
      }
    }
  }
  o.check(escapes == 0, std::to_string(escapes) + " illegal steps in fuzzing");
  if (o.pass)
    o.detail = "36 cells match (" + std::to_string(legal) + " legal), 10^5 random sequences stay in the table";
  return o;
}

// 7. determinism
Outcome determinism() {
  Outcome o;
  const auto a = run_scenario(ScenarioConfig::prototype());
  const auto b = run_scenario(ScenarioConfig::prototype());
  o.check(!a.trace_jsonl.empty(), "empty trace");
  o.check(a.trace_jsonl == b.trace_jsonl, "traces differ");
  if (o.pass) o.detail = "two seeded runs, " + std::to_string(a.trace_jsonl.size()) + " identical trace bytes";
  return o;
}

// 8. idempotency
Outcome idempotency() {
  Outcome o;
  auto cfg = ScenarioConfig::prototype();
  cfg.duration_ms = 10000;
  Scenario s(cfg);
  s.run();
  const auto before = s.snapshot();
  const auto replayed = s.traffic().control_entries().size();
  const auto core_before = s.core_mano().instances().size();
  s.replay_control();
  const auto after = s.snapshot();
  o.check(before == after, "snapshot changed");
  o.check(s.core_mano().instances().size() == core_before, "new instances after replay");
  for (auto d : {Domain::VWSN1, Domain::VWSN2}) {
    const auto c = s.provider(d).counters();
    o.check(c.acks_sent == 1, std::string(to_string(d)) + " sent " + std::to_string(c.acks_sent) + " ACKs");
  }
  const auto gi = after.state["gateway"]["gi_sent"].get<std::size_t>();
  o.check(gi == before.state["gateway"]["gi_sent"].get<std::size_t>(), "extra G-I");
  s.stop();
  if (o.pass)
    o.detail = std::to_string(replayed) + " control messages replayed, no state change, no extra ACK/G-I/instance";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 prototype shape", prototype_shape}, {"2 control sequence", control_sequence},
      {"3 migration cost", migration_cost},   {"4 elasticity", elasticity},
      {"5 codec suite", codecs},              {"6 lifecycle", lifecycle},
      {"7 determinism", determinism},         {"8 idempotency", idempotency},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
