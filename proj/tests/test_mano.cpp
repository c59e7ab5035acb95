#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "vgw/mano.hpp"

using namespace vgw;
namespace fs = std::filesystem;

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

VnfDescriptor desc(VnfType t, double capacity = 50.0) {
  return {t, "img", 1, 1, 1, 100'000'000, capacity};
}

struct ManoFixture : ::testing::Test {
  fs::path dir = fs::temp_directory_path() / ("vgw-test-mano-" + std::to_string(::getpid()));
  VirtualLoop loop;
  Trace trace;
  ImageStore store{dir};
  DomainImageCaches caches{store};
  NfviNode core{{"core-0", Domain::GatewayProvider, 4, 4}, loop, nullptr};
  NfviNode n0{{"v1-n0", Domain::VWSN1, 2, 2}, loop, &caches};
  NfviNode n1{{"v1-n1", Domain::VWSN1, 8, 8}, loop, &caches};
  DomainMano vwsn1{Domain::VWSN1, loop, {&n1, &n0}, caches, ScalingPolicy{}, &trace};
  LocalDomainPort port{loop};
  CoreMano mano{loop, store, {&core}, MigrationCostModel{}, port, &trace};
  std::string imp1 = store.publish(VnfType::InfoModelProcessor1, 1, to_bytes("imp1"));
  std::string pc1 = store.publish(VnfType::ProtocolConverter1, 1, to_bytes("pc1"));

  ManoFixture() { port.attach(vwsn1); }
  ~ManoFixture() override { fs::remove_all(dir); }

  VnfDescriptor image_desc(VnfType t, const std::string& image) {
    auto d = desc(t);
    d.image_id = image;
    return d;
  }

  MigrationOutcome migrate_and_wait(const std::string& id, Millis& finished) {
    MigrationOutcome got;
    bool done = false;
    mano.migrate(id, Domain::VWSN1, "req-1", [&](MigrationOutcome o) {
      got = std::move(o);
      finished = loop.now();
      done = true;
    });
    loop.run_until(loop.now() + 10000);
    EXPECT_TRUE(done);
    return got;
  }
};

}  // namespace

TEST(CostModel, ColdAndWarmExamples) {
  MigrationCostModel m;
  EXPECT_DOUBLE_EQ(m.cold_cost_ms(100'000'000), 3000.0);
  EXPECT_DOUBLE_EQ(m.warm_cost_ms(), 2000.0);
  EXPECT_EQ(m.delay_ms(100'000'000, CacheResult::Miss), 3000);
  EXPECT_EQ(m.delay_ms(100'000'000, CacheResult::Hit), 2000);
  EXPECT_NO_THROW(m.validate_image(100'000'000));
  m.state_transfer_ms = 1000;
  EXPECT_EQ(error_of([&] { m.validate_image(100'000'000); }), Errc::InvalidConfig);
  m.bandwidth_bytes_per_s = 0;
  EXPECT_EQ(error_of([&] { m.validate(); }), Errc::InvalidConfig);
}

TEST(CostModel, MatchesOracleOverRandomModels) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    MigrationCostModel m{static_cast<std::int64_t>(1 + rng() % 1'000'000'000), static_cast<Millis>(rng() % 10000),
                         static_cast<Millis>(rng() % 5000)};
    const auto size = static_cast<std::int64_t>(rng() % 10'000'000'000LL);
    ASSERT_NEAR(m.cold_cost_ms(size), oracle::cold_ms(size, m.bandwidth_bytes_per_s, m.boot_time_ms), 1e-6);
    ASSERT_NEAR(m.warm_cost_ms(), oracle::warm_ms(m.state_transfer_ms, m.boot_time_ms), 1e-9);
  }
}

TEST(Scaling, DesiredInstancesExamples) {
  ScalingPolicy p;
  const auto d = desc(VnfType::InfoModelProcessor1, 50.0);
  EXPECT_EQ(desired_instances(120, p, d), 3);
  EXPECT_EQ(desired_instances(0, p, d), 1);
  EXPECT_EQ(desired_instances(1e6, p, d), 10);
  EXPECT_EQ(desired_instances(40, p, d), 1);
  EXPECT_EQ(desired_instances(40.5, p, d), 2);
  EXPECT_EQ(error_of([&] { desired_instances(-1, p, d); }), Errc::InvalidArgument);
}

TEST(Scaling, DesiredInstancesMatchesOracle) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> rate(0, 2000), util(0.1, 1.0), cap(1, 200);
  for (int i = 0; i < 20000; ++i) {
    ScalingPolicy p;
    p.util_target = util(rng);
    p.scale_down_threshold = 0.0;
    p.min_instances = 1 + static_cast<int>(rng() % 3);
    p.max_instances = p.min_instances + static_cast<int>(rng() % 20);
    auto d = desc(VnfType::InfoModelProcessor2, cap(rng));
    const double r = rate(rng);
    ASSERT_EQ(desired_instances(r, p, d),
              oracle::desired(r, p.util_target, d.per_instance_capacity, p.min_instances, p.max_instances));
  }
}

TEST(Scaling, PolicyValidation) {
  ScalingPolicy p;
  EXPECT_NO_THROW(p.validate());
  p.scale_down_threshold = 0.9;
  EXPECT_EQ(error_of([&] { p.validate(); }), Errc::InvalidConfig);
  p = {};
  p.min_instances = 0;
  EXPECT_EQ(error_of([&] { p.validate(); }), Errc::InvalidConfig);
}

TEST(Placement, FirstFitExamples) {
  std::vector<NodeFree> nodes{{"n1", {4, 4}}, {"n0", {2, 2}}};
  EXPECT_EQ(first_fit({1, 1}, nodes), "n0");
  EXPECT_EQ(first_fit({3, 1}, nodes), "n1");
  EXPECT_EQ(error_of([&] { first_fit({5, 1}, nodes); }), Errc::NoFeasibleNode);
  EXPECT_EQ(error_of([] { first_fit({1, 1}, {}); }), Errc::NoFeasibleNode);
}

TEST(Placement, SequentialPlacementMatchesOracle) {
  VirtualLoop loop;
  NfviNode a{{"v2-n0", Domain::VWSN2, 2, 2}, loop, nullptr};
  NfviNode b{{"v2-n1", Domain::VWSN2, 8, 8}, loop, nullptr};
  std::vector<std::string> placed;
  for (int i = 0; i < 3; ++i) {
    const auto node = place(desc(VnfType::InfoModelProcessor2), {&b, &a});
    placed.push_back(node);
    (node == "v2-n0" ? a : b).allocate("i" + std::to_string(i), {1, 1});
  }
  EXPECT_EQ(placed, (std::vector<std::string>{"v2-n0", "v2-n0", "v2-n1"}));
  EXPECT_EQ(oracle::first_fit({{2, 2}, {8, 8}}, {{1, 1}, {1, 1}, {1, 1}}), (std::vector<int>{0, 0, 1}));
}

TEST(Placement, FirstFitMatchesBruteForce) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::pair<int, int>> free;
    std::vector<NodeFree> nodes;
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      free.emplace_back(static_cast<int>(rng() % 10), static_cast<int>(rng() % 10));
      nodes.push_back({"n" + std::to_string(i), {free.back().first, free.back().second}});
    }
    std::vector<std::pair<int, int>> reqs;
    for (int k = 0; k < 6; ++k) reqs.emplace_back(1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 4));
    const auto want = oracle::first_fit(free, reqs);
    for (std::size_t k = 0; k < reqs.size(); ++k) {
      const Resources need{reqs[k].first, reqs[k].second};
      if (want[k] < 0) {
        ASSERT_THROW(first_fit(need, nodes), Error);
        continue;
      }
      const auto got = first_fit(need, nodes);
      ASSERT_EQ(got, "n" + std::to_string(want[k]));
      auto& node = nodes[static_cast<std::size_t>(want[k])];
      node.free.cpu_units -= need.cpu_units;
      node.free.mem_units -= need.mem_units;
    }
  }
}

TEST(ScalingDecider, SustainedLoadScalesUp) {
  ScalingDecider d(ScalingPolicy{}, desc(VnfType::InfoModelProcessor1, 50.0));
  for (int i = 0; i < 9; ++i) EXPECT_EQ(d.observe(120, 120, 1, 0), ScalingDecider::Decision{});
  EXPECT_EQ(d.observe(120, 120, 1, 0), (ScalingDecider::Decision{2, 0}));
}

TEST(ScalingDecider, ShortBurstIgnored) {
  ScalingDecider d(ScalingPolicy{}, desc(VnfType::InfoModelProcessor1, 50.0));
  for (int i = 0; i < 30; ++i) {
    const double r = i % 10 == 9 ? 10 : 120;
    EXPECT_EQ(d.observe(r, r, 1, 0), ScalingDecider::Decision{}) << i;
  }
}

TEST(ScalingDecider, HysteresisBandHolds) {
  ScalingDecider d(ScalingPolicy{}, desc(VnfType::InfoModelProcessor1, 50.0));
  for (int i = 0; i < 60; ++i) EXPECT_EQ(d.observe(40, 40, 2, 0), ScalingDecider::Decision{});
}

TEST(ScalingDecider, IdleScalesDownToMinimum) {
  ScalingDecider d(ScalingPolicy{}, desc(VnfType::InfoModelProcessor1, 50.0));
  for (int i = 0; i < 29; ++i) EXPECT_EQ(d.observe(0, 0, 3, 0), ScalingDecider::Decision{});
  EXPECT_EQ(d.observe(0, 0, 3, 0), (ScalingDecider::Decision{0, 2}));
}

TEST(ScalingDecider, PendingCountsTowardCapacity) {
  ScalingDecider d(ScalingPolicy{}, desc(VnfType::InfoModelProcessor1, 50.0));
  for (int i = 0; i < 20; ++i) EXPECT_EQ(d.observe(120, 120, 1, 2), ScalingDecider::Decision{});
}

TEST_F(ManoFixture, InstantiateChecksImageAndCoreCapacity) {
  EXPECT_EQ(error_of([&] { mano.instantiate(desc(VnfType::InfoModelProcessor1)); }), Errc::ImageNotFound);
  auto big = image_desc(VnfType::InfoModelProcessor1, imp1);
  big.cpu_units = 5;
  EXPECT_EQ(error_of([&] { mano.instantiate(big); }), Errc::CoreCapacityExhausted);
  const auto inst = mano.instantiate(image_desc(VnfType::InfoModelProcessor1, imp1));
  EXPECT_EQ(inst.state, LifecycleState::Instantiated);
  EXPECT_EQ(inst.location->domain, Domain::GatewayProvider);
  EXPECT_EQ(core.free(), (Resources{3, 3}));
}

TEST_F(ManoFixture, ColdThenWarmMigration) {
  const auto a = mano.instantiate(image_desc(VnfType::InfoModelProcessor1, imp1));
  const auto b = mano.instantiate(image_desc(VnfType::InfoModelProcessor1, imp1));
  Millis t0 = loop.now(), t1 = 0;
  auto out = migrate_and_wait(a.instance_id, t1);
  ASSERT_TRUE(out.ready) << out.reason;
  EXPECT_EQ(t1 - t0, 3000);
  EXPECT_EQ(out.location->node_id, "v1-n0");
  EXPECT_EQ(vwsn1.instance(a.instance_id)->state, LifecycleState::Running);
  EXPECT_EQ(mano.instance(a.instance_id)->state, LifecycleState::Running);

  t0 = loop.now();
  out = migrate_and_wait(b.instance_id, t1);
  ASSERT_TRUE(out.ready);
  EXPECT_EQ(t1 - t0, 2000);
  EXPECT_EQ(core.free(), (Resources{4, 4}));

  std::vector<Millis> delays;
  for (const auto& e : trace.events()) {
    if (e["type"] == "migration") delays.push_back(e["delay_ms"].get<Millis>());
  }
  EXPECT_EQ(delays, (std::vector<Millis>{3000, 2000}));

  auto log = mano.audit();
  const auto dom = vwsn1.audit();
  log.insert(log.end(), dom.begin(), dom.end());
  EXPECT_EQ(audit_divergences(log), 0u);
}

TEST_F(ManoFixture, MigratingRunningInstanceIsIllegal) {
  const auto a = mano.instantiate(image_desc(VnfType::ProtocolConverter1, pc1));
  Millis t = 0;
  ASSERT_TRUE(migrate_and_wait(a.instance_id, t).ready);
  EXPECT_EQ(error_of([&] { mano.migrate(a.instance_id, Domain::VWSN1, "r", nullptr); }), Errc::IllegalTransition);
  EXPECT_EQ(error_of([&] { mano.migrate("nope", Domain::VWSN1, "r", nullptr); }), Errc::NotFound);
  EXPECT_EQ(error_of([&] { mano.migrate(a.instance_id, Domain::Application, "r", nullptr); }), Errc::NotVwsnDomain);
}

TEST_F(ManoFixture, TransferFaultFailsInstanceAndReleasesEverything) {
  const auto a = mano.instantiate(image_desc(VnfType::InfoModelProcessor1, imp1));
  mano.inject_transfer_faults(Domain::VWSN1, 1);
  Millis t = 0;
  const auto out = migrate_and_wait(a.instance_id, t);
  EXPECT_FALSE(out.ready);
  EXPECT_EQ(out.reason, "TransferFault");
  EXPECT_EQ(mano.instance(a.instance_id)->state, LifecycleState::Failed);
  EXPECT_EQ(core.free(), (Resources{4, 4}));
  EXPECT_EQ(n0.free(), (Resources{2, 2}));
  EXPECT_FALSE(vwsn1.instance(a.instance_id).has_value());
  EXPECT_EQ(audit_divergences(mano.audit()), 0u);
}

TEST_F(ManoFixture, NoFeasibleNodeLeavesInstanceInstantiated) {
  auto big = image_desc(VnfType::InfoModelProcessor1, imp1);
  big.cpu_units = 4;
  big.mem_units = 4;
  n1.allocate("filler", {6, 6});
  const auto a = mano.instantiate(big);
  Millis t = 0;
  const auto out = migrate_and_wait(a.instance_id, t);
  EXPECT_FALSE(out.ready);
  EXPECT_EQ(out.reason, "NoFeasibleNode");
  EXPECT_EQ(mano.instance(a.instance_id)->state, LifecycleState::Instantiated);
}

TEST_F(ManoFixture, ProvisionReusesParkedInstances) {
  const auto parked = mano.instantiate(image_desc(VnfType::InfoModelProcessor1, imp1));
  std::vector<MigrationOutcome> outs;
  mano.provision("req-2", Domain::VWSN1,
                 {image_desc(VnfType::InfoModelProcessor1, imp1), image_desc(VnfType::ProtocolConverter1, pc1)},
                 [&](std::vector<MigrationOutcome> o) { outs = std::move(o); });
  loop.run_until(loop.now() + 10000);
  ASSERT_EQ(outs.size(), 2u);
  EXPECT_EQ(outs[0].instance_id, parked.instance_id);
  EXPECT_EQ(outs[0].vnf_type, VnfType::InfoModelProcessor1);
  EXPECT_EQ(outs[1].vnf_type, VnfType::ProtocolConverter1);
  EXPECT_TRUE(outs[0].ready && outs[1].ready);
  EXPECT_EQ(mano.instances().size(), 2u);
  EXPECT_EQ(error_of([&] { mano.provision("r", Domain::VWSN1, {desc(VnfType::InfoModelProcessor1)}, nullptr); }),
            Errc::ImageNotFound);
}

TEST_F(ManoFixture, DomainTerminateAndUpdate) {
  const auto a = mano.instantiate(image_desc(VnfType::ProtocolConverter1, pc1));
  Millis t = 0;
  ASSERT_TRUE(migrate_and_wait(a.instance_id, t).ready);
  vwsn1.update(a.instance_id, {"http://app:9000/other"});
  EXPECT_EQ(vwsn1.handle(a.instance_id)->config().target_url, "http://app:9000/other");
  EXPECT_EQ(vwsn1.instance(a.instance_id)->state, LifecycleState::Running);
  const auto h = vwsn1.handle(a.instance_id);
  vwsn1.terminate(a.instance_id);
  EXPECT_EQ(vwsn1.instance(a.instance_id)->state, LifecycleState::Terminated);
  EXPECT_TRUE(h->stopped());
  EXPECT_EQ(n0.free(), (Resources{2, 2}));
  EXPECT_EQ(error_of([&] { vwsn1.terminate(a.instance_id); }), Errc::IllegalTransition);
  EXPECT_EQ(error_of([&] { vwsn1.update(a.instance_id, {}); }), Errc::IllegalTransition);
  EXPECT_EQ(error_of([&] { vwsn1.terminate("nope"); }), Errc::NotFound);
  auto log = mano.audit();
  const auto dom = vwsn1.audit();
  log.insert(log.end(), dom.begin(), dom.end());
  EXPECT_EQ(audit_divergences(log), 0u);
  EXPECT_EQ(dom.back().to, LifecycleState::Terminated);
}

TEST_F(ManoFixture, ReconcileScalesIdlePoolDown) {
  vwsn1.register_service("svc", {image_desc(VnfType::InfoModelProcessor1, imp1)});
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) {
    const auto a = mano.instantiate(image_desc(VnfType::InfoModelProcessor1, imp1));
    Millis t = 0;
    ASSERT_TRUE(migrate_and_wait(a.instance_id, t).ready);
    vwsn1.add_to_pool("svc", a.instance_id);
    ids.push_back(a.instance_id);
  }
  EXPECT_EQ(vwsn1.pool("svc", VnfType::InfoModelProcessor1).size(), 3u);
  std::vector<ScaleAction> actions;
  for (int i = 0; i < 30 && actions.empty(); ++i) {
    loop.run_until(loop.now() + 1000);
    actions = vwsn1.reconcile();
  }
  ASSERT_EQ(actions.size(), 2u);
  EXPECT_EQ(actions[0].kind, ScaleAction::Kind::Terminate);
  EXPECT_EQ(vwsn1.pool("svc", VnfType::InfoModelProcessor1), std::vector<std::string>{ids[0]});
  EXPECT_EQ(trace.count("scale"), 1u);
}

TEST_F(ManoFixture, RpcErrors) {
  EXPECT_EQ(error_of([&] { vwsn1.handle_rpc("bogus", Json::object()); }), Errc::NotFound);
  EXPECT_EQ(error_of([&] { vwsn1.handle_rpc("release", Json{{"allocation_id", "x"}}); }), Errc::UnknownAllocation);
  EXPECT_EQ(error_of([&] { DomainMano m(Domain::GatewayProvider, loop, {}, caches, ScalingPolicy{}); }),
            Errc::NotVwsnDomain);
}

TEST(Audit, DetectsDivergence) {
  std::vector<AuditEntry> log{
      {"i", Domain::GatewayProvider, LifecycleState::Requested, LifecycleEvent::InstantiateDone,
       LifecycleState::Instantiated},
      {"i", Domain::GatewayProvider, LifecycleState::Instantiated, LifecycleEvent::MigrateCmd,
       LifecycleState::Migrating}};
  EXPECT_EQ(audit_divergences(log), 0u);
  log.push_back({"i", Domain::VWSN1, LifecycleState::Running, LifecycleEvent::UpdateCmd, LifecycleState::Running});
  EXPECT_EQ(audit_divergences(log), 1u);
  log.push_back({"j", Domain::VWSN1, LifecycleState::Requested, LifecycleEvent::MigrateCmd, LifecycleState::Running});
  EXPECT_EQ(audit_divergences(log), 2u);
}

TEST(DescriptorJson, RoundTrip) {
  VnfDescriptor d{VnfType::ProtocolConverter2, "abc", 3, 2, 4, 123456, 75.5};
  EXPECT_EQ(descriptor_from_json(to_json(d)), d);
}
