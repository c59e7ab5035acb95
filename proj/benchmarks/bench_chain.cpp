#include <benchmark/benchmark.h>

#include "vgw/vnf.hpp"

using namespace vgw;

namespace {

ServiceChain chain(Domain d) {
  ServiceChain c{"bench", d, {}};
  for (auto t : {info_model_processor_for(d), protocol_converter_for(d)}) {
    VnfInstance i;
    i.instance_id = std::string(stage_tag(t));
    i.descriptor.vnf_type = t;
    i.state = LifecycleState::Running;
    c.stages.push_back(i);
  }
  return c;
}

}  // namespace

static void BM_ChainVwsn1(benchmark::State& state) {
  const auto c = chain(Domain::VWSN1);
  const auto frame = encode_brand_a({"A1", SensorBrand::BrandA, Quantity::Temperature, 23.5, 1700000000000});
  const VnfConfig cfg{"http://app/measurements"};
  for (auto _ : state) {
    VnfMessage m;
    m.payload = frame;
    benchmark::DoNotOptimize(chain_execute(c, std::move(m), cfg));
  }
}
BENCHMARK(BM_ChainVwsn1);

static void BM_ChainVwsn2(benchmark::State& state) {
  const auto c = chain(Domain::VWSN2);
  const auto frame = encode_brand_b({7, kBrandBTemperature, 6000, 1700000000});
  const VnfConfig cfg{"http://app/measurements"};
  for (auto _ : state) {
    VnfMessage m;
    m.payload = frame;
    benchmark::DoNotOptimize(chain_execute(c, std::move(m), cfg));
  }
}
BENCHMARK(BM_ChainVwsn2);
