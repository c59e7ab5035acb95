#include <benchmark/benchmark.h>

#include "vgw/codec.hpp"

using namespace vgw;

static void BM_BrandADecode(benchmark::State& state) {
  const auto frame = encode_brand_a({"A1", SensorBrand::BrandA, Quantity::Temperature, 23.5, 1700000000000});
  for (auto _ : state) benchmark::DoNotOptimize(decode_brand_a(frame));
}
BENCHMARK(BM_BrandADecode);

static void BM_BrandBDecodeConvert(benchmark::State& state) {
  const auto frame = encode_brand_b({7, kBrandBHumidity, 1500, 1700000000});
  for (auto _ : state) {
    const auto r = decode_brand_b(frame);
    benchmark::DoNotOptimize(convert_brand_b(r.raw_adc, r.sensor_code));
  }
}
BENCHMARK(BM_BrandBDecodeConvert);

static void BM_CoapLiteRoundTrip(benchmark::State& state) {
  CoapLiteMessage m{CoapType::NON, kCoapPost, 1, Bytes(static_cast<std::size_t>(state.range(0)), 0x5a)};
  for (auto _ : state) benchmark::DoNotOptimize(decode_coaplite(encode_coaplite(m)));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CoapLiteRoundTrip)->Arg(16)->Arg(256)->Arg(1024);

static void BM_SenmlEncode(benchmark::State& state) {
  SensorReading r{"A1", SensorBrand::BrandA, Quantity::CO2, 412.0, 1700000000000};
  for (auto _ : state) benchmark::DoNotOptimize(encode_senml(std::span(&r, 1)));
}
BENCHMARK(BM_SenmlEncode);

static void BM_HttpFrame(benchmark::State& state) {
  const std::string body(200, 'x');
  for (auto _ : state)
    benchmark::DoNotOptimize(frame_http_post("http://app:9000/measurements", "application/senml+json", body));
}
BENCHMARK(BM_HttpFrame);
