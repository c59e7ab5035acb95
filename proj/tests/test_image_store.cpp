#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "vgw/image_store.hpp"

using namespace vgw;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int n = 0;
    path_ = fs::temp_directory_path() / ("vgw-test-store-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Errc error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::InvalidArgument;
}

}  // namespace

TEST(Sha256, KnownVector) {
  EXPECT_EQ(to_hex(sha256(to_bytes("abc"))), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ImageStore, PublishAndFetch) {
  TempDir dir;
  ImageStore store(dir.path());
  const auto content = to_bytes(vnf_manifest(VnfType::InfoModelProcessor1, 1));
  const auto id = store.publish(VnfType::InfoModelProcessor1, 1, content);
  EXPECT_EQ(id, image_id_for(content));
  const auto got = store.fetch(id);
  EXPECT_EQ(got.content, content);
  EXPECT_EQ(got.image.vnf_type, VnfType::InfoModelProcessor1);
  EXPECT_EQ(got.image.size_bytes, static_cast<std::int64_t>(content.size()));
  EXPECT_EQ(store.find(VnfType::InfoModelProcessor1, 1)->image_id, id);
  EXPECT_FALSE(store.find(VnfType::InfoModelProcessor1, 2).has_value());
}

TEST(ImageStore, Errors) {
  TempDir dir;
  ImageStore store(dir.path());
  store.publish(VnfType::ProtocolConverter1, 1, to_bytes("one"));
  EXPECT_EQ(error_of([&] { store.publish(VnfType::ProtocolConverter1, 1, to_bytes("two")); }),
            Errc::DuplicateVersion);
  EXPECT_EQ(error_of([&] { store.publish(VnfType::ProtocolConverter1, 2, to_bytes("one")); }),
            Errc::DuplicateContent);
  EXPECT_EQ(error_of([&] { store.fetch(std::string(64, '0')); }), Errc::NotFound);
  EXPECT_EQ(store.list().size(), 1u);
}

TEST(ImageStore, TamperedBlobFailsIntegrity) {
  TempDir dir;
  ImageStore store(dir.path());
  const auto id = store.publish(VnfType::ProtocolConverter2, 1, to_bytes("payload-bytes"));
  {
    std::fstream f(dir.path() / "images" / id, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  EXPECT_EQ(error_of([&] { store.fetch(id); }), Errc::IntegrityError);
}

TEST(ImageStore, SurvivesRestart) {
  TempDir dir;
  std::vector<std::string> ids;
  {
    ImageStore store(dir.path());
    for (auto t : kAllVnfTypes) ids.push_back(store.publish(t, 3, to_bytes(vnf_manifest(t, 3))));
  }
  ImageStore again(dir.path());
  ASSERT_EQ(again.list().size(), ids.size());
  for (const auto& id : ids) EXPECT_EQ(again.fetch(id).image.image_id, id);
  EXPECT_EQ(error_of([&] { again.publish(VnfType::InfoModelProcessor2, 3, to_bytes("new")); }),
            Errc::DuplicateVersion);
}

TEST(ImageStore, ContentAddressingProperty) {
  TempDir dir;
  ImageStore store(dir.path());
  std::mt19937_64 rng(9);
  std::set<std::string> seen;
  for (int v = 1; v <= 50; ++v) {
    Bytes content(1 + rng() % 200);
    for (auto& b : content) b = static_cast<std::uint8_t>(rng());
    const auto id = store.publish(VnfType::InfoModelProcessor2, v, content);
    ASSERT_EQ(id, to_hex(sha256(content)));
    ASSERT_EQ(id.size(), 64u);
    ASSERT_TRUE(seen.insert(id).second);
    ASSERT_EQ(store.fetch(id).content, content);
  }
}

TEST(DomainCaches, MissThenHitPerDomain) {
  TempDir dir;
  ImageStore store(dir.path());
  DomainImageCaches caches(store);
  const auto id = store.publish(VnfType::InfoModelProcessor1, 1, to_bytes("imp1"));
  EXPECT_EQ(caches.check(Domain::VWSN1, id), CacheResult::Miss);
  caches.insert(Domain::VWSN1, id);
  caches.insert(Domain::VWSN1, id);
  EXPECT_EQ(caches.check(Domain::VWSN1, id), CacheResult::Hit);
  EXPECT_EQ(caches.check(Domain::VWSN2, id), CacheResult::Miss);
  EXPECT_EQ(caches.entries(Domain::VWSN1).size(), 1u);
  EXPECT_TRUE(caches.entries(Domain::VWSN2).empty());
}

TEST(DomainCaches, Errors) {
  TempDir dir;
  ImageStore store(dir.path());
  DomainImageCaches caches(store);
  const auto id = store.publish(VnfType::InfoModelProcessor1, 1, to_bytes("imp1"));
  EXPECT_EQ(error_of([&] { caches.check(Domain::GatewayProvider, id); }), Errc::NotVwsnDomain);
  EXPECT_EQ(error_of([&] { caches.insert(Domain::Application, id); }), Errc::NotVwsnDomain);
  EXPECT_EQ(error_of([&] { caches.insert(Domain::VWSN2, "unknown"); }), Errc::NotFound);
}
