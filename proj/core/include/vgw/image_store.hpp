#pragma once

// Central content-addressed VNF image registry (gateway provider) and the
// per-VWSN-domain image caches used to decide cold vs warm migration.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "vgw/codec.hpp"
#include "vgw/model.hpp"

namespace vgw {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256 of `content`.
Digest sha256(std::span<const std::uint8_t> content);

struct VnfImage {
  std::string image_id;
  VnfType vnf_type = VnfType::InfoModelProcessor1;
  int version = 0;
  std::int64_t size_bytes = 0;
  Digest digest{};

  friend bool operator==(const VnfImage&, const VnfImage&) = default;
};

/// The image id is the hex SHA-256 of the content, so ids survive restarts
/// and equal content always maps to the same id.
std::string image_id_for(std::span<const std::uint8_t> content);

/// On disk: <root>/images/<image_id> blobs plus <root>/index.json.
class ImageStore {
 public:
  explicit ImageStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Throws DuplicateVersion when (vnf_type, version) is taken and
  /// DuplicateContent when identical bytes are already published.
  std::string publish(VnfType vnf_type, int version, std::span<const std::uint8_t> content);

  struct Fetched {
    VnfImage image;
    Bytes content;
  };
  /// Throws NotFound, or IntegrityError when the blob no longer matches its digest.
  Fetched fetch(const std::string& image_id) const;

  std::optional<VnfImage> find(const std::string& image_id) const;
  std::optional<VnfImage> find(VnfType vnf_type, int version) const;
  bool contains(const std::string& image_id) const;
  std::vector<VnfImage> list() const;

 private:
  void load_index();
  void write_index() const;
  std::filesystem::path blob_path(const std::string& image_id) const;

  std::filesystem::path root_;
  mutable std::shared_mutex mu_;
  std::map<std::string, VnfImage> images_;
};

enum class CacheResult { Hit, Miss };

/// Image caches of the two VWSN domains. Entries must name images known to
/// the central store.
class DomainImageCaches {
 public:
  explicit DomainImageCaches(const ImageStore& store) : store_(store) {}

  /// Throws NotVwsnDomain.
  CacheResult check(Domain domain, const std::string& image_id) const;
  /// Idempotent. Throws NotVwsnDomain, or NotFound for ids the store does not know.
  void insert(Domain domain, const std::string& image_id);
  std::set<std::string> entries(Domain domain) const;

 private:
  const ImageStore& store_;
  mutable std::mutex mu_;
  std::map<Domain, std::set<std::string>> entries_;
};

/// JSON manifest used as image content for the built-in VNFs.
std::string vnf_manifest(VnfType vnf_type, int version);

}  // namespace vgw
