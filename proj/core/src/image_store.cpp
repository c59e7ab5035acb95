#include "vgw/image_store.hpp"

#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace vgw {

namespace fs = std::filesystem;

Digest sha256(std::span<const std::uint8_t> content) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(content.data(), content.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
    throw Error(Errc::IntegrityError, "SHA-256 computation failed");
  return out;
}

std::string image_id_for(std::span<const std::uint8_t> content) { return to_hex(sha256(content)); }

ImageStore::ImageStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "images");
  load_index();
}

fs::path ImageStore::blob_path(const std::string& image_id) const { return root_ / "images" / image_id; }

void ImageStore::load_index() {
  const auto path = root_ / "index.json";
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  auto index = nlohmann::json::parse(in, nullptr, false);
  if (index.is_discarded() || !index.contains("images"))
    throw Error(Errc::IntegrityError, "unreadable image index " + path.string());
  for (const auto& j : index["images"]) {
    VnfImage img;
    img.image_id = j.at("image_id").get<std::string>();
    img.vnf_type = vnf_type_from_string(j.at("vnf_type").get<std::string>());
    img.version = j.at("version").get<int>();
    img.size_bytes = j.at("size_bytes").get<std::int64_t>();
    auto digest = from_hex(j.at("digest").get<std::string>());
    if (digest.size() != img.digest.size()) throw Error(Errc::IntegrityError, "bad digest in index");
    std::copy(digest.begin(), digest.end(), img.digest.begin());
    images_.emplace(img.image_id, img);
  }
}

void ImageStore::write_index() const {
  nlohmann::json index;
  index["images"] = nlohmann::json::array();
  for (const auto& [id, img] : images_) {
    index["images"].push_back({{"image_id", id},
                               {"vnf_type", std::string(to_string(img.vnf_type))},
                               {"version", img.version},
                               {"size_bytes", img.size_bytes},
                               {"digest", to_hex(img.digest)}});
  }
  const auto tmp = root_ / "index.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << index.dump(2) << '\n';
  }
  fs::rename(tmp, root_ / "index.json");
}

std::string ImageStore::publish(VnfType vnf_type, int version, std::span<const std::uint8_t> content) {
  std::unique_lock lock(mu_);
  for (const auto& [id, img] : images_) {
    if (img.vnf_type == vnf_type && img.version == version)
      throw Error(Errc::DuplicateVersion,
                  std::string(to_string(vnf_type)) + " v" + std::to_string(version) + " already published");
  }
  VnfImage img;
  img.digest = sha256(content);
  img.image_id = to_hex(img.digest);
  if (images_.count(img.image_id)) throw Error(Errc::DuplicateContent, "content already published as " + img.image_id);
  img.vnf_type = vnf_type;
  img.version = version;
  img.size_bytes = static_cast<std::int64_t>(content.size());
  {
    std::ofstream out(blob_path(img.image_id), std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(content.data()), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(Errc::IntegrityError, "cannot write blob " + img.image_id);
  }
  images_.emplace(img.image_id, img);
  write_index();
  return img.image_id;
}

ImageStore::Fetched ImageStore::fetch(const std::string& image_id) const {
  std::shared_lock lock(mu_);
  auto it = images_.find(image_id);
  if (it == images_.end()) throw Error(Errc::NotFound, "image " + image_id);
  std::ifstream in(blob_path(image_id), std::ios::binary);
  if (!in) throw Error(Errc::IntegrityError, "blob missing for " + image_id);
  Bytes content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (sha256(content) != it->second.digest ||
      static_cast<std::int64_t>(content.size()) != it->second.size_bytes)
    throw Error(Errc::IntegrityError, "digest mismatch for " + image_id);
  return {it->second, std::move(content)};
}

std::optional<VnfImage> ImageStore::find(const std::string& image_id) const {
  std::shared_lock lock(mu_);
  auto it = images_.find(image_id);
  if (it == images_.end()) return std::nullopt;
  return it->second;
}

std::optional<VnfImage> ImageStore::find(VnfType vnf_type, int version) const {
  std::shared_lock lock(mu_);
  for (const auto& [id, img] : images_) {
    if (img.vnf_type == vnf_type && img.version == version) return img;
  }
  return std::nullopt;
}

bool ImageStore::contains(const std::string& image_id) const {
  std::shared_lock lock(mu_);
  return images_.count(image_id) > 0;
}

std::vector<VnfImage> ImageStore::list() const {
  std::shared_lock lock(mu_);
  std::vector<VnfImage> out;
  for (const auto& [id, img] : images_) out.push_back(img);
  return out;
}

CacheResult DomainImageCaches::check(Domain domain, const std::string& image_id) const {
  if (!is_vwsn(domain)) throw Error(Errc::NotVwsnDomain, std::string(to_string(domain)));
  std::lock_guard lock(mu_);
  auto it = entries_.find(domain);
  return (it != entries_.end() && it->second.count(image_id)) ? CacheResult::Hit : CacheResult::Miss;
}

void DomainImageCaches::insert(Domain domain, const std::string& image_id) {
  if (!is_vwsn(domain)) throw Error(Errc::NotVwsnDomain, std::string(to_string(domain)));
  if (!store_.contains(image_id)) throw Error(Errc::NotFound, "image " + image_id + " not in central store");
  std::lock_guard lock(mu_);
  entries_[domain].insert(image_id);
}

std::set<std::string> DomainImageCaches::entries(Domain domain) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(domain);
  return it == entries_.end() ? std::set<std::string>{} : it->second;
}

std::string vnf_manifest(VnfType vnf_type, int version) {
  nlohmann::ordered_json j;
  j["kind"] = "vnf-image";
  j["vnf_type"] = std::string(to_string(vnf_type));
  j["stage"] = std::string(stage_tag(vnf_type));
  j["version"] = version;
  j["serves"] = std::string(to_string(served_domain(vnf_type)));
  j["entrypoint"] = is_info_model_processor(vnf_type) ? "information-model-processor" : "protocol-converter";
  return j.dump(2);
}

}  // namespace vgw
