#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "afplus/bench/image_io.hpp"
#include "afplus/bench/phantom.hpp"

namespace afp {

using json = nlohmann::json;

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr const char* kManifestSchema = "afplus.dataset_manifest";

enum class Split { Train, Val };

inline std::string to_string(Split s) { return s == Split::Train ? "train" : "val"; }

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  throw ContractViolation("unknown split '" + s + "' (expected train or val)");
}

struct ManifestEntry {
  std::string id;
  std::string image_path;  // relative to the manifest directory
  int width = 0;
  int height = 0;
  PixelFormat pixel_format = PixelFormat::F32;
  std::optional<std::string> kspace_path;  // set for corrupted sets
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  Split split = Split::Train;
  std::uint64_t seed = 0;
  std::filesystem::path base_dir;  // not serialized; where relative paths resolve

  std::filesystem::path image_file(std::size_t i) const { return base_dir / entries.at(i).image_path; }

  RealImage load_image(std::size_t i) const {
    const auto& e = entries.at(i);
    return read_image(image_file(i), e.pixel_format, e.height, e.width);
  }

  ComplexImage load_kspace(std::size_t i) const {
    const auto& e = entries.at(i);
    if (!e.kspace_path) throw LoadError("manifest entry '" + e.id + "' has no k-space file");
    return read_kspace(base_dir / *e.kspace_path, e.height, e.width);
  }

  /// Ids unique, declared shapes valid. With `check_files`, every image
  /// exists and matches its declared shape.
  void validate(bool check_files = true) const {
    std::set<std::string> ids;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.id.empty()) throw LoadError("manifest entry " + std::to_string(i) + " has an empty id");
      if (!ids.insert(e.id).second) throw LoadError("manifest: duplicate id '" + e.id + "'");
      if (e.width < ComplexImage::kMinSide || e.height < ComplexImage::kMinSide)
        throw LoadError("manifest entry '" + e.id + "': shape below 8x8");
      if (check_files) {
        if (!std::filesystem::exists(image_file(i)))
          throw LoadError("manifest entry '" + e.id + "': missing file " + image_file(i).string());
        load_image(i);
      }
    }
  }
};

inline json to_json(const DatasetManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    json j{{"id", e.id},
           {"image_path", e.image_path},
           {"width", e.width},
           {"height", e.height},
           {"pixel_format", to_string(e.pixel_format)}};
    if (e.kspace_path) j["kspace_path"] = *e.kspace_path;
    entries.push_back(std::move(j));
  }
  return {{"schema", kManifestSchema},
          {"schema_version", kManifestSchemaVersion},
          {"split", to_string(m.split)},
          {"seed", m.seed},
          {"entries", std::move(entries)}};
}

namespace detail {

inline void check_schema(const json& j, const char* schema, int version, const std::string& what) {
  if (!j.is_object()) throw LoadError(what + ": expected a JSON object");
  if (j.contains("schema") && j.at("schema") != schema)
    throw LoadError(what + ": schema '" + j.at("schema").dump() + "', expected '" + schema + "'");
  if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer())
    throw LoadError(what + ": missing integer schema_version");
  if (j.at("schema_version").get<int>() != version)
    throw LoadError(what + ": unsupported schema_version " + j.at("schema_version").dump() + " (expected " +
                    std::to_string(version) + ")");
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

}  // namespace detail

inline DatasetManifest manifest_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  detail::check_schema(j, kManifestSchema, kManifestSchemaVersion, "dataset manifest");
  try {
    DatasetManifest m;
    m.base_dir = base_dir;
    m.split = parse_split(j.at("split").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("entries")) {
      ManifestEntry me{e.at("id").get<std::string>(), e.at("image_path").get<std::string>(), e.at("width").get<int>(),
                       e.at("height").get<int>(), parse_pixel_format(e.at("pixel_format").get<std::string>()),
                       std::nullopt};
      if (e.contains("kspace_path")) me.kspace_path = e.at("kspace_path").get<std::string>();
      m.entries.push_back(std::move(me));
    }
    return m;
  } catch (const json::exception& e) {
    throw LoadError(std::string("dataset manifest: ") + e.what());
  } catch (const ContractViolation& e) {
    throw LoadError(std::string("dataset manifest: ") + e.what());
  }
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  detail::write_text_file(path, to_json(m).dump(2) + "\n");
}

inline DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true) {
  auto m = manifest_from_json(detail::read_json_file(path), path.parent_path());
  m.validate(check_files);
  return m;
}

struct PhantomOptions {
  PixelFormat format = PixelFormat::F32;
  Split split = Split::Train;
  bool include_shepp_logan = true;  // entry 0 is the canonical phantom
};

/// Writes n phantoms plus manifest.json into `out_dir`. Image i > 0 (or all
/// of them without Shepp-Logan) is drawn from Rng(mix_seed(seed, i)).
inline DatasetManifest gen_phantoms(int n, int size, std::uint64_t seed, const std::filesystem::path& out_dir,
                                    const PhantomOptions& opt = {}) {
  require(n >= 1, "gen_phantoms: n must be >= 1");
  require(size >= 16, "gen_phantoms: size must be >= 16");
  detail::ensure_directory(out_dir);
  DatasetManifest m;
  m.split = opt.split;
  m.seed = seed;
  m.base_dir = out_dir;
  for (int i = 0; i < n; ++i) {
    RealImage img;
    std::string id;
    if (i == 0 && opt.include_shepp_logan) {
      img = shepp_logan(size, size);
      id = "shepp_logan";
    } else {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
      img = random_phantom(size, size, rng);
      char buf[32];
      std::snprintf(buf, sizeof buf, "phantom_%04d", i);
      id = buf;
    }
    const std::string file = id + file_extension(opt.format);
    write_image(out_dir / file, img, opt.format);
    m.entries.push_back({id, file, size, size, opt.format, std::nullopt});
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace afp
