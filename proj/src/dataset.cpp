#include "pauie/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pauie/errors.hpp"
#include "pauie/io.hpp"

namespace pauie::dataset {

std::size_t Manifest::labeled_count() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const Entry& e) { return e.labeled(); }));
}

void Manifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.image_id).second) throw ConfigError("manifest: duplicate image id " + e.image_id);
    for (const auto* p : {&e.degraded, e.reference ? &*e.reference : nullptr, e.depth ? &*e.depth : nullptr}) {
      if (p && !fs::exists(*p)) throw ConfigError("manifest: missing file " + p->string());
    }
  }
}

namespace {

// stem -> file, rejecting two files with the same stem in one directory.
std::map<std::string, fs::path> scan(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& item : fs::directory_iterator(dir)) {
    if (item.is_regular_file() && io::is_image_file(item.path())) files.push_back(item.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto stem = f.stem().string();
    auto [it, fresh] = out.emplace(stem, f);
    if (!fresh) {
      throw ConfigError("ambiguous stem '" + stem + "' in " + dir.string() + ": " + it->second.filename().string() +
                        " and " + f.filename().string());
    }
  }
  return out;
}

}  // namespace

IngestResult ingest(const fs::path& root) {
  if (!fs::is_directory(root)) throw ConfigError("dataset root is not a directory: " + root.string());
  IngestResult r;
  r.manifest.root = root;
  const bool has_raw = fs::is_directory(root / "raw");
  auto raw = scan(has_raw ? root / "raw" : root);
  auto refs = scan(root / "reference");
  auto depths = scan(root / "depth");
  for (const auto& [stem, path] : raw) {
    Entry e{stem, path, std::nullopt, std::nullopt};
    if (auto it = refs.find(stem); it != refs.end()) e.reference = it->second;
    if (auto it = depths.find(stem); it != depths.end()) e.depth = it->second;
    r.manifest.entries.push_back(std::move(e));
  }
  for (const auto& [stem, path] : refs) {
    if (!raw.count(stem)) r.warnings.push_back("reference without degraded input: " + path.string());
  }
  for (const auto& [stem, path] : depths) {
    if (!raw.count(stem)) r.warnings.push_back("depth map without degraded input: " + path.string());
  }
  if (r.manifest.entries.empty()) r.warnings.push_back("no images found under " + root.string());
  return r;
}

std::vector<Issue> check_files(const Manifest& m) {
  std::vector<Issue> issues;
  for (const auto& e : m.entries) {
    try {
      const auto img = io::read_image(e.degraded);
      if (e.reference) {
        const auto ref = io::read_image(*e.reference);
        if (!img.same_extent(ref)) {
          issues.push_back({e.image_id, "pairing error: " + e.reference->filename().string() + " is " +
                                            std::to_string(ref.height()) + "x" + std::to_string(ref.width()) +
                                            ", degraded is " + std::to_string(img.height()) + "x" +
                                            std::to_string(img.width())});
        }
      }
      if (e.depth) {
        const auto d = io::read_depth(*e.depth);
        if (d.height() != img.height() || d.width() != img.width()) {
          issues.push_back({e.image_id, "pairing error: depth " + e.depth->filename().string() + " size differs"});
        }
      }
    } catch (const Error& ex) {
      issues.push_back({e.image_id, ex.what()});
    }
  }
  return issues;
}

std::string to_json(const Manifest& m) {
  nlohmann::json j;
  j["version"] = kManifestVersion;
  j["root"] = m.root.string();
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json x;
    x["image_id"] = e.image_id;
    x["degraded"] = e.degraded.string();
    if (e.reference) x["reference"] = e.reference->string();
    if (e.depth) x["depth"] = e.depth->string();
    j["entries"].push_back(std::move(x));
  }
  return j.dump(2);
}

Manifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (j.value("version", 0) != kManifestVersion) throw ConfigError("manifest: unsupported or missing version");
  Manifest m;
  try {
    m.root = j.at("root").get<std::string>();
    for (const auto& x : j.at("entries")) {
      Entry e;
      e.image_id = x.at("image_id").get<std::string>();
      e.degraded = x.at("degraded").get<std::string>();
      if (x.contains("reference")) e.reference = fs::path(x["reference"].get<std::string>());
      if (x.contains("depth")) e.depth = fs::path(x["depth"].get<std::string>());
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  return m;
}

void save(const fs::path& path, const Manifest& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(m) << '\n';
}

Manifest load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto m = manifest_from_json(ss.str());
  m.validate();
  return m;
}

}  // namespace pauie::dataset
