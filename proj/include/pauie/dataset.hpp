#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

// Dataset manifests. A dataset root holds `raw/`, optional `reference/` and
// optional `depth/`; files pair by stem. Without `raw/`, image files directly
// under the root are the degraded inputs.
namespace pauie::dataset {

namespace fs = std::filesystem;

inline constexpr int kManifestVersion = 1;

struct Entry {
  std::string image_id;
  fs::path degraded;
  std::optional<fs::path> reference;
  std::optional<fs::path> depth;

  bool labeled() const { return reference.has_value(); }
  friend bool operator==(const Entry&, const Entry&) = default;
};

struct Manifest {
  fs::path root;
  std::vector<Entry> entries;

  std::size_t labeled_count() const;
  std::size_t unlabeled_count() const { return entries.size() - labeled_count(); }
  /// Ids unique and every listed path present.
  void validate() const;
  friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct IngestResult {
  Manifest manifest;
  std::vector<std::string> warnings;
};

IngestResult ingest(const fs::path& root);

struct Issue {
  std::string image_id;
  std::string message;
};

/// Decodes every file and checks that paired files share dimensions.
std::vector<Issue> check_files(const Manifest& m);

std::string to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);
void save(const fs::path& path, const Manifest& m);
Manifest load(const fs::path& path);

}  // namespace pauie::dataset
