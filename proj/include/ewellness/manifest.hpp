#pragma once

// Run manifest: what was run, with which resolved config and seed, and the
// SHA-256 of every input and output. Contains no timestamps, so equal runs
// give equal manifests.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ewellness/crypto.hpp"
#include "json.hpp"

namespace ewellness {

inline constexpr int kManifestSchemaVersion = 1;

struct ArtifactRef {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string subcommand;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<ArtifactRef> inputs;
  std::vector<ArtifactRef> outputs;

  void add_input(const std::string& path) { inputs.push_back({path, sha256_file_hex(path)}); }
  void add_output(const std::string& path) { outputs.push_back({path, sha256_file_hex(path)}); }
  // For artifacts that only went to a stream.
  void add_output_bytes(const std::string& label, std::string_view bytes) {
    outputs.push_back({label, to_hex(sha256(bytes))});
  }

  nlohmann::json to_json() const {
    auto refs = [](const std::vector<ArtifactRef>& v) {
      auto a = nlohmann::json::array();
      for (const auto& r : v) a.push_back({{"path", r.path}, {"sha256", r.sha256}});
      return a;
    };
    return {{"schema_version", kManifestSchemaVersion},
            {"subcommand", subcommand},
            {"config", config},
            {"seed", seed},
            {"inputs", refs(inputs)},
            {"outputs", refs(outputs)}};
  }

  std::string dump() const { return to_json().dump(2) + "\n"; }

  void write(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << dump();
    if (!out) throw Error("cannot write manifest " + path.string());
  }
};

}  // namespace ewellness
