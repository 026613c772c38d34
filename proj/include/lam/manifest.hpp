#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lam {

std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

/// fnv1a64_hex of a file's bytes.
std::string hash_file(const std::string& path);

/// Every command writes one of these next to its outputs; hashes let sweeps
/// and tests verify artifacts without re-reading them. wall_clock_sec is
/// informational and excluded from determinism comparisons.
struct RunManifest {
  std::string command;
  std::string config_json;  // effective config after precedence resolution
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;

  struct Artifact {
    std::string path;
    std::string hash;
  };
  std::vector<Artifact> outputs;
  double wall_clock_sec = 0.0;
};

std::string serialize_manifest(const RunManifest& m);
void save_manifest(const RunManifest& m, const std::string& path);

}  // namespace lam
