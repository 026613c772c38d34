#include "lam/manifest.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "lam/grid.hpp"

namespace lam {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a64_hex(std::string_view data) {
  static const char* kDigits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = kDigits[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::string hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return fnv1a64_hex(ss.str());
}

std::string serialize_manifest(const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config_json.empty() ? nlohmann::json::object()
                                      : nlohmann::json::parse(m.config_json);
  j["seed"] = m.seed;
  j["inputs"] = m.inputs;
  j["outputs"] = nlohmann::json::array();
  for (const RunManifest::Artifact& a : m.outputs)
    j["outputs"].push_back({{"path", a.path}, {"hash", a.hash}});
  j["wall_clock_sec"] = m.wall_clock_sec;
  return j.dump(2) + "\n";
}

void save_manifest(const RunManifest& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path + " for writing");
  std::string bytes = serialize_manifest(m);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InputError("failed writing " + path);
}

}  // namespace lam
