#pragma once

#include <string>

#include "lam/scene.hpp"

namespace lam {

// Scene documents are JSON with a mandatory format/version tag. Constraint
// rows are run-length encoded as [label, count, label, count, ...] pairs.
// serialize_scene is canonical (sorted keys, fixed layout), so
// serialize(parse(serialize(x))) is byte-identical to serialize(x).

inline constexpr const char* kSceneFormatTag = "lam-scene";
inline constexpr int kSceneFormatVersion = 1;

std::string serialize_scene(const Scene& scene);
Scene parse_scene(const std::string& text);

void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

// Shared file helpers used by every document writer.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace lam
