#include "lam/scene_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json_detail.hpp"

namespace lam {

using nlohmann::json;
using detail::decode_constraints;
using detail::decode_source;
using detail::encode_constraints;
using detail::encode_source;

std::string serialize_scene(const Scene& scene) {
  const Lattice& lat = scene.lattice();
  json j;
  j["format"] = kSceneFormatTag;
  j["version"] = kSceneFormatVersion;
  j["lattice"] = {{"width", lat.width()}, {"height", lat.height()}};
  j["constraints"] = {{"rows", encode_constraints(scene.constraints)}};

  json sources = json::array();
  for (const Source& s : scene.sources) sources.push_back(encode_source(s));
  j["sources"] = std::move(sources);

  json agents = json::array();
  for (const Agent& a : scene.agents) {
    json ja;
    ja["id"] = a.id;
    ja["t0"] = a.traj.t0;
    ja["horizon"] = a.traj.horizon;
    json frames = json::array();
    for (size_t t = 0; t < a.traj.cells.size(); ++t)
      frames.push_back({static_cast<int>(t), a.traj.cells[t].x, a.traj.cells[t].y});
    ja["frames"] = std::move(frames);
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);

  if (scene.features) {
    json color = json::array();
    for (const auto& c : scene.features->color)
      color.push_back({c[0], c[1], c[2]});
    j["features"] = {{"color", std::move(color)},
                     {"ground", scene.features->ground}};
  }

  if (scene.truth) {
    const GroundTruth& gt = *scene.truth;
    json jt;
    json gsources = json::array();
    for (const auto& s : gt.sources) {
      json js;
      js["mu"] = {s.mu.x, s.mu.y};
      js["box"] = {s.box[0], s.box[1], s.box[2], s.box[3]};
      gsources.push_back(std::move(js));
    }
    jt["sources"] = std::move(gsources);
    jt["goal_orders"] = gt.goal_orders;
    json behaviors = json::array();
    for (Behavior b : gt.behaviors) behaviors.push_back(to_string(b));
    jt["behaviors"] = std::move(behaviors);
    jt["switch_frames"] = gt.switch_frames;
    j["ground_truth"] = std::move(jt);
  }

  return j.dump(2) + "\n";
}

Scene parse_scene(const std::string& text) {
  json j = json::parse(text);
  if (!j.contains("format") || j["format"] != kSceneFormatTag)
    throw std::invalid_argument("not a scene document (missing format tag)");
  if (!j.contains("version") || j["version"].get<int>() != kSceneFormatVersion)
    throw std::invalid_argument("unsupported scene document version");

  Lattice lat(j.at("lattice").at("width").get<int>(), j.at("lattice").at("height").get<int>());
  Scene scene;
  scene.constraints = decode_constraints(j.at("constraints").at("rows"), lat);

  for (const json& js : j.at("sources")) scene.sources.push_back(decode_source(js));

  for (const json& ja : j.at("agents")) {
    Agent a;
    a.id = ja.at("id").get<int>();
    a.traj.t0 = ja.at("t0").get<int>();
    a.traj.horizon = ja.at("horizon").get<int>();
    const json& frames = ja.at("frames");
    a.traj.cells.reserve(frames.size());
    for (size_t t = 0; t < frames.size(); ++t) {
      const json& f = frames[t];
      if (f.at(0).get<int>() != static_cast<int>(t))
        throw std::invalid_argument("agent " + std::to_string(a.id) +
                                    " frames are not contiguous from 0");
      a.traj.cells.push_back(Cell{f.at(1).get<int>(), f.at(2).get<int>()});
    }
    scene.agents.push_back(std::move(a));
  }

  if (j.contains("features")) {
    FeatureChannel f;
    for (const json& c : j.at("features").at("color"))
      f.color.push_back({c.at(0).get<float>(), c.at(1).get<float>(), c.at(2).get<float>()});
    f.ground = j.at("features").at("ground").get<std::vector<std::uint8_t>>();
    scene.features = std::move(f);
  }

  if (j.contains("ground_truth")) {
    const json& jt = j.at("ground_truth");
    GroundTruth gt;
    for (const json& js : jt.at("sources")) {
      GroundTruth::TrueSource s;
      s.mu = Cell{js.at("mu").at(0).get<int>(), js.at("mu").at(1).get<int>()};
      for (int k = 0; k < 4; ++k) s.box[static_cast<size_t>(k)] = js.at("box").at(k).get<double>();
      gt.sources.push_back(s);
    }
    gt.goal_orders = jt.at("goal_orders").get<std::vector<std::vector<int>>>();
    for (const json& b : jt.at("behaviors"))
      gt.behaviors.push_back(behavior_from_string(b.get<std::string>()));
    gt.switch_frames = jt.at("switch_frames").get<std::vector<int>>();
    scene.truth = std::move(gt);
  }

  require_valid(scene);
  return scene;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void save_scene(const Scene& scene, const std::string& path) {
  write_text_file(path, serialize_scene(scene));
}

Scene load_scene(const std::string& path) { return parse_scene(read_text_file(path)); }

}  // namespace lam
