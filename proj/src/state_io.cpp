#include "lam/state_io.hpp"

#include <stdexcept>

#include "json_detail.hpp"
#include "lam/scene_io.hpp"

namespace lam {

using nlohmann::json;

namespace {

// JSON has no infinities; scores of impossible hypotheses round-trip as null.
json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

double decode_score(const json& j) {
  if (j.is_null()) return -std::numeric_limits<double>::infinity();
  return j.get<double>();
}

json encode_report(const Behavior z, const std::vector<int>& goals, int switch_frame,
                   double score) {
  json j;
  j["behavior"] = to_string(z);
  j["goals"] = goals;
  j["switch_frame"] = switch_frame;
  j["score"] = finite_or_null(score);
  return j;
}

json encode_hypothesis(const ScoredHypothesis& h) {
  return encode_report(h.z, h.goal_order, h.switch_frame, h.score);
}

ScoredHypothesis decode_hypothesis(const json& j) {
  ScoredHypothesis h;
  h.z = behavior_from_string(j.at("behavior").get<std::string>());
  h.goal_order = j.at("goals").get<std::vector<int>>();
  h.switch_frame = j.at("switch_frame").get<int>();
  h.score = decode_score(j.at("score"));
  return h;
}

json encode_gmm(const Gmm& g) {
  json comps = json::array();
  for (const GmmComponent& c : g.comps) {
    json jc;
    jc["weight"] = c.weight;
    jc["mean"] = {c.mean[0], c.mean[1], c.mean[2]};
    jc["var"] = {c.var[0], c.var[1], c.var[2]};
    comps.push_back(std::move(jc));
  }
  return json{{"components", std::move(comps)}};
}

Gmm decode_gmm(const json& j) {
  Gmm g;
  const json& comps = j.at("components");
  if (comps.size() != g.comps.size())
    throw std::invalid_argument("appearance model must have exactly two components");
  for (size_t k = 0; k < g.comps.size(); ++k) {
    const json& jc = comps[k];
    g.comps[k].weight = jc.at("weight").get<double>();
    for (int d = 0; d < 3; ++d) {
      g.comps[k].mean[static_cast<size_t>(d)] = jc.at("mean").at(d).get<double>();
      g.comps[k].var[static_cast<size_t>(d)] = jc.at("var").at(d).get<double>();
    }
  }
  return g;
}

}  // namespace

std::string serialize_state(const ChainSnapshot& snap, const McmcResult* diagnostics) {
  const Lattice& lat = snap.cmap.lattice();
  json j;
  j["format"] = kStateFormatTag;
  j["version"] = kStateFormatVersion;
  j["lattice"] = {{"width", lat.width()}, {"height", lat.height()}};
  j["constraints"] = {{"rows", detail::encode_constraints(snap.cmap)}};

  json sources = json::array();
  for (const Source& s : snap.sources) sources.push_back(detail::encode_source(s));
  j["sources"] = std::move(sources);

  json relations = json::array();
  for (int i = 0; i < snap.rel.n_agents(); ++i) relations.push_back(snap.rel.goals_of(i));
  j["relations"] = std::move(relations);
  j["theta"] = snap.theta;

  if (snap.gmm) j["appearance"] = encode_gmm(*snap.gmm);

  json agents = json::array();
  for (const AgentReport& r : snap.agents)
    agents.push_back(encode_report(r.z, r.goal_order, r.switch_frame, r.score));
  j["agents"] = std::move(agents);
  j["log_post"] = finite_or_null(snap.log_post);

  if (diagnostics) {
    json diag;
    diag["max_audit_drift"] = diagnostics->max_audit_drift;
    diag["proposed"] = diagnostics->stats.proposed;
    diag["accepted"] = diagnostics->stats.accepted;
    json trace = json::array();
    for (const TraceRow& row : diagnostics->trace) {
      json jr;
      jr["iteration"] = row.iteration;
      jr["log_post"] = finite_or_null(row.log_post);
      jr["n_sources"] = row.n_sources;
      jr["accept_flip"] = row.accept_flip;
      jr["accept_birth_death"] = row.accept_birth_death;
      jr["accept_relation"] = row.accept_relation;
      trace.push_back(std::move(jr));
    }
    diag["trace"] = std::move(trace);
    j["diagnostics"] = std::move(diag);
  }
  return j.dump(2) + "\n";
}

ChainSnapshot parse_state(const std::string& text) {
  json j = json::parse(text);
  if (!j.contains("format") || j["format"] != kStateFormatTag)
    throw std::invalid_argument("not a state document (missing format tag)");
  if (!j.contains("version") || j["version"].get<int>() != kStateFormatVersion)
    throw std::invalid_argument("unsupported state document version");

  Lattice lat(j.at("lattice").at("width").get<int>(), j.at("lattice").at("height").get<int>());
  ChainSnapshot snap;
  snap.cmap = detail::decode_constraints(j.at("constraints").at("rows"), lat);
  for (const json& js : j.at("sources")) snap.sources.push_back(detail::decode_source(js));

  const json& relations = j.at("relations");
  snap.rel = RelationMatrix(static_cast<int>(relations.size()),
                            static_cast<int>(snap.sources.size()));
  for (size_t i = 0; i < relations.size(); ++i)
    for (int g : relations[i].get<std::vector<int>>())
      snap.rel.set(static_cast<int>(i), g, true);
  snap.theta = j.at("theta").get<std::vector<double>>();

  if (j.contains("appearance")) snap.gmm = decode_gmm(j.at("appearance"));

  for (const json& ja : j.at("agents")) {
    ScoredHypothesis h = decode_hypothesis(ja);
    AgentReport r;
    r.z = h.z;
    r.goal_order = std::move(h.goal_order);
    r.switch_frame = h.switch_frame;
    r.score = h.score;
    snap.agents.push_back(std::move(r));
  }
  snap.log_post = decode_score(j.at("log_post"));
  return snap;
}

void save_state(const ChainSnapshot& snap, const std::string& path,
                const McmcResult* diagnostics) {
  write_text_file(path, serialize_state(snap, diagnostics));
}

ChainSnapshot load_state(const std::string& path) { return parse_state(read_text_file(path)); }

std::string serialize_predictions(const PredictionDoc& doc) {
  json j;
  j["format"] = kPredictionsFormatTag;
  j["version"] = kPredictionsFormatVersion;
  j["mode"] = doc.mode;
  json agents = json::array();
  for (const AgentPrediction& p : doc.agents) {
    json ja;
    ja["agent_id"] = p.agent_id;
    json path = json::array();
    for (Cell c : p.path) path.push_back({c.x, c.y});
    ja["path"] = std::move(path);
    ja["best"] = encode_hypothesis(p.best);
    if (!p.hypotheses.empty()) {
      json hs = json::array();
      for (const ScoredHypothesis& h : p.hypotheses) hs.push_back(encode_hypothesis(h));
      ja["hypotheses"] = std::move(hs);
    }
    if (!p.goal_posterior.empty()) ja["goal_posterior"] = p.goal_posterior;
    if (!p.goal_per_frame.empty()) ja["goal_per_frame"] = p.goal_per_frame;
    if (!p.stop_reason.empty()) ja["stop_reason"] = p.stop_reason;
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);
  return j.dump(2) + "\n";
}

PredictionDoc parse_predictions(const std::string& text) {
  json j = json::parse(text);
  if (!j.contains("format") || j["format"] != kPredictionsFormatTag)
    throw std::invalid_argument("not a predictions document (missing format tag)");
  if (!j.contains("version") || j["version"].get<int>() != kPredictionsFormatVersion)
    throw std::invalid_argument("unsupported predictions document version");
  PredictionDoc doc;
  doc.mode = j.at("mode").get<std::string>();
  for (const json& ja : j.at("agents")) {
    AgentPrediction p;
    p.agent_id = ja.at("agent_id").get<int>();
    for (const json& jc : ja.at("path"))
      p.path.push_back(Cell{jc.at(0).get<int>(), jc.at(1).get<int>()});
    p.best = decode_hypothesis(ja.at("best"));
    if (ja.contains("hypotheses"))
      for (const json& jh : ja.at("hypotheses")) p.hypotheses.push_back(decode_hypothesis(jh));
    if (ja.contains("goal_posterior"))
      p.goal_posterior = ja.at("goal_posterior").get<std::vector<std::vector<double>>>();
    if (ja.contains("goal_per_frame"))
      p.goal_per_frame = ja.at("goal_per_frame").get<std::vector<int>>();
    if (ja.contains("stop_reason")) p.stop_reason = ja.at("stop_reason").get<std::string>();
    doc.agents.push_back(std::move(p));
  }
  return doc;
}

void save_predictions(const PredictionDoc& doc, const std::string& path) {
  write_text_file(path, serialize_predictions(doc));
}

PredictionDoc load_predictions(const std::string& path) {
  return parse_predictions(read_text_file(path));
}

std::string serialize_eval_report(const EvalReport& report) {
  json j;
  j["mean_mhd"] = report.mean_mhd;
  j["mean_nll"] = report.mean_nll;
  j["agent_mhd"] = report.agent_mhd;
  j["agent_nll"] = report.agent_nll;
  j["s_accuracy"] = report.s_accuracy;
  j["source_iou"] = report.source_iou;
  j["gt_to_pred"] = report.gt_to_pred;
  j["r_accuracy"] = report.r_accuracy;
  j["joint_sr"] = report.joint_sr;
  if (report.has_behaviors) {
    json b;
    b["confusion"] = report.behaviors.confusion;
    b["ap"] = report.behaviors.ap;
    b["mean_ap"] = report.behaviors.mean_ap;
    json prs = json::array();
    for (const auto& curve : report.behaviors.pr) {
      json pts = json::array();
      for (const PrPoint& p : curve)
        pts.push_back({{"threshold", finite_or_null(p.threshold)},
                       {"precision", p.precision},
                       {"recall", p.recall}});
      prs.push_back(std::move(pts));
    }
    b["pr"] = std::move(prs);
    j["behaviors"] = std::move(b);
  }
  return j.dump(2) + "\n";
}

std::string eval_summary_header() {
  return "mean_mhd,mean_nll,s_accuracy,r_accuracy,joint_sr,ap_single,ap_sequential,ap_change,"
         "mean_ap\n";
}

std::string eval_summary_row(const EvalReport& report) {
  auto num = [](double v) { return json(v).dump(); };
  std::string row = num(report.mean_mhd) + "," + num(report.mean_nll) + "," +
                    num(report.s_accuracy) + "," + num(report.r_accuracy) + "," +
                    num(report.joint_sr);
  if (report.has_behaviors) {
    for (double ap : report.behaviors.ap) row += "," + num(ap);
    row += "," + num(report.behaviors.mean_ap);
  } else {
    row += ",,,,";
  }
  return row + "\n";
}

std::string serialize_clusters(const ClusterResult& result) {
  json j;
  j["format"] = "lam-clusters";
  j["version"] = 1;
  j["labels"] = result.labels;
  j["ops"] = result.ops;
  j["inertia"] = result.inertia;
  json cs = json::array();
  for (const FunctionalDescriptor& c : result.centroids) cs.push_back(c);
  j["centroids"] = std::move(cs);
  return j.dump(2) + "\n";
}

}  // namespace lam
