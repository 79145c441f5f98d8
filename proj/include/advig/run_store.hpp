#pragma once

// Persistence: JSON codecs for configs and specs, dataset manifest loading,
// and the run-directory layout. A run directory holds:
//   run_manifest.json   effective config + seed + per-target plan (the only
//                       file carrying a timestamp)
//   records/<id>.jsonl  append-only per-target log: header, one line per
//                       iteration, final result
//   frames/<id>.pgm|ppm fused adversarial frame of every evaluated target
//   summary.json        machine-readable index and metrics
//   traces.csv          fitness-vs-iteration column data

#include <cctype>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "advig/attack.hpp"
#include "advig/error.hpp"
#include "advig/version.hpp"

namespace advig {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// JSON codecs
// ---------------------------------------------------------------------------

inline json rect_json(const Rect& r) { return json{r.x1, r.y1, r.x2, r.y2}; }

inline Rect rect_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4)
    throw InvalidParameter("box must be [x1,y1,x2,y2]");
  Rect r{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  if (r.empty()) throw InvalidParameter("box must be non-empty, x1<x2, y1<y2");
  return r;
}

inline json color_json(Color c) { return json{c.r, c.g, c.b}; }

inline Color color_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3)
    throw InvalidParameter("color must be [r,g,b]");
  const int r = j[0].get<int>(), g = j[1].get<int>(), b = j[2].get<int>();
  for (int v : {r, g, b})
    if (v < 0 || v > 255)
      throw InvalidParameter("color channels must be in [0,255]");
  return Color{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
               static_cast<std::uint8_t>(b)};
}

inline json spec_json(const PerturbationSpec& spec) {
  json j;
  j["color"] = color_json(spec.color);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LineSetParams>) {
          j["kind"] = "lines";
          j["thickness"] = p.thickness;
          json pts = json::array();
          for (const Point& q : p.endpoints) pts.push_back(json{q.x, q.y});
          j["endpoints"] = std::move(pts);
        } else if constexpr (std::is_same_v<T, PolygonParams>) {
          j["kind"] = "polygon";
          json pts = json::array();
          for (const Point& q : p.vertices) pts.push_back(json{q.x, q.y});
          j["vertices"] = std::move(pts);
        } else {
          j["kind"] = "ellipse";
          j["center"] = json{p.center.x, p.center.y};
          j["semi_axes"] = json{p.semi_axis_h, p.semi_axis_v};
        }
      },
      spec.shape);
  return j;
}

inline PerturbationSpec spec_from_json(const json& j) {
  const auto point_of = [](const json& a) {
    if (!a.is_array() || a.size() != 2)
      throw InvalidParameter("point must be [x,y]");
    return Point{a[0].get<int>(), a[1].get<int>()};
  };
  PerturbationSpec spec;
  spec.color = color_from_json(j.at("color"));
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "lines") {
    LineSetParams p;
    p.thickness = j.at("thickness").get<int>();
    for (const json& a : j.at("endpoints")) p.endpoints.push_back(point_of(a));
    spec.shape = std::move(p);
  } else if (kind == "polygon") {
    PolygonParams p;
    for (const json& a : j.at("vertices")) p.vertices.push_back(point_of(a));
    spec.shape = std::move(p);
  } else if (kind == "ellipse") {
    EllipseParams p;
    p.center = point_of(j.at("center"));
    const json& axes = j.at("semi_axes");
    p.semi_axis_h = axes.at(0).get<int>();
    p.semi_axis_v = axes.at(1).get<int>();
    spec.shape = p;
  } else {
    throw InvalidParameter("unknown spec kind: " + kind);
  }
  return spec;
}

inline json attack_config_json(const AttackConfig& c) {
  json scales = json::array();
  for (const TransformSpec& t : c.eot.transforms) scales.push_back(t.scale);
  return json{
      {"shape",
       {{"kind", to_string(c.family.kind)},
        {"line_count", c.family.line_count},
        {"edges", c.family.edges},
        {"thickness", c.family.thickness}}},
      {"color", color_json(c.color)},
      {"alpha", c.alpha},
      {"pso",
       {{"omega", c.hyper.omega},
        {"c1", c.hyper.c1},
        {"r1", c.hyper.r1},
        {"c2", c.hyper.c2},
        {"r2", c.hyper.r2},
        {"r_mode", to_string(c.hyper.r_mode)},
        {"population", c.hyper.population},
        {"iterations", c.hyper.iterations},
        {"v_max", c.hyper.v_max}}},
      {"threshold", c.threshold},
      {"eot", {{"enabled", c.eot_enabled}, {"scales", std::move(scales)}}},
      {"oracle",
       {{"backend", to_string(c.oracle.backend)},
        {"endpoint", c.oracle.endpoint},
        {"mock_beta", c.oracle.mock_beta},
        {"mock_dark_threshold", c.oracle.mock_dark_threshold},
        {"timeout_ms", c.oracle.timeout.count()},
        {"max_retries", c.oracle.max_retries}}},
      {"seed", c.seed}};
}

/// Apply the fields present in `j` over `base`. Unknown keys are rejected
/// so config-file typos fail loudly.
inline AttackConfig attack_config_from_json(const json& j,
                                            AttackConfig base = {}) {
  if (!j.is_object()) throw InvalidParameter("config must be a JSON object");
  const auto known = [](const json& obj, std::initializer_list<const char*> keys) {
    for (const auto& [key, value] : obj.items()) {
      bool ok = false;
      for (const char* k : keys) ok = ok || key == k;
      if (!ok) throw InvalidParameter("unknown config key: " + key);
    }
  };
  known(j, {"shape", "color", "alpha", "pso", "threshold", "eot", "oracle",
            "seed"});
  if (j.contains("shape")) {
    const json& s = j["shape"];
    known(s, {"kind", "line_count", "edges", "thickness"});
    if (s.contains("kind"))
      base.family.kind = shape_kind_from_string(s["kind"].get<std::string>());
    if (s.contains("line_count")) base.family.line_count = s["line_count"].get<int>();
    if (s.contains("edges")) base.family.edges = s["edges"].get<int>();
    if (s.contains("thickness")) base.family.thickness = s["thickness"].get<int>();
  }
  if (j.contains("color")) base.color = color_from_json(j["color"]);
  if (j.contains("alpha")) base.alpha = j["alpha"].get<double>();
  if (j.contains("pso")) {
    const json& p = j["pso"];
    known(p, {"omega", "c1", "r1", "c2", "r2", "r_mode", "population",
              "iterations", "v_max"});
    if (p.contains("omega")) base.hyper.omega = p["omega"].get<double>();
    if (p.contains("c1")) base.hyper.c1 = p["c1"].get<double>();
    if (p.contains("r1")) base.hyper.r1 = p["r1"].get<double>();
    if (p.contains("c2")) base.hyper.c2 = p["c2"].get<double>();
    if (p.contains("r2")) base.hyper.r2 = p["r2"].get<double>();
    if (p.contains("r_mode"))
      base.hyper.r_mode = r_mode_from_string(p["r_mode"].get<std::string>());
    if (p.contains("population")) base.hyper.population = p["population"].get<int>();
    if (p.contains("iterations")) base.hyper.iterations = p["iterations"].get<int>();
    if (p.contains("v_max")) base.hyper.v_max = p["v_max"].get<double>();
  }
  if (j.contains("threshold")) base.threshold = j["threshold"].get<double>();
  if (j.contains("eot")) {
    const json& e = j["eot"];
    known(e, {"enabled", "scales"});
    if (e.contains("enabled")) base.eot_enabled = e["enabled"].get<bool>();
    if (e.contains("scales")) {
      TransformSet set;
      set.transforms.clear();
      for (const json& s : e["scales"])
        set.transforms.push_back(TransformSpec{s.get<double>()});
      base.eot = std::move(set);
    }
  }
  if (j.contains("oracle")) {
    const json& o = j["oracle"];
    known(o, {"backend", "endpoint", "mock_beta", "mock_dark_threshold",
              "timeout_ms", "max_retries"});
    if (o.contains("backend"))
      base.oracle.backend =
          oracle_backend_from_string(o["backend"].get<std::string>());
    if (o.contains("endpoint")) base.oracle.endpoint = o["endpoint"].get<std::string>();
    if (o.contains("mock_beta")) base.oracle.mock_beta = o["mock_beta"].get<double>();
    if (o.contains("mock_dark_threshold"))
      base.oracle.mock_dark_threshold = o["mock_dark_threshold"].get<int>();
    if (o.contains("timeout_ms"))
      base.oracle.timeout =
          std::chrono::milliseconds(o["timeout_ms"].get<long long>());
    if (o.contains("max_retries")) base.oracle.max_retries = o["max_retries"].get<int>();
  }
  if (j.contains("seed")) base.seed = j["seed"].get<std::uint64_t>();
  return base;
}

// ---------------------------------------------------------------------------
// Dataset manifest
// ---------------------------------------------------------------------------

inline json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open file: " + path);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw InvalidParameter("not valid JSON: " + path);
  return j;
}

/// Load a dataset manifest:
///   {"entries": [{"id": "...", "image": "path.pgm",
///                 "boxes": [[x1,y1,x2,y2], ...]}, ...]}
/// Relative image paths resolve against the manifest's directory; ids
/// default to the image stem and must be unique.
inline DatasetManifest load_manifest(const std::string& path) {
  const json j = parse_json_file(path);
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array())
    throw InvalidParameter("manifest must contain an entries array: " + path);
  const std::filesystem::path base =
      std::filesystem::absolute(path).parent_path();

  DatasetManifest manifest;
  std::map<std::string, int> seen;
  for (const json& e : j["entries"]) {
    if (!e.is_object() || !e.contains("image") || !e.contains("boxes"))
      throw InvalidParameter("manifest entry needs image and boxes");
    ManifestEntry entry;
    std::filesystem::path img(e["image"].get<std::string>());
    if (img.is_relative()) img = base / img;
    entry.image_path = img.lexically_normal().string();
    entry.id = e.contains("id") ? e["id"].get<std::string>()
                                : img.stem().string();
    if (entry.id.empty()) throw InvalidParameter("manifest entry id is empty");
    if (++seen[entry.id] > 1)
      throw InvalidParameter("duplicate manifest entry id: " + entry.id);
    if (!e["boxes"].is_array() || e["boxes"].empty())
      throw InvalidParameter("entry '" + entry.id + "' needs >= 1 box");
    for (const json& b : e["boxes"]) entry.boxes.push_back(rect_from_json(b));
    manifest.entries.push_back(std::move(entry));
  }
  if (manifest.entries.empty())
    throw InvalidParameter("manifest has no entries: " + path);
  return manifest;
}

// ---------------------------------------------------------------------------
// Run directory
// ---------------------------------------------------------------------------

namespace detail {

inline std::string iso8601_utc_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string sanitize_id(const std::string& id) {
  std::string out;
  out.reserve(id.size());
  for (char c : id)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
                          c == '_' || c == '-'
                      ? c
                      : '_');
  return out;
}

inline std::string format_double(double v) {
  // Shortest round-trip formatting, matching the JSON files.
  return json(v).dump();
}

}  // namespace detail

/// Writes one run directory. Iteration lines stream in as the attack
/// progresses so partial runs remain inspectable; concurrent targets write
/// through a shared lock to their own record files.
class RunWriter {
 public:
  RunWriter(std::string dir, const AttackConfig& config,
            const std::string& manifest_path,
            const std::vector<TargetRef>& targets, int workers,
            bool filter_small)
      : dir_(std::move(dir)) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir_) / "records");
    fs::create_directories(fs::path(dir_) / "frames");

    json plan = json::array();
    std::set<std::string> used_names;
    for (const TargetRef& t : targets) {
      std::string name = detail::sanitize_id(t.target_id);
      for (int k = 2; !used_names.insert(name).second; ++k)
        name = detail::sanitize_id(t.target_id) + "_" + std::to_string(k);
      record_names_[t.target_id] = name;
      plan.push_back(json{{"id", t.target_id},
                          {"bbox", rect_json(t.bbox)},
                          {"seed", t.seed}});
    }
    const json manifest{{"tool", kToolName},
                        {"version", kVersion},
                        {"started_at", detail::iso8601_utc_now()},
                        {"manifest_path", manifest_path},
                        {"options",
                         {{"workers", workers}, {"filter_small", filter_small}}},
                        {"config", attack_config_json(config)},
                        {"seed", config.seed},
                        {"targets", std::move(plan)}};
    write_text("run_manifest.json", manifest.dump(2) + "\n");
  }

  const std::string& dir() const { return dir_; }

  void target_begin(const TargetRef& ref, const std::string& image_path) {
    const json line{{"type", "header"},
                    {"target_id", ref.target_id},
                    {"image", image_path},
                    {"bbox", rect_json(ref.bbox)},
                    {"seed", ref.seed}};
    append_record(ref.target_id, line);
  }

  void iteration(const TargetRef& ref, const IterationEvent& ev) {
    const json line{{"type", "iteration"},
                    {"iteration", ev.iteration},
                    {"global_best", ev.global_best_fitness},
                    {"queries", ev.queries}};
    append_record(ref.target_id, line);
  }

  /// Final record line plus the fused frame for evaluated targets.
  void target_done(const TargetOutcome& out, const AttackResult* result) {
    json line{{"type", "result"},
              {"target_id", out.target_id},
              {"status", to_string(out.status)},
              {"clean_objectness", out.clean_objectness},
              {"gate_queries", out.gate_queries},
              {"message", out.message}};
    if (out.status == TargetStatus::success ||
        out.status == TargetStatus::failed) {
      line["final_objectness"] = out.final_objectness;
      line["best_fitness"] = out.best_fitness;
      line["queries"] = out.queries;
      line["verify_queries"] = out.verify_queries;
      line["iterations_run"] = out.iterations_run;
      line["best_spec"] = spec_json(out.best_spec);
      if (result) {
        line["per_transform_objectness"] = result->per_transform_objectness;
        const std::string frame_rel =
            frame_relpath(out.target_id, result->adv_frame.channels);
        line["frame"] = frame_rel;
        write_frame((std::filesystem::path(dir_) / frame_rel).string(),
                    result->adv_frame);
      }
    }
    append_record(out.target_id, line);
    std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = streams_.find(out.target_id); it != streams_.end()) {
      it->second->close();
      streams_.erase(it);
    }
  }

  /// summary.json + traces.csv from the finished report.
  void finalize(const DatasetReport& report, double threshold) {
    json per_target = json::array();
    std::string csv = "target_id,iteration,global_best\n";
    for (const TargetOutcome& out : report.outcomes) {
      json t{{"id", out.target_id},
             {"image", out.image_path},
             {"bbox", rect_json(out.bbox)},
             {"seed", out.seed},
             {"status", to_string(out.status)},
             {"clean_objectness", out.clean_objectness},
             {"gate_queries", out.gate_queries},
             {"record", "records/" + record_name(out.target_id) + ".jsonl"}};
      if (out.status == TargetStatus::success ||
          out.status == TargetStatus::failed) {
        t["success"] = out.status == TargetStatus::success;
        t["final_objectness"] = out.final_objectness;
        t["best_fitness"] = out.best_fitness;
        t["queries"] = out.queries;
        t["verify_queries"] = out.verify_queries;
        t["iterations_run"] = out.iterations_run;
        t["best_spec"] = spec_json(out.best_spec);
        t["frame"] = frame_paths_.count(out.target_id)
                         ? json(frame_paths_.at(out.target_id))
                         : json(nullptr);
        for (std::size_t i = 0; i < out.fitness_trace.size(); ++i)
          csv += record_name(out.target_id) + "," + std::to_string(i + 1) +
                 "," + detail::format_double(out.fitness_trace[i]) + "\n";
      }
      if (!out.message.empty()) t["message"] = out.message;
      per_target.push_back(std::move(t));
    }
    const json summary{{"asr", report.asr},
                       {"n", report.n},
                       {"successes", report.successes},
                       {"excluded", report.excluded},
                       {"errors", report.errors},
                       {"mean_queries", report.mean_queries},
                       {"threshold", threshold},
                       {"per_target", std::move(per_target)}};
    write_text("summary.json", summary.dump(2) + "\n");
    write_text("traces.csv", csv);
  }

  void write_text(const std::string& relpath, const std::string& text) {
    const std::filesystem::path p = std::filesystem::path(dir_) / relpath;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
  }

 private:
  std::string record_name(const std::string& target_id) const {
    const auto it = record_names_.find(target_id);
    return it != record_names_.end() ? it->second
                                     : detail::sanitize_id(target_id);
  }

  std::string frame_relpath(const std::string& target_id, int channels) {
    const std::string rel = "frames/" + record_name(target_id) +
                            (channels == 1 ? ".pgm" : ".ppm");
    std::lock_guard<std::mutex> lock(mutex_);
    frame_paths_[target_id] = rel;
    return rel;
  }

  void append_record(const std::string& target_id, const json& line) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = streams_.find(target_id);
    if (it == streams_.end()) {
      const std::filesystem::path p = std::filesystem::path(dir_) /
                                      "records" /
                                      (record_name(target_id) + ".jsonl");
      auto stream = std::make_unique<std::ofstream>(p, std::ios::binary |
                                                           std::ios::trunc);
      if (!*stream) throw Error("cannot write " + p.string());
      it = streams_.emplace(target_id, std::move(stream)).first;
    }
    *it->second << line.dump() << '\n';
    it->second->flush();
  }

  std::string dir_;
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<std::ofstream>> streams_;
  std::map<std::string, std::string> record_names_;
  std::map<std::string, std::string> frame_paths_;
};

/// Wire a RunWriter into dataset callbacks.
inline DatasetOptions with_run_writer(DatasetOptions options, RunWriter& writer,
                                      const DatasetManifest& manifest) {
  options.on_target_begin = [&writer, &manifest](const TargetRef& ref) {
    writer.target_begin(ref, manifest.entries[ref.entry_index].image_path);
  };
  options.on_iteration = [&writer](const TargetRef& ref,
                                   const IterationEvent& ev) {
    writer.iteration(ref, ev);
  };
  options.on_target_done = [&writer](const TargetOutcome& out,
                                     const AttackResult* result) {
    writer.target_done(out, result);
  };
  return options;
}

// ---------------------------------------------------------------------------
// Reading a run directory back
// ---------------------------------------------------------------------------

struct StoredTarget {
  std::string id;
  std::string image_path;
  Rect bbox;
  TargetStatus status = TargetStatus::error;
  bool success = false;
  double clean_objectness = 0.0;
  double final_objectness = 0.0;
  double best_fitness = 0.0;
  long long queries = 0;
  std::string frame_path;  // absolute; empty when no frame was written
  PerturbationSpec best_spec;
  bool has_spec = false;
};

struct StoredRun {
  std::string dir;
  AttackConfig config;
  double threshold = 0.5;
  double asr = 0.0;
  int n = 0;
  double mean_queries = 0.0;
  std::vector<StoredTarget> targets;
};

inline TargetStatus target_status_from_string(const std::string& s) {
  if (s == "success") return TargetStatus::success;
  if (s == "failed") return TargetStatus::failed;
  if (s == "excluded") return TargetStatus::excluded;
  if (s == "error") return TargetStatus::error;
  throw InvalidParameter("unknown target status: " + s);
}

inline StoredRun load_run(const std::string& run_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(run_dir);
  if (!fs::is_directory(dir)) throw NotFound("no run directory: " + run_dir);
  const fs::path summary_path = dir / "summary.json";
  const fs::path manifest_path = dir / "run_manifest.json";
  if (!fs::exists(summary_path))
    throw NotFound("run directory has no summary.json: " + run_dir);

  StoredRun run;
  run.dir = fs::absolute(dir).string();
  const json manifest = parse_json_file(manifest_path.string());
  run.config = attack_config_from_json(manifest.at("config"));
  const json summary = parse_json_file(summary_path.string());
  run.asr = summary.at("asr").get<double>();
  run.n = summary.at("n").get<int>();
  run.mean_queries = summary.at("mean_queries").get<double>();
  run.threshold = summary.at("threshold").get<double>();
  for (const json& t : summary.at("per_target")) {
    StoredTarget st;
    st.id = t.at("id").get<std::string>();
    st.image_path = t.at("image").get<std::string>();
    st.bbox = rect_from_json(t.at("bbox"));
    st.status = target_status_from_string(t.at("status").get<std::string>());
    st.clean_objectness = t.at("clean_objectness").get<double>();
    if (st.status == TargetStatus::success ||
        st.status == TargetStatus::failed) {
      st.success = t.at("success").get<bool>();
      st.final_objectness = t.at("final_objectness").get<double>();
      st.best_fitness = t.at("best_fitness").get<double>();
      st.queries = t.at("queries").get<long long>();
      if (t.contains("best_spec") && !t["best_spec"].is_null()) {
        st.best_spec = spec_from_json(t["best_spec"]);
        st.has_spec = true;
      }
      if (t.contains("frame") && t["frame"].is_string())
        st.frame_path = (dir / t["frame"].get<std::string>()).string();
    }
    run.targets.push_back(std::move(st));
  }
  return run;
}

}  // namespace advig
