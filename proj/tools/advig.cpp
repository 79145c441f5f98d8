// Command-line front end: run attacks and ablations against a dataset
// manifest, evaluate and transfer finished runs, render results, and serve
// the mock detector over the wire protocol.

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <advig/advig.hpp>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGeneric = 1;
constexpr int kExitUsage = 2;
constexpr int kExitOracle = 3;
constexpr int kExitPartial = 4;
constexpr int kExitNotFound = 5;
constexpr int kExitBind = 6;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

int parse_int(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw advig::InvalidParameter(std::string("cannot parse ") + what + ": " +
                                  s);
  }
}

advig::Color parse_color(const std::string& s) {
  // Accepts R,G,B and R-G-B.
  const char sep = s.find(',') != std::string::npos ? ',' : '-';
  const std::vector<std::string> parts = split(s, sep);
  if (parts.size() != 3)
    throw advig::InvalidParameter("color must be R,G,B: " + s);
  int v[3];
  for (int i = 0; i < 3; ++i) {
    v[i] = parse_int(parts[i], "color channel");
    if (v[i] < 0 || v[i] > 255)
      throw advig::InvalidParameter("color channels must be in [0,255]: " + s);
  }
  return advig::Color{static_cast<std::uint8_t>(v[0]),
                      static_cast<std::uint8_t>(v[1]),
                      static_cast<std::uint8_t>(v[2])};
}

advig::TransformSet parse_scales(const std::string& s) {
  advig::TransformSet set;
  set.transforms.clear();
  for (const std::string& part : split(s, ',')) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(part, &pos);
      if (pos != part.size()) throw std::invalid_argument(part);
      set.transforms.push_back(advig::TransformSpec{v});
    } catch (const std::exception&) {
      throw advig::InvalidParameter("cannot parse scale: " + part);
    }
  }
  return set;
}

std::string shape_summary(const advig::ShapeFamily& family) {
  switch (family.kind) {
    case advig::ShapeKind::lines:
      return "lines (line_count " + std::to_string(family.line_count) +
             ", thickness " + std::to_string(family.thickness) +
             ", dimension " + std::to_string(family.dimension()) + ")";
    case advig::ShapeKind::polygon:
      return "polygon (edges " + std::to_string(family.edges) +
             ", dimension " + std::to_string(family.dimension()) + ")";
    case advig::ShapeKind::ellipse:
      return "ellipse (dimension " + std::to_string(family.dimension()) + ")";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Shared flag plumbing. Flags override the --config file, which overrides
// built-in defaults; only flags the user actually passed are applied.
// ---------------------------------------------------------------------------

struct ConfigFlags {
  std::string config_path;
  std::string shape;
  int line_count = 0;
  int edges = 0;
  int thickness = 0;
  std::string color;
  double alpha = 0;
  double threshold = 0;
  int population = 0;
  int iterations = 0;
  double omega = 0, c1 = 0, c2 = 0, r1 = 0, r2 = 0;
  std::string r_mode;
  double v_max = 0;
  std::string eot_scales;
  std::string oracle;
  std::string endpoint;
  double mock_beta = 0;
  int mock_dark_threshold = 0;
  long long timeout_ms = 0;
  int max_retries = 0;
  std::uint64_t seed = 0;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("--config", f.config_path,
                  "JSON config file; explicit flags override it");
  cmd->add_option("--shape", f.shape, "Perturbation family")
      ->check(CLI::IsMember({"lines", "polygon", "ellipse"}));
  cmd->add_option("--line-count", f.line_count, "Segments in a line attack");
  cmd->add_option("--edges", f.edges, "Vertices in a polygon attack");
  cmd->add_option("--thickness", f.thickness, "Line stroke thickness, pixels");
  cmd->add_option("--color", f.color, "Fill color R,G,B (default 0,0,0)");
  cmd->add_option("--alpha", f.alpha, "Fusion blend weight in (0,1]");
  cmd->add_option("--threshold", f.threshold,
                  "Objectness success threshold (default 0.5)");
  cmd->add_option("--population", f.population, "Swarm size");
  cmd->add_option("--iterations", f.iterations, "Iteration cap");
  cmd->add_option("--omega", f.omega, "Inertia weight");
  cmd->add_option("--c1", f.c1, "Personal-best factor");
  cmd->add_option("--c2", f.c2, "Global-best factor");
  cmd->add_option("--r1", f.r1, "Fixed r1 in [0,1]");
  cmd->add_option("--r2", f.r2, "Fixed r2 in [0,1]");
  cmd->add_option("--r-mode", f.r_mode, "r1/r2 mode: fixed or resampled")
      ->check(CLI::IsMember({"fixed", "resampled"}));
  cmd->add_option("--v-max", f.v_max,
                  "Velocity clamp per dimension; 0 derives it from the mask");
  cmd->add_option("--eot-scales", f.eot_scales,
                  "Enable scale robustness with these scales, e.g. "
                  "0.7,0.85,1.0,1.15,1.3 (must include 1.0)");
  cmd->add_option("--oracle", f.oracle, "Detector backend")
      ->check(CLI::IsMember({"mock", "remote"}));
  cmd->add_option("--endpoint", f.endpoint,
                  "Remote detector, scheme://host:port (or ADVIG_ENDPOINT)");
  cmd->add_option("--mock-beta", f.mock_beta, "Mock coverage slope");
  cmd->add_option("--mock-dark-threshold", f.mock_dark_threshold,
                  "Mock dark-pixel intensity threshold");
  cmd->add_option("--timeout-ms", f.timeout_ms, "Oracle timeout, ms");
  cmd->add_option("--max-retries", f.max_retries,
                  "Retries per fitness evaluation on oracle errors");
  cmd->add_option("--seed", f.seed, "Base RNG seed");
}

advig::AttackConfig build_config(const CLI::App* cmd, const ConfigFlags& f) {
  advig::AttackConfig cfg;
  if (cmd->count("--config"))
    cfg = advig::attack_config_from_json(
        advig::parse_json_file(f.config_path), cfg);
  if (cmd->count("--shape"))
    cfg.family.kind = advig::shape_kind_from_string(f.shape);
  if (cmd->count("--line-count")) cfg.family.line_count = f.line_count;
  if (cmd->count("--edges")) cfg.family.edges = f.edges;
  if (cmd->count("--thickness")) cfg.family.thickness = f.thickness;
  if (cmd->count("--color")) cfg.color = parse_color(f.color);
  if (cmd->count("--alpha")) cfg.alpha = f.alpha;
  if (cmd->count("--threshold")) cfg.threshold = f.threshold;
  if (cmd->count("--population")) cfg.hyper.population = f.population;
  if (cmd->count("--iterations")) cfg.hyper.iterations = f.iterations;
  if (cmd->count("--omega")) cfg.hyper.omega = f.omega;
  if (cmd->count("--c1")) cfg.hyper.c1 = f.c1;
  if (cmd->count("--c2")) cfg.hyper.c2 = f.c2;
  if (cmd->count("--r1")) cfg.hyper.r1 = f.r1;
  if (cmd->count("--r2")) cfg.hyper.r2 = f.r2;
  if (cmd->count("--r-mode"))
    cfg.hyper.r_mode = advig::r_mode_from_string(f.r_mode);
  if (cmd->count("--v-max")) cfg.hyper.v_max = f.v_max;
  if (cmd->count("--eot-scales")) {
    cfg.eot_enabled = true;
    cfg.eot = parse_scales(f.eot_scales);
  }
  if (cmd->count("--oracle"))
    cfg.oracle.backend = advig::oracle_backend_from_string(f.oracle);
  if (cmd->count("--endpoint")) cfg.oracle.endpoint = f.endpoint;
  if (cmd->count("--mock-beta")) cfg.oracle.mock_beta = f.mock_beta;
  if (cmd->count("--mock-dark-threshold"))
    cfg.oracle.mock_dark_threshold = f.mock_dark_threshold;
  if (cmd->count("--timeout-ms"))
    cfg.oracle.timeout = std::chrono::milliseconds(f.timeout_ms);
  if (cmd->count("--max-retries")) cfg.oracle.max_retries = f.max_retries;
  if (cmd->count("--seed")) cfg.seed = f.seed;

  if (cfg.oracle.backend == advig::OracleBackend::remote &&
      cfg.oracle.endpoint.empty()) {
    if (const char* env = std::getenv("ADVIG_ENDPOINT"))
      cfg.oracle.endpoint = env;
  }
  cfg.validate();
  return cfg;
}

advig::OracleConfig build_oracle_config(const CLI::App* cmd,
                                        const ConfigFlags& f) {
  advig::OracleConfig oracle;
  if (cmd->count("--oracle"))
    oracle.backend = advig::oracle_backend_from_string(f.oracle);
  if (cmd->count("--endpoint")) oracle.endpoint = f.endpoint;
  if (cmd->count("--mock-beta")) oracle.mock_beta = f.mock_beta;
  if (cmd->count("--mock-dark-threshold"))
    oracle.mock_dark_threshold = f.mock_dark_threshold;
  if (cmd->count("--timeout-ms"))
    oracle.timeout = std::chrono::milliseconds(f.timeout_ms);
  if (cmd->count("--max-retries")) oracle.max_retries = f.max_retries;
  if (oracle.backend == advig::OracleBackend::remote &&
      oracle.endpoint.empty()) {
    if (const char* env = std::getenv("ADVIG_ENDPOINT"))
      oracle.endpoint = env;
  }
  oracle.validate();
  return oracle;
}

int dataset_exit_code(const advig::DatasetReport& report) {
  if (report.errors == 0) return kExitOk;
  bool all_oracle = true;
  for (const advig::TargetOutcome& out : report.outcomes)
    if (out.status == advig::TargetStatus::error)
      all_oracle =
          all_oracle && out.message.find("oracle error") != std::string::npos;
  if (all_oracle && report.n == 0) return kExitOracle;
  return kExitPartial;
}

void print_report_lines(const advig::DatasetReport& report) {
  std::cout << "targets: " << report.n << " counted (" << report.successes
            << " success, " << (report.n - report.successes) << " failed), "
            << report.excluded << " excluded, " << report.errors
            << " errors\n";
  std::cout << "ASR: " << advig::detail::format_double(report.asr) << "\n";
  std::cout << "mean queries: "
            << advig::detail::format_double(report.mean_queries) << "\n";
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

struct AttackArgs {
  ConfigFlags config;
  std::string manifest_path;
  std::string out_dir = "advig_run";
  int workers = 1;
  bool filter_small = false;
};

int run_attack(const CLI::App* cmd, const AttackArgs& args) {
  const advig::AttackConfig cfg = build_config(cmd, args.config);
  const advig::DatasetManifest manifest =
      advig::load_manifest(args.manifest_path);
  const std::vector<advig::TargetRef> targets =
      advig::expand_targets(manifest, cfg.seed, args.filter_small);
  if (targets.empty()) {
    std::cerr << "error: no targets left after filtering\n";
    return kExitUsage;
  }

  advig::RunWriter writer(
      args.out_dir, cfg,
      std::filesystem::absolute(args.manifest_path).lexically_normal().string(),
      targets, args.workers, args.filter_small);

  advig::DatasetOptions options;
  options.workers = args.workers;
  options.filter_small = args.filter_small;
  options = advig::with_run_writer(std::move(options), writer, manifest);

  const advig::DatasetReport report =
      advig::attack_dataset(manifest, cfg, options);
  writer.finalize(report, cfg.threshold);

  std::cout << "shape: " << shape_summary(cfg.family) << "\n";
  print_report_lines(report);
  std::cout << "run: " << writer.dir() << "\n";
  return dataset_exit_code(report);
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

advig::json eval_report_json(const advig::EvalReport& report) {
  advig::json per_target = advig::json::array();
  for (const advig::PerTargetEval& t : report.per_target)
    per_target.push_back(advig::json{{"id", t.id},
                                     {"final_objectness", t.final_objectness},
                                     {"success", t.success},
                                     {"queries", t.queries}});
  advig::json j{{"asr", report.asr},
                {"n", report.n},
                {"mean_queries", report.mean_queries},
                {"per_target", std::move(per_target)}};
  if (!report.errors.empty()) j["errors"] = report.errors;
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw advig::Error("cannot write " + path);
  out << text;
}

int run_eval(const std::string& run_dir) {
  const advig::StoredRun run = advig::load_run(run_dir);
  const advig::EvalReport report = advig::eval_run(run);
  const std::string out_path =
      (std::filesystem::path(run_dir) / "eval_report.json").string();
  write_text_file(out_path, eval_report_json(report).dump(2) + "\n");
  std::cout << "n: " << report.n << "\n";
  std::cout << "ASR: " << advig::detail::format_double(report.asr) << "\n";
  std::cout << "mean queries: "
            << advig::detail::format_double(report.mean_queries) << "\n";
  std::cout << "report: " << out_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// transfer
// ---------------------------------------------------------------------------

struct TransferArgs {
  ConfigFlags config;
  std::string run_dir;
  std::string out_path;
};

int run_transfer(const CLI::App* cmd, const TransferArgs& args) {
  const advig::OracleConfig oracle = build_oracle_config(cmd, args.config);
  const advig::EvalReport report = advig::transfer_eval(args.run_dir, oracle);
  const std::string out_path =
      args.out_path.empty()
          ? (std::filesystem::path(args.run_dir) / "transfer_report.json")
                .string()
          : args.out_path;
  write_text_file(out_path, eval_report_json(report).dump(2) + "\n");
  std::cout << "transferred samples: " << report.n << "\n";
  std::cout << "ASR: " << advig::detail::format_double(report.asr) << "\n";
  std::cout << "report: " << out_path << "\n";
  for (const std::string& err : report.errors)
    std::cerr << "skipped: " << err << "\n";
  return report.errors.empty() ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateArgs {
  ConfigFlags config;
  std::string manifest_path;
  std::string out_dir = "advig_ablation";
  std::string axis = "line_count";
  std::string values;
  int workers = 1;
  bool filter_small = false;
};

advig::AblationValues parse_ablation_values(const std::string& axis_s,
                                            const std::string& values_s) {
  advig::AblationValues values;
  values.axis = advig::ablation_axis_from_string(axis_s);
  if (values_s.empty()) {
    switch (values.axis) {
      case advig::AblationAxis::line_count:
        values.counts = {1, 2, 3, 4, 5, 6, 7};
        break;
      case advig::AblationAxis::polygon_edges:
        values.counts = {3, 4, 5, 6, 7, 8, 9};
        break;
      case advig::AblationAxis::color:
        values.colors = advig::ablation_colors();
        break;
    }
  } else {
    for (const std::string& part : split(values_s, ',')) {
      if (values.axis == advig::AblationAxis::color)
        values.colors.push_back(parse_color(part));
      else
        values.counts.push_back(parse_int(part, "ablation value"));
    }
  }
  values.validate();
  return values;
}

int run_ablate(const CLI::App* cmd, const AblateArgs& args) {
  const advig::AttackConfig base = build_config(cmd, args.config);
  const advig::DatasetManifest manifest =
      advig::load_manifest(args.manifest_path);
  const advig::AblationValues values =
      parse_ablation_values(args.axis, args.values);
  const std::string manifest_abs =
      std::filesystem::absolute(args.manifest_path).lexically_normal().string();

  bool any_partial = false;
  std::vector<std::unique_ptr<advig::RunWriter>> writers;

  const auto row_options = [&](std::size_t i, const std::string& label) {
    const advig::AttackConfig row_cfg =
        advig::ablation_row_config(base, values, i);
    const std::vector<advig::TargetRef> targets =
        advig::expand_targets(manifest, row_cfg.seed, args.filter_small);
    const std::string row_dir =
        (std::filesystem::path(args.out_dir) / "rows" / label).string();
    writers.push_back(std::make_unique<advig::RunWriter>(
        row_dir, row_cfg, manifest_abs, targets, args.workers,
        args.filter_small));
    advig::DatasetOptions options;
    options.workers = args.workers;
    options.filter_small = args.filter_small;
    return advig::with_run_writer(std::move(options), *writers.back(),
                                  manifest);
  };
  const auto on_row = [&](std::size_t i, const std::string& label,
                          const advig::DatasetReport& report) {
    writers.back()->finalize(report,
                             advig::ablation_row_config(base, values, i)
                                 .threshold);
    any_partial = any_partial || report.partial_failure();
    std::cout << "row " << label << ": ASR "
              << advig::detail::format_double(report.asr) << ", mean queries "
              << advig::detail::format_double(report.mean_queries) << "\n";
  };

  const std::vector<advig::AblationRow> rows = advig::ablate(
      manifest, base, values, advig::DatasetOptions{}, row_options, on_row);

  std::filesystem::create_directories(args.out_dir);
  write_text_file(
      (std::filesystem::path(args.out_dir) / "ablation.csv").string(),
      advig::ablation_csv(rows));
  write_text_file(
      (std::filesystem::path(args.out_dir) / "ablation.json").string(),
      advig::ablation_json(values.axis, rows).dump(2) + "\n");
  std::cout << "table: "
            << (std::filesystem::path(args.out_dir) / "ablation.csv").string()
            << "\n";
  return any_partial ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

struct RenderArgs {
  std::string run_dir;
  std::string target_id;
  std::string out_dir;
};

int run_render(const RenderArgs& args) {
  const advig::StoredRun run = advig::load_run(args.run_dir);
  const advig::StoredTarget* chosen = nullptr;
  for (const advig::StoredTarget& t : run.targets) {
    if (!args.target_id.empty()) {
      if (t.id == args.target_id) {
        chosen = &t;
        break;
      }
    } else if (t.status == advig::TargetStatus::success) {
      chosen = &t;
      break;
    }
  }
  if (!chosen)
    throw advig::NotFound(args.target_id.empty()
                              ? "run has no successful target to render"
                              : "no such target in run: " + args.target_id);
  if (chosen->status != advig::TargetStatus::success &&
      chosen->status != advig::TargetStatus::failed)
    throw advig::NotFound("target '" + chosen->id + "' was not evaluated");

  const advig::Frame clean = advig::read_frame(chosen->image_path);
  advig::Frame adv;
  if (!chosen->frame_path.empty() &&
      std::filesystem::exists(chosen->frame_path)) {
    adv = advig::read_frame(chosen->frame_path);
  } else if (chosen->has_spec) {
    const advig::Mask mask =
        advig::Mask::from_rect(clean.width, clean.height, chosen->bbox);
    adv = advig::render_adversarial(clean, chosen->best_spec, mask,
                                    run.config.alpha);
  } else {
    throw advig::NotFound("target '" + chosen->id +
                          "' has neither a saved frame nor a spec");
  }

  const int gap = 4;
  advig::Frame composite = advig::Frame::constant(
      clean.width * 2 + gap, clean.height, clean.channels, 128);
  for (int y = 0; y < clean.height; ++y)
    for (int x = 0; x < clean.width; ++x)
      for (int c = 0; c < clean.channels; ++c) {
        composite.at(x, y, c) = clean.at(x, y, c);
        composite.at(clean.width + gap + x, y, c) = adv.at(x, y, c);
      }

  const std::string out_dir =
      args.out_dir.empty()
          ? (std::filesystem::path(args.run_dir) / "render").string()
          : args.out_dir;
  std::filesystem::create_directories(out_dir);
  const std::string ext = clean.channels == 1 ? ".pgm" : ".ppm";
  const std::string adv_path =
      (std::filesystem::path(out_dir) / (chosen->id + "_adv" + ext)).string();
  const std::string composite_path =
      (std::filesystem::path(out_dir) / (chosen->id + "_composite" + ext))
          .string();
  advig::write_frame(adv_path, adv);
  advig::write_frame(composite_path, composite);
  std::cout << "adversarial: " << adv_path << "\n";
  std::cout << "composite: " << composite_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// mock-serve
// ---------------------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8787;
  std::string manifest_path;
  std::string targets;   // x1,y1,x2,y2[;...]
  std::string ref_dims;  // WxH
  double mock_beta = 2.0;
  int mock_dark_threshold = 64;
};

advig::MockServer* g_server = nullptr;

void handle_signal(int) {
  if (g_server) g_server->stop();
}

int run_mock_serve(const CLI::App* cmd, const ServeArgs& args) {
  advig::OracleConfig oracle;
  oracle.backend = advig::OracleBackend::mock;
  oracle.mock_beta = args.mock_beta;
  oracle.mock_dark_threshold = args.mock_dark_threshold;

  if (cmd->count("--manifest")) {
    const advig::DatasetManifest manifest =
        advig::load_manifest(args.manifest_path);
    for (const advig::ManifestEntry& entry : manifest.entries)
      for (const advig::Rect& box : entry.boxes)
        oracle.mock_targets.push_back(box);
    oracle.mock_ref_dims =
        advig::read_frame(manifest.entries.front().image_path).dims();
  }
  if (cmd->count("--targets")) {
    for (const std::string& box_s : split(args.targets, ';')) {
      const std::vector<std::string> parts = split(box_s, ',');
      if (parts.size() != 4)
        throw advig::InvalidParameter("box must be x1,y1,x2,y2: " + box_s);
      oracle.mock_targets.push_back(advig::Rect{
          parse_int(parts[0], "box"), parse_int(parts[1], "box"),
          parse_int(parts[2], "box"), parse_int(parts[3], "box")});
    }
  }
  if (cmd->count("--ref-dims")) {
    const std::vector<std::string> parts = split(args.ref_dims, 'x');
    if (parts.size() != 2)
      throw advig::InvalidParameter("ref dims must be WxH: " + args.ref_dims);
    oracle.mock_ref_dims = advig::FrameDims{parse_int(parts[0], "ref dims"),
                                            parse_int(parts[1], "ref dims")};
  }
  oracle.validate();

  advig::MockServer server(oracle);
  const int port = server.bind(args.host, args.port);
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::cout << "serving mock detector on http://" << args.host << ":" << port
            << " (" << oracle.mock_targets.size() << " registered targets)"
            << std::endl;
  server.serve_blocking();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-based vanish attack on object detectors: optimizes "
               "geometric perturbations until the detector loses the target."};
  app.set_version_flag("--version", advig::kVersion);
  app.require_subcommand(1);

  AttackArgs attack_args;
  CLI::App* attack_cmd = app.add_subcommand(
      "attack", "Optimize perturbations for every target in a manifest");
  add_config_flags(attack_cmd, attack_args.config);
  attack_cmd->add_option("--manifest", attack_args.manifest_path,
                         "Dataset manifest JSON")
      ->required();
  attack_cmd->add_option("--out", attack_args.out_dir,
                         "Run directory (default advig_run)");
  attack_cmd->add_option("--workers", attack_args.workers,
                         "Concurrent dataset targets");
  attack_cmd->add_flag("--filter-small", attack_args.filter_small,
                       "Keep only targets taller than 120 px");

  std::string eval_run_dir;
  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "Recompute metrics from a run directory's records");
  eval_cmd->add_option("--run", eval_run_dir, "Run directory")->required();

  TransferArgs transfer_args;
  CLI::App* transfer_cmd = app.add_subcommand(
      "transfer",
      "Re-query a run's successful adversarial frames against another oracle");
  add_config_flags(transfer_cmd, transfer_args.config);
  transfer_cmd->add_option("--run", transfer_args.run_dir, "Source run directory")
      ->required();
  transfer_cmd->add_option("--out", transfer_args.out_path,
                           "Report path (default <run>/transfer_report.json)");

  AblateArgs ablate_args;
  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate", "Sweep one axis (line_count, polygon_edges, color)");
  add_config_flags(ablate_cmd, ablate_args.config);
  ablate_cmd->add_option("--manifest", ablate_args.manifest_path,
                         "Dataset manifest JSON")
      ->required();
  ablate_cmd->add_option("--out", ablate_args.out_dir,
                         "Output directory (default advig_ablation)");
  ablate_cmd->add_option("--axis", ablate_args.axis, "Axis to sweep")
      ->check(CLI::IsMember({"line_count", "polygon_edges", "color"}));
  ablate_cmd->add_option(
      "--values", ablate_args.values,
      "Comma-separated axis values (colors as R-G-B); default full range");
  ablate_cmd->add_option("--workers", ablate_args.workers,
                         "Concurrent dataset targets");
  ablate_cmd->add_flag("--filter-small", ablate_args.filter_small,
                       "Keep only targets taller than 120 px");

  RenderArgs render_args;
  CLI::App* render_cmd = app.add_subcommand(
      "render", "Write the adversarial frame and a clean/adversarial composite");
  render_cmd->add_option("--run", render_args.run_dir, "Run directory")
      ->required();
  render_cmd->add_option("--target", render_args.target_id,
                         "Target id (default: first successful)");
  render_cmd->add_option("--out", render_args.out_dir,
                         "Output directory (default <run>/render)");

  ServeArgs serve_args;
  CLI::App* serve_cmd = app.add_subcommand(
      "mock-serve", "Serve the mock detector over the wire protocol");
  serve_cmd->add_option("--host", serve_args.host, "Bind address");
  serve_cmd->add_option("--port", serve_args.port,
                        "Port; 0 picks a free port");
  serve_cmd->add_option("--manifest", serve_args.manifest_path,
                        "Register every box of this manifest");
  serve_cmd->add_option("--targets", serve_args.targets,
                        "Register boxes x1,y1,x2,y2 separated by ';'");
  serve_cmd->add_option("--ref-dims", serve_args.ref_dims,
                        "Reference dimensions WxH for registered boxes");
  serve_cmd->add_option("--mock-beta", serve_args.mock_beta,
                        "Mock coverage slope");
  serve_cmd->add_option("--mock-dark-threshold",
                        serve_args.mock_dark_threshold,
                        "Mock dark-pixel intensity threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (attack_cmd->parsed()) return run_attack(attack_cmd, attack_args);
    if (eval_cmd->parsed()) return run_eval(eval_run_dir);
    if (transfer_cmd->parsed()) return run_transfer(transfer_cmd, transfer_args);
    if (ablate_cmd->parsed()) return run_ablate(ablate_cmd, ablate_args);
    if (render_cmd->parsed()) return run_render(render_args);
    if (serve_cmd->parsed()) return run_mock_serve(serve_cmd, serve_args);
  } catch (const advig::BindError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBind;
  } catch (const advig::NotFound& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNotFound;
  } catch (const advig::OracleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOracle;
  } catch (const advig::AbortedRun& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOracle;
  } catch (const advig::InvalidParameter& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGeneric;
  }
  return kExitGeneric;
}
