#pragma once

// Success-rate metric, transfer evaluation of saved adversarial frames
// against a second oracle, and the single-axis ablation harness.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "advig/attack.hpp"
#include "advig/detector.hpp"
#include "advig/error.hpp"
#include "advig/run_store.hpp"

namespace advig {

/// Success rate over final objectness values: a target counts as attacked
/// iff its objectness is strictly below the threshold; sitting exactly at
/// the threshold is still a detection.
inline double compute_asr(const std::vector<double>& objectness_values,
                          double threshold = 0.5) {
  if (objectness_values.empty())
    throw InvalidParameter("success rate over zero targets is undefined");
  if (!(threshold > 0.0) || !(threshold < 1.0))
    throw InvalidParameter("threshold must lie in (0,1)");
  std::size_t detected = 0;
  for (double y : objectness_values)
    if (!(y < threshold)) ++detected;
  return 1.0 -
         static_cast<double>(detected) / static_cast<double>(objectness_values.size());
}

struct PerTargetEval {
  std::string id;
  double final_objectness = 0.0;
  bool success = false;
  long long queries = 0;
};

struct EvalReport {
  double asr = 0.0;
  int n = 0;
  double mean_queries = 0.0;
  std::vector<PerTargetEval> per_target;
  std::vector<std::string> errors;  // skipped entries, one message each
};

namespace detail {

inline EvalReport finish_report(EvalReport report, double threshold) {
  report.n = static_cast<int>(report.per_target.size());
  if (report.n == 0) return report;
  std::vector<double> values;
  long long query_sum = 0;
  for (const PerTargetEval& t : report.per_target) {
    values.push_back(t.final_objectness);
    query_sum += t.queries;
  }
  report.asr = compute_asr(values, threshold);
  report.mean_queries =
      static_cast<double>(query_sum) / static_cast<double>(report.n);
  return report;
}

}  // namespace detail

/// Report over a finished run's persisted records, no re-querying: the
/// stored per-target objectness against the stored threshold.
inline EvalReport eval_run(const StoredRun& run) {
  EvalReport report;
  for (const StoredTarget& t : run.targets) {
    if (t.status != TargetStatus::success && t.status != TargetStatus::failed)
      continue;
    report.per_target.push_back(
        PerTargetEval{t.id, t.final_objectness, t.success, t.queries});
  }
  return detail::finish_report(std::move(report), run.threshold);
}

/// Re-query the saved adversarial frames of a run's successful attacks
/// against a second oracle; the run's own transform set and threshold
/// apply. One query per frame per transform.
inline EvalReport transfer_eval(const std::string& run_dir,
                                const OracleConfig& second_oracle) {
  const StoredRun run = load_run(run_dir);
  EvalReport report;
  for (const StoredTarget& t : run.targets) {
    if (t.status != TargetStatus::success || !t.success) continue;
    try {
      if (t.frame_path.empty())
        throw NotFound("no saved frame for target " + t.id);
      const Frame adv = read_frame(t.frame_path);
      OracleConfig oracle = second_oracle;
      if (oracle.backend == OracleBackend::mock && oracle.mock_targets.empty()) {
        oracle.mock_targets = {t.bbox};
        oracle.mock_ref_dims = adv.dims();
      }
      QueryLedger ledger;
      AttackConfig probe;
      probe.eot_enabled = run.config.eot_enabled;
      probe.eot = run.config.eot;
      probe.oracle = oracle;
      const std::vector<double> per_transform =
          advig::detail::objectness_per_transform(adv, adv, t.bbox, probe,
                                                  ledger);
      double sum = 0.0;
      for (double v : per_transform) sum += v;
      const double objectness =
          sum / static_cast<double>(per_transform.size());
      report.per_target.push_back(PerTargetEval{
          t.id, objectness, objectness < run.threshold, ledger.count()});
    } catch (const std::exception& e) {
      report.errors.push_back(t.id + ": " + e.what());
    }
  }
  return detail::finish_report(std::move(report), run.threshold);
}

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

enum class AblationAxis { line_count, polygon_edges, color };

inline const char* to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::line_count: return "line_count";
    case AblationAxis::polygon_edges: return "polygon_edges";
    case AblationAxis::color: return "color";
  }
  return "unknown";
}

inline AblationAxis ablation_axis_from_string(const std::string& s) {
  if (s == "line_count") return AblationAxis::line_count;
  if (s == "polygon_edges") return AblationAxis::polygon_edges;
  if (s == "color") return AblationAxis::color;
  throw InvalidParameter("unknown ablation axis: " + s);
}

/// Values for one ablation axis; counts for the structural axes, colors
/// for the color axis.
struct AblationValues {
  AblationAxis axis = AblationAxis::line_count;
  std::vector<int> counts;
  std::vector<Color> colors;

  std::size_t size() const {
    return axis == AblationAxis::color ? colors.size() : counts.size();
  }
  void validate() const {
    switch (axis) {
      case AblationAxis::line_count:
        if (counts.empty()) throw InvalidParameter("no line counts given");
        for (int v : counts)
          if (v < 1 || v > 7)
            throw InvalidParameter("line count must be in [1,7]");
        break;
      case AblationAxis::polygon_edges:
        if (counts.empty()) throw InvalidParameter("no edge counts given");
        for (int v : counts)
          if (v < 3 || v > 9)
            throw InvalidParameter("edge count must be in [3,9]");
        break;
      case AblationAxis::color:
        if (colors.empty()) throw InvalidParameter("no colors given");
        for (Color c : colors)
          if (c.r != c.g || c.g != c.b)
            throw InvalidParameter("ablation colors must be grayscale triples");
        break;
    }
  }
};

/// The grayscale ladder used for the color ablation.
inline std::vector<Color> ablation_colors() {
  std::vector<Color> out;
  for (int v : {0, 51, 102, 153, 204, 255}) {
    const auto u = static_cast<std::uint8_t>(v);
    out.push_back(Color{u, u, u});
  }
  return out;
}

struct AblationRow {
  std::string label;
  double asr = 0.0;
  double mean_queries = 0.0;
  int n = 0;
  int successes = 0;
};

inline std::string ablation_label(const AblationValues& values,
                                  std::size_t index) {
  if (values.axis == AblationAxis::color) {
    const Color c = values.colors[index];
    return std::to_string(c.r) + "-" + std::to_string(c.g) + "-" +
           std::to_string(c.b);
  }
  return std::to_string(values.counts[index]);
}

/// Base config with one axis value applied.
inline AttackConfig apply_ablation_value(AttackConfig config,
                                         const AblationValues& values,
                                         std::size_t index) {
  switch (values.axis) {
    case AblationAxis::line_count:
      config.family.kind = ShapeKind::lines;
      config.family.line_count = values.counts[index];
      break;
    case AblationAxis::polygon_edges:
      config.family.kind = ShapeKind::polygon;
      config.family.edges = values.counts[index];
      break;
    case AblationAxis::color:
      config.color = values.colors[index];
      break;
  }
  return config;
}

/// Full row config: the axis value applied over the base, with the row seed
/// base_seed XOR row index — so row 0 reproduces a plain run with the base
/// seed and rows are mutually independent.
inline AttackConfig ablation_row_config(const AttackConfig& base,
                                        const AblationValues& values,
                                        std::size_t index) {
  AttackConfig config = apply_ablation_value(base, values, index);
  config.seed = base.seed ^ static_cast<std::uint64_t>(index);
  return config;
}

/// One full dataset run per axis value, everything else held fixed.
/// row_options may supply per-row dataset callbacks (e.g. a per-row run
/// directory); on_row sees each finished row's full report.
inline std::vector<AblationRow> ablate(
    const DatasetManifest& manifest, const AttackConfig& base,
    const AblationValues& values, const DatasetOptions& options = {},
    const std::function<DatasetOptions(std::size_t, const std::string&)>&
        row_options = {},
    const std::function<void(std::size_t, const std::string&,
                             const DatasetReport&)>& on_row = {}) {
  values.validate();
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const AttackConfig config = ablation_row_config(base, values, i);
    const std::string label = ablation_label(values, i);
    const DatasetReport report = attack_dataset(
        manifest, config, row_options ? row_options(i, label) : options);
    if (on_row) on_row(i, label, report);
    rows.push_back(AblationRow{label, report.asr, report.mean_queries,
                               report.n, report.successes});
  }
  return rows;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string csv = "value,asr,mean_queries,n,successes\n";
  for (const AblationRow& r : rows)
    csv += r.label + "," + detail::format_double(r.asr) + "," +
           detail::format_double(r.mean_queries) + "," + std::to_string(r.n) +
           "," + std::to_string(r.successes) + "\n";
  return csv;
}

inline json ablation_json(AblationAxis axis,
                          const std::vector<AblationRow>& rows) {
  json arr = json::array();
  for (const AblationRow& r : rows)
    arr.push_back(json{{"value", r.label},
                       {"asr", r.asr},
                       {"mean_queries", r.mean_queries},
                       {"n", r.n},
                       {"successes", r.successes}});
  return json{{"axis", to_string(axis)}, {"rows", std::move(arr)}};
}

}  // namespace advig
