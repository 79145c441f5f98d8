#pragma once

// End-to-end vanish attack: fitness evaluation through the oracle, the
// swarm optimization loop with early stopping, query accounting, and the
// dataset driver that feeds the success-rate metric.

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "advig/detail/rng.hpp"
#include "advig/detector.hpp"
#include "advig/error.hpp"
#include "advig/geometry.hpp"
#include "advig/imaging.hpp"
#include "advig/optimizer.hpp"
#include "advig/remote.hpp"

namespace advig {

/// Everything one attack run needs. The transform set only participates
/// when eot_enabled is true; digital attacks default to the identity.
struct AttackConfig {
  ShapeFamily family;
  Color color{};              // default black
  double alpha = 1.0;         // fusion blend weight
  PsoHyper hyper;
  double threshold = 0.5;
  bool eot_enabled = false;
  TransformSet eot = default_transform_set();
  OracleConfig oracle;
  std::uint64_t seed = 0;

  int transform_count() const {
    return eot_enabled ? static_cast<int>(eot.size()) : 1;
  }
  void validate() const {
    family.validate();
    hyper.validate();
    oracle.validate();
    if (!(threshold > 0.0) || !(threshold < 1.0))
      throw InvalidParameter("threshold must lie in (0,1)");
    if (!(alpha > 0.0) || alpha > 1.0)
      throw InvalidParameter("fusion alpha must be in (0,1]");
    if (eot_enabled) eot.validate();
  }
};

/// Outcome of one single-target attack. `queries` counts only the
/// optimization loop's forward passes; the precondition gate and the final
/// success verification are accounted separately so the loop count stays
/// exactly iterations_run x population x transform_count.
struct AttackResult {
  bool success = false;
  long long queries = 0;
  long long gate_queries = 0;
  long long verify_queries = 0;
  PerturbationSpec best_spec;
  double best_fitness = kUnevaluated;
  std::vector<double> fitness_trace;
  Frame adv_frame;
  int iterations_run = 0;
  double clean_objectness = 0.0;
  double final_objectness = 0.0;                  // mean over transforms
  std::vector<double> per_transform_objectness;   // verification detail
};

/// Streamed to the caller after each optimization iteration; drives the
/// append-only run records.
struct IterationEvent {
  int iteration = 0;  // 1-based
  double global_best_fitness = kUnevaluated;
  long long queries = 0;
};

using IterationCallback = std::function<void(const IterationEvent&)>;

namespace detail {

inline BBoxd transformed_target(const Rect& target_bbox, const Frame& original,
                                const Frame& transformed) {
  const double rx =
      static_cast<double>(transformed.width) / original.width;
  const double ry =
      static_cast<double>(transformed.height) / original.height;
  return BBoxd::of(target_bbox).scaled(rx, ry);
}

// Queries every transform of the fused frame once and returns the matched
// objectness per transform. Throws OracleError after the retry budget.
inline std::vector<double> objectness_per_transform(
    const Frame& fused, const Frame& clean_reference, const Rect& target_bbox,
    const AttackConfig& config, QueryLedger& ledger) {
  const int attempts = 1 + std::max(0, config.oracle.max_retries);
  for (int attempt = 0;; ++attempt) {
    try {
      std::vector<double> per_transform;
      if (config.eot_enabled) {
        for (const TransformSpec& t : config.eot.transforms) {
          const Frame view = apply_transform(fused, t);
          const std::vector<Detection> dets =
              query(view, config.oracle, ledger);
          per_transform.push_back(match_target(
              dets, transformed_target(target_bbox, clean_reference, view)));
        }
      } else {
        const std::vector<Detection> dets = query(fused, config.oracle, ledger);
        per_transform.push_back(match_target(dets, target_bbox));
      }
      return per_transform;
    } catch (const OracleError&) {
      if (attempt + 1 >= attempts) throw;
    }
  }
}

}  // namespace detail

/// Render a spec against the mask and fuse it onto the clean frame.
inline Frame render_adversarial(const Frame& clean,
                                const PerturbationSpec& spec, const Mask& mask,
                                double alpha = 1.0) {
  const PixelSet shape = rasterize(spec.shape, clean.dims());
  return fuse(clean, clip_to_mask(shape, mask), spec.color, alpha);
}

/// Fitness of one candidate: rasterize, clip to the mask, fuse, expand over
/// the transform set, query each view, and average the matched objectness.
/// Lower is better; the attack succeeds once this drops below threshold.
inline double fitness(const Frame& clean, const PerturbationSpec& spec,
                      const Mask& mask, const Rect& target_bbox,
                      const AttackConfig& config, QueryLedger& ledger) {
  if (mask.width != clean.width || mask.height != clean.height)
    throw InvalidParameter("mask dimensions do not match frame");
  const Frame fused = render_adversarial(clean, spec, mask, config.alpha);
  const std::vector<double> per_transform =
      detail::objectness_per_transform(fused, clean, target_bbox, config,
                                       ledger);
  double sum = 0.0;
  for (double v : per_transform) sum += v;
  return sum / static_cast<double>(per_transform.size());
}

/// Optimize one target. Precondition: the clean frame's matched objectness
/// reaches the threshold (otherwise TargetNotDetected — the target does not
/// count toward the metric). The loop stops early the first time the global
/// best fitness falls below threshold; success is then re-verified from the
/// rendered frame, and under the transform set every single view must be
/// below threshold.
inline AttackResult attack_single(const Frame& clean, const Mask& mask,
                                  const Rect& target_bbox,
                                  const AttackConfig& config,
                                  const IterationCallback& on_iteration = {}) {
  config.validate();
  if (!clean.valid()) throw InvalidParameter("invalid clean frame");
  if (mask.width != clean.width || mask.height != clean.height)
    throw InvalidParameter("mask dimensions do not match frame");
  if (target_bbox.empty() ||
      target_bbox != target_bbox.intersect(clean.dims().as_rect()))
    throw InvalidParameter("target box must be non-empty and inside the frame");
  const Rect bbox = mask_bbox(mask);
  if (bbox.empty()) throw InvalidParameter("mask admits no pixels");

  AttackResult result;

  QueryLedger gate_ledger;
  const std::vector<Detection> clean_dets =
      query(clean, config.oracle, gate_ledger);
  result.gate_queries = gate_ledger.count();
  result.clean_objectness = match_target(clean_dets, target_bbox);
  if (result.clean_objectness < config.threshold)
    throw TargetNotDetected(result.clean_objectness);

  Swarm swarm = init_swarm(config.family, bbox, config.hyper, config.seed);
  QueryLedger loop_ledger;
  const std::size_t population = swarm.particles.size();

  for (int iter = 1; iter <= config.hyper.iterations; ++iter) {
    std::vector<double> fitnesses(population, 0.0);
    for (std::size_t a = 0; a < population; ++a) {
      const PerturbationSpec spec = decode(swarm.particles[a].position,
                                           config.family, bbox, config.color);
      try {
        fitnesses[a] =
            fitness(clean, spec, mask, target_bbox, config, loop_ledger);
      } catch (const OracleError& e) {
        throw AbortedRun(std::string("attack aborted: ") + e.what(),
                         result.fitness_trace,
                         static_cast<unsigned long long>(loop_ledger.count()));
      }
    }
    update_bests(swarm, fitnesses);
    result.fitness_trace.push_back(swarm.global_best_fitness);
    result.iterations_run = iter;
    if (on_iteration)
      on_iteration(IterationEvent{iter, swarm.global_best_fitness,
                                  loop_ledger.count()});
    if (swarm.global_best_fitness < config.threshold) break;
    step(swarm, config.hyper);
  }

  result.queries = loop_ledger.count();
  result.best_fitness = swarm.global_best_fitness;
  result.best_spec =
      decode(swarm.global_best_position, config.family, bbox, config.color);
  result.adv_frame =
      render_adversarial(clean, result.best_spec, mask, config.alpha);

  QueryLedger verify_ledger;
  result.per_transform_objectness = detail::objectness_per_transform(
      result.adv_frame, clean, target_bbox, config, verify_ledger);
  result.verify_queries = verify_ledger.count();
  double sum = 0.0;
  bool all_below = true;
  for (double v : result.per_transform_objectness) {
    sum += v;
    all_below = all_below && v < config.threshold;
  }
  result.final_objectness =
      sum / static_cast<double>(result.per_transform_objectness.size());
  result.success = result.best_fitness < config.threshold &&
                   (!config.eot_enabled || all_below);
  return result;
}

// ---------------------------------------------------------------------------
// Dataset driver
// ---------------------------------------------------------------------------

/// One image plus its annotated target boxes.
struct ManifestEntry {
  std::string id;
  std::string image_path;
  std::vector<Rect> boxes;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

/// One attackable target after manifest expansion.
struct TargetRef {
  std::string target_id;
  std::size_t entry_index = 0;
  std::size_t box_index = 0;
  Rect bbox;
  std::uint64_t seed = 0;
};

enum class TargetStatus { success, failed, excluded, error };

inline const char* to_string(TargetStatus s) {
  switch (s) {
    case TargetStatus::success: return "success";
    case TargetStatus::failed: return "failed";
    case TargetStatus::excluded: return "excluded";
    case TargetStatus::error: return "error";
  }
  return "unknown";
}

/// Per-target record row. Counted targets (success/failed) form the metric
/// denominator; excluded targets were never detected on the clean frame;
/// error targets could not be evaluated at all.
struct TargetOutcome {
  std::string target_id;
  std::string image_path;
  Rect bbox;
  std::uint64_t seed = 0;
  TargetStatus status = TargetStatus::error;
  double clean_objectness = 0.0;
  double final_objectness = 0.0;
  double best_fitness = kUnevaluated;
  long long queries = 0;
  long long gate_queries = 0;
  long long verify_queries = 0;
  int iterations_run = 0;
  std::string message;
  PerturbationSpec best_spec;
  std::vector<double> fitness_trace;
};

struct DatasetReport {
  std::vector<TargetOutcome> outcomes;  // manifest order
  int n = 0;          // counted targets
  int successes = 0;
  int excluded = 0;
  int errors = 0;
  double asr = 0.0;
  double mean_queries = 0.0;
  bool partial_failure() const { return errors > 0; }
};

struct DatasetOptions {
  int workers = 1;
  bool filter_small = false;  // keep only boxes taller than 120 px
  std::function<void(const TargetRef&)> on_target_begin;
  std::function<void(const TargetRef&, const IterationEvent&)> on_iteration;
  std::function<void(const TargetOutcome&, const AttackResult*)> on_target_done;
};

inline constexpr int kSmallTargetHeight = 120;

/// Expand a manifest into per-target work items. Target seeds derive from
/// the base seed and the target's ordinal among the kept targets, so runs
/// are reproducible and targets are independent.
inline std::vector<TargetRef> expand_targets(const DatasetManifest& manifest,
                                             std::uint64_t base_seed,
                                             bool filter_small) {
  std::vector<TargetRef> targets;
  for (std::size_t e = 0; e < manifest.entries.size(); ++e) {
    const ManifestEntry& entry = manifest.entries[e];
    if (entry.boxes.empty())
      throw InvalidParameter("manifest entry '" + entry.id +
                             "' has no target boxes");
    for (std::size_t b = 0; b < entry.boxes.size(); ++b) {
      const Rect& box = entry.boxes[b];
      if (box.empty())
        throw InvalidParameter("manifest entry '" + entry.id +
                               "' has an empty box");
      if (filter_small && box.height() <= kSmallTargetHeight) continue;
      TargetRef ref;
      ref.target_id = entry.boxes.size() == 1
                          ? entry.id
                          : entry.id + "_t" + std::to_string(b);
      ref.entry_index = e;
      ref.box_index = b;
      ref.bbox = box;
      ref.seed = detail::mix_seed(base_seed, targets.size());
      targets.push_back(std::move(ref));
    }
  }
  return targets;
}

/// Attack every kept target of the manifest. Entries attack independently;
/// `workers` bounds concurrency, and outcomes land in manifest order
/// regardless of scheduling.
inline DatasetReport attack_dataset(const DatasetManifest& manifest,
                                    const AttackConfig& config,
                                    const DatasetOptions& options = {}) {
  config.validate();
  if (options.workers < 1) throw InvalidParameter("workers must be >= 1");

  const std::vector<TargetRef> targets =
      expand_targets(manifest, config.seed, options.filter_small);

  DatasetReport report;
  report.outcomes.resize(targets.size());
  std::vector<std::unique_ptr<AttackResult>> results(targets.size());

  const auto run_one = [&](std::size_t i) {
    const TargetRef& ref = targets[i];
    const ManifestEntry& entry = manifest.entries[ref.entry_index];
    TargetOutcome& out = report.outcomes[i];
    out.target_id = ref.target_id;
    out.image_path = entry.image_path;
    out.bbox = ref.bbox;
    out.seed = ref.seed;
    if (options.on_target_begin) options.on_target_begin(ref);
    try {
      const Frame clean = read_frame(entry.image_path);
      const Rect frame_rect = clean.dims().as_rect();
      if (ref.bbox != ref.bbox.intersect(frame_rect))
        throw InvalidParameter("target box exceeds frame bounds");

      AttackConfig target_config = config;
      target_config.seed = ref.seed;
      if (config.oracle.backend == OracleBackend::mock) {
        target_config.oracle.mock_targets = entry.boxes;
        target_config.oracle.mock_ref_dims = clean.dims();
      }
      const Mask mask =
          Mask::from_rect(clean.width, clean.height, ref.bbox);

      IterationCallback iter_cb;
      if (options.on_iteration)
        iter_cb = [&](const IterationEvent& ev) {
          options.on_iteration(ref, ev);
        };
      AttackResult result =
          attack_single(clean, mask, ref.bbox, target_config, iter_cb);

      out.status =
          result.success ? TargetStatus::success : TargetStatus::failed;
      out.clean_objectness = result.clean_objectness;
      out.final_objectness = result.final_objectness;
      out.best_fitness = result.best_fitness;
      out.queries = result.queries;
      out.gate_queries = result.gate_queries;
      out.verify_queries = result.verify_queries;
      out.iterations_run = result.iterations_run;
      out.best_spec = result.best_spec;
      out.fitness_trace = result.fitness_trace;
      results[i] = std::make_unique<AttackResult>(std::move(result));
    } catch (const TargetNotDetected& e) {
      out.status = TargetStatus::excluded;
      out.clean_objectness = e.clean_objectness();
      out.gate_queries = 1;
      out.message = e.what();
    } catch (const std::exception& e) {
      out.status = TargetStatus::error;
      out.message = e.what();
    }
    if (options.on_target_done)
      options.on_target_done(report.outcomes[i], results[i].get());
  };

  if (options.workers == 1 || targets.size() <= 1) {
    for (std::size_t i = 0; i < targets.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    const std::size_t n_threads = std::min<std::size_t>(
        static_cast<std::size_t>(options.workers), targets.size());
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= targets.size()) return;
          run_one(i);
        }
      });
    for (std::thread& t : pool) t.join();
  }

  long long query_sum = 0;
  for (const TargetOutcome& out : report.outcomes) {
    switch (out.status) {
      case TargetStatus::success:
        ++report.n;
        ++report.successes;
        query_sum += out.queries;
        break;
      case TargetStatus::failed:
        ++report.n;
        query_sum += out.queries;
        break;
      case TargetStatus::excluded: ++report.excluded; break;
      case TargetStatus::error: ++report.errors; break;
    }
  }
  if (report.n > 0) {
    report.asr = static_cast<double>(report.successes) / report.n;
    report.mean_queries = static_cast<double>(query_sum) / report.n;
  }
  return report;
}

}  // namespace advig
