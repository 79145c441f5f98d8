#pragma once

// Particle swarm optimization over real-valued encodings of perturbation
// parameters. The swarm is plain data plus three pure-ish operations
// (init_swarm, update_bests, step); fitness evaluation is the caller's
// responsibility so the optimizer stays oracle-agnostic.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "advig/detail/rng.hpp"
#include "advig/error.hpp"
#include "advig/geometry.hpp"

namespace advig {

enum class RMode { fixed, resampled };

inline const char* to_string(RMode m) {
  return m == RMode::fixed ? "fixed" : "resampled";
}

inline RMode r_mode_from_string(const std::string& s) {
  if (s == "fixed") return RMode::fixed;
  if (s == "resampled") return RMode::resampled;
  throw InvalidParameter("unknown r-mode: " + s);
}

/// Swarm hyperparameters. r1/r2 are the stochastic factors of the velocity
/// update: held at fixed values by default, or redrawn uniformly per
/// particle per iteration in resampled mode. v_max = 0 means "derive from
/// the mask box": 0.25 x box diagonal per dimension.
struct PsoHyper {
  double omega = 0.9;
  double c1 = 1.6;
  double r1 = 0.5;
  double c2 = 1.4;
  double r2 = 0.5;
  RMode r_mode = RMode::fixed;
  int population = 30;
  int iterations = 50;
  double v_max = 0.0;

  void validate() const {
    if (omega < 0 || c1 < 0 || c2 < 0)
      throw InvalidParameter("PSO factors must be non-negative");
    if (r_mode == RMode::fixed && (r1 < 0 || r1 > 1 || r2 < 0 || r2 > 1))
      throw InvalidParameter("fixed r1/r2 must lie in [0,1]");
    if (population < 1) throw InvalidParameter("population must be >= 1");
    if (iterations < 1) throw InvalidParameter("iterations must be >= 1");
    if (v_max < 0) throw InvalidParameter("v_max must be non-negative");
  }
  friend bool operator==(const PsoHyper&, const PsoHyper&) = default;
};

inline constexpr double kUnevaluated = std::numeric_limits<double>::infinity();

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::vector<double> best_position;
  double best_fitness = kUnevaluated;
  friend bool operator==(const Particle&, const Particle&) = default;
};

struct Swarm {
  std::vector<Particle> particles;
  std::vector<double> global_best_position;
  double global_best_fitness = kUnevaluated;
  std::uint64_t rng_seed = 0;

  // Problem binding resolved at initialization.
  ShapeFamily family;
  Rect mask_bbox;
  double v_max = 0.0;
  detail::Rng r_stream{0};  // draws r1/r2 in resampled mode

  bool evaluated() const {
    for (const Particle& p : particles)
      if (p.best_fitness == kUnevaluated) return false;
    return !particles.empty();
  }
};

// ---------------------------------------------------------------------------
// Continuous <-> discrete bridge
// ---------------------------------------------------------------------------

/// Flatten a spec into the optimizer's coordinate vector: endpoint/vertex
/// coordinates in listing order (x then y), or center-x, center-y,
/// horizontal, vertical semi-axis for ellipses.
inline std::vector<double> encode(const PerturbationSpec& spec) {
  std::vector<double> v;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LineSetParams>) {
          for (const Point& q : p.endpoints) {
            v.push_back(q.x);
            v.push_back(q.y);
          }
        } else if constexpr (std::is_same_v<T, PolygonParams>) {
          for (const Point& q : p.vertices) {
            v.push_back(q.x);
            v.push_back(q.y);
          }
        } else {
          v.push_back(p.center.x);
          v.push_back(p.center.y);
          v.push_back(p.semi_axis_h);
          v.push_back(p.semi_axis_v);
        }
      },
      spec.shape);
  return v;
}

namespace detail {

inline int round_half_away(double v) {
  return static_cast<int>(std::llround(v));
}

}  // namespace detail

/// Inverse of encode: round each coordinate half-away-from-zero to the
/// integer grid, rebuild the family's parameter struct, then clamp into the
/// mask box. encode(decode(v)) is the identity for integer-valued v inside
/// the box.
inline PerturbationSpec decode(const std::vector<double>& vec,
                               const ShapeFamily& family,
                               const Rect& mask_bbox, Color color = {}) {
  family.validate();
  if (static_cast<int>(vec.size()) != family.dimension())
    throw InvalidParameter("vector dimension does not match shape family");

  PerturbationSpec spec;
  spec.color = color;
  std::size_t i = 0;
  const auto next_point = [&] {
    const int x = detail::round_half_away(vec[i++]);
    const int y = detail::round_half_away(vec[i++]);
    return Point{x, y};
  };
  switch (family.kind) {
    case ShapeKind::lines: {
      LineSetParams p;
      p.thickness = family.thickness;
      p.endpoints.resize(static_cast<std::size_t>(2) * family.line_count);
      for (Point& q : p.endpoints) q = next_point();
      spec.shape = std::move(p);
      break;
    }
    case ShapeKind::polygon: {
      PolygonParams p;
      p.vertices.resize(static_cast<std::size_t>(family.edges));
      for (Point& q : p.vertices) q = next_point();
      spec.shape = std::move(p);
      break;
    }
    case ShapeKind::ellipse: {
      EllipseParams p;
      p.center = next_point();
      p.semi_axis_h = detail::round_half_away(vec[i++]);
      p.semi_axis_v = detail::round_half_away(vec[i++]);
      spec.shape = p;
      break;
    }
  }
  return clamp_params(std::move(spec), mask_bbox);
}

// ---------------------------------------------------------------------------
// Swarm operations
// ---------------------------------------------------------------------------

/// Build the initial swarm: positions encode uniformly random feasible
/// specs, velocities are uniform in [-v_max, v_max] per dimension, bests
/// are unset until the first evaluation. Fully determined by the seed.
inline Swarm init_swarm(const ShapeFamily& family, const Rect& mask_bbox,
                        const PsoHyper& hyper, std::uint64_t seed) {
  hyper.validate();
  family.validate();
  if (mask_bbox.empty()) throw InvalidParameter("mask bounding box is empty");

  Swarm swarm;
  swarm.rng_seed = seed;
  swarm.family = family;
  swarm.mask_bbox = mask_bbox;
  swarm.v_max = hyper.v_max > 0 ? hyper.v_max : 0.25 * mask_bbox.diagonal();
  // Salts 0 and 1 are reserved for swarm-level streams; per-particle
  // streams start at 2.
  swarm.r_stream = detail::Rng(detail::mix_seed(seed, 0));

  const int dim = family.dimension();
  swarm.particles.resize(static_cast<std::size_t>(hyper.population));
  for (int a = 0; a < hyper.population; ++a) {
    Particle& p = swarm.particles[static_cast<std::size_t>(a)];
    const PerturbationSpec spec = random_params(
        family, mask_bbox, detail::mix_seed(seed, 2ull * a + 2));
    p.position = encode(spec);
    detail::Rng vel_rng(detail::mix_seed(seed, 2ull * a + 3));
    p.velocity.resize(static_cast<std::size_t>(dim));
    for (double& v : p.velocity) v = vel_rng.uniform(-swarm.v_max, swarm.v_max);
    p.best_position = p.position;
    p.best_fitness = kUnevaluated;
  }
  swarm.global_best_position = swarm.particles.front().position;
  swarm.global_best_fitness = kUnevaluated;
  return swarm;
}

/// Fold one round of fitness values into personal and global bests.
/// Strictly-lower fitness replaces a personal best; ties keep the
/// incumbent. The global best is the minimum personal best, earliest
/// particle winning ties.
inline void update_bests(Swarm& swarm, const std::vector<double>& fitnesses) {
  if (fitnesses.size() != swarm.particles.size())
    throw InvalidParameter("fitness vector length does not match population");
  for (std::size_t a = 0; a < swarm.particles.size(); ++a) {
    Particle& p = swarm.particles[a];
    if (fitnesses[a] < p.best_fitness) {
      p.best_fitness = fitnesses[a];
      p.best_position = p.position;
    }
  }
  double best = kUnevaluated;
  std::size_t best_idx = 0;
  for (std::size_t a = 0; a < swarm.particles.size(); ++a)
    if (swarm.particles[a].best_fitness < best) {
      best = swarm.particles[a].best_fitness;
      best_idx = a;
    }
  if (best != kUnevaluated) {
    swarm.global_best_fitness = best;
    swarm.global_best_position = swarm.particles[best_idx].best_position;
  }
}

/// One velocity/position update:
///   v' = omega*v + c1*r1*(p_best - x) + c2*r2*(g_best - x), clamped to
///   [-v_max, v_max] per component; x' = x + v'.
/// Feasibility is restored at decode time, not here, so the frozen update
/// rule stays exact.
inline void step(Swarm& swarm, const PsoHyper& hyper) {
  hyper.validate();
  if (!swarm.evaluated())
    throw ContractViolation("step before every particle was evaluated");

  for (Particle& p : swarm.particles) {
    double r1 = hyper.r1, r2 = hyper.r2;
    if (hyper.r_mode == RMode::resampled) {
      r1 = swarm.r_stream.u01();
      r2 = swarm.r_stream.u01();
    }
    for (std::size_t d = 0; d < p.position.size(); ++d) {
      double v = hyper.omega * p.velocity[d] +
                 hyper.c1 * r1 * (p.best_position[d] - p.position[d]) +
                 hyper.c2 * r2 * (swarm.global_best_position[d] - p.position[d]);
      v = std::clamp(v, -swarm.v_max, swarm.v_max);
      p.velocity[d] = v;
      p.position[d] += v;
    }
  }
}

}  // namespace advig
