#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdps/core/random.hpp"
#include "mdps/core/types.hpp"

// Cartesian sampling plans.
//
// Undersampling acts on whole phase-encode lines: the mask is 2-D over the
// two phase-encode axes and is broadcast along the (fully sampled) readout
// axis. The acquired lines are ordered by an acquisition scheme and
// partitioned into T time groups -- one motion state per group. Group sizes
// are balanced to within one line and the k-space centre line is always in
// the first group (all schemes start at the centre).
//
//   inter-shot motion: states_per_shot = 1, T = shots
//   intra-shot motion: states_per_shot = n, each shot is split contiguously
//                      in acquisition order, T = n * shots

namespace mdps {

struct SamplingPlan {
  Shape3 grid_shape;
  int readout_axis = 0;  // 0 = z, 1 = y, 2 = x
  std::vector<std::uint8_t> mask;  // phase-encode grid, row-major
  std::vector<std::vector<std::int32_t>> groups;  // PE line ids per state
  std::string scheme;
  int shots = 1;
  int states_per_shot = 1;
  std::uint64_t seed = 0;
  std::string id;

  int pe_axis(int which) const {
    // the two non-readout axes in ascending order
    int axes[2], n = 0;
    for (int a = 0; a < 3; ++a)
      if (a != readout_axis) axes[n++] = a;
    return axes[which];
  }
  std::int64_t pe_n0() const { return grid_shape[pe_axis(0)]; }
  std::int64_t pe_n1() const { return grid_shape[pe_axis(1)]; }
  std::int64_t readout_n() const { return grid_shape[readout_axis]; }
  int num_states() const { return static_cast<int>(groups.size()); }
  std::int64_t samples_in_state(int t) const {
    return static_cast<std::int64_t>(groups[static_cast<std::size_t>(t)].size()) *
           readout_n();
  }
  std::int64_t lines_on() const {
    std::int64_t n = 0;
    for (auto m : mask) n += m;
    return n;
  }

  // Full-grid linear indices of state t's samples, line-major then readout.
  std::vector<std::int64_t> state_grid_indices(int t) const {
    const std::int64_t n1 = pe_n1(), nr = readout_n();
    const int a0 = pe_axis(0), a1 = pe_axis(1);
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(samples_in_state(t)));
    std::int64_t coord[3];
    for (const std::int32_t line : groups[static_cast<std::size_t>(t)]) {
      coord[a0] = line / n1;
      coord[a1] = line % n1;
      for (std::int64_t r = 0; r < nr; ++r) {
        coord[readout_axis] = r;
        out.push_back(linear_index(grid_shape, coord[0], coord[1], coord[2]));
      }
    }
    return out;
  }

  void validate() const {
    detail::require(readout_axis >= 0 && readout_axis < 3,
                    "SamplingPlan: readout_axis must be 0..2");
    detail::require(static_cast<std::int64_t>(mask.size()) == pe_n0() * pe_n1(),
                    "SamplingPlan: mask size does not match the PE grid");
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::int64_t claimed = 0;
    for (const auto& g : groups) {
      detail::require(!g.empty(), "SamplingPlan: empty time group");
      for (const std::int32_t line : g) {
        detail::require(line >= 0 &&
                            static_cast<std::size_t>(line) < mask.size(),
                        "SamplingPlan: line index out of range");
        detail::require(mask[static_cast<std::size_t>(line)] != 0,
                        "SamplingPlan: group references an unsampled line");
        detail::require(!seen[static_cast<std::size_t>(line)],
                        "SamplingPlan: line claimed by two time groups");
        seen[static_cast<std::size_t>(line)] = 1;
        ++claimed;
      }
    }
    detail::require(claimed == lines_on(),
                    "SamplingPlan: groups must cover every sampled line");
  }
};

namespace detail {

struct PeGrid {
  std::int64_t n0, n1;
  std::int64_t c0() const { return n0 / 2; }
  std::int64_t c1() const { return n1 / 2; }
  std::int64_t centre_line() const { return c0() * n1 + c1(); }
};

// Central auto-calibration block: per-axis extent ceil(n * sqrt(fraction)),
// so the block area is at least `fraction` of the grid.
inline void acl_extents(const PeGrid& g, double fraction, std::int64_t& e0,
                        std::int64_t& e1) {
  require(fraction >= 0.0 && fraction <= 1.0,
          "acl_fraction must lie in [0, 1]");
  if (fraction == 0.0) {
    e0 = e1 = 0;
    return;
  }
  const double side = std::sqrt(fraction);
  e0 = std::min<std::int64_t>(
      g.n0, static_cast<std::int64_t>(std::ceil(side * double(g.n0))));
  e1 = std::min<std::int64_t>(
      g.n1, static_cast<std::int64_t>(std::ceil(side * double(g.n1))));
  e0 = std::max<std::int64_t>(e0, 1);
  e1 = std::max<std::int64_t>(e1, 1);
}

inline bool in_acl(const PeGrid& g, std::int64_t p0, std::int64_t p1,
                   std::int64_t e0, std::int64_t e1) {
  const std::int64_t s0 = (g.n0 - e0) / 2, s1 = (g.n1 - e1) / 2;
  return p0 >= s0 && p0 < s0 + e0 && p1 >= s1 && p1 < s1 + e1;
}

}  // namespace detail

// Uniform-random Cartesian line mask. The central ACL block is always on;
// the remaining budget round(total / accel) - |ACL| is drawn uniformly
// without replacement. Throws if the ACL block alone exceeds the budget.
inline std::vector<std::uint8_t> make_cartesian_mask(std::int64_t n0,
                                                     std::int64_t n1,
                                                     double accel,
                                                     double acl_fraction,
                                                     std::uint64_t seed) {
  detail::require(n0 > 0 && n1 > 0, "make_cartesian_mask: empty PE grid");
  detail::require(accel >= 1.0, "make_cartesian_mask: accel must be >= 1");
  const detail::PeGrid g{n0, n1};
  const std::int64_t total = n0 * n1;
  const auto target =
      static_cast<std::int64_t>(std::llround(double(total) / accel));
  detail::require(target >= 1, "make_cartesian_mask: acceleration too high");

  std::int64_t e0, e1;
  detail::acl_extents(g, acl_fraction, e0, e1);
  const std::int64_t acl_count = e0 * e1;
  detail::require(
      acl_count <= target,
      "make_cartesian_mask: ACL block exceeds the sampling budget");

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(total), 0);
  std::vector<std::int64_t> candidates;
  candidates.reserve(static_cast<std::size_t>(total - acl_count));
  for (std::int64_t p0 = 0; p0 < n0; ++p0)
    for (std::int64_t p1 = 0; p1 < n1; ++p1) {
      if (detail::in_acl(g, p0, p1, e0, e1))
        mask[static_cast<std::size_t>(p0 * n1 + p1)] = 1;
      else
        candidates.push_back(p0 * n1 + p1);
    }
  auto rng = make_rng(seed, 0x6d61736bULL);  // "mask" stream
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const std::int64_t extra = target - acl_count;
  for (std::int64_t i = 0; i < extra; ++i)
    mask[static_cast<std::size_t>(candidates[static_cast<std::size_t>(i)])] = 1;
  return mask;
}

struct PoissonMask {
  std::vector<std::uint8_t> mask;
  double radius = 0.0;
};

// Variable-density-free Poisson-disc line mask via dart throwing: candidates
// are visited in a seeded random order and accepted when no earlier accepted
// line lies within `radius`. The radius is tuned by bisection until the
// on-count lands within +-2% of total / accel. ACL lines are always on and
// neither blocked nor blocking.
inline PoissonMask make_poisson_mask(std::int64_t n0, std::int64_t n1,
                                     double accel, double acl_fraction,
                                     std::uint64_t seed) {
  detail::require(n0 > 0 && n1 > 0, "make_poisson_mask: empty PE grid");
  detail::require(accel >= 1.0, "make_poisson_mask: accel must be >= 1");
  const detail::PeGrid g{n0, n1};
  const std::int64_t total = n0 * n1;
  const double target = double(total) / accel;
  const double tol = 0.02 * target;

  std::int64_t e0, e1;
  detail::acl_extents(g, acl_fraction, e0, e1);
  const std::int64_t acl_count = (acl_fraction > 0.0) ? e0 * e1 : 0;
  detail::require(double(acl_count) <= target + tol,
                  "make_poisson_mask: ACL block exceeds the sampling budget");

  std::vector<std::int64_t> candidates;
  candidates.reserve(static_cast<std::size_t>(total - acl_count));
  for (std::int64_t p0 = 0; p0 < n0; ++p0)
    for (std::int64_t p1 = 0; p1 < n1; ++p1)
      if (!detail::in_acl(g, p0, p1, e0, e1)) candidates.push_back(p0 * n1 + p1);
  {
    // one fixed candidate order for every radius probe
    auto rng = make_rng(seed, 0x706f6973ULL);  // "pois" stream
    std::shuffle(candidates.begin(), candidates.end(), rng);
  }

  auto throw_darts = [&](double radius, std::vector<std::int64_t>* accepted) {
    accepted->clear();
    const double r2 = radius * radius;
    for (const std::int64_t cand : candidates) {
      const double p0 = double(cand / n1), p1 = double(cand % n1);
      bool ok = true;
      for (const std::int64_t a : *accepted) {
        const double d0 = p0 - double(a / n1), d1 = p1 - double(a % n1);
        if (d0 * d0 + d1 * d1 < r2) {
          ok = false;
          break;
        }
      }
      if (ok) accepted->push_back(cand);
    }
    return static_cast<std::int64_t>(accepted->size()) + acl_count;
  };

  double lo = 1e-3, hi = std::hypot(double(n0), double(n1));
  std::vector<std::int64_t> accepted;
  double best_radius = lo;
  std::int64_t best_count = throw_darts(lo, &accepted);
  std::vector<std::int64_t> best_accepted = accepted;
  for (int iter = 0; iter < 60 && std::abs(double(best_count) - target) > tol;
       ++iter) {
    const double mid = 0.5 * (lo + hi);
    const std::int64_t count = throw_darts(mid, &accepted);
    if (std::abs(double(count) - target) <
        std::abs(double(best_count) - target)) {
      best_count = count;
      best_radius = mid;
      best_accepted = accepted;
    }
    if (double(count) > target)
      lo = mid;  // too many points: grow the radius
    else
      hi = mid;
  }
  if (std::abs(double(best_count) - target) > tol)
    throw std::runtime_error(
        "make_poisson_mask: could not reach the target density; achieved " +
        std::to_string(best_count) + " of " + std::to_string(target) +
        " lines");

  PoissonMask out;
  out.radius = best_radius;
  out.mask.assign(static_cast<std::size_t>(total), 0);
  for (std::int64_t p0 = 0; p0 < n0; ++p0)
    for (std::int64_t p1 = 0; p1 < n1; ++p1)
      if (detail::in_acl(g, p0, p1, e0, e1) && acl_fraction > 0.0)
        out.mask[static_cast<std::size_t>(p0 * n1 + p1)] = 1;
  for (const std::int64_t a : best_accepted)
    out.mask[static_cast<std::size_t>(a)] = 1;
  return out;
}

namespace detail {

struct LineKey {
  double primary, secondary;
  std::int64_t index;
};

inline std::vector<std::int64_t> on_lines(const std::vector<std::uint8_t>& m) {
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) out.push_back(static_cast<std::int64_t>(i));
  return out;
}

inline void sort_by_key(std::vector<std::int64_t>& lines, const PeGrid& g,
                        bool ring_quantized) {
  std::sort(lines.begin(), lines.end(), [&](std::int64_t a, std::int64_t b) {
    auto key = [&](std::int64_t line) {
      const double d0 = double(line / g.n1) - double(g.c0());
      const double d1 = double(line % g.n1) - double(g.c1());
      const double r = std::hypot(d0, d1);
      const double primary = ring_quantized ? std::floor(r + 0.5) : r;
      return LineKey{primary, std::atan2(d1, d0), line};
    };
    const LineKey ka = key(a), kb = key(b);
    if (ka.primary != kb.primary) return ka.primary < kb.primary;
    if (ka.secondary != kb.secondary) return ka.secondary < kb.secondary;
    return ka.index < kb.index;
  });
}

}  // namespace detail

// Orders the sampled lines by the named scheme and partitions them into
// shots * states_per_shot balanced time groups. Schemes:
//   linear_circular         concentric rings outward, wrapping in angle
//   centric                 strictly by distance from the centre
//   interleaved_center_first  central 3x3 block first, remainder dealt
//                             round-robin across shots
//   random                  seeded shuffle, centre line forced first
inline std::vector<std::vector<std::int32_t>> order_and_partition(
    const std::vector<std::uint8_t>& mask, std::int64_t n0, std::int64_t n1,
    const std::string& scheme, int shots, int states_per_shot,
    std::uint64_t seed) {
  detail::require(shots >= 1, "order_and_partition: shots must be >= 1");
  detail::require(states_per_shot >= 1,
                  "order_and_partition: states_per_shot must be >= 1");
  const detail::PeGrid g{n0, n1};
  std::vector<std::int64_t> lines = detail::on_lines(mask);
  const auto m = static_cast<std::int64_t>(lines.size());
  detail::require(m >= shots,
                  "order_and_partition: more shots than sampled lines");
  detail::require(m / shots >= states_per_shot,
                  "order_and_partition: not enough lines per shot for the "
                  "requested states_per_shot");

  std::vector<std::vector<std::int64_t>> shot_lines(
      static_cast<std::size_t>(shots));
  if (scheme == "interleaved_center_first") {
    // central 3x3 block (its sampled subset) is pinned to the first shot
    std::vector<std::int64_t> block, rest;
    for (const std::int64_t line : lines) {
      const std::int64_t p0 = line / n1, p1 = line % n1;
      if (std::llabs(p0 - g.c0()) <= 1 && std::llabs(p1 - g.c1()) <= 1)
        block.push_back(line);
      else
        rest.push_back(line);
    }
    detail::sort_by_key(block, g, false);
    detail::sort_by_key(rest, g, false);
    // balanced target sizes, remainder to the earliest shots
    std::vector<std::int64_t> target(static_cast<std::size_t>(shots),
                                     m / shots);
    for (std::int64_t i = 0; i < m % shots; ++i)
      ++target[static_cast<std::size_t>(i)];
    detail::require(
        static_cast<std::int64_t>(block.size()) <= target[0],
        "order_and_partition: central block exceeds the first-shot budget");
    shot_lines[0] = block;
    std::size_t next = 0;
    int s = 0;
    while (next < rest.size()) {
      auto& dst = shot_lines[static_cast<std::size_t>(s)];
      if (static_cast<std::int64_t>(dst.size()) <
          target[static_cast<std::size_t>(s)])
        dst.push_back(rest[next++]);
      s = (s + 1) % shots;
    }
  } else {
    if (scheme == "linear_circular") {
      detail::sort_by_key(lines, g, true);
    } else if (scheme == "centric") {
      detail::sort_by_key(lines, g, false);
    } else if (scheme == "random") {
      auto rng = make_rng(seed, 0x6f726472ULL);  // "ordr" stream
      std::shuffle(lines.begin(), lines.end(), rng);
      auto it = std::find(lines.begin(), lines.end(), g.centre_line());
      if (it != lines.end()) std::rotate(lines.begin(), it, it + 1);
    } else {
      throw std::invalid_argument("order_and_partition: unknown scheme '" +
                                  scheme + "'");
    }
    for (int s = 0; s < shots; ++s) {
      const std::int64_t lo = m * s / shots, hi = m * (s + 1) / shots;
      shot_lines[static_cast<std::size_t>(s)].assign(lines.begin() + lo,
                                                     lines.begin() + hi);
    }
  }

  // intra-shot split: contiguous balanced chunks in acquisition order
  std::vector<std::vector<std::int32_t>> groups;
  groups.reserve(static_cast<std::size_t>(shots) *
                 static_cast<std::size_t>(states_per_shot));
  for (const auto& sl : shot_lines) {
    const auto k = static_cast<std::int64_t>(sl.size());
    for (int p = 0; p < states_per_shot; ++p) {
      const std::int64_t lo = k * p / states_per_shot;
      const std::int64_t hi = k * (p + 1) / states_per_shot;
      std::vector<std::int32_t> grp;
      grp.reserve(static_cast<std::size_t>(hi - lo));
      for (std::int64_t i = lo; i < hi; ++i)
        grp.push_back(static_cast<std::int32_t>(sl[static_cast<std::size_t>(i)]));
      groups.push_back(std::move(grp));
    }
  }
  return groups;
}

inline SamplingPlan make_sampling_plan(const Shape3& grid_shape,
                                       int readout_axis,
                                       std::vector<std::uint8_t> mask,
                                       const std::string& scheme, int shots,
                                       int states_per_shot,
                                       std::uint64_t seed,
                                       std::string id = {}) {
  SamplingPlan p;
  p.grid_shape = grid_shape;
  p.readout_axis = readout_axis;
  p.mask = std::move(mask);
  p.scheme = scheme;
  p.shots = shots;
  p.states_per_shot = states_per_shot;
  p.seed = seed;
  p.groups = order_and_partition(p.mask, p.pe_n0(), p.pe_n1(), scheme, shots,
                                 states_per_shot, seed);
  p.id = id.empty()
             ? scheme + "-" + std::to_string(grid_shape.nz) + "x" +
                   std::to_string(grid_shape.ny) + "x" +
                   std::to_string(grid_shape.nx) + "-T" +
                   std::to_string(p.num_states()) + "-s" + std::to_string(seed)
             : std::move(id);
  p.validate();
  return p;
}

// --- JSON serialization (mask as [start, length] run-length pairs) ---

inline nlohmann::json plan_to_json(const SamplingPlan& p) {
  nlohmann::json rle = nlohmann::json::array();
  std::int64_t run_start = -1;
  for (std::int64_t i = 0; i <= static_cast<std::int64_t>(p.mask.size()); ++i) {
    const bool on =
        i < static_cast<std::int64_t>(p.mask.size()) && p.mask[i] != 0;
    if (on && run_start < 0) run_start = i;
    if (!on && run_start >= 0) {
      rle.push_back({run_start, i - run_start});
      run_start = -1;
    }
  }
  return nlohmann::json{
      {"version", 1},
      {"id", p.id},
      {"grid_shape", {p.grid_shape.nz, p.grid_shape.ny, p.grid_shape.nx}},
      {"readout_axis", p.readout_axis},
      {"mask_rle", rle},
      {"scheme", p.scheme},
      {"shots", p.shots},
      {"states_per_shot", p.states_per_shot},
      {"seed", p.seed},
      {"groups", p.groups}};
}

inline SamplingPlan plan_from_json(const nlohmann::json& j) {
  SamplingPlan p;
  detail::require(j.at("version").get<int>() == 1,
                  "plan_from_json: unsupported version");
  const auto& sh = j.at("grid_shape");
  p.grid_shape = {sh.at(0).get<std::int64_t>(), sh.at(1).get<std::int64_t>(),
                  sh.at(2).get<std::int64_t>()};
  p.readout_axis = j.at("readout_axis").get<int>();
  detail::require(p.readout_axis >= 0 && p.readout_axis < 3,
                  "plan_from_json: bad readout_axis");
  p.mask.assign(static_cast<std::size_t>(p.pe_n0() * p.pe_n1()), 0);
  for (const auto& run : j.at("mask_rle")) {
    const auto start = run.at(0).get<std::int64_t>();
    const auto len = run.at(1).get<std::int64_t>();
    detail::require(start >= 0 && len > 0 &&
                        start + len <= static_cast<std::int64_t>(p.mask.size()),
                    "plan_from_json: mask run out of range");
    for (std::int64_t i = start; i < start + len; ++i)
      p.mask[static_cast<std::size_t>(i)] = 1;
  }
  p.scheme = j.at("scheme").get<std::string>();
  p.shots = j.at("shots").get<int>();
  p.states_per_shot = j.at("states_per_shot").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.id = j.at("id").get<std::string>();
  p.groups = j.at("groups").get<std::vector<std::vector<std::int32_t>>>();
  p.validate();
  return p;
}

inline void save_plan(const SamplingPlan& p, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << plan_to_json(p).dump(2) << "\n";
}

inline SamplingPlan load_plan(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded())
    throw std::runtime_error(path + ": malformed plan JSON");
  return plan_from_json(j);
}

}  // namespace mdps
