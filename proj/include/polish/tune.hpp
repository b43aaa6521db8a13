#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "polish/nominal.hpp"
#include "polish/rng.hpp"

namespace polish {

// Search box of the gain tuning; k_x and the rotational gains stay fixed.
struct GainSearchSpace {
  double ky_lo = 50.0, ky_hi = 200.0;
  double kz_lo = 30.0, kz_hi = 130.0;
  double zeta_lo = 0.8, zeta_hi = 1.2;
  double k_x = 500.0;
  double k_rot = 500.0;

  void validate() const {
    if (!(ky_lo <= ky_hi && kz_lo <= kz_hi && zeta_lo <= zeta_hi))
      throw ConfigError("gain search bounds are inverted");
  }
};

struct GainCandidate {
  double k_y = 0.0, k_z = 0.0, zeta = 1.0;

  ImpedanceGains to_gains(const GainSearchSpace& space) const {
    return make_gains(space.k_x, k_y, k_z, space.k_rot, space.k_rot, space.k_rot, zeta);
  }
};

struct EpisodeStats {
  long total_steps = 0;    // N_tot
  long contact_steps = 0;  // N_con
  int wipes = 0;           // of 7
  double mean_force_dev = 0.0;  // mean |F_N - target| [N]
  double mean_speed_dev = 0.0;  // mean |v_T - target| [m/s]
  bool truncated = false;
  double episode_return = 0.0;
};

struct ScoreWeights {
  double w_c = 0.18;
  double w_w = 0.52;
  double w_f = 0.03;
  double w_v = 0.27;
  int via_count = 7;
};

// score = w_c N_con/N_tot + w_w n_wipes/7 - w_f mean|dF| - w_v mean|dv|
inline double score(const EpisodeStats& s, const ScoreWeights& w = {}) {
  if (s.total_steps == 0) throw DomainError("score of an empty episode is undefined");
  return w.w_c * static_cast<double>(s.contact_steps) / static_cast<double>(s.total_steps) +
         w.w_w * static_cast<double>(s.wipes) / static_cast<double>(w.via_count) -
         w.w_f * s.mean_force_dev - w.w_v * s.mean_speed_dev;
}

struct SearchRecord {
  GainCandidate candidate;
  double score = 0.0;
  EpisodeStats stats;
};

struct SearchResult {
  GainCandidate best;
  double best_score = 0.0;
  EpisodeStats best_stats;
  std::vector<SearchRecord> history;
};

using GainEvaluator = std::function<EpisodeStats(const GainCandidate&)>;

// Random search with incumbent-neighborhood refinement: the first half of
// the budget samples the box uniformly, the rest perturbs the incumbent with
// sigma = 10% of each range, clipped to bounds. When an initial candidate is
// given it is evaluated first, so the result never falls below it.
inline SearchResult search_gains(const GainSearchSpace& space, int budget,
                                 const GainEvaluator& evaluate, std::uint64_t seed,
                                 const ScoreWeights& weights = {},
                                 const std::optional<GainCandidate>& initial = {}) {
  space.validate();
  if (budget < 1) throw ConfigError("search budget must be >= 1");
  Rng rng(seed);
  SearchResult result;
  result.best_score = -1e300;
  const int uniform_phase = (budget + 1) / 2;
  for (int i = 0; i < budget; ++i) {
    GainCandidate c;
    if (i == 0 && initial) {
      c = *initial;
    } else if (i < uniform_phase || result.history.empty()) {
      c.k_y = rng.uniform(space.ky_lo, space.ky_hi);
      c.k_z = rng.uniform(space.kz_lo, space.kz_hi);
      c.zeta = rng.uniform(space.zeta_lo, space.zeta_hi);
    } else {
      const GainCandidate& inc = result.best;
      c.k_y = std::clamp(inc.k_y + 0.1 * (space.ky_hi - space.ky_lo) * rng.normal(),
                         space.ky_lo, space.ky_hi);
      c.k_z = std::clamp(inc.k_z + 0.1 * (space.kz_hi - space.kz_lo) * rng.normal(),
                         space.kz_lo, space.kz_hi);
      c.zeta = std::clamp(inc.zeta + 0.1 * (space.zeta_hi - space.zeta_lo) * rng.normal(),
                          space.zeta_lo, space.zeta_hi);
    }
    SearchRecord rec;
    rec.candidate = c;
    rec.stats = evaluate(c);
    rec.score = score(rec.stats, weights);
    if (rec.score > result.best_score) {
      result.best_score = rec.score;
      result.best = c;
      result.best_stats = rec.stats;
    }
    result.history.push_back(rec);
  }
  return result;
}

struct SectionwiseResult {
  GainProfile profile;
  std::vector<SearchResult> per_section;
};

using SectionEvaluator =
    std::function<EpisodeStats(const GainProfile&)>;

// Greedy per-section tuning: tune section 1 with defaults elsewhere, freeze
// the winner, move on. Sections partition [y_lo, y_hi) by equal width.
inline SectionwiseResult sectionwise_tune(const GainSearchSpace& space, int sections,
                                          double y_lo, double y_hi,
                                          const GainCandidate& defaults,
                                          int budget_per_section,
                                          const SectionEvaluator& evaluate,
                                          std::uint64_t seed,
                                          const ScoreWeights& weights = {},
                                          const ImpedanceGains* base_gains = nullptr) {
  if (sections < 1) throw ConfigError("need at least one section");
  if (!(y_hi > y_lo)) throw ConfigError("sections do not cover a positive y-range");
  SectionwiseResult out;
  out.profile.base = base_gains ? *base_gains
                                : make_gains(space.k_x, defaults.k_y, defaults.k_z,
                                             space.k_rot, space.k_rot, space.k_rot,
                                             defaults.zeta);
  const double width = (y_hi - y_lo) / sections;
  for (int sct = 0; sct < sections; ++sct) {
    GainProfile::Row row;
    row.y_lo = y_lo + sct * width;
    row.y_hi = (sct + 1 == sections) ? y_hi : y_lo + (sct + 1) * width;
    row.k_y = defaults.k_y;
    row.k_z = defaults.k_z;
    row.zeta = defaults.zeta;
    out.profile.rows.push_back(row);
  }
  out.profile.validate();

  for (int sct = 0; sct < sections; ++sct) {
    auto eval_candidate = [&](const GainCandidate& c) {
      GainProfile trial = out.profile;
      trial.rows[sct].k_y = c.k_y;
      trial.rows[sct].k_z = c.k_z;
      trial.rows[sct].zeta = c.zeta;
      return evaluate(trial);
    };
    const GainCandidate section_default{out.profile.rows[sct].k_y,
                                        out.profile.rows[sct].k_z,
                                        out.profile.rows[sct].zeta};
    const SearchResult r = search_gains(space, budget_per_section, eval_candidate,
                                        splitmix64(seed) ^ (sct + 1), weights,
                                        section_default);
    out.profile.rows[sct].k_y = r.best.k_y;
    out.profile.rows[sct].k_z = r.best.k_z;
    out.profile.rows[sct].zeta = r.best.zeta;
    out.per_section.push_back(r);
  }
  return out;
}

}  // namespace polish
