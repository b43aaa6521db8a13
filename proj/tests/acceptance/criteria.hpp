#pragma once

#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "polish/experiment.hpp"

namespace acceptance {

namespace fs = std::filesystem;

struct Context {
  fs::path cache;
  std::ostream* out = &std::cout;

  std::ostream& log() const { return *out; }
};

using CriterionFn = std::function<bool(const Context&)>;

struct Criterion {
  int id;
  std::string name;
  CriterionFn fn;
};

// fast suites
bool criterion_formulas(const Context& ctx);       // 1
bool criterion_gradients(const Context& ctx);      // 2
bool criterion_physics(const Context& ctx);        // 3
bool criterion_prior_equivalence(const Context&);  // 4
bool criterion_determinism(const Context& ctx);    // 9

// experiment suites
bool criterion_tuning_ordering(const Context& ctx);  // 5
bool criterion_safety_ordering(const Context& ctx);  // 6
bool criterion_lambda_curriculum(const Context&);    // 7
bool criterion_learning_sanity(const Context& ctx);  // 8

inline std::vector<Criterion> all_criteria() {
  return {
      {1, "formula suite", criterion_formulas},
      {2, "gradient suite", criterion_gradients},
      {3, "physics suite", criterion_physics},
      {4, "prior equivalence", criterion_prior_equivalence},
      {5, "tuning ordering", criterion_tuning_ordering},
      {6, "safety ordering", criterion_safety_ordering},
      {7, "lambda curriculum", criterion_lambda_curriculum},
      {8, "learning sanity", criterion_learning_sanity},
      {9, "determinism and persistence", criterion_determinism},
  };
}

// --- shared helpers for the training-run criteria ---

constexpr int kSeeds = 5;
constexpr long kCheqSteps = 200000;
constexpr long kFirstEpisodes = 200;

polish::RunConfig comparison_config(std::uint64_t seed, polish::TrainMode mode);

// Trains any missing cached runs (two at a time) and returns their dirs.
std::vector<fs::path> ensure_comparison_runs(const Context& ctx,
                                             polish::TrainMode mode);

}  // namespace acceptance
