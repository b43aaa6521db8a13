#include <catch2/catch_amalgamated.hpp>

#include "polish/rng.hpp"
#include "polish/tune.hpp"

using namespace polish;

namespace {

EpisodeStats perfect_stats() {
  EpisodeStats s;
  s.total_steps = 380;
  s.contact_steps = 380;
  s.wipes = 7;
  s.mean_force_dev = 0.0;
  s.mean_speed_dev = 0.0;
  return s;
}

// synthetic smooth objective with a known optimum
GainEvaluator bowl_evaluator(double ky_star, double kz_star, double zeta_star) {
  return [=](const GainCandidate& c) {
    EpisodeStats s;
    s.total_steps = 100;
    s.contact_steps = 100;
    s.wipes = 7;
    const double d = std::pow((c.k_y - ky_star) / 150.0, 2) +
                     std::pow((c.k_z - kz_star) / 100.0, 2) +
                     std::pow((c.zeta - zeta_star) / 0.4, 2);
    s.mean_force_dev = 10.0 * d;  // enters the score with weight -0.03
    return s;
  };
}

}  // namespace

TEST_CASE("score matches hand-evaluated cases", "[tune]") {
  // full contact + all wipes, zero errors: 0.18 + 0.52 = 0.70
  REQUIRE(score(perfect_stats()) == Catch::Approx(0.70).margin(1e-12));

  // no contact, no wipes, zero errors: 0
  EpisodeStats zero;
  zero.total_steps = 380;
  REQUIRE(score(zero) == Catch::Approx(0.0).margin(1e-15));

  // dF = 1 N, dv = 0.01: 0.70 - 0.03 - 0.0027 = 0.6673
  EpisodeStats s = perfect_stats();
  s.mean_force_dev = 1.0;
  s.mean_speed_dev = 0.01;
  REQUIRE(score(s) == Catch::Approx(0.6673).margin(1e-12));

  EpisodeStats empty;
  REQUIRE_THROWS_AS(score(empty), DomainError);
}

TEST_CASE("score is monotone in its arguments", "[tune]") {
  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    EpisodeStats s;
    s.total_steps = 380;
    s.contact_steps = rng.uniform_int(0, 380);
    s.wipes = rng.uniform_int(0, 7);
    s.mean_force_dev = rng.uniform(0.0, 5.0);
    s.mean_speed_dev = rng.uniform(0.0, 0.2);
    const double base = score(s);

    EpisodeStats more = s;
    if (more.wipes < 7) {
      ++more.wipes;
      REQUIRE(score(more) >= base);
    }
    more = s;
    if (more.contact_steps < 380) {
      ++more.contact_steps;
      REQUIRE(score(more) >= base);
    }
    more = s;
    more.mean_force_dev += 0.5;
    REQUIRE(score(more) <= base);
    more = s;
    more.mean_speed_dev += 0.01;
    REQUIRE(score(more) <= base);
  }
}

TEST_CASE("search handles budget one and degenerate spaces", "[tune]") {
  GainSearchSpace space;
  const auto eval = bowl_evaluator(120, 70, 1.0);
  const auto r1 = search_gains(space, 1, eval, 7);
  REQUIRE(r1.history.size() == 1);
  REQUIRE(r1.best_score == r1.history[0].score);

  GainSearchSpace degenerate;
  degenerate.ky_lo = degenerate.ky_hi = 111.0;
  degenerate.kz_lo = degenerate.kz_hi = 77.0;
  degenerate.zeta_lo = degenerate.zeta_hi = 1.05;
  const auto rd = search_gains(degenerate, 5, eval, 7);
  REQUIRE(rd.best.k_y == 111.0);
  REQUIRE(rd.best.k_z == 77.0);
  REQUIRE(rd.best.zeta == 1.05);

  REQUIRE_THROWS_AS(search_gains(space, 0, eval, 7), ConfigError);
}

TEST_CASE("search improves on the first candidate and is reproducible", "[tune]") {
  GainSearchSpace space;
  const auto eval = bowl_evaluator(120, 70, 1.0);
  const auto a = search_gains(space, 60, eval, 11);
  const auto b = search_gains(space, 60, eval, 11);
  REQUIRE(a.best_score >= a.history.front().score);
  REQUIRE(a.best_score == b.best_score);
  REQUIRE(a.best.k_y == b.best.k_y);
  for (std::size_t i = 0; i < a.history.size(); ++i)
    REQUIRE(a.history[i].score == b.history[i].score);
  // the bowl optimum should be roughly found
  REQUIRE(std::abs(a.best.k_y - 120.0) < 40.0);
}

TEST_CASE("sectionwise tuning emits a covering five-row profile", "[tune]") {
  GainSearchSpace space;
  // objective prefers different k_y per section; encode via the profile row
  const SectionEvaluator eval = [](const GainProfile& p) {
    EpisodeStats s;
    s.total_steps = 100;
    s.contact_steps = 100;
    s.wipes = 7;
    double dev = 0.0;
    for (std::size_t i = 0; i < p.rows.size(); ++i)
      dev += std::abs(p.rows[i].k_y - (80.0 + 20.0 * i)) / 150.0;
    s.mean_force_dev = dev;
    return s;
  };
  GainCandidate defaults{160, 50, 1.0};
  const auto r = sectionwise_tune(GainSearchSpace{}, 5, 0.0, 0.34, defaults, 40, eval, 3);
  REQUIRE(r.profile.rows.size() == 5);
  REQUIRE(r.per_section.size() == 5);
  r.profile.validate();
  REQUIRE(r.profile.rows.front().y_lo == 0.0);
  REQUIRE(r.profile.rows.back().y_hi == Catch::Approx(0.34));
  // closed-left boundary lookup: the shared edge belongs to the upper row
  const double edge = r.profile.rows[1].y_lo;
  REQUIRE(r.profile.gains_at(edge).stiffness[1] == r.profile.rows[1].k_y);

  // single section behaves like plain search over the same budget
  const auto r1 = sectionwise_tune(GainSearchSpace{}, 1, 0.0, 0.34, defaults, 40, eval, 3);
  REQUIRE(r1.profile.rows.size() == 1);

  REQUIRE_THROWS_AS(
      sectionwise_tune(GainSearchSpace{}, 0, 0.0, 0.34, defaults, 10, eval, 3),
      ConfigError);
  REQUIRE_THROWS_AS(
      sectionwise_tune(GainSearchSpace{}, 5, 0.2, 0.2, defaults, 10, eval, 3),
      ConfigError);
}
