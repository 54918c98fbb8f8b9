#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "stats.hpp"
#include "test_models.hpp"
#include "umsa/error.hpp"
#include "umsa/models.hpp"
#include "umsa/unbiased.hpp"

namespace umsa {
namespace {

using testing::FlatModel;

ObservationRecord simulated_ou_record(const OuModel& model, std::size_t T, std::uint64_t seed) {
  ObservationRecord obs = testing::unit_time_record(std::vector<double>(T));
  RngStream rng(seed, 0);
  const ObservationGrid grid = align_observations(obs, 8);
  const LatticePath path = initial_path(model, model.make_parameters({0.5}), 8, grid.steps(), rng);
  for (std::size_t i = 0; i < T; ++i) obs.values[i] = path.state(grid.index[i])[0] + rng.normal();
  return obs;
}

// A small instance on which every replicate is cheap.
struct TinyOu {
  OuModel model{0.4, 1.0, 100.0};
  ObservationRecord obs = simulated_ou_record(model, 3, 71);
  // Supports: {1, 2, 6} at l = 1, {1, 6} at l = 2, {6} at l = 3; N_p = 2^p.
  RandomizationLaw law{RandomizationSettings{1, 3, 1, 6, 1}};
  ParameterVector theta0 = model.make_parameters({1.0});
  UmsaOptions options = [] {
    UmsaOptions o;
    o.particles = 8;
    return o;
  }();
};

TEST(RandomizationLaw, LevelMasses) {
  const RandomizationLaw law(RandomizationSettings{3, 12, 1, 12, 10});
  EXPECT_NEAR(law.level_mass(3) / law.level_mass(4), std::pow(2.0, 1.5), 1e-12);
  double normaliser = 0.0;
  for (int l = 3; l <= 12; ++l) normaliser += std::pow(2.0, -1.5 * l);
  EXPECT_NEAR(law.level_mass(3), std::pow(2.0, -4.5) / normaliser, 1e-15);
  EXPECT_NEAR(law.level_mass(3), 0.64645, 2e-5);
  EXPECT_EQ(law.level_mass(2), 0.0);
  EXPECT_EQ(law.level_mass(13), 0.0);
  double total = 0.0;
  for (int l = 3; l <= 12; ++l) total += law.level_mass(l);
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(RandomizationLaw, IterationSupportAndMasses) {
  const RandomizationLaw law(RandomizationSettings{3, 12, 1, 12, 10});
  EXPECT_EQ(law.iteration_support(3), (std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}));
  EXPECT_EQ(law.iteration_support(9), (std::vector<int>{1, 2, 3, 6, 7, 8, 9, 10, 11, 12}));
  EXPECT_EQ(law.iteration_support(12), (std::vector<int>{6, 7, 8, 9, 10, 11, 12}));
  for (int l = 3; l <= 12; ++l) {
    double total = 0.0;
    for (int p : law.iteration_support(l)) total += law.iteration_mass(p, l);
    EXPECT_NEAR(total, 1.0, 1e-14);
  }
  EXPECT_NEAR(law.iteration_mass(1, 3) / law.iteration_mass(2, 3), 2.0, 1e-14);
  const double w6 = std::pow(2.0, -6) * 6 * std::pow(std::log2(6.0), 2);
  const double w7 = std::pow(2.0, -7) * 7 * std::pow(std::log2(7.0), 2);
  EXPECT_NEAR(law.iteration_mass(6, 3) / law.iteration_mass(7, 3), w6 / w7, 1e-13);
  EXPECT_NEAR(law.iteration_mass(5, 3) / law.iteration_mass(6, 3), 1.0 / w6, 1e-13);
  EXPECT_EQ(law.iteration_mass(4, 9), 0.0);
  EXPECT_EQ(law.iterations(3), 80u);
  EXPECT_EQ(law.previous_support(6, 9), 3);
  EXPECT_EQ(law.previous_support(1, 9), std::nullopt);
  EXPECT_EQ(law.previous_support(6, 12), std::nullopt);
  EXPECT_THROW(RandomizationLaw(RandomizationSettings{3, 12, 1, 4, 10}), ConfigError);
  EXPECT_THROW(RandomizationLaw(RandomizationSettings{5, 3, 1, 8, 10}), ConfigError);
}

TEST(RandomizationLaw, SampledFrequenciesMatchMasses) {
  const RandomizationLaw law(RandomizationSettings{3, 6, 1, 8, 10});
  std::map<std::pair<int, int>, std::size_t> counts;
  RngStream rng(72, 0);
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) ++counts[law.sample(rng)];
  std::vector<std::size_t> observed;
  std::vector<double> expected;
  for (int l = 3; l <= 6; ++l) {
    for (int p : law.iteration_support(l)) {
      observed.push_back(counts[{l, p}]);
      expected.push_back(law.level_mass(l) * law.iteration_mass(p, l));
      counts.erase({l, p});
    }
  }
  EXPECT_TRUE(counts.empty()) << "draws outside the support";
  EXPECT_GT(testing::chi_squared_p_value(observed, expected), 1e-3);
}

TEST(Contribution, ReplaysFromLoggedTrajectories) {
  TinyOu tiny;
  int coupled = 0;
  int single = 0;
  for (std::uint64_t r = 0; r < 40; ++r) {
    RngStream rng(73, r);
    const EstimatorRecord record = umsa_single(tiny.model, tiny.obs, tiny.law, tiny.theta0,
                                               tiny.options, rng);
    ASSERT_FALSE(record.aborted) << record.abort_reason;
    RngStream replay(73, r);
    const auto [l, p] = tiny.law.sample(replay);
    ASSERT_EQ(l, record.level);
    ASSERT_EQ(p, record.p);
    MsaOptions msa;
    msa.level = l;
    msa.iterations = tiny.law.iterations(p);
    msa.particles = tiny.options.particles;
    msa.schedule = tiny.options.schedule;
    const auto prev = tiny.law.previous_support(p, l);
    const double mass = tiny.law.level_mass(l) * tiny.law.iteration_mass(p, l);
    const std::size_t n = tiny.law.iterations(p);
    double expected = 0.0;
    if (l == 1) {
      const MsaResult run = msa_run(tiny.model, tiny.obs, tiny.theta0, msa, replay);
      expected = prev ? run.theta[n][0] - run.theta[tiny.law.iterations(*prev)][0] : run.theta[n][0];
      ++single;
    } else {
      const CoupledMsaResult run = msa_run_coupled(tiny.model, tiny.obs, tiny.theta0, msa, replay);
      const std::size_t m = prev ? tiny.law.iterations(*prev) : 0;
      expected = (run.fine[n][0] - run.coarse[n][0]) -
                 (prev ? run.fine[m][0] - run.coarse[m][0] : 0.0);
      ++coupled;
    }
    EXPECT_EQ(record.contribution[0] * mass, expected / mass * mass);
    EXPECT_EQ(record.contribution[0], expected / mass);
    EXPECT_EQ(record.cost.gaussian_draws, replay.gaussian_draws());
  }
  EXPECT_GT(single, 0);
  EXPECT_GT(coupled, 0);
}

TEST(Contribution, ThetaFreeModelContributesNothingBeyondBase) {
  const FlatModel model;
  const ObservationRecord obs = testing::unit_time_record({0.1, -0.2, 0.4});
  const RandomizationLaw law(RandomizationSettings{1, 3, 1, 6, 1});
  const auto theta0 = model.make_parameters({0.7});
  UmsaOptions options;
  options.particles = 6;
  for (std::uint64_t r = 0; r < 60; ++r) {
    RngStream rng(74, r);
    const EstimatorRecord record = umsa_single(model, obs, law, theta0, options, rng);
    const bool base = record.level == 1 && !law.previous_support(record.p, record.level);
    const double mass = record.level_mass * record.iteration_mass;
    EXPECT_EQ(record.contribution[0], base ? 0.7 / mass : 0.0);
  }
}

TEST(Contribution, TelescopesOverTheIterationSupport) {
  // With common random numbers one chain of N_{p_max} iterations yields
  // every shorter run as a prefix, and sum_p P(p) contribution_p collapses
  // to the last iterate (single level) or last difference (coupled).
  TinyOu tiny;
  for (int level : {1, 2, 3}) {
    MsaOptions msa;
    msa.level = level;
    msa.iterations = tiny.law.iterations(6);
    msa.particles = 8;
    RngStream rng(75, static_cast<std::uint64_t>(level));
    ThetaTrajectory fine, coarse;
    if (level == 1) {
      fine = msa_run(tiny.model, tiny.obs, tiny.theta0, msa, rng).theta;
    } else {
      const CoupledMsaResult run = msa_run_coupled(tiny.model, tiny.obs, tiny.theta0, msa, rng);
      fine = run.fine;
      coarse = run.coarse;
    }
    const ThetaTrajectory* coarse_ptr = level == 1 ? nullptr : &coarse;
    double sum = 0.0;
    for (int p : tiny.law.iteration_support(level)) {
      const double mass = tiny.law.iteration_mass(p, level);
      const auto prev = tiny.law.previous_support(p, level);
      std::optional<std::size_t> prev_n;
      if (prev) prev_n = tiny.law.iterations(*prev);
      sum += mass * contribution_from_trajectories(fine, coarse_ptr, tiny.law.iterations(p), prev_n,
                                                   mass)[0];
    }
    const std::size_t last = tiny.law.iterations(6);
    const double target = fine[last][0] - (coarse_ptr ? coarse[last][0] : 0.0);
    EXPECT_NEAR(sum, target, 1e-12 * std::max(1.0, std::abs(target))) << "level " << level;

    // The shorter runs really are prefixes of the long one.
    msa.iterations = tiny.law.iterations(1);
    RngStream again(75, static_cast<std::uint64_t>(level));
    if (level == 1) {
      const MsaResult short_run = msa_run(tiny.model, tiny.obs, tiny.theta0, msa, again);
      for (std::size_t n = 0; n <= msa.iterations; ++n) ASSERT_EQ(short_run.theta[n][0], fine[n][0]);
    } else {
      const CoupledMsaResult short_run =
          msa_run_coupled(tiny.model, tiny.obs, tiny.theta0, msa, again);
      for (std::size_t n = 0; n <= msa.iterations; ++n) {
        ASSERT_EQ(short_run.fine[n][0], fine[n][0]);
        ASSERT_EQ(short_run.coarse[n][0], coarse[n][0]);
      }
    }
  }
}

TEST(UmsaEstimate, SingleReplicateIsItsContribution) {
  TinyOu tiny;
  const UmsaEstimate estimate =
      umsa_estimate(tiny.model, tiny.obs, tiny.law, tiny.theta0, tiny.options, 1, 76);
  ASSERT_EQ(estimate.records.size(), 1u);
  EXPECT_EQ(estimate.theta[0], estimate.records[0].contribution[0]);
  EXPECT_FALSE(estimate.partial);
  EXPECT_THROW(umsa_estimate(tiny.model, tiny.obs, tiny.law, tiny.theta0, tiny.options, 0, 76),
               ConfigError);
}

TEST(UmsaEstimate, IndependentOfThreadCount) {
  TinyOu tiny;
  const UmsaEstimate one =
      umsa_estimate(tiny.model, tiny.obs, tiny.law, tiny.theta0, tiny.options, 24, 77, 1);
  const UmsaEstimate four =
      umsa_estimate(tiny.model, tiny.obs, tiny.law, tiny.theta0, tiny.options, 24, 77, 4);
  EXPECT_EQ(one.theta, four.theta);
  for (std::size_t i = 0; i < 24; ++i) {
    EXPECT_EQ(one.records[i].replicate, i);
    EXPECT_EQ(one.records[i].contribution, four.records[i].contribution);
    EXPECT_EQ(one.records[i].level, four.records[i].level);
    EXPECT_EQ(one.records[i].p, four.records[i].p);
    EXPECT_EQ(one.records[i].cost.gaussian_draws, four.records[i].cost.gaussian_draws);
  }
  double sum = 0.0;
  for (const auto& r : one.records) sum += r.contribution[0];
  EXPECT_EQ(one.theta[0], sum / 24.0);
}

TEST(UmsaEstimate, AbortsAreReportedNotDropped) {
  TinyOu tiny;
  tiny.options.schedule.gamma0 = 5.0;  // explodes within a few iterations
  const UmsaEstimate estimate =
      umsa_estimate(tiny.model, tiny.obs, tiny.law, tiny.theta0, tiny.options, 12, 78, 2);
  EXPECT_GT(estimate.aborted, 0u);
  EXPECT_TRUE(estimate.partial);
  std::size_t aborted = 0;
  double sum = 0.0;
  for (const auto& r : estimate.records) {
    if (r.aborted) {
      ++aborted;
      EXPECT_FALSE(r.abort_reason.empty());
      EXPECT_TRUE(std::isnan(r.contribution[0]));
    } else {
      sum += r.contribution[0];
    }
  }
  EXPECT_EQ(aborted, estimate.aborted);
  if (aborted < 12) {
    EXPECT_EQ(estimate.theta[0], sum / static_cast<double>(12 - aborted));
  }
}

TEST(UmsaEstimate, VarianceScalesInverselyWithReplicates) {
  TinyOu tiny;
  auto spread = [&](std::size_t M, std::uint64_t salt) {
    std::vector<double> estimates;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
      estimates.push_back(umsa_estimate(tiny.model, tiny.obs, tiny.law, tiny.theta0, tiny.options,
                                        M, mix_seed(salt, rep))
                              .theta[0]);
    }
    return testing::sample_variance(estimates);
  };
  const double ratio = spread(64, 79) / spread(256, 80);
  EXPECT_GE(ratio, 2.8);
  EXPECT_LE(ratio, 5.7);
}

TEST(UmsaEstimate, UnbiasedForTheTruncatedTarget) {
  // The single-term estimator is unbiased for E[theta^{l_max}_{N_{p_max}}];
  // an independent Monte Carlo average of that quantity is the oracle.
  TinyOu tiny;
  const UmsaEstimate estimate =
      umsa_estimate(tiny.model, tiny.obs, tiny.law, tiny.theta0, tiny.options, 4096, 81);
  ASSERT_EQ(estimate.aborted, 0u);
  std::vector<double> contributions;
  for (const auto& r : estimate.records) contributions.push_back(r.contribution[0]);
  MsaOptions msa;
  msa.level = 3;
  msa.iterations = tiny.law.iterations(6);
  msa.particles = 8;
  std::vector<double> direct;
  for (std::uint64_t r = 0; r < 4096; ++r) {
    RngStream rng(82, r);
    direct.push_back(msa_run(tiny.model, tiny.obs, tiny.theta0, msa, rng).theta.back()[0]);
  }
  const double se = std::sqrt(testing::sample_variance(contributions) / contributions.size() +
                              testing::sample_variance(direct) / direct.size());
  EXPECT_LE(std::abs(testing::mean(contributions) - testing::mean(direct)), 3.0 * se)
      << testing::mean(contributions) << " vs " << testing::mean(direct);
}

}  // namespace
}  // namespace umsa
