#include <aoi/oracle/deep_check.hpp>
#include <aoi/oracle/mdp.hpp>
#include <aoi/oracle/solvers.hpp>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/distributions/rayleigh.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

namespace {

using namespace aoi;
using namespace aoi::oracle;
using env::Action;

// ---------------------------------------------------------------------------
// Exhaustive enumeration of one slot of the discretized world: every
// combination of sensing branch, channel bin, harvest amount and next PU
// state, with probabilities taken from closed forms (Boost distributions).

struct Outcome {
  double prob;
  std::size_t next;
  double reward;  // realized: -aoi, plus xi * rate on a successful update
};

struct Toy {
  OracleSetup setup;
  StateIndex idx;

  int top() const { return setup.bins.battery_levels - 1; }
  double unit() const { return setup.env.b_max / top(); }
  int bins_of(double energy) const { return static_cast<int>(std::lround(energy / unit())); }

  double mean_pr() const {
    const auto& g = setup.env.geometry;
    const double k = 20.0 * std::log10((3e8 / g.freq_hz) / (4.0 * std::numbers::pi * g.d0));
    return g.p_pu_dbm + k - 10.0 * g.omega * std::log10(setup.distance / g.d0);
  }
  double q_above() const {
    const double var = setup.env.geometry.shadow_var_db;
    const boost::math::normal psi(0.0, std::sqrt(var));
    return boost::math::cdf(psi, mean_pr() - setup.env.sensing.n_th_dbm);
  }
  std::optional<double> grant() const {
    const auto& g = setup.env.geometry;
    const double k = 20.0 * std::log10((3e8 / g.freq_hz) / (4.0 * std::numbers::pi * g.d0));
    const double d_th = g.d0 * std::pow(10.0, (g.p_pu_dbm + k - setup.env.sensing.n0_dbm) / (10.0 * g.omega));
    if (setup.distance <= d_th) return std::nullopt;
    return std::min(setup.env.sensing.n0_dbm - k + 10.0 * g.omega * std::log10(setup.distance / g.d0),
                    g.p_full_dbm);
  }
  double shannon(double p_dbm, double h) const {
    return std::log2(1.0 + std::pow(10.0, (p_dbm - setup.env.sensing.n0_dbm) / 10.0) * h * h);
  }

  bool affordable(std::size_t s, Action x) const {
    const auto t = env::tuple_of(x);
    const int fixed = (t.sense ? bins_of(setup.env.costs.alpha) : 0) +
                      (t.report_location ? bins_of(setup.env.costs.delta) : 0);
    return fixed <= idx.battery(s);
  }

  std::vector<Outcome> outcomes(std::size_t s, Action x) const {
    if (!affordable(s, x)) x = Action::no_sense;
    const auto& cfg = setup.env;
    const auto t = env::tuple_of(x);
    const int aoi = idx.aoi(s), b = idx.battery(s);
    const bool pu = idx.pu_active(s);
    const int alpha = bins_of(cfg.costs.alpha), delta = bins_of(cfg.costs.delta);
    const double q = q_above();
    const int K = setup.bins.channel_bins;
    const boost::math::rayleigh fading(cfg.rayleigh_scale);
    const boost::math::poisson harvest(cfg.harvester.mean);
    const double p_active_next = pu ? 1.0 - cfg.pu.p_ai : cfg.pu.p_ia;

    struct Slot {
      double prob;
      int spend;
      bool success;
      double rate;
    };
    std::vector<Slot> slots;
    if (!t.sense) {
      slots.push_back({1.0, 0, false, 0.0});
    } else {
      // (probability, reading idle?, reading above?, true power above?)
      struct Reading {
        double p;
        bool idle, above, collide;
      };
      std::vector<Reading> readings;
      if (pu) {
        readings = {{(1 - cfg.sensing.p_d) * (1 - q), true, false, false},
                    {(1 - cfg.sensing.p_d) * q, true, false, true},
                    {cfg.sensing.p_d * q, false, true, false},
                    {cfg.sensing.p_d * (1 - q), false, false, false}};
      } else {
        readings = {{1 - cfg.sensing.p_f, true, false, false}, {cfg.sensing.p_f, false, false, false}};
      }
      for (const Reading& r : readings)
        for (int k = 0; k < K; ++k) {
          const double h = boost::math::quantile(fading, (k + 0.5) / K);
          const int phi = bins_of(std::min(1.0 / h, cfg.b_max));
          const double p = r.p / K;
          if (r.idle) {
            if (t.update && alpha + phi <= b)
              slots.push_back({p, alpha + phi, !r.collide, r.collide ? 0.0 : shannon(cfg.geometry.p_full_dbm, h)});
            else
              slots.push_back({p, alpha, false, 0.0});
          } else if (r.above || !t.report_location) {
            slots.push_back({p, alpha, false, 0.0});
          } else if (grant() && t.update && alpha + delta + phi <= b) {
            slots.push_back({p, alpha + delta + phi, true, shannon(*grant(), h)});
          } else {
            slots.push_back({p, alpha + delta, false, 0.0});
          }
        }
    }
    std::vector<Outcome> out;
    for (const Slot& sl : slots)
      for (int e = 0; e <= 60; ++e) {
        const double pe = boost::math::pdf(harvest, e);
        const int b2 = std::min(b - sl.spend + e, top());
        const int a2 = sl.success ? 1 : std::min(aoi + 1, setup.bins.aoi_levels);
        const double r = -aoi + (sl.success ? cfg.xi * sl.rate : 0.0);
        for (bool pu2 : {false, true}) {
          const double pp = pu2 ? p_active_next : 1.0 - p_active_next;
          out.push_back({sl.prob * pe * pp, idx(a2, b2, pu2), r});
        }
      }
    return out;
  }
};

Toy make_toy(int aoi_levels, int battery_levels, double b_max, double distance, double gamma) {
  Toy t;
  t.setup.env.b_max = b_max;
  t.setup.env.b0 = b_max;
  t.setup.env.costs.alpha = 1.0;
  t.setup.env.costs.delta = 1.0;
  t.setup.env.harvester.mean = 1.0;
  t.setup.bins = {aoi_levels, battery_levels, 4};
  t.setup.distance = distance;
  t.setup.gamma = gamma;
  t.idx = {aoi_levels, battery_levels};
  return t;
}

class BruteForce : public ::testing::TestWithParam<double> {};

TEST_P(BruteForce, TensorMatchesEnumeration) {
  // distance 10 m: detections above threshold, zero grant; 60 m: positive grant.
  const Toy toy = make_toy(2, 4, 3.0, GetParam(), 0.9);
  const MdpModel m = build_mdp(toy.setup);
  ASSERT_EQ(m.mdp.states(), 16u);
  for (std::size_t s = 0; s < m.mdp.states(); ++s)
    for (Action x : env::kAllActions) {
      const std::size_t a = env::index_of(x);
      EXPECT_EQ(m.mdp.valid(s, a), toy.affordable(s, x));
      std::vector<double> row(m.mdp.states(), 0.0);
      double reward = 0.0;
      for (const Outcome& o : toy.outcomes(s, x)) {
        row[o.next] += o.prob;
        reward += o.prob * o.reward;
      }
      for (std::size_t s2 = 0; s2 < row.size(); ++s2) EXPECT_NEAR(m.mdp.p(s, a, s2), row[s2], 1e-12);
      EXPECT_NEAR(m.mdp.reward(s, a), reward, 1e-9 * std::max(1.0, std::abs(reward)));
    }
}

INSTANTIATE_TEST_SUITE_P(Distances, BruteForce, ::testing::Values(10.0, 60.0));

TEST(BruteForce, ToyExercisesBothRegimes) {
  EXPECT_GT(make_toy(2, 4, 3.0, 10.0, 0.9).q_above(), 0.1);
  EXPECT_FALSE(make_toy(2, 4, 3.0, 10.0, 0.9).grant().has_value());
  EXPECT_TRUE(make_toy(2, 4, 3.0, 60.0, 0.9).grant().has_value());
}

OracleSetup acceptance_toy() {
  OracleSetup s;
  s.bins = {5, 4, 4};
  s.gamma = 0.5;
  s.env.xi = 0.1;
  return s;
}

TEST(BuildMdp, RowsAreStochastic) {
  for (const OracleSetup& s : {acceptance_toy(), make_toy(3, 3, 2.0, 10.0, 0.9).setup,
                               make_toy(4, 6, 5.0, 60.0, 0.95).setup}) {
    const MdpModel m = build_mdp(s);
    EXPECT_LE(m.mdp.max_row_error(), 1e-9);
    for (std::size_t st = 0; st < m.mdp.states(); ++st)
      for (std::size_t a = 0; a < m.mdp.actions(); ++a) EXPECT_TRUE(std::isfinite(m.mdp.reward(st, a)));
  }
}

TEST(BuildMdp, NormalHarvestRowsAreStochastic) {
  OracleSetup s = acceptance_toy();
  s.env.harvester = {env::HarvestMode::truncated_normal, 3.0, 0.5};
  EXPECT_LE(build_mdp(s).mdp.max_row_error(), 1e-9);
}

TEST(BuildMdp, OverlayOnCertainIdleRefreshes) {
  OracleSetup s = make_toy(3, 4, 3.0, 60.0, 0.9).setup;
  s.env.sensing.p_f = 0.0;
  const MdpModel m = build_mdp(s);
  const std::size_t st = m.index(2, 3, false);  // full battery covers alpha + any phi
  double fresh = 0.0;
  for (std::size_t s2 = 0; s2 < m.mdp.states(); ++s2)
    if (m.index.aoi(s2) == 1) fresh += m.mdp.p(st, env::index_of(Action::overlay), s2);
  EXPECT_NEAR(fresh, 1.0, 1e-12);
}

TEST(BuildMdp, DiscretizationTooCoarse) {
  OracleSetup s;
  s.env.b_max = 3.0;
  s.env.b0 = 3.0;  // unit 1: alpha 3 + delta 1 exceeds the top bin
  try {
    build_mdp(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "discretization_too_coarse");
    EXPECT_STREQ(e.what(), "discretization too coarse");
  }
  s.bins.battery_levels = 1;
  EXPECT_THROW(build_mdp(s), Error);
}

TEST(BuildMdp, EnergyBinningTiesGoDown) {
  EXPECT_EQ(energy_bins(1.5, 1.0), 1);
  EXPECT_EQ(energy_bins(2.5, 1.0), 2);
  EXPECT_EQ(energy_bins(1.51, 1.0), 2);
  EXPECT_EQ(energy_bins(1.49, 1.0), 1);
  EXPECT_EQ(energy_bins(10.0 / 3.0, 10.0 / 3.0), 1);
}

TEST(BuildMdp, PoissonPmfOnUnitBins) {
  const auto pmf = harvest_pmf({env::HarvestMode::poisson, 3.0, 0.5}, 1.0, 3);
  const boost::math::poisson p(3.0);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(pmf[static_cast<std::size_t>(k)], boost::math::pdf(p, k), 1e-14);
  EXPECT_NEAR(pmf[3], 1.0 - boost::math::cdf(p, 2), 1e-14);
}

TEST(BuildMdp, ChannelLevelsAreRayleighMidQuantiles) {
  const auto h = channel_levels(1.3, 5);
  const boost::math::rayleigh r(1.3);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(h[static_cast<std::size_t>(k)], boost::math::quantile(r, (k + 0.5) / 5), 1e-12);
}

TEST(ValueIteration, SingleStateGeometricSeries) {
  DiscreteMdp mdp(1, 1, 0.95);
  mdp.p(0, 0, 0) = 1.0;
  mdp.reward(0, 0) = -1.7;
  const ValueTable t = value_iteration(mdp, 1e-10);
  EXPECT_NEAR(t.v[0], 20.0 * -1.7, 1e-8);
}

TEST(ValueIteration, MyopicLimit) {
  DiscreteMdp mdp = build_mdp(acceptance_toy()).mdp;
  mdp.set_gamma(0.0);
  const ValueTable t = value_iteration(mdp, 1e-12);
  for (std::size_t s = 0; s < mdp.states(); ++s) {
    double best = -1e300;
    for (std::size_t a = 0; a < mdp.actions(); ++a)
      if (mdp.valid(s, a)) best = std::max(best, mdp.reward(s, a));
    EXPECT_DOUBLE_EQ(t.v[s], best);
  }
}

TEST(ValueIteration, RejectsNonStochasticRows) {
  DiscreteMdp mdp(2, 1, 0.9);
  mdp.p(0, 0, 0) = 0.5;
  mdp.p(1, 0, 1) = 1.0;
  try {
    value_iteration(mdp, 1e-6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "non_stochastic");
  }
}

TEST(ValueIteration, ContractionAndTableInvariants) {
  const MdpModel m = build_mdp(make_toy(5, 4, 3.0, 60.0, 0.95).setup);
  const ValueTable t = value_iteration(m.mdp, 1e-10);
  ASSERT_GT(t.residuals.size(), 10u);
  for (std::size_t k = 1; k < t.residuals.size(); ++k)
    EXPECT_LE(t.residuals[k], 0.95 * t.residuals[k - 1] + 1e-12) << "sweep " << k;
  EXPECT_LT(t.residuals.back(), 1e-10);
  for (std::size_t s = 0; s < m.mdp.states(); ++s) {
    const auto best = argmax_set(m.mdp, t, s, 0.0);
    EXPECT_NE(std::find(best.begin(), best.end(), t.policy[s]), best.end());
    EXPECT_EQ(t.v[s], t.qv(s, t.policy[s]));
  }
}

TEST(ValueIteration, PolicyInvariantUnderAffineRewards) {
  const MdpModel m = build_mdp(make_toy(4, 4, 3.0, 60.0, 0.9).setup);
  const ValueTable base = value_iteration(m.mdp, 1e-12);
  for (auto [c, d] : {std::pair{2.5, -7.0}, std::pair{0.1, 3.0}, std::pair{10.0, 100.0}}) {
    DiscreteMdp scaled = m.mdp;
    for (std::size_t s = 0; s < scaled.states(); ++s)
      for (std::size_t a = 0; a < scaled.actions(); ++a) scaled.reward(s, a) = c * m.mdp.reward(s, a) + d;
    const ValueTable t = value_iteration(scaled, 1e-12);
    for (std::size_t s = 0; s < scaled.states(); ++s) {
      const auto best = argmax_set(m.mdp, base, s, 1e-8);
      EXPECT_NE(std::find(best.begin(), best.end(), t.policy[s]), best.end()) << "state " << s;
    }
  }
}

TEST(ValueIteration, MatchesMonteCarloRollouts) {
  // 3 aoi levels x 3 battery levels; rollouts draw straight from the
  // enumerated slot outcomes, never from the built tensor.
  const Toy toy = make_toy(3, 3, 2.0, 10.0, 0.8);
  const MdpModel m = build_mdp(toy.setup);
  const ValueTable vi = value_iteration(m.mdp, 1e-12);
  const std::size_t n_s = m.mdp.states();

  struct Table {
    std::vector<double> cdf;
    std::vector<std::size_t> next;
    std::vector<double> reward;
  };
  std::vector<Table> tables(n_s);
  for (std::size_t s = 0; s < n_s; ++s) {
    std::map<std::pair<std::size_t, double>, double> merged;
    for (const Outcome& o : toy.outcomes(s, env::action_at(vi.policy[s]))) merged[{o.next, o.reward}] += o.prob;
    double acc = 0.0;
    for (const auto& [key, p] : merged) {
      acc += p;
      tables[s].cdf.push_back(acc);
      tables[s].next.push_back(key.first);
      tables[s].reward.push_back(key.second);
    }
  }

  Rng rng(31);
  const std::size_t rollouts = 1000000 / n_s + 1;
  const int horizon = 100;  // 0.8^100 ~ 2e-10
  for (std::size_t s0 = 0; s0 < n_s; ++s0) {
    double total = 0.0;
    for (std::size_t r = 0; r < rollouts; ++r) {
      std::size_t s = s0;
      double g = 0.0, disc = 1.0;
      for (int t = 0; t < horizon; ++t) {
        const Table& tb = tables[s];
        const double u = rng.uniform() * tb.cdf.back();
        const std::size_t i = static_cast<std::size_t>(std::upper_bound(tb.cdf.begin(), tb.cdf.end(), u) - tb.cdf.begin());
        const std::size_t j = std::min(i, tb.cdf.size() - 1);
        g += disc * tb.reward[j];
        disc *= 0.8;
        s = tb.next[j];
      }
      total += g;
    }
    const double mc = total / static_cast<double>(rollouts);
    EXPECT_NEAR(mc, vi.v[s0], 0.02 * std::abs(vi.v[s0])) << "state " << s0;
  }
}

DiscreteMdp two_state_chain(double gamma) {
  // action 0 stays, action 1 switches; staying in state 1 pays most.
  DiscreteMdp mdp(2, 2, gamma);
  mdp.p(0, 0, 0) = mdp.p(1, 0, 1) = 1.0;
  mdp.p(0, 1, 1) = mdp.p(1, 1, 0) = 1.0;
  mdp.reward(0, 0) = 0.2;
  mdp.reward(0, 1) = -0.5;
  mdp.reward(1, 0) = 1.0;
  mdp.reward(1, 1) = 0.3;
  return mdp;
}

TEST(TabularQ, DeterministicChainConverges) {
  const DiscreteMdp mdp = two_state_chain(0.9);
  const ValueTable vi = value_iteration(mdp, 1e-12);
  TabularQConfig cfg;
  cfg.episodes = 2000;  // 10^5 steps
  cfg.horizon = 50;
  cfg.beta = 0.5;
  cfg.step_power = 0.0;
  Rng rng(1);
  const ValueTable q = tabular_q(mdp, cfg, rng);
  EXPECT_LT(q_distance(mdp, q, vi), 1e-2);
  EXPECT_EQ(q.policy, vi.policy);
}

TEST(TabularQ, FullStepOverwritesVisitedPair) {
  const DiscreteMdp mdp = two_state_chain(0.9);
  TabularQConfig cfg;
  cfg.episodes = 1;
  cfg.horizon = 1;
  cfg.beta = 1.0;
  Rng rng(2);
  const ValueTable q = tabular_q(mdp, cfg, rng);
  int touched = 0;
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t a = 0; a < 2; ++a)
      if (q.qv(s, a) != 0.0) {
        ++touched;
        EXPECT_EQ(q.qv(s, a), mdp.reward(s, a));
      }
  EXPECT_EQ(touched, 1);
}

TEST(TabularQ, RejectsBadStepSize) {
  TabularQConfig cfg;
  cfg.beta = 1.5;
  Rng rng(3);
  EXPECT_THROW(tabular_q(two_state_chain(0.9), cfg, rng), Error);
}

TEST(TabularQ, GreedyAgreesOnSmallToy) {
  const MdpModel m = build_mdp(make_toy(3, 3, 2.0, 10.0, 0.8).setup);
  const ValueTable vi = value_iteration(m.mdp, 1e-12);
  TabularQConfig cfg;
  cfg.episodes = 100000;
  cfg.step_power = 0.7;
  Rng rng(4);
  const ValueTable q = tabular_q(m.mdp, cfg, rng);
  EXPECT_GE(policy_agreement(m.mdp, vi, q.policy), 0.95);
}

TEST(DeepCheck, FeaturesAndMask) {
  const MdpModel m = build_mdp(acceptance_toy());
  const auto f = mdp_features(m.index, m.index(5, 3, true));
  EXPECT_EQ(f, (std::vector<double>{1.0, 1.0, 1.0}));
  const std::size_t empty = m.index(1, 0, false);
  EXPECT_EQ(mdp_mask(m.mdp, empty), env::ActionMask::only(Action::no_sense));
}

}  // namespace
