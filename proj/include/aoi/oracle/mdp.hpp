#pragma once

// Finite, fully observed discretization of the spectrum-sharing world.
// State (aoi, battery bin, PU activity); the channel and the harvest are
// marginalized inside each slot. The SU picks a plan before the fading of the
// slot is known, so a planned update whose cost exceeds what is left after
// sensing (and reporting) is skipped.

#include <aoi/env/environment.hpp>
#include <aoi/error.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace aoi::oracle {

inline constexpr double kRowTolerance = 1e-9;

/// Dense |S| x |A| x |S| MDP.
class DiscreteMdp {
 public:
  DiscreteMdp() = default;
  DiscreteMdp(std::size_t states, std::size_t actions, double gamma)
      : n_s_(states), n_a_(actions), gamma_(gamma), p_(states * actions * states, 0.0),
        r_(states * actions, 0.0), valid_(states * actions, true) {
    if (states == 0 || actions == 0) throw Error("invalid_mdp", "mdp needs states and actions");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw Error("invalid_mdp", "discount must lie in [0,1)");
  }

  std::size_t states() const noexcept { return n_s_; }
  std::size_t actions() const noexcept { return n_a_; }
  double gamma() const noexcept { return gamma_; }
  void set_gamma(double g) {
    if (!(g >= 0.0 && g < 1.0)) throw Error("invalid_mdp", "discount must lie in [0,1)");
    gamma_ = g;
  }

  double& p(std::size_t s, std::size_t a, std::size_t s2) { return p_[(s * n_a_ + a) * n_s_ + s2]; }
  double p(std::size_t s, std::size_t a, std::size_t s2) const { return p_[(s * n_a_ + a) * n_s_ + s2]; }
  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {p_.data() + (s * n_a_ + a) * n_s_, n_s_};
  }
  double& reward(std::size_t s, std::size_t a) { return r_[s * n_a_ + a]; }
  double reward(std::size_t s, std::size_t a) const { return r_[s * n_a_ + a]; }

  bool valid(std::size_t s, std::size_t a) const { return valid_[s * n_a_ + a]; }
  void set_valid(std::size_t s, std::size_t a, bool v) { valid_[s * n_a_ + a] = v; }

  /// Largest |row sum - 1| over all (s, a).
  double max_row_error() const {
    double worst = 0.0;
    for (std::size_t s = 0; s < n_s_; ++s)
      for (std::size_t a = 0; a < n_a_; ++a) {
        double sum = 0.0;
        for (double x : row(s, a)) sum += x;
        worst = std::max(worst, std::abs(sum - 1.0));
      }
    return worst;
  }

  void validate() const {
    for (double x : p_)
      if (!(x >= 0.0) || !std::isfinite(x)) throw Error("non_stochastic", "non-stochastic rows");
    if (max_row_error() > kRowTolerance) throw Error("non_stochastic", "non-stochastic rows");
    for (double x : r_)
      if (!std::isfinite(x)) throw Error("invalid_mdp", "rewards must be finite");
    for (std::size_t s = 0; s < n_s_; ++s) {
      bool any = false;
      for (std::size_t a = 0; a < n_a_; ++a) any = any || valid(s, a);
      if (!any) throw Error("invalid_mdp", "state without a valid action");
    }
  }

  /// Draws s' from row (s, a) by inversion.
  std::size_t sample_next(std::size_t s, std::size_t a, double u) const {
    const auto r = row(s, a);
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t j = 0; j < n_s_; ++j) {
      if (r[j] <= 0.0) continue;
      acc += r[j];
      last = j;
      if (u < acc) return j;
    }
    return last;
  }

 private:
  std::size_t n_s_ = 0, n_a_ = 0;
  double gamma_ = 0.95;
  std::vector<double> p_;
  std::vector<double> r_;
  std::vector<bool> valid_;
};

/// Discretization resolution.
struct MdpBins {
  int aoi_levels = 5;      // aoi in 1..aoi_levels (saturating)
  int battery_levels = 4;  // bins 0..battery_levels-1, unit b_max / (battery_levels-1)
  int channel_bins = 4;    // equiprobable Rayleigh quantile bins
};

/// What the oracle fixes that the simulator draws per episode.
struct OracleSetup {
  env::EnvConfig env{};
  MdpBins bins{};
  double distance = 50.0;  // PU-SU distance in metres
  double gamma = 0.95;
};

/// State indexing: ((aoi-1) * battery_levels + battery) * 2 + pu.
struct StateIndex {
  int aoi_levels = 1;
  int battery_levels = 1;

  std::size_t count() const { return static_cast<std::size_t>(aoi_levels * battery_levels * 2); }
  std::size_t operator()(int aoi, int battery, bool pu_active) const {
    return static_cast<std::size_t>(((aoi - 1) * battery_levels + battery) * 2 + (pu_active ? 1 : 0));
  }
  int aoi(std::size_t s) const { return static_cast<int>(s / 2) / battery_levels + 1; }
  int battery(std::size_t s) const { return static_cast<int>(s / 2) % battery_levels; }
  bool pu_active(std::size_t s) const { return s % 2 == 1; }
};

/// Nearest battery bin of an energy amount; exact halves go to the lower bin.
inline int energy_bins(double energy, double unit) {
  const double x = energy / unit;
  return static_cast<int>(std::ceil(x - 0.5 - 1e-9));
}

/// Harvest pmf over bins 0..top-1 plus the tail bin top (everything beyond).
inline std::vector<double> harvest_pmf(const env::Harvester& h, double unit, int top) {
  std::vector<double> pmf(static_cast<std::size_t>(top) + 1, 0.0);
  if (h.mode == env::HarvestMode::poisson) {
    double below_tail = 0.0;
    // Poisson mass is integer-valued: walk integers until they bin into the tail.
    for (int e = 0;; ++e) {
      const int k = energy_bins(static_cast<double>(e), unit);
      if (k >= top) break;
      const double m = std::exp(static_cast<double>(e) * std::log(h.mean) - h.mean - std::lgamma(e + 1.0));
      pmf[static_cast<std::size_t>(k)] += m;
      below_tail += m;
    }
    pmf[static_cast<std::size_t>(top)] = std::max(0.0, 1.0 - below_tail);
    return pmf;
  }
  // max(0, N(mean, std)): the clipped mass sits at zero energy, bin 0.
  auto cdf = [&](double x) {
    if (h.std <= 0.0) return x >= h.mean ? 1.0 : 0.0;
    return 0.5 * std::erfc(-(x - h.mean) / (h.std * std::sqrt(2.0)));
  };
  double prev = 0.0;
  for (int k = 0; k < top; ++k) {
    const double edge = cdf((k + 0.5) * unit);
    pmf[static_cast<std::size_t>(k)] = edge - prev;
    prev = edge;
  }
  pmf[static_cast<std::size_t>(top)] = 1.0 - prev;
  return pmf;
}

/// Representative |h| of equiprobable Rayleigh quantile bins (mid-quantile).
inline std::vector<double> channel_levels(double scale, int bins) {
  std::vector<double> h(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    const double q = (k + 0.5) / bins;
    h[static_cast<std::size_t>(k)] = scale * std::sqrt(-2.0 * std::log(1.0 - q));
  }
  return h;
}

/// Probability that the PU's received power at the SU clears the threshold.
inline double prob_above_threshold(const env::Geometry& g, const env::SensingModel& m, double shadow_var_db) {
  const double mean = env::received_power(g, true, 0.0);
  if (shadow_var_db <= 0.0) return mean > m.n_th_dbm ? 1.0 : 0.0;
  // P(mean - psi > n_th) with psi ~ N(0, var).
  return 0.5 * std::erfc(-(mean - m.n_th_dbm) / std::sqrt(2.0 * shadow_var_db));
}

/// Geometry of the oracle: PU at the origin, SU at the fixed distance.
inline env::Geometry oracle_geometry(const OracleSetup& setup) {
  env::Geometry g = setup.env.geometry;
  g.pu_pos = {0.0, 0.0};
  g.su_pos = {setup.distance, 0.0};
  return g;
}

struct MdpModel {
  DiscreteMdp mdp;
  StateIndex index;
  double unit = 1.0;
};

inline MdpModel build_mdp(const OracleSetup& setup) {
  using env::Action;
  using env::Observation;
  const env::EnvConfig& cfg = setup.env;
  cfg.validate();
  const MdpBins& bins = setup.bins;
  if (bins.aoi_levels < 2 || bins.battery_levels < 2 || bins.channel_bins < 1)
    throw Error("invalid_bins", "need at least 2 bins per axis");

  const int top = bins.battery_levels - 1;
  const double unit = cfg.b_max / top;
  const env::EnergyCosts costs = cfg.effective_costs();
  const int alpha = energy_bins(costs.alpha, unit);
  const int delta = energy_bins(costs.delta, unit);
  if (alpha > top || alpha + delta > top) throw Error("discretization_too_coarse", "discretization too coarse");

  const env::Geometry geom = oracle_geometry(setup);
  const double q_above = prob_above_threshold(geom, cfg.sensing, geom.shadow_var_db);
  const env::PowerGrant grant = env::allocate_power(geom, cfg.sensing);
  const std::vector<double> pmf = harvest_pmf(cfg.harvester, unit, top);
  const std::vector<double> h_levels = channel_levels(cfg.rayleigh_scale, bins.channel_bins);
  const double h_mass = 1.0 / bins.channel_bins;

  StateIndex idx{bins.aoi_levels, bins.battery_levels};
  MdpModel model{DiscreteMdp(idx.count(), env::kNumActions, setup.gamma), idx, unit};
  DiscreteMdp& mdp = model.mdp;

  struct Branch {
    double prob;
    Observation obs;
    bool collision;  // only meaningful for an idle reading
  };

  for (std::size_t s = 0; s < idx.count(); ++s) {
    const int aoi = idx.aoi(s);
    const int b = idx.battery(s);
    const bool pu = idx.pu_active(s);
    const double p_next_active = pu ? cfg.pu.p_aa() : cfg.pu.p_ia;

    std::vector<Branch> branches;
    if (pu) {
      branches = {{(1.0 - cfg.sensing.p_d) * (1.0 - q_above), Observation::idle, false},
                  {(1.0 - cfg.sensing.p_d) * q_above, Observation::idle, true},
                  {cfg.sensing.p_d * q_above, Observation::active_above, false},
                  {cfg.sensing.p_d * (1.0 - q_above), Observation::active_below, false}};
    } else {
      branches = {{1.0 - cfg.sensing.p_f, Observation::idle, false},
                  {cfg.sensing.p_f, Observation::active_below, false}};
    }

    // Adds mass m of a slot that ends with spend `cost` bins and fresh age `aoi_next`.
    auto deposit = [&](std::size_t a, double m, int cost, int aoi_next) {
      const int left = b - cost;
      for (int e = 0; e <= top; ++e) {
        const double pe = pmf[static_cast<std::size_t>(e)];
        if (pe == 0.0) continue;
        const int b_next = std::min(left + e, top);
        mdp.p(s, a, idx(aoi_next, b_next, true)) += m * pe * p_next_active;
        mdp.p(s, a, idx(aoi_next, b_next, false)) += m * pe * (1.0 - p_next_active);
      }
    };
    const int aged = std::min(aoi + 1, bins.aoi_levels);

    for (Action x : env::kAllActions) {
      const std::size_t a = env::index_of(x);
      const env::DecisionTuple plan = env::tuple_of(x);
      const int fixed = (plan.sense ? alpha : 0) + (plan.report_location ? delta : 0);
      if (fixed > b) {
        mdp.set_valid(s, a, false);
        continue;
      }
      double r = -static_cast<double>(aoi);
      if (!plan.sense) {
        deposit(a, 1.0, 0, aged);
        mdp.reward(s, a) = r;
        continue;
      }
      for (const Branch& br : branches) {
        if (br.prob <= 0.0) continue;
        for (std::size_t k = 0; k < h_levels.size(); ++k) {
          const double m = br.prob * h_mass;
          const double h = h_levels[k];
          const int phi = energy_bins(costs.update_cost(h), unit);
          switch (br.obs) {
            case Observation::idle: {
              if (plan.update && alpha + phi <= b) {
                if (br.collision) {
                  deposit(a, m, alpha + phi, aged);
                } else {
                  r += m * cfg.xi * env::rate(geom.p_full_dbm, h, cfg.sensing.n0_dbm);
                  deposit(a, m, alpha + phi, 1);
                }
              } else {
                deposit(a, m, alpha, aged);
              }
              break;
            }
            case Observation::active_above:
              deposit(a, m, alpha, aged);
              break;
            case Observation::active_below: {
              if (!plan.report_location) {
                deposit(a, m, alpha, aged);
              } else if (grant && plan.update && alpha + delta + phi <= b) {
                r += m * cfg.xi * env::rate(grant, h, cfg.sensing.n0_dbm);
                deposit(a, m, alpha + delta + phi, 1);
              } else {
                deposit(a, m, alpha + delta, aged);
              }
              break;
            }
            case Observation::none:
              break;
          }
        }
      }
      mdp.reward(s, a) = r;
    }

    // Unaffordable plans fall back to not sensing.
    const std::size_t ns = env::index_of(Action::no_sense);
    for (std::size_t a = 0; a < env::kNumActions; ++a) {
      if (mdp.valid(s, a)) continue;
      for (std::size_t s2 = 0; s2 < idx.count(); ++s2) mdp.p(s, a, s2) = mdp.p(s, ns, s2);
      mdp.reward(s, a) = mdp.reward(s, ns);
    }
  }
  mdp.validate();
  return model;
}

}  // namespace aoi::oracle
