#pragma once

// Reference computations shared by the unit tests and the acceptance run.
// Nothing here calls into the code under test for the quantity it checks.

#include <aoi/env/environment.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

namespace aoi::testing {

/// Two-sided 99% normal quantile.
inline constexpr double kZ99 = 2.5758293035489004;

/// Half-width of the 99% binomial interval for n draws at probability p.
inline double binomial_half_width(double p, std::size_t n) {
  return kZ99 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

/// What the slot looked like, independent of how env_step branches.
struct SlotFacts {
  env::Action plan = env::Action::no_sense;
  env::Observation obs = env::Observation::none;
  bool pu_active = false;
  bool above = false;  // true P_r above the detection threshold
  bool grant = false;  // central entity would grant positive power
};

/// The eight slot outcomes written as predicates over SlotFacts.
inline std::vector<bool> case_predicates(const SlotFacts& f) {
  using env::Observation;
  const env::DecisionTuple t = env::tuple_of(f.plan);
  const bool z = t.sense, l = t.report_location, u = t.update;
  const bool idle = f.obs == Observation::idle;
  const bool below = f.obs == Observation::active_below;
  const bool above = f.obs == Observation::active_above;
  return {
      !z,
      z && idle && u && !(f.pu_active && f.above),
      z && idle && u && f.pu_active && f.above,
      z && idle && !u,
      z && above,
      z && below && l && f.grant && u,
      z && below && (!l || (f.grant && !u)),
      z && below && l && !f.grant,
  };
}

/// 1-based index of the single true predicate, 0 when none or several hold.
inline int predicted_case(const SlotFacts& f) {
  const auto p = case_predicates(f);
  int hit = 0, count = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i]) {
      hit = static_cast<int>(i) + 1;
      ++count;
    }
  return count == 1 ? hit : 0;
}

/// Energy a realized action draws: alpha Z + min(1/h, cap) U + delta L.
inline double spend(env::Action realized, double h, double alpha, double delta, double cap) {
  const env::DecisionTuple t = env::tuple_of(realized);
  double c = 0.0;
  if (t.sense) c += alpha;
  if (t.update) c += std::min(1.0 / h, cap);
  if (t.report_location) c += delta;
  return c;
}

}  // namespace aoi::testing
