#pragma once

#include <aoi/harness/report.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace aoi::harness {

inline const std::vector<double> kPuPowersDbm{0.0, 5.0, 10.0, 15.0, 20.0};
inline const std::vector<double> kBatteryCapacities{5.0, 10.0};

struct FigureOutput {
  std::vector<SweepResult> sweeps;
  std::vector<std::filesystem::path> files;
};

/// The sweep(s) behind one figure, starting from `base` (seeds, agent and
/// environment knobs are kept; axis, values and schemes are set here).
inline std::vector<std::pair<std::string, ExperimentConfig>> figure_plan(int figure, const ExperimentConfig& base) {
  auto with = [&](SweepAxis axis, std::vector<double> values, std::vector<Scheme> schemes) {
    ExperimentConfig c = base;
    c.axis = axis;
    c.values = std::move(values);
    c.schemes = std::move(schemes);
    return c;
  };
  const std::vector<Scheme> all{Scheme::baseline, Scheme::dqn, Scheme::d3qn};
  const std::vector<Scheme> learners{Scheme::dqn, Scheme::d3qn};
  auto per_harvest = [&](ExperimentConfig c) {
    std::vector<std::pair<std::string, ExperimentConfig>> out;
    for (env::HarvestMode m : {env::HarvestMode::poisson, env::HarvestMode::truncated_normal}) {
      ExperimentConfig h = c;
      h.env.harvester.mode = m;
      out.emplace_back(env::harvest_mode_name(m), h);
    }
    return out;
  };
  switch (figure) {
    case 3: return per_harvest(with(SweepAxis::none, {}, all));
    case 4: return per_harvest(with(SweepAxis::b_max, kBatteryCapacities, learners));
    case 5: return {{"", with(SweepAxis::b_max, kBatteryCapacities, all)}};
    case 6:
    case 7: return {{"", with(SweepAxis::p_pu_dbm, kPuPowersDbm, all)}};
    case 8: return {{"", with(SweepAxis::none, {}, all)}};
    default: throw Error("invalid_figure", "figure must be one of 3..8");
  }
}

inline FigureOutput reproduce_figure(int figure, const ExperimentConfig& base, const std::filesystem::path& out,
                                     std::size_t jobs = 1, ProgressFn progress = {}) {
  FigureOutput fo;
  const std::string tag = "fig" + std::to_string(figure);
  ensure_dir(out);
  for (auto& [name, cfg] : figure_plan(figure, base)) {
    const std::filesystem::path dir = name.empty() ? out : out / name;
    SweepResult r = run_sweep(cfg, jobs, progress);
    write_sweep_outputs(r, dir, "reproduce --figure " + std::to_string(figure));
    switch (figure) {
      case 3:
        for (Scheme s : cfg.schemes)
          fo.files.push_back(
              write_reward_series(r, s, std::nan(""), out / (tag + "_" + name + "_" + scheme_name(s) + ".dat")));
        break;
      case 4:
        for (double v : cfg.values)
          for (Scheme s : cfg.schemes)
            fo.files.push_back(write_reward_series(
                r, s, v, out / (tag + "_" + name + "_bmax" + num(v) + "_" + scheme_name(s) + ".dat")));
        break;
      case 5:
      case 6:
        for (auto& f : write_xy_series(r, Metric::aoi, out, tag)) fo.files.push_back(f);
        break;
      case 7:
        for (auto& f : write_xy_series(r, Metric::rate, out, tag)) fo.files.push_back(f);
        break;
      case 8: {
        const auto path = out / (tag + "_access.dat");
        std::ofstream os(path, std::ios::binary);
        if (!os) throw Error("unwritable_output", "cannot write '" + path.string() + "'");
        os << "# scheme access ci95\n";
        for (Scheme s : cfg.schemes) {
          const MetricsRow* m = r.row(s, std::nan(""));
          os << scheme_name(s) << ' ' << fixed(m->access.mean) << ' ' << fixed(m->access.ci) << '\n';
        }
        fo.files.push_back(path);
        break;
      }
      default: break;
    }
    fo.sweeps.push_back(std::move(r));
  }
  return fo;
}

}  // namespace aoi::harness
