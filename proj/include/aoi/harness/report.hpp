#pragma once

// CSV, plot-column and manifest writers. Every number is printed with a
// fixed format so identical runs give byte-identical files.

#include <aoi/harness/sweep.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace aoi::harness {

inline std::string num(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string fixed(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw Error("unwritable_output", "cannot create output directory '" + dir.string() + "'");
}

class CsvFile {
 public:
  explicit CsvFile(const std::filesystem::path& path) : path_(path), os_(path, std::ios::binary) {
    if (!os_) throw Error("unwritable_output", "cannot write '" + path.string() + "'");
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
    if (!os_) throw Error("unwritable_output", "cannot write '" + path_.string() + "'");
  }

 private:
  std::filesystem::path path_;
  std::ofstream os_;
};

inline void write_metrics_csv(const SweepResult& r, const std::filesystem::path& path) {
  CsvFile f(path);
  f.row({"scheme", "axis", "value", "seeds", "aoi_mean", "aoi_ci95", "rate_mean", "rate_ci95", "access_mean",
         "access_ci95", "reward_mean", "reward_ci95"});
  const std::string axis = axis_name(r.config.axis);
  for (const auto& m : r.rows)
    f.row({scheme_name(m.scheme), axis, num(m.value), std::to_string(m.aoi.n), fixed(m.aoi.mean),
           fixed(m.aoi.ci), fixed(m.rate.mean), fixed(m.rate.ci), fixed(m.access.mean), fixed(m.access.ci),
           fixed(m.reward.mean, 3), fixed(m.reward.ci, 3)});
}

inline void write_runs_csv(const SweepResult& r, const std::filesystem::path& path) {
  CsvFile f(path);
  f.row({"scheme", "axis", "value", "seed", "aoi", "rate", "access", "eval_reward", "final_reward"});
  const std::string axis = axis_name(r.config.axis);
  for (const auto& run : r.runs)
    f.row({scheme_name(run.scheme), axis, num(run.value), std::to_string(run.seed), fixed(run.eval.aoi),
           fixed(run.eval.rate), fixed(run.eval.access), fixed(run.eval.reward, 3), fixed(run.final_reward, 3)});
}

inline void write_reward_curve_csv(const SweepResult& r, const std::filesystem::path& path) {
  CsvFile f(path);
  f.row({"scheme", "axis", "value", "seed", "episode", "reward", "reward_smoothed"});
  const std::string axis = axis_name(r.config.axis);
  for (const auto& run : r.runs) {
    const auto sm = smooth(run.train_rewards, r.config.smoothing);
    for (std::size_t i = 0; i < run.train_rewards.size(); ++i)
      f.row({scheme_name(run.scheme), axis, num(run.value), std::to_string(run.seed), std::to_string(i),
             fixed(run.train_rewards[i], 3), fixed(sm[i], 3)});
  }
}

inline void write_access_csv(const SweepResult& r, const std::filesystem::path& path) {
  CsvFile f(path);
  std::vector<std::string> head{"scheme", "axis", "value", "seed"};
  for (int c = 1; c <= 8; ++c) head.push_back("case" + std::to_string(c));
  head.push_back("access");
  f.row(head);
  const std::string axis = axis_name(r.config.axis);
  for (const auto& run : r.runs) {
    std::vector<std::string> cells{scheme_name(run.scheme), axis, num(run.value), std::to_string(run.seed)};
    for (int c = 1; c <= 8; ++c) cells.push_back(std::to_string(run.eval.cases[static_cast<std::size_t>(c)]));
    cells.push_back(fixed(run.eval.access));
    f.row(cells);
  }
}

struct CompareEntry {
  double value = 0.0;
  Scheme scheme = Scheme::dqn;
  std::string rate_delta;  // "+54.6%" or "n/a"
  std::string aoi_delta;
};

/// Relative change against the baseline in percent, one decimal.
inline std::string percent_delta(double scheme, double baseline) {
  if (baseline == 0.0) return "n/a";
  const double pct = (scheme - baseline) / baseline * 100.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", pct);
  if (std::string_view(buf + 1) == "0.0%") return "0.0%";
  return buf;
}

inline std::vector<CompareEntry> compare_table(const std::vector<MetricsRow>& rows) {
  std::vector<CompareEntry> out;
  for (const auto& m : rows) {
    if (m.scheme == Scheme::baseline) continue;
    const MetricsRow* base = nullptr;
    for (const auto& b : rows)
      if (b.scheme == Scheme::baseline && (b.value == m.value || (std::isnan(b.value) && std::isnan(m.value))))
        base = &b;
    if (!base) throw Error("missing_baseline", "no baseline row for sweep value " + num(m.value));
    out.push_back({m.value, m.scheme, percent_delta(m.rate.mean, base->rate.mean),
                   percent_delta(m.aoi.mean, base->aoi.mean)});
  }
  return out;
}

inline void write_compare_csv(const SweepResult& r, const std::filesystem::path& path) {
  CsvFile f(path);
  f.row({"axis", "value", "scheme", "rate_delta", "aoi_delta"});
  for (const auto& e : compare_table(r.rows))
    f.row({axis_name(r.config.axis), num(e.value), scheme_name(e.scheme), e.rate_delta, e.aoi_delta});
}

inline void require_schemes(const SweepResult& r, const std::vector<Scheme>& needed) {
  std::string missing;
  for (Scheme s : needed)
    if (std::find(r.config.schemes.begin(), r.config.schemes.end(), s) == r.config.schemes.end())
      missing += (missing.empty() ? "" : ",") + scheme_name(s);
  if (!missing.empty()) throw Error("missing_series", "missing series: " + missing);
}

enum class Metric { aoi, rate, access };

/// One file per scheme with columns (x, mean, ci95).
inline std::vector<std::filesystem::path> write_xy_series(const SweepResult& r, Metric metric,
                                                          const std::filesystem::path& dir,
                                                          const std::string& stem) {
  std::vector<std::filesystem::path> files;
  const char* label = metric == Metric::aoi ? "avg_aoi" : metric == Metric::rate ? "avg_rate" : "access";
  for (Scheme s : r.config.schemes) {
    const auto path = dir / (stem + "_" + scheme_name(s) + ".dat");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("unwritable_output", "cannot write '" + path.string() + "'");
    os << "# " << axis_name(r.config.axis) << ' ' << label << " ci95\n";
    for (double v : r.config.points()) {
      const MetricsRow* m = r.row(s, v);
      const Summary& x = metric == Metric::aoi ? m->aoi : metric == Metric::rate ? m->rate : m->access;
      os << num(v) << ' ' << fixed(x.mean) << ' ' << fixed(x.ci) << '\n';
    }
    files.push_back(path);
  }
  return files;
}

/// Seed-averaged training return per episode, raw and smoothed.
inline std::filesystem::path write_reward_series(const SweepResult& r, Scheme s, double value,
                                                 const std::filesystem::path& path) {
  std::vector<double> mean;
  std::size_t n = 0;
  for (const auto& run : r.runs) {
    const bool same = run.value == value || (std::isnan(run.value) && std::isnan(value));
    if (run.scheme != s || !same) continue;
    if (mean.empty()) mean.assign(run.train_rewards.size(), 0.0);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += run.train_rewards[i];
    ++n;
  }
  if (n == 0) throw Error("missing_series", "missing series: " + scheme_name(s));
  for (double& m : mean) m /= static_cast<double>(n);
  const auto sm = smooth(mean, r.config.smoothing);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("unwritable_output", "cannot write '" + path.string() + "'");
  os << "# episode reward reward_smoothed\n";
  for (std::size_t i = 0; i < mean.size(); ++i) os << i << ' ' << fixed(mean[i], 3) << ' ' << fixed(sm[i], 3) << '\n';
  return path;
}

/// Writes metrics.csv, runs.csv, reward_curve.csv, access.csv, compare.csv
/// (when a baseline is present) and manifest.json into dir.
inline void write_sweep_outputs(const SweepResult& r, const std::filesystem::path& dir,
                                const std::string& command) {
  ensure_dir(dir);
  write_metrics_csv(r, dir / "metrics.csv");
  write_runs_csv(r, dir / "runs.csv");
  write_reward_curve_csv(r, dir / "reward_curve.csv");
  write_access_csv(r, dir / "access.csv");
  std::vector<std::string> files{"metrics.csv", "runs.csv", "reward_curve.csv", "access.csv"};
  const bool has_baseline =
      std::find(r.config.schemes.begin(), r.config.schemes.end(), Scheme::baseline) != r.config.schemes.end();
  if (has_baseline && r.config.schemes.size() > 1) {
    write_compare_csv(r, dir / "compare.csv");
    files.push_back("compare.csv");
  }
  json manifest = {{"command", command},
                   {"config_hash", hex64(config_hash(r.config))},
                   {"seeds", r.config.seeds},
                   {"files", files},
                   {"config", config_to_json(r.config)}};
  std::ofstream os(dir / "manifest.json", std::ios::binary);
  if (!os) throw Error("unwritable_output", "cannot write manifest in '" + dir.string() + "'");
  os << manifest.dump(2) << '\n';
}

}  // namespace aoi::harness
