// aoi: command-line front-end for training, evaluation, sweeps, the MDP
// oracle, gradient checks and figure reproduction.
//
// Errors go to stderr as one line:  error:<code>:<message>

#include <aoi/harness/figures.hpp>
#include <aoi/nn/checkpoint.hpp>
#include <aoi/nn/gradcheck.hpp>
#include <aoi/oracle/deep_check.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace aoi;
using harness::json;
namespace fs = std::filesystem;

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitCheckFailed = 3;

// Options shared by the experiment subcommands.
struct Common {
  std::string config_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> sets;
  std::optional<std::size_t> episodes, horizon, warmup, eval_episodes;
  std::optional<double> p_pu, b_max;
  std::optional<std::string> harvest;
  std::size_t jobs = 1;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c, bool experiment = true) {
  app->add_option("--config", c.config_path, "JSON config file");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "run seed (replaces the seed list)");
  app->add_option("--set", c.sets, "override any config key: section.key=value")->take_all();
  app->add_option("--episodes", c.episodes, "training episodes");
  app->add_option("--horizon", c.horizon, "slots per episode");
  app->add_option("--warmup", c.warmup, "transitions stored before the first update");
  app->add_option("--p-pu", c.p_pu, "PU transmit power, dBm");
  app->add_option("--b-max", c.b_max, "battery capacity");
  app->add_option("--harvest", c.harvest, "harvest law: poisson | normal");
  if (!experiment) return;
  app->add_option("--seeds", c.seeds, "seed list")->delimiter(',');
  app->add_option("--eval-episodes", c.eval_episodes, "greedy evaluation episodes per seed");
  app->add_option("--jobs", c.jobs, "parallel workers")->check(CLI::PositiveNumber);
  app->add_flag("--quiet", c.quiet, "no progress lines");
}

json load_doc(const Common& c) {
  harness::ExperimentConfig cfg;
  if (!c.config_path.empty()) cfg = harness::config_from_json(harness::load_json_file(c.config_path), cfg);
  json doc = harness::config_to_json(cfg);
  auto set = [&](const std::string& s) { harness::apply_override(doc, s); };
  if (c.episodes) set("agent.episodes=" + std::to_string(*c.episodes));
  if (c.horizon) set("agent.horizon=" + std::to_string(*c.horizon));
  if (c.warmup) set("agent.warmup=" + std::to_string(*c.warmup));
  if (c.eval_episodes) set("experiment.eval_episodes=" + std::to_string(*c.eval_episodes));
  if (c.p_pu) set("env.geometry.p_pu_dbm=" + harness::num(*c.p_pu));
  if (c.b_max) {
    // A full battery at the start stays full at the new capacity.
    const double ratio = cfg.env.b0 / cfg.env.b_max;
    set("env.energy.b_max=" + harness::num(*c.b_max));
    set("env.energy.b0=" + harness::num(ratio * *c.b_max));
  }
  if (c.harvest) set("env.energy.mode=\"" + *c.harvest + "\"");
  if (!c.seeds.empty()) doc["experiment"]["seeds"] = c.seeds;
  if (c.seed) doc["experiment"]["seeds"] = std::vector<std::uint64_t>{*c.seed};
  for (const auto& s : c.sets) set(s);
  return doc;
}

harness::ExperimentConfig load_config(const Common& c) { return harness::config_from_json(load_doc(c)); }

harness::ProgressFn progress_printer(const Common& c) {
  if (c.quiet) return {};
  return [](const harness::RunResult& r) {
    std::fprintf(stderr, "run %s value=%s seed=%llu aoi=%.3f access=%.3f rate=%.3f\n",
                 harness::scheme_name(r.scheme).c_str(), harness::num(r.value).c_str(),
                 static_cast<unsigned long long>(r.seed), r.eval.aoi, r.eval.access, r.eval.rate);
  };
}

json eval_json(const harness::EvalSummary& e) {
  return {{"aoi", e.aoi}, {"rate", e.rate}, {"access", e.access}, {"reward", e.reward}};
}

// ---------------------------------------------------------------------------

int cmd_train(const Common& c, const std::string& scheme_text) {
  harness::ExperimentConfig cfg = load_config(c);
  cfg.axis = harness::SweepAxis::none;
  const harness::Scheme scheme = harness::parse_scheme(scheme_text);
  const std::uint64_t seed = cfg.seeds.front();
  const fs::path out(c.out);
  harness::ensure_dir(out);
  harness::RunResult r = harness::run_single(cfg, scheme, std::nan(""), seed, true);

  harness::CsvFile curve(out / "train.csv");
  curve.row({"episode", "reward", "reward_smoothed"});
  const auto sm = harness::smooth(r.train_rewards, cfg.smoothing);
  for (std::size_t i = 0; i < r.train_rewards.size(); ++i)
    curve.row({std::to_string(i), harness::fixed(r.train_rewards[i], 3), harness::fixed(sm[i], 3)});
  if (r.net) nn::save_checkpoint((out / "checkpoint.bin").string(), *r.net, seed);

  json summary = {{"command", "train"},
                  {"scheme", scheme_text},
                  {"seed", seed},
                  {"config_hash", harness::hex64(harness::config_hash(cfg))},
                  {"final_reward", r.final_reward},
                  {"eval", eval_json(r.eval)},
                  {"config", harness::config_to_json(cfg)}};
  std::ofstream(out / "summary.json", std::ios::binary) << summary.dump(2) << '\n';
  std::cout << json{{"scheme", scheme_text}, {"seed", seed}, {"eval", eval_json(r.eval)}}.dump() << '\n';
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& scheme_text) {
  harness::ExperimentConfig cfg = load_config(c);
  const std::uint64_t seed = cfg.seeds.front();
  env::Environment e(cfg.env, derive_key(seed, harness::kEvalWorld));
  const std::size_t horizon = cfg.agent.horizon;
  std::vector<agents::EpisodeRecord> eps;

  if (checkpoint.empty()) {
    const harness::Scheme s = harness::parse_scheme(scheme_text);
    if (s != harness::Scheme::baseline)
      throw Error("missing_checkpoint", "learner evaluation needs --checkpoint");
    for (std::size_t ep = 0; ep < cfg.eval_episodes; ++ep) eps.push_back(agents::run_baseline_episode(e, ep, horizon));
  } else {
    const nn::Checkpoint cp = nn::load_checkpoint(checkpoint);
    if (cp.net.inputs() != agents::kStateFeatures || cp.net.outputs() != env::kNumActions)
      throw Error("bad_checkpoint", "checkpoint topology does not fit the environment");
    const agents::StateEncoder encode(cfg.env);
    for (std::size_t ep = 0; ep < cfg.eval_episodes; ++ep)
      eps.push_back(agents::run_policy_episode(e, ep, horizon, [&](const env::EnvState& s, env::ActionMask m) {
        return env::action_at(agents::masked_argmax(cp.net.forward(encode(s)), m));
      }));
  }

  const fs::path out(c.out);
  harness::ensure_dir(out);
  harness::CsvFile f(out / "eval.csv");
  f.row({"episode", "reward", "aoi", "rate", "access"});
  for (std::size_t i = 0; i < eps.size(); ++i)
    f.row({std::to_string(i), harness::fixed(eps[i].total_reward(), 3), harness::fixed(eps[i].mean_aoi()),
           harness::fixed(eps[i].mean_rate()), harness::fixed(agents::access_fraction(eps[i]))});
  std::cout << json{{"seed", seed}, {"eval", eval_json(harness::summarize_episodes(eps))}}.dump() << '\n';
  return 0;
}

int cmd_sweep(const Common& c) {
  const harness::ExperimentConfig cfg = load_config(c);
  const harness::SweepResult r = harness::run_sweep(cfg, c.jobs, progress_printer(c));
  harness::write_sweep_outputs(r, c.out, "sweep");
  for (const auto& m : r.rows)
    std::cout << harness::scheme_name(m.scheme) << ' ' << harness::axis_name(cfg.axis) << '=' << harness::num(m.value)
              << " aoi=" << harness::fixed(m.aoi.mean, 4) << "+-" << harness::fixed(m.aoi.ci, 4)
              << " rate=" << harness::fixed(m.rate.mean, 4) << "+-" << harness::fixed(m.rate.ci, 4)
              << " access=" << harness::fixed(m.access.mean, 4) << "+-" << harness::fixed(m.access.ci, 4) << '\n';
  return 0;
}

struct OracleOptions {
  int aoi_levels = 5, battery_levels = 4, channel_bins = 4;
  double distance = 50.0, gamma = 0.5, xi = 0.1, tol = 1e-10;
  std::size_t q_episodes = 0, dqn_episodes = 0;
};

int cmd_oracle(const Common& c, const OracleOptions& o) {
  const harness::ExperimentConfig cfg = load_config(c);
  oracle::OracleSetup setup;
  setup.env = cfg.env;
  setup.env.xi = o.xi;
  setup.bins = {o.aoi_levels, o.battery_levels, o.channel_bins};
  setup.distance = o.distance;
  setup.gamma = o.gamma;
  const oracle::MdpModel m = oracle::build_mdp(setup);
  const oracle::ValueTable vi = oracle::value_iteration(m.mdp, o.tol);
  const std::uint64_t seed = cfg.seeds.front();

  const fs::path out(c.out);
  harness::ensure_dir(out);
  harness::CsvFile f(out / "values.csv");
  f.row({"state", "aoi", "battery_bin", "pu_active", "v", "policy", "q_no_sense", "q_silent", "q_overlay",
         "q_underlay", "q_underlay_denied"});
  for (std::size_t s = 0; s < m.mdp.states(); ++s) {
    std::vector<std::string> cells{std::to_string(s), std::to_string(m.index.aoi(s)),
                                   std::to_string(m.index.battery(s)), m.index.pu_active(s) ? "1" : "0",
                                   harness::fixed(vi.v[s], 9), std::string(env::name_of(env::action_at(vi.policy[s])))};
    for (std::size_t a = 0; a < env::kNumActions; ++a)
      cells.push_back(m.mdp.valid(s, a) ? harness::fixed(vi.qv(s, a), 9) : "");
    f.row(cells);
  }

  json summary = {{"states", m.mdp.states()}, {"sweeps", vi.residuals.size()}, {"gamma", o.gamma},
                  {"final_residual", vi.residuals.back()}};
  if (o.q_episodes > 0) {
    Rng rng(derive_key(seed, 0x7AB));
    oracle::TabularQConfig tc;
    tc.episodes = o.q_episodes;
    const oracle::ValueTable tq = oracle::tabular_q(m.mdp, tc, rng);
    summary["tabular_q_distance"] = oracle::q_distance(m.mdp, tq, vi);
    summary["tabular_q_agreement"] = oracle::policy_agreement(m.mdp, vi, tq.policy);
  }
  if (o.dqn_episodes > 0) {
    oracle::DeepCheckConfig dc;
    dc.agent = cfg.agent;
    dc.episodes = o.dqn_episodes;
    summary["dqn_agreement"] = oracle::train_on_mdp(m, vi, dc, seed).agreement;
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t nets, const std::string& head, double threshold) {
  std::vector<nn::HeadKind> heads;
  if (head == "plain" || head == "both") heads.push_back(nn::HeadKind::plain);
  if (head == "dueling" || head == "both") heads.push_back(nn::HeadKind::dueling);
  if (heads.empty()) throw Error("usage", "head must be plain, dueling or both");
  double worst = 0.0;
  for (nn::HeadKind h : heads)
    for (std::size_t i = 0; i < nets; ++i) {
      Rng rng(derive_key(seed, static_cast<std::uint64_t>(h), i));
      const nn::DenseNet net = nn::DenseNet::he_uniform({4, {64, 64}, 5, h}, rng);
      const std::vector<double> x = nn::draw_smooth_inputs(net, 3, rng);
      std::vector<double> g(3 * 5);
      for (double& v : g) v = 2.0 * rng.uniform() - 1.0;
      const nn::GradCheckResult r = nn::gradient_check(net, x, g);
      worst = std::max(worst, r.max_rel_error);
      std::cout << (h == nn::HeadKind::plain ? "plain" : "dueling") << " net=" << i
                << " max_rel_error=" << harness::num(r.max_rel_error)
                << " max_abs_error=" << harness::num(r.max_abs_error)
                << " raw_ratio=" << harness::num(r.max_raw_ratio) << " kinks=" << r.kinks << '\n';
    }
  std::cout << "worst=" << harness::num(worst) << " threshold=" << harness::num(threshold) << '\n';
  if (!(worst < threshold)) {
    std::cerr << "error:gradcheck_failed:max relative error " << harness::num(worst) << " exceeds "
              << harness::num(threshold) << '\n';
    return kExitCheckFailed;
  }
  return 0;
}

int cmd_reproduce(const Common& c, int figure) {
  const harness::ExperimentConfig cfg = load_config(c);
  const harness::FigureOutput fo = harness::reproduce_figure(figure, cfg, c.out, c.jobs, progress_printer(c));
  for (const auto& f : fo.files) std::cout << f.string() << '\n';
  return 0;
}

std::string one_line(std::string s) {
  for (char& ch : s)
    if (ch == '\n' || ch == '\r') ch = ' ';
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Age-of-information spectrum sharing simulator"};
  app.require_subcommand(1);

  Common train_c, eval_c, sweep_c, oracle_c, repro_c;
  std::string train_scheme = "dqn", eval_scheme = "baseline", checkpoint;
  auto* train = app.add_subcommand("train", "train one scheme at one configuration point");
  add_common(train, train_c, false);
  train->add_option("--scheme", train_scheme, "baseline | dqn | d3qn");

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint or the baseline");
  add_common(eval, eval_c);
  eval->add_option("--checkpoint", checkpoint, "network checkpoint written by train");
  eval->add_option("--scheme", eval_scheme, "baseline when no checkpoint is given");

  auto* sweep = app.add_subcommand("sweep", "seeded sweep over the configured axis");
  add_common(sweep, sweep_c);

  OracleOptions oo;
  auto* orc = app.add_subcommand("oracle", "value iteration on the discretized MDP");
  add_common(orc, oracle_c, false);
  orc->add_option("--aoi-levels", oo.aoi_levels);
  orc->add_option("--battery-levels", oo.battery_levels);
  orc->add_option("--channel-bins", oo.channel_bins);
  orc->add_option("--distance", oo.distance, "PU-SU distance, m");
  orc->add_option("--gamma", oo.gamma);
  orc->add_option("--xi", oo.xi, "rate weight in the reward");
  orc->add_option("--tol", oo.tol, "Bellman residual tolerance");
  orc->add_option("--q-episodes", oo.q_episodes, "tabular Q-learning episodes (0 skips)");
  orc->add_option("--dqn-episodes", oo.dqn_episodes, "deep Q episodes on the MDP (0 skips)");

  std::uint64_t gc_seed = 1;
  std::size_t gc_nets = 20;
  std::string gc_head = "both";
  double gc_threshold = 1e-6;
  auto* gc = app.add_subcommand("gradcheck", "backprop against central differences on random nets");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--nets", gc_nets);
  gc->add_option("--head", gc_head, "plain | dueling | both");
  gc->add_option("--threshold", gc_threshold);

  int figure = 0;
  auto* repro = app.add_subcommand("reproduce", "regenerate the data behind one figure");
  add_common(repro, repro_c);
  repro->add_option("--figure", figure, "3..8")->required()->check(CLI::Range(3, 8));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error:usage:" << one_line(e.what()) << '\n';
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_c, train_scheme);
    if (*eval) return cmd_eval(eval_c, checkpoint, eval_scheme);
    if (*sweep) return cmd_sweep(sweep_c);
    if (*orc) return cmd_oracle(oracle_c, oo);
    if (*gc) return cmd_gradcheck(gc_seed, gc_nets, gc_head, gc_threshold);
    if (*repro) return cmd_reproduce(repro_c, figure);
  } catch (const Error& e) {
    std::cerr << "error:" << e.code() << ':' << one_line(e.what()) << '\n';
    return e.code() == "usage" ? kExitUsage : kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error:internal:" << one_line(e.what()) << '\n';
    return kExitError;
  }
  return kExitUsage;
}
