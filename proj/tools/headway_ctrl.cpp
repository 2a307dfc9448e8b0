// headway_ctrl: simulate, train, evaluate and sweep headway controllers.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "headway/headway.hpp"

namespace fs = std::filesystem;
using namespace headway;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCheckpoint = 3;

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string scenario = "braess5";
  std::string out = "out";
  std::string seeds = "0,1,2,3,4";
  std::string controller = "uniform";
  std::size_t budget = 100000;
  std::string mu;
  std::string alpha;
  std::string trace;
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw ConfigError(std::string("bad value in ") + what + " list: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
  return out;
}

struct ControllerSpec {
  std::string name;  // uniform | min | policy
  std::optional<PolicyParams> policy;

  HeadwayAction act(const Network& net, const std::vector<double>& obs) const {
    if (name == "uniform") return uniform_headway_policy(net);
    if (name == "min") return min_headway_policy(net);
    return policy_act(*policy, obs, ActMode::Deterministic).action;
  }
};

void check_policy_fits(const PolicyParams& p, const Scenario& s) {
  const Engine probe(std::make_shared<const Scenario>(s));
  if (p.obs_dim() != probe.observation_size() || p.action_dim() != s.network.num_links())
    throw CheckpointError("checkpoint does not match the scenario's network");
}

ControllerSpec parse_controller(const std::string& text, const Scenario& s) {
  if (text == "uniform" || text == "min") return {text, std::nullopt};
  if (text.rfind("policy:", 0) == 0) {
    PolicyParams p;
    try {
      p = load_checkpoint(text.substr(7));
    } catch (const ConfigError& e) {
      throw CheckpointError(e.what());
    }
    check_policy_fits(p, s);
    return {"policy", std::move(p)};
  }
  throw ConfigError("unknown controller '" + text + "' (expected uniform, min or policy:<path>)");
}

std::vector<EpisodeTrace> run_seeds(const Scenario& s, const ControllerSpec& c,
                                    const std::vector<std::uint64_t>& seeds) {
  const Engine engine(std::make_shared<const Scenario>(s));
  std::vector<EpisodeTrace> traces(seeds.size());
  parallel_for(seeds.size(), resolve_threads(0), [&](std::size_t i) {
    traces[i] = run_episode(engine, seeds[i], [&](const std::vector<double>& obs) { return c.act(s.network, obs); });
  });
  return traces;
}

std::vector<double> ttts(const std::vector<EpisodeTrace>& traces) {
  std::vector<double> out;
  for (const auto& t : traces) out.push_back(total_travel_time(t));
  return out;
}

std::string summary_row(const std::string& label, const std::vector<double>& values) {
  const Stats st = mean_std(values);
  return label + "," + std::to_string(values.size()) + "," + fmt_num(st.mean) + "," + fmt_num(st.stddev) + "\n";
}

struct Run {
  Options opt;
  std::vector<std::string> argv;
  std::string command;
  Scenario scenario;
  std::vector<std::uint64_t> seeds;
  nlohmann::json overrides = nlohmann::json::object();

  fs::path out(const std::string& name) const { return fs::path(opt.out) / name; }

  void begin() {
    fs::create_directories(opt.out);
    const std::string doc = scenario_to_json(scenario).dump(2) + "\n";
    write_text(out("scenario.json").string(), doc);
    RunManifest m;
    m.command = command;
    m.argv = argv;
    m.scenario = opt.scenario;
    m.scenario_hash = git_blob_hash(doc);
    m.seeds = seeds;
    m.out_dir = opt.out;
    m.overrides = overrides;
    m.save(out("manifest.json").string());
  }
};

int cmd_simulate(Run& r) {
  const ControllerSpec c = parse_controller(r.opt.controller, r.scenario);
  r.begin();
  const auto traces = run_seeds(r.scenario, c, r.seeds);
  std::vector<SeedResult> rows;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    write_text(r.out("trace_seed" + std::to_string(r.seeds[i]) + ".csv").string(), trace_csv(traces[i]));
    rows.push_back({r.seeds[i], total_travel_time(traces[i]), traces[i].total_exited});
  }
  write_text(r.out("episodes.csv").string(), episodes_csv(rows));
  const auto values = ttts(traces);
  write_text(r.out("summary.csv").string(), std::string(kSummaryHeader) + "\n" + summary_row(c.name, values));
  const Stats st = mean_std(values);
  std::cout << c.name << ": mean TTT " << fmt_num(st.mean) << " (std " << fmt_num(st.stddev) << ") over "
            << values.size() << " seeds\n";
  return 0;
}

TrainConfig train_config(const Options& opt, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.total_steps = opt.budget;
  cfg.seed = seed;
  return cfg;
}

int cmd_train(Run& r) {
  r.overrides["budget"] = r.opt.budget;
  r.begin();
  if (r.opt.budget < TrainConfig{}.n_steps)
    std::cerr << "warning: budget " << r.opt.budget << " is below one update (" << TrainConfig{}.n_steps
              << " steps); writing the untrained policy\n";
  const auto shared = std::make_shared<const Scenario>(r.scenario);
  for (std::uint64_t seed : r.seeds) {
    const TrainResult res = train(shared, train_config(r.opt, seed), [&](const CurvePoint& p) {
      std::cerr << "seed " << seed << " update " << p.update_index << " eval TTT " << fmt_num(p.mean_eval_ttt)
                << "\n";
    });
    const std::string tag = "seed" + std::to_string(seed);
    save_checkpoint(res.best, r.out("policy_" + tag + ".json").string());
    write_text(r.out("curve_" + tag + ".csv").string(), curve_csv(res.curve));
    std::cout << tag << ": initial eval TTT " << fmt_num(res.initial_eval_ttt) << ", best "
              << fmt_num(res.best_eval_ttt) << "\n";
  }
  return 0;
}

int cmd_evaluate(Run& r) {
  std::vector<ControllerSpec> specs{{"uniform", std::nullopt}, {"min", std::nullopt}};
  if (r.opt.controller != "uniform" && r.opt.controller != "min")
    specs.push_back(parse_controller(r.opt.controller, r.scenario));
  r.begin();
  std::string summary = std::string(kSummaryHeader) + "\n";
  for (const auto& c : specs) {
    const auto traces = run_seeds(r.scenario, c, r.seeds);
    std::vector<SeedResult> rows;
    for (std::size_t i = 0; i < traces.size(); ++i)
      rows.push_back({r.seeds[i], total_travel_time(traces[i]), traces[i].total_exited});
    write_text(r.out("episodes_" + c.name + ".csv").string(), episodes_csv(rows));
    summary += summary_row(c.name, ttts(traces));
  }
  write_text(r.out("summary.csv").string(), summary);
  std::cout << summary;
  return 0;
}

// Sweeps: for each value, uniform and min baselines plus a policy column when
// a checkpoint is given (policy:<path>) or the budget allows training.
int run_sweep(Run& r, const std::string& key, const std::vector<double>& values,
              const std::function<Scenario(double)>& make) {
  std::optional<ControllerSpec> fixed;
  if (r.opt.controller.rfind("policy:", 0) == 0) fixed = parse_controller(r.opt.controller, r.scenario);
  const bool train_each = !fixed && r.opt.budget >= TrainConfig{}.n_steps;
  r.overrides[key] = values;
  r.overrides["budget"] = r.opt.budget;
  r.begin();

  std::string csv = key + ",controller,seeds,ttt_mean,ttt_std\n";
  for (double v : values) {
    const Scenario s = make(v);
    std::vector<ControllerSpec> specs;
    if (fixed) {
      specs.push_back(*fixed);
    } else if (train_each) {
      const TrainResult res = train(std::make_shared<const Scenario>(s), train_config(r.opt, r.seeds.front()));
      specs.push_back({"policy", res.best});
    }
    specs.push_back({"uniform", std::nullopt});
    specs.push_back({"min", std::nullopt});
    for (const auto& c : specs) csv += fmt_num(v) + "," + summary_row(c.name, ttts(run_seeds(s, c, r.seeds)));
  }
  write_text(r.out("sweep_" + key + ".csv").string(), csv);
  nlohmann::json meta{{"x", key}, {"x_scale", key == "mu" ? "log" : "linear"}, {"y", "ttt_mean"}};
  write_text(r.out("sweep_" + key + ".meta.json").string(), meta.dump(2) + "\n");
  std::cout << csv;
  return 0;
}

int cmd_sweep_mu(Run& r) {
  const auto mus = parse_list<double>(r.opt.mu, "mu");
  for (double m : mus)
    if (!(m >= 0.0)) throw ConfigError("mu values must be >= 0");
  return run_sweep(r, "mu", mus, [&](double m) {
    Scenario s = r.scenario;
    s.sim.mu_h = s.sim.mu_a = m;
    validate(s);
    return s;
  });
}

int cmd_sweep_alpha(Run& r) {
  const auto alphas = parse_list<double>(r.opt.alpha, "alpha");
  for (double a : alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha values must lie in [0,1]");
  return run_sweep(r, "alpha", alphas, [&](double a) {
    Scenario s = r.scenario;
    for (auto& d : s.demand) d.autonomy_fraction = a;
    validate(s);
    return s;
  });
}

int cmd_heatmap(Run& r) {
  EpisodeTrace trace;
  if (!r.opt.trace.empty()) {
    std::ifstream in(r.opt.trace);
    if (!in) throw ConfigError("cannot read trace " + r.opt.trace);
    trace = parse_trace_csv(in);
    r.overrides["trace"] = r.opt.trace;
    r.begin();
  } else {
    const ControllerSpec c = parse_controller(r.opt.controller, r.scenario);
    r.begin();
    trace = run_seeds(r.scenario, c, {r.seeds.front()}).front();
  }
  write_heatmap(trace, r.scenario.network, r.out("heatmap.svg").string());
  std::cout << "wrote " << r.out("heatmap.svg").string() << "\n";
  return 0;
}

int dispatch(const std::vector<std::string>& args);

int cmd_rerun(const std::string& manifest_path, const std::string& out_override) {
  const RunManifest m = RunManifest::load(manifest_path);
  std::vector<std::string> args = m.argv;
  if (!out_override.empty()) {
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
      if (args[i] == "--out") {
        args[i + 1] = out_override;
        replaced = true;
      }
    if (!replaced) {
      args.push_back("--out");
      args.push_back(out_override);
    }
  }
  const std::string doc = scenario_to_json(load_scenario(m.scenario)).dump(2) + "\n";
  if (git_blob_hash(doc) != m.scenario_hash)
    throw ConfigError("scenario " + m.scenario + " changed since the manifest was written");
  return dispatch(args);
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Mixed-autonomy headway control: simulation, training and sweeps"};
  app.require_subcommand(1);
  Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", opt.scenario, "braess5, braess8 or a scenario JSON file");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--seed", opt.seeds, "comma-separated seed list");
  };
  auto* sim = app.add_subcommand("simulate", "run one episode per seed with a fixed controller");
  auto* trn = app.add_subcommand("train", "train a headway policy (one run per seed)");
  auto* evl = app.add_subcommand("evaluate", "compare a controller against both baselines");
  auto* smu = app.add_subcommand("sweep-mu", "TTT as a function of the rationality factor");
  auto* sal = app.add_subcommand("sweep-alpha", "TTT as a function of the autonomy fraction");
  auto* hmp = app.add_subcommand("heatmap", "draw a link density heatmap as SVG");
  auto* rer = app.add_subcommand("rerun", "repeat a command from its manifest");
  for (auto* sub : {sim, trn, evl, smu, sal, hmp}) add_common(sub);
  for (auto* sub : {sim, evl, smu, sal, hmp})
    sub->add_option("--controller", opt.controller, "uniform, min or policy:<checkpoint>");
  for (auto* sub : {trn, smu, sal}) sub->add_option("--budget", opt.budget, "training budget in decision steps");
  smu->add_option("--mu", opt.mu, "comma-separated rationality factors")->required();
  sal->add_option("--alpha", opt.alpha, "comma-separated autonomy fractions")->required();
  hmp->add_option("--trace", opt.trace, "trace CSV to draw instead of simulating");
  std::string manifest, rerun_out;
  rer->add_option("--manifest", manifest, "manifest.json written by an earlier run")->required();
  rer->add_option("--out", rerun_out, "write outputs here instead of the recorded directory");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (rer->parsed()) return cmd_rerun(manifest, rerun_out);

  Run r;
  r.opt = opt;
  r.argv = args;
  r.command = app.get_subcommands().front()->get_name();
  r.scenario = load_scenario(opt.scenario);
  r.seeds = parse_list<std::uint64_t>(opt.seeds, "seed");
  if (sim->parsed()) return cmd_simulate(r);
  if (trn->parsed()) return cmd_train(r);
  if (evl->parsed()) return cmd_evaluate(r);
  if (smu->parsed()) return cmd_sweep_mu(r);
  if (sal->parsed()) return cmd_sweep_alpha(r);
  return cmd_heatmap(r);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return dispatch(args);
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
