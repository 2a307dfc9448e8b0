#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "headway/errors.hpp"
#include "headway/scenario.hpp"

namespace headway {

/*
 * Scenario document layout:
 *
 *   network: { nodes?: [names], links: [{id, from, to, length_m, lanes, vff_mps, jam_spacing_m}] }
 *   od:      { origin, destination, autonomy_fraction }
 *   demand:  { breakpoints: [[t_s, rate_vps], ...] }
 *   control: { beta_min_m, beta_max_m, beta_h_m, action_period_s }
 *   sim:     { dt_s, horizon_s, initial_counts, mu_h, mu_a, seed,
 *              latency_unit_s?, reward_scale?, init_jitter? }
 *
 * Paths are not stored; they are enumerated on load.
 */

inline nlohmann::json scenario_to_json(const Scenario& s) {
  using nlohmann::json;
  json links = json::array();
  for (const Link& l : s.network.links) {
    links.push_back({{"id", l.id},
                     {"from", l.from},
                     {"to", l.to},
                     {"length_m", l.length_m},
                     {"lanes", l.lanes},
                     {"vff_mps", l.vff_mps},
                     {"jam_spacing_m", l.jam_spacing_m}});
  }
  const ODPair& od = s.network.od_pairs.front();
  const DemandProfile& d = s.demand.front();
  json bps = json::array();
  for (const auto& b : d.breakpoints) bps.push_back({b.t_s, b.rate_vps});
  json j;
  j["name"] = s.name;
  j["network"] = {{"nodes", s.network.nodes}, {"links", links}};
  j["od"] = {{"origin", od.origin}, {"destination", od.destination}, {"autonomy_fraction", d.autonomy_fraction}};
  j["demand"] = {{"breakpoints", bps}};
  j["control"] = {{"beta_min_m", s.network.beta_min_m},
                  {"beta_max_m", s.network.beta_max_m},
                  {"beta_h_m", s.network.beta_h_m},
                  {"action_period_s", s.sim.action_period_s}};
  j["sim"] = {{"dt_s", s.sim.dt_s},
              {"horizon_s", s.sim.horizon_s},
              {"initial_counts", s.sim.initial_counts},
              {"mu_h", s.sim.mu_h},
              {"mu_a", s.sim.mu_a},
              {"seed", s.sim.seed},
              {"latency_unit_s", s.sim.latency_unit_s},
              {"reward_scale", s.sim.reward_scale},
              {"init_jitter", s.sim.init_jitter}};
  return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    s.name = j.value("name", std::string("scenario"));
    const auto& jn = j.at("network");
    int max_node = -1;
    for (const auto& jl : jn.at("links")) {
      Link l;
      l.id = jl.at("id").get<LinkId>();
      l.from = jl.at("from").get<NodeId>();
      l.to = jl.at("to").get<NodeId>();
      l.length_m = jl.at("length_m").get<double>();
      l.lanes = jl.at("lanes").get<int>();
      l.vff_mps = jl.at("vff_mps").get<double>();
      l.jam_spacing_m = jl.value("jam_spacing_m", 0.5);
      max_node = std::max({max_node, l.from, l.to});
      s.network.links.push_back(l);
    }
    std::sort(s.network.links.begin(), s.network.links.end(),
              [](const Link& a, const Link& b) { return a.id < b.id; });
    if (jn.contains("nodes")) {
      s.network.nodes = jn.at("nodes").get<std::vector<std::string>>();
    } else {
      for (int n = 0; n <= max_node; ++n) s.network.nodes.push_back(std::to_string(n));
    }
    if (static_cast<int>(s.network.nodes.size()) <= max_node)
      throw ConfigError("network.nodes lists fewer nodes than the links reference");

    const auto& jod = j.at("od");
    s.network.od_pairs.push_back(ODPair{jod.at("origin").get<NodeId>(), jod.at("destination").get<NodeId>(), {}});
    DemandProfile d;
    d.autonomy_fraction = jod.at("autonomy_fraction").get<double>();
    for (const auto& bp : j.at("demand").at("breakpoints")) {
      if (!bp.is_array() || bp.size() != 2) throw ConfigError("demand breakpoints must be [t_s, rate_vps] pairs");
      d.breakpoints.push_back({bp[0].get<double>(), bp[1].get<double>()});
    }
    s.demand.push_back(d);

    const auto& jc = j.at("control");
    s.network.beta_min_m = jc.at("beta_min_m").get<double>();
    s.network.beta_max_m = jc.at("beta_max_m").get<double>();
    s.network.beta_h_m = jc.at("beta_h_m").get<double>();
    s.sim.action_period_s = jc.value("action_period_s", s.sim.action_period_s);

    const auto& js = j.at("sim");
    s.sim.dt_s = js.value("dt_s", s.sim.dt_s);
    s.sim.horizon_s = js.value("horizon_s", s.sim.horizon_s);
    s.sim.initial_counts = js.value("initial_counts", std::vector<double>{});
    s.sim.mu_h = js.value("mu_h", s.sim.mu_h);
    s.sim.mu_a = js.value("mu_a", s.sim.mu_a);
    s.sim.seed = js.value("seed", s.sim.seed);
    s.sim.latency_unit_s = js.value("latency_unit_s", s.sim.latency_unit_s);
    s.sim.reward_scale = js.value("reward_scale", s.sim.reward_scale);
    s.sim.init_jitter = js.value("init_jitter", s.sim.init_jitter);

    assign_paths(s.network);
    validate(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario " + path + " is not valid JSON: " + e.what());
  }
  return scenario_from_json(j);
}

/// Built-in name ("braess5", "braess8") or a path to a scenario document.
inline Scenario load_scenario(const std::string& name_or_path) {
  if (name_or_path == "braess5") return braess5_scenario();
  if (name_or_path == "braess8") return braess8_scenario();
  return load_scenario_file(name_or_path);
}

}  // namespace headway
