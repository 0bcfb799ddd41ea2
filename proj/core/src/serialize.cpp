#include "pedel/serialize.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pedel {

using json = nlohmann::json;

std::string hex_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", x);
  return buf;
}

double parse_hex_double(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw ContractError("parse_hex_double: cannot parse '" + s + "'");
  return v;
}

namespace {

json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(hex_double(v[i]));
  return arr;
}

Vec vec_from_json(const json& arr) {
  Vec v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<int>(i)] = parse_hex_double(arr[i]);
  return v;
}

}  // namespace

std::string mdp_to_json(const LinearMdp& mdp) {
  json j;
  j["d"] = mdp.d;
  j["H"] = mdp.H;
  j["states"] = mdp.step_states;
  json actions = json::array();
  json phi = json::array();
  for (int s = 0; s < mdp.num_states(); ++s) {
    actions.push_back(mdp.num_actions(s));
    json per_state = json::array();
    for (int a = 0; a < mdp.num_actions(s); ++a) per_state.push_back(vec_to_json(mdp.phi[s][a]));
    phi.push_back(per_state);
  }
  j["actions"] = actions;
  j["phi"] = phi;
  json mu = json::array();
  for (const auto& per_step : mdp.mu) {
    json row = json::array();
    for (const auto& m : per_step) row.push_back(vec_to_json(m));
    mu.push_back(row);
  }
  j["mu"] = mu;
  json theta = json::array();
  for (const auto& th : mdp.theta) theta.push_back(vec_to_json(th));
  j["theta"] = theta;
  j["reward_noise"] = mdp.reward_noise == RewardNoise::Bernoulli ? "bernoulli" : "deterministic";
  j["state_names"] = mdp.state_names;
  return j.dump(2);
}

LinearMdp mdp_from_json(const std::string& text) {
  json j = json::parse(text);
  LinearMdp mdp;
  mdp.d = j.at("d").get<int>();
  mdp.H = j.at("H").get<int>();
  mdp.step_states = j.at("states").get<std::vector<std::vector<int>>>();
  const auto& phi = j.at("phi");
  mdp.phi.resize(phi.size());
  for (std::size_t s = 0; s < phi.size(); ++s)
    for (const auto& f : phi[s]) mdp.phi[s].push_back(vec_from_json(f));
  for (const auto& row : j.at("mu")) {
    std::vector<Vec> per_step;
    for (const auto& m : row) per_step.push_back(vec_from_json(m));
    mdp.mu.push_back(std::move(per_step));
  }
  for (const auto& th : j.at("theta")) mdp.theta.push_back(vec_from_json(th));
  mdp.reward_noise = j.at("reward_noise").get<std::string>() == "bernoulli"
                         ? RewardNoise::Bernoulli
                         : RewardNoise::Deterministic;
  if (j.contains("state_names")) mdp.state_names = j["state_names"].get<std::vector<std::string>>();
  check_shape(mdp);
  return mdp;
}

void save_mdp(const LinearMdp& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ContractError("save_mdp: cannot open " + path);
  out << mdp_to_json(mdp);
}

LinearMdp load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("load_mdp: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return mdp_from_json(ss.str());
}

std::string policies_to_json(const LinearMdp& mdp, const std::vector<Policy>& policies) {
  json arr = json::array();
  for (const auto& p : policies) {
    json jp;
    jp["name"] = p.name();
    if (const auto* det = std::get_if<DeterministicTable>(&p.variant())) {
      jp["kind"] = "deterministic";
      json table = json::array();
      for (const auto& per_step : det->action) {
        json row = json::object();
        for (const auto& [s, a] : per_step) row[std::to_string(s)] = a;
        table.push_back(row);
      }
      jp["action"] = table;
    } else if (const auto* st = std::get_if<StochasticTable>(&p.variant())) {
      jp["kind"] = "stochastic";
      json table = json::array();
      for (const auto& per_step : st->probs) {
        json row = json::object();
        for (const auto& [s, probs] : per_step) {
          json arr2 = json::array();
          for (double v : probs) arr2.push_back(hex_double(v));
          row[std::to_string(s)] = arr2;
        }
        table.push_back(row);
      }
      jp["probs"] = table;
    } else {
      throw ContractError("policies_to_json: only explicit table policies serialize");
    }
    arr.push_back(jp);
  }
  json j;
  j["H"] = mdp.H;
  j["policies"] = arr;
  return j.dump(2);
}

std::vector<Policy> policies_from_json(const std::string& text) {
  json j = json::parse(text);
  std::vector<Policy> out;
  for (const auto& jp : j.at("policies")) {
    std::string kind = jp.at("kind").get<std::string>();
    if (kind == "deterministic") {
      DeterministicTable t;
      for (const auto& row : jp.at("action")) {
        std::unordered_map<int, int> m;
        for (auto it = row.begin(); it != row.end(); ++it)
          m[std::stoi(it.key())] = it.value().get<int>();
        t.action.push_back(std::move(m));
      }
      out.push_back(Policy::deterministic(jp.at("name").get<std::string>(), std::move(t)));
    } else if (kind == "stochastic") {
      StochasticTable t;
      for (const auto& row : jp.at("probs")) {
        std::unordered_map<int, std::vector<double>> m;
        for (auto it = row.begin(); it != row.end(); ++it) {
          std::vector<double> probs;
          for (const auto& v : it.value()) probs.push_back(parse_hex_double(v));
          m[std::stoi(it.key())] = std::move(probs);
        }
        t.probs.push_back(std::move(m));
      }
      out.push_back(Policy::stochastic(jp.at("name").get<std::string>(), std::move(t)));
    } else {
      throw ContractError("policies_from_json: unknown kind " + kind);
    }
  }
  return out;
}

std::uint64_t stable_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace pedel
