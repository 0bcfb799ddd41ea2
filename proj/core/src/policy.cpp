#include "pedel/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pedel {

Policy Policy::stochastic(std::string name, StochasticTable t) {
  for (const auto& per_step : t.probs) {
    for (const auto& [state, p] : per_step) {
      double total = std::accumulate(p.begin(), p.end(), 0.0);
      if (std::abs(total - 1.0) > 1e-12)
        throw ContractError("StochasticTable: distribution at state " + std::to_string(state) +
                            " sums to " + std::to_string(total));
      for (double v : p)
        if (v < 0.0) throw ContractError("StochasticTable: negative probability");
    }
  }
  return Policy(std::move(name), Variant(std::move(t)));
}

Policy Policy::mixture(std::string name, std::vector<std::pair<double, Policy>> parts) {
  MixturePolicy m;
  double total = 0.0;
  for (auto& [w, p] : parts) {
    if (w < 0.0) throw ContractError("Mixture: negative weight");
    total += w;
    m.components.emplace_back(w, std::make_shared<const Policy>(std::move(p)));
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ContractError("Mixture: weights sum to " + std::to_string(total));
  return Policy(std::move(name), Variant(std::move(m)));
}

Vec softmax_action_probs(const LinearMdp& mdp, const LinearSoftmax& sm, int h, int state) {
  const int n = mdp.num_actions(state);
  std::vector<int> allowed;
  if (sm.restricted) {
    auto it = sm.restricted->find(state);
    if (it != sm.restricted->end())
      allowed = it->second;
  }
  if (allowed.empty()) {
    allowed.resize(n);
    std::iota(allowed.begin(), allowed.end(), 0);
  }

  Vec probs = Vec::Zero(n);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> score(allowed.size());
  for (std::size_t i = 0; i < allowed.size(); ++i) {
    score[i] = sm.eta * mdp.phi[state][allowed[i]].dot(sm.w.at(h));
    best = std::max(best, score[i]);
  }
  double z = 0.0;
  for (std::size_t i = 0; i < allowed.size(); ++i) {
    score[i] = std::exp(score[i] - best);  // max-subtraction
    z += score[i];
  }
  for (std::size_t i = 0; i < allowed.size(); ++i) probs[allowed[i]] = score[i] / z;
  return probs;
}

Vec Policy::action_probs(const LinearMdp& mdp, int h, int state) const {
  const int n = mdp.num_actions(state);
  if (const auto* det = std::get_if<DeterministicTable>(&v_)) {
    auto it = det->action.at(h).find(state);
    if (it == det->action.at(h).end())
      throw ContractError("policy '" + name_ + "' undefined at (h=" + std::to_string(h) +
                          ", s=" + mdp.state_name(state) + ")");
    Vec p = Vec::Zero(n);
    p[it->second] = 1.0;
    return p;
  }
  if (const auto* st = std::get_if<StochasticTable>(&v_)) {
    auto it = st->probs.at(h).find(state);
    if (it == st->probs.at(h).end())
      throw ContractError("policy '" + name_ + "' undefined at (h=" + std::to_string(h) +
                          ", s=" + mdp.state_name(state) + ")");
    Vec p = Vec::Zero(n);
    for (int a = 0; a < n; ++a) p[a] = it->second.at(a);
    return p;
  }
  if (const auto* sm = std::get_if<LinearSoftmax>(&v_)) {
    return softmax_action_probs(mdp, *sm, h, state);
  }
  throw ContractError("action_probs called on mixture policy '" + name_ +
                      "'; draw a component first");
}

int Policy::sample_action(const LinearMdp& mdp, int h, int state, std::mt19937_64& rng) const {
  if (const auto* det = std::get_if<DeterministicTable>(&v_)) {
    auto it = det->action.at(h).find(state);
    if (it == det->action.at(h).end())
      throw ContractError("policy '" + name_ + "' undefined at (h=" + std::to_string(h) +
                          ", s=" + mdp.state_name(state) + ")");
    return it->second;
  }
  Vec p = action_probs(mdp, h, state);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  const int n = static_cast<int>(p.size());
  for (int a = 0; a < n; ++a) {
    acc += p[a];
    if (u <= acc) return a;
  }
  return n - 1;
}

bool Policy::defined_everywhere(const LinearMdp& mdp) const {
  if (const auto* mix = std::get_if<MixturePolicy>(&v_)) {
    for (const auto& [w, comp] : mix->components)
      if (!comp->defined_everywhere(mdp)) return false;
    return true;
  }
  for (int h = 0; h < mdp.H; ++h) {
    for (int s : mdp.step_states[h]) {
      try {
        action_probs(mdp, h, s);
      } catch (const ContractError&) {
        return false;
      }
    }
  }
  return true;
}

Vec policy_state_feature(const LinearMdp& mdp, const Policy& policy, int h, int state) {
  if (policy.is_mixture()) {
    // state-conditional feature of a mixture is the weighted component feature.
    Vec out = Vec::Zero(mdp.d);
    for (const auto& [w, comp] : policy.as_mixture().components)
      out += w * policy_state_feature(mdp, *comp, h, state);
    return out;
  }
  Vec p = policy.action_probs(mdp, h, state);
  Vec out = Vec::Zero(mdp.d);
  for (int a = 0; a < mdp.num_actions(state); ++a)
    if (p[a] > 0.0) out += p[a] * mdp.phi[state][a];
  return out;
}

}  // namespace pedel
