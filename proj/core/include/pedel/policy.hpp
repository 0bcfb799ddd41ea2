#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "pedel/mdp.hpp"
#include "pedel/types.hpp"

namespace pedel {

class Policy;

/// Deterministic table: action index per (step, state).
struct DeterministicTable {
  // per step h: state -> action index
  std::vector<std::unordered_map<int, int>> action;
};

/// Stochastic table: distribution over action indices per (step, state).
struct StochasticTable {
  std::vector<std::unordered_map<int, std::vector<double>>> probs;
};

/// Linear softmax over <phi(s,a), w_h>, optionally restricted to a per-state
/// action subset (indices into the state's action list).
struct LinearSoftmax {
  double eta = 1.0;
  std::vector<Vec> w;  // per step
  std::optional<std::unordered_map<int, std::vector<int>>> restricted;
};

/// Mixture over policies: a component is drawn once per episode.
struct MixturePolicy {
  std::vector<std::pair<double, std::shared_ptr<const Policy>>> components;
};

class Policy {
 public:
  using Variant = std::variant<DeterministicTable, StochasticTable, LinearSoftmax, MixturePolicy>;

  Policy() = default;
  Policy(std::string name, Variant v) : name_(std::move(name)), v_(std::move(v)) {}

  static Policy deterministic(std::string name, DeterministicTable t) {
    return Policy(std::move(name), Variant(std::move(t)));
  }
  static Policy stochastic(std::string name, StochasticTable t);
  static Policy softmax(std::string name, LinearSoftmax s) {
    return Policy(std::move(name), Variant(std::move(s)));
  }
  static Policy mixture(std::string name, std::vector<std::pair<double, Policy>> parts);

  const std::string& name() const { return name_; }
  const Variant& variant() const { return v_; }
  bool is_mixture() const { return std::holds_alternative<MixturePolicy>(v_); }
  const MixturePolicy& as_mixture() const { return std::get<MixturePolicy>(v_); }

  /// Distribution over the action list of `state` at step `h`.
  /// Mixtures have no per-step distribution; call on a drawn component instead.
  /// Throws ContractError if the policy is undefined at (h, state).
  Vec action_probs(const LinearMdp& mdp, int h, int state) const;

  /// Samples an action index. Fast path for deterministic tables.
  int sample_action(const LinearMdp& mdp, int h, int state, std::mt19937_64& rng) const;

  /// True if a distribution is defined at every (h, state) of the MDP.
  bool defined_everywhere(const LinearMdp& mdp) const;

 private:
  std::string name_;
  Variant v_;
};

/// Mean feature under the policy at (h, state): E_{a~pi_h(.|s)}[phi(s,a)].
Vec policy_state_feature(const LinearMdp& mdp, const Policy& policy, int h, int state);

/// Numerically stable softmax probabilities over the (restricted) action set.
Vec softmax_action_probs(const LinearMdp& mdp, const LinearSoftmax& sm, int h, int state);

}  // namespace pedel
