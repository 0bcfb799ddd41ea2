#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "pedel/mdp.hpp"
#include "pedel/policy.hpp"

namespace pedel {

struct StepRecord {
  int state = -1;
  int action = -1;       // action index within the state's action list
  double reward = 0.0;
  int next_state = -1;   // -1 at the terminal step
  bool usable_for_design = true;  // false for steps after a truncation point
};

struct EpisodeLog {
  std::vector<StepRecord> steps;          // length H
  std::optional<int> truncated_at;        // 0-based step index
  const StepRecord& at(int h) const { return steps[h]; }
};

/// Samples one episode. Pure function of (mdp, policy, seed, truncate_at).
///
/// With truncate_at = h, steps 0..h follow the policy; later steps take uniform
/// random actions and their records are flagged unusable for design. Observations
/// at every step, including (s_{h+1}, r_h), are still recorded.
/// Throws ContractError if the policy is undefined at a reached (h, state).
EpisodeLog simulate(const LinearMdp& mdp, const Policy& policy, std::uint64_t seed,
                    std::optional<int> truncate_at = std::nullopt);

/// Streaming variant: calls visit(h, record) per step.
void simulate_visit(const LinearMdp& mdp, const Policy& policy, std::mt19937_64& rng,
                    std::optional<int> truncate_at,
                    const std::function<void(int, const StepRecord&)>& visit);

/// Environment handle owning the episode stream. All online algorithms reach the
/// MDP only through this class, which enforces that a policy for episode k can
/// depend only on data from episodes < k. Transition CDFs are precomputed once,
/// so the templated rollout path stays allocation-free.
class Env {
 public:
  Env(LinearMdp mdp, std::uint64_t seed);

  const LinearMdp& mdp() const { return mdp_; }
  long episodes_used() const { return episodes_; }
  std::mt19937_64& rng() { return rng_; }

  EpisodeLog rollout(const Policy& policy, std::optional<int> truncate_at = std::nullopt);

  /// Hot path. choose(h, state) -> action index; on(h, rec) observes each step.
  /// truncate_at < 0 means no truncation; steps after it use uniform actions.
  template <class ChooseAction, class OnStep>
  void rollout_fast(ChooseAction&& choose, OnStep&& on, int truncate_at = -1) {
    int state = mdp_.start_state();
    for (int h = 0; h < mdp_.H; ++h) {
      StepRecord rec;
      rec.state = state;
      rec.usable_for_design = truncate_at < 0 || h <= truncate_at;
      rec.action = rec.usable_for_design
                       ? choose(h, state)
                       : static_cast<int>(rng_() % std::uint64_t(mdp_.num_actions(state)));
      const double mean = mdp_.mean_reward(h, state, rec.action);
      if (mdp_.reward_noise == RewardNoise::Bernoulli) {
        rec.reward = (unit_(rng_) < mean) ? 1.0 : 0.0;
      } else {
        rec.reward = mean;
      }
      if (h + 1 < mdp_.H) rec.next_state = sample_next(h, state, rec.action);
      on(h, rec);
      state = rec.next_state;
    }
    ++episodes_;
  }

  /// Generic-policy rollout on the fast path (resolves mixtures per episode).
  template <class OnStep>
  void rollout_policy_fast(const Policy& policy, int truncate_at, OnStep&& on) {
    const Policy* pol = &policy;
    while (pol->is_mixture()) pol = pick_component(*pol);
    rollout_fast([&](int h, int s) { return pol->sample_action(mdp_, h, s, rng_); },
                 std::forward<OnStep>(on), truncate_at);
  }

 private:
  const Policy* pick_component(const Policy& mixture);
  int sample_next(int h, int state, int action);

  LinearMdp mdp_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  long episodes_ = 0;
  // cdf_[h][state][action][j]: cumulative P(step_states[h+1][j] | state, action)
  std::vector<std::vector<std::vector<std::vector<double>>>> cdf_;
};

}  // namespace pedel
