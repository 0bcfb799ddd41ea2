#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pedel/types.hpp"

namespace pedel {

enum class RewardNoise {
  Deterministic,  // observed reward equals <phi, theta_h>
  Bernoulli,      // observed reward ~ Bernoulli(<phi, theta_h>)
};

/// Finite-state, finite-action linear MDP with horizon H and ambient dimension d.
///
/// Steps are 0-based internally (h = 0..H-1). Transitions are stored as explicit
/// measure tables: P_h(s'|s,a) = <phi(s,a), mu[h][j]> where j indexes
/// step_states[h+1]. theta[h] gives mean rewards <phi(s,a), theta[h]>.
/// Every episode starts in step_states[0][0].
struct LinearMdp {
  int d = 0;
  int H = 0;
  std::vector<std::vector<int>> step_states;   // [h] -> global state ids reachable at step h
  std::vector<std::vector<Vec>> phi;           // [state][action] -> feature in R^d
  std::vector<std::vector<Vec>> mu;            // [h][j], j indexes step_states[h+1]; h = 0..H-2
  std::vector<Vec> theta;                      // [h], h = 0..H-1
  RewardNoise reward_noise = RewardNoise::Bernoulli;
  std::vector<std::string> state_names;        // optional, same length as phi

  int num_states() const { return static_cast<int>(phi.size()); }
  int num_actions(int state) const { return static_cast<int>(phi[state].size()); }
  int start_state() const { return step_states.at(0).at(0); }

  double mean_reward(int h, int state, int action) const {
    return phi[state][action].dot(theta[h]);
  }
  /// P_h(step_states[h+1][j] | state, action).
  double transition_prob(int h, int state, int action, int j) const {
    return phi[state][action].dot(mu[h][j]);
  }
  std::string state_name(int state) const {
    if (state >= 0 && state < static_cast<int>(state_names.size()) && !state_names[state].empty())
      return state_names[state];
    return "s" + std::to_string(state);
  }
};

/// One failed LinearMdp invariant, with the offending (s,a,h) and bound in the message.
struct Violation {
  std::string what;
};

/// Checks every LinearMdp invariant within the documented tolerances and reports
/// all failures. Empty result means the instance is valid.
///
/// Bounds checked: transition nonnegativity (>= -1e-12) and normalization
/// (sum in [1-1e-9, 1+1e-9]); feature norms in [1/sqrt(d)-1e-12, 1+1e-12];
/// ||theta_h|| <= sqrt(d); ||sum_s' |mu_h(s')|||_2 <= 2*sqrt(d); <phi,theta_h> in [0,1].
/// The mu-sum bound uses 2*sqrt(d) rather than sqrt(d): the canonical bandit
/// embedding attains exactly 2*sqrt(d) in low dimension and is treated as valid.
std::vector<Violation> validate(const LinearMdp& mdp);

/// Structural well-formedness (array shapes, start state). Throws ContractError.
void check_shape(const LinearMdp& mdp);

}  // namespace pedel
