#pragma once

#include <unordered_map>
#include <vector>

#include "pedel/mdp.hpp"
#include "pedel/policy.hpp"

namespace pedel {

/// Exact state-occupancy distribution per step under the policy (known dynamics).
/// Mixtures are expanded exactly (component-weighted sum).
std::vector<std::unordered_map<int, double>> exact_state_distribution(const LinearMdp& mdp,
                                                                      const Policy& policy);

/// phi_{pi,h} = E_pi[phi(s_h,a_h)] for every step, by forward DP.
std::vector<Vec> exact_feature_visitation(const LinearMdp& mdp, const Policy& policy);

/// V_0^pi = sum_h <phi_{pi,h}, theta_h> (forward route).
double exact_policy_value(const LinearMdp& mdp, const Policy& policy);

/// Same value by backward Bellman recursion (independent route; agrees to 1e-10).
double exact_policy_value_backward(const LinearMdp& mdp, const Policy& policy);

/// Lambda_{pi,h} = E_pi[phi phi^T] at step h. PSD with operator norm <= 1.
Mat exact_covariance(const LinearMdp& mdp, const Policy& policy, int h);

/// Highest value over a finite policy list, with the argmax index.
std::pair<double, int> best_policy_value(const LinearMdp& mdp, const std::vector<Policy>& policies);

/// Optimal value V*_0 over all (deterministic) policies, by backward induction.
double optimal_value(const LinearMdp& mdp);

/// Greedy optimal deterministic policy by backward induction on exact dynamics.
Policy optimal_policy(const LinearMdp& mdp);

}  // namespace pedel
