#pragma once

#include <vector>

#include "pedel/mdp.hpp"

namespace pedel {

/// Aggregated observations at one step h, collected in the h-truncated regime.
/// Everything the estimators consume: Sigma = sum phi phi^T, per-next-state
/// feature sums, and reward-weighted features. Raw covariates, no regularizer.
struct StepDataPool {
  int step = 0;
  Mat Sigma;
  std::vector<Vec> next_phi_sum;  // indexed by global state id; sum of phi_h with s_{h+1} = id
  Vec phi_reward_sum;             // sum phi_h * r_h
  long n = 0;

  void init(const LinearMdp& mdp, int step_h) {
    step = step_h;
    Sigma = Mat::Zero(mdp.d, mdp.d);
    next_phi_sum.assign(mdp.num_states(), Vec());
    phi_reward_sum = Vec::Zero(mdp.d);
    n = 0;
  }

  void add(const Vec& phi, double reward, int next_state) {
    Sigma.selfadjointView<Eigen::Lower>().rankUpdate(phi, 1.0);
    phi_reward_sum += reward * phi;
    if (next_state >= 0) {
      Vec& acc = next_phi_sum[next_state];
      if (acc.size() == 0)
        acc = phi;
      else
        acc += phi;
    }
    ++n;
  }

  void merge(const StepDataPool& other) {
    Sigma += other.Sigma;
    phi_reward_sum += other.phi_reward_sum;
    n += other.n;
    for (std::size_t s = 0; s < other.next_phi_sum.size(); ++s) {
      if (other.next_phi_sum[s].size() == 0) continue;
      if (next_phi_sum[s].size() == 0)
        next_phi_sum[s] = other.next_phi_sum[s];
      else
        next_phi_sum[s] += other.next_phi_sum[s];
    }
  }

  /// Symmetrized covariate matrix (adds the upper triangle).
  Mat full_sigma() const {
    return Sigma.selfadjointView<Eigen::Lower>();
  }
};

}  // namespace pedel
