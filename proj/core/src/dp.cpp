#include "pedel/dp.hpp"

#include <algorithm>
#include <cmath>

namespace pedel {

std::vector<std::unordered_map<int, double>> exact_state_distribution(const LinearMdp& mdp,
                                                                      const Policy& policy) {
  if (policy.is_mixture()) {
    std::vector<std::unordered_map<int, double>> out(mdp.H);
    for (const auto& [w, comp] : policy.as_mixture().components) {
      auto part = exact_state_distribution(mdp, *comp);
      for (int h = 0; h < mdp.H; ++h)
        for (const auto& [s, p] : part[h]) out[h][s] += w * p;
    }
    return out;
  }

  std::vector<std::unordered_map<int, double>> dist(mdp.H);
  dist[0][mdp.start_state()] = 1.0;
  for (int h = 0; h + 1 < mdp.H; ++h) {
    for (const auto& [s, ps] : dist[h]) {
      if (ps <= 0.0) continue;
      Vec ap = policy.action_probs(mdp, h, s);
      for (int a = 0; a < mdp.num_actions(s); ++a) {
        if (ap[a] <= 0.0) continue;
        for (std::size_t j = 0; j < mdp.mu[h].size(); ++j) {
          double p = mdp.transition_prob(h, s, a, static_cast<int>(j));
          if (p <= 0.0) continue;
          dist[h + 1][mdp.step_states[h + 1][j]] += ps * ap[a] * p;
        }
      }
    }
  }
  return dist;
}

std::vector<Vec> exact_feature_visitation(const LinearMdp& mdp, const Policy& policy) {
  if (policy.is_mixture()) {
    std::vector<Vec> out(mdp.H, Vec::Zero(mdp.d));
    for (const auto& [w, comp] : policy.as_mixture().components) {
      auto part = exact_feature_visitation(mdp, *comp);
      for (int h = 0; h < mdp.H; ++h) out[h] += w * part[h];
    }
    return out;
  }
  auto dist = exact_state_distribution(mdp, policy);
  std::vector<Vec> out(mdp.H, Vec::Zero(mdp.d));
  for (int h = 0; h < mdp.H; ++h)
    for (const auto& [s, ps] : dist[h])
      out[h] += ps * policy_state_feature(mdp, policy, h, s);
  return out;
}

double exact_policy_value(const LinearMdp& mdp, const Policy& policy) {
  auto fv = exact_feature_visitation(mdp, policy);
  double v = 0.0;
  for (int h = 0; h < mdp.H; ++h) v += fv[h].dot(mdp.theta[h]);
  return v;
}

double exact_policy_value_backward(const LinearMdp& mdp, const Policy& policy) {
  if (policy.is_mixture()) {
    double v = 0.0;
    for (const auto& [w, comp] : policy.as_mixture().components)
      v += w * exact_policy_value_backward(mdp, *comp);
    return v;
  }
  // V_{H} = 0; V_h(s) = sum_a pi(a|s) [ <phi,theta_h> + sum_s' P(s'|s,a) V_{h+1}(s') ]
  std::unordered_map<int, double> value_next;
  for (int h = mdp.H - 1; h >= 0; --h) {
    std::unordered_map<int, double> value;
    for (int s : mdp.step_states[h]) {
      Vec ap = policy.action_probs(mdp, h, s);
      double vs = 0.0;
      for (int a = 0; a < mdp.num_actions(s); ++a) {
        if (ap[a] <= 0.0) continue;
        double q = mdp.mean_reward(h, s, a);
        if (h + 1 < mdp.H) {
          for (std::size_t j = 0; j < mdp.mu[h].size(); ++j) {
            double p = mdp.transition_prob(h, s, a, static_cast<int>(j));
            if (p == 0.0) continue;
            q += p * value_next[mdp.step_states[h + 1][j]];
          }
        }
        vs += ap[a] * q;
      }
      value[s] = vs;
    }
    value_next = std::move(value);
  }
  return value_next[mdp.start_state()];
}

Mat exact_covariance(const LinearMdp& mdp, const Policy& policy, int h) {
  if (policy.is_mixture()) {
    Mat out = Mat::Zero(mdp.d, mdp.d);
    for (const auto& [w, comp] : policy.as_mixture().components)
      out += w * exact_covariance(mdp, *comp, h);
    return out;
  }
  auto dist = exact_state_distribution(mdp, policy);
  Mat out = Mat::Zero(mdp.d, mdp.d);
  for (const auto& [s, ps] : dist[h]) {
    Vec ap = policy.action_probs(mdp, h, s);
    for (int a = 0; a < mdp.num_actions(s); ++a) {
      if (ap[a] <= 0.0) continue;
      const Vec& f = mdp.phi[s][a];
      out.noalias() += (ps * ap[a]) * (f * f.transpose());
    }
  }
  return out;
}

std::pair<double, int> best_policy_value(const LinearMdp& mdp,
                                         const std::vector<Policy>& policies) {
  double best = -std::numeric_limits<double>::infinity();
  int arg = -1;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    double v = exact_policy_value(mdp, policies[i]);
    if (v > best) {
      best = v;
      arg = static_cast<int>(i);
    }
  }
  return {best, arg};
}

double optimal_value(const LinearMdp& mdp) {
  std::unordered_map<int, double> value_next;
  for (int h = mdp.H - 1; h >= 0; --h) {
    std::unordered_map<int, double> value;
    for (int s : mdp.step_states[h]) {
      double vs = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.num_actions(s); ++a) {
        double q = mdp.mean_reward(h, s, a);
        if (h + 1 < mdp.H) {
          for (std::size_t j = 0; j < mdp.mu[h].size(); ++j) {
            double p = mdp.transition_prob(h, s, a, static_cast<int>(j));
            if (p == 0.0) continue;
            q += p * value_next[mdp.step_states[h + 1][j]];
          }
        }
        vs = std::max(vs, q);
      }
      value[s] = vs;
    }
    value_next = std::move(value);
  }
  return value_next[mdp.start_state()];
}

Policy optimal_policy(const LinearMdp& mdp) {
  DeterministicTable table;
  table.action.resize(mdp.H);
  std::unordered_map<int, double> value_next;
  for (int h = mdp.H - 1; h >= 0; --h) {
    std::unordered_map<int, double> value;
    for (int s : mdp.step_states[h]) {
      double vs = -std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < mdp.num_actions(s); ++a) {
        double q = mdp.mean_reward(h, s, a);
        if (h + 1 < mdp.H) {
          for (std::size_t j = 0; j < mdp.mu[h].size(); ++j) {
            double p = mdp.transition_prob(h, s, a, static_cast<int>(j));
            if (p == 0.0) continue;
            q += p * value_next[mdp.step_states[h + 1][j]];
          }
        }
        if (q > vs) {
          vs = q;
          best_a = a;
        }
      }
      value[s] = vs;
      table.action[h][s] = best_a;
    }
    value_next = std::move(value);
  }
  return Policy::deterministic("optimal", std::move(table));
}

}  // namespace pedel
