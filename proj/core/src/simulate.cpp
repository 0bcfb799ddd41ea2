#include "pedel/simulate.hpp"

#include <cmath>

#include "pedel/rng.hpp"

namespace pedel {

namespace {

// Index into step_states[h+1]. Probabilities in [-1e-12, 0) clamp to 0;
// anything more negative is a validation failure upstream.
int sample_next_state_index(const LinearMdp& mdp, int h, int state, int action,
                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  const int n = static_cast<int>(mdp.mu[h].size());
  int last_positive = 0;
  for (int j = 0; j < n; ++j) {
    double p = mdp.transition_prob(h, state, action, j);
    if (p < 0.0) {
      if (p < -1e-12)
        throw NumericalError("negative transition probability " + std::to_string(p) +
                             " beyond clamp tolerance");
      p = 0.0;
    } else if (p > 0.0) {
      last_positive = j;
    }
    acc += p;
    if (u <= acc) return j;
  }
  return last_positive;  // guard against accumulated rounding below 1
}

const Policy& resolve_mixture(const Policy& policy, std::mt19937_64& rng) {
  if (!policy.is_mixture()) return policy;
  const auto& mix = policy.as_mixture();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  double acc = 0.0;
  for (const auto& [w, comp] : mix.components) {
    acc += w;
    if (u <= acc) return resolve_mixture(*comp, rng);
  }
  return resolve_mixture(*mix.components.back().second, rng);
}

}  // namespace

void simulate_visit(const LinearMdp& mdp, const Policy& policy, std::mt19937_64& rng,
                    std::optional<int> truncate_at,
                    const std::function<void(int, const StepRecord&)>& visit) {
  const Policy& pol = resolve_mixture(policy, rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  int state = mdp.start_state();
  for (int h = 0; h < mdp.H; ++h) {
    StepRecord rec;
    rec.state = state;
    rec.usable_for_design = !truncate_at || h <= *truncate_at;
    if (rec.usable_for_design) {
      rec.action = pol.sample_action(mdp, h, state, rng);
    } else {
      // truncated regime: random actions after the cutoff
      rec.action = static_cast<int>(rng() % static_cast<std::uint64_t>(mdp.num_actions(state)));
    }
    const double mean = mdp.mean_reward(h, state, rec.action);
    if (mdp.reward_noise == RewardNoise::Bernoulli) {
      rec.reward = (unif(rng) < mean) ? 1.0 : 0.0;
    } else {
      rec.reward = mean;
    }
    if (h + 1 < mdp.H) {
      const int j = sample_next_state_index(mdp, h, state, rec.action, rng);
      rec.next_state = mdp.step_states[h + 1][j];
    }
    visit(h, rec);
    state = rec.next_state;
  }
}

EpisodeLog simulate(const LinearMdp& mdp, const Policy& policy, std::uint64_t seed,
                    std::optional<int> truncate_at) {
  EpisodeLog log;
  log.steps.reserve(mdp.H);
  log.truncated_at = truncate_at;
  auto rng = make_engine(seed);
  simulate_visit(mdp, policy, rng, truncate_at,
                 [&](int, const StepRecord& rec) { log.steps.push_back(rec); });
  return log;
}

Env::Env(LinearMdp mdp, std::uint64_t seed) : mdp_(std::move(mdp)), rng_(make_engine(seed)) {
  check_shape(mdp_);
  // precompute transition CDFs, clamping tiny negatives
  cdf_.resize(mdp_.H > 0 ? mdp_.H - 1 : 0);
  for (int h = 0; h + 1 < mdp_.H; ++h) {
    cdf_[h].resize(mdp_.num_states());
    for (int s : mdp_.step_states[h]) {
      cdf_[h][s].resize(mdp_.num_actions(s));
      for (int a = 0; a < mdp_.num_actions(s); ++a) {
        auto& row = cdf_[h][s][a];
        row.resize(mdp_.mu[h].size());
        double acc = 0.0;
        for (std::size_t j = 0; j < mdp_.mu[h].size(); ++j) {
          double p = mdp_.transition_prob(h, s, a, static_cast<int>(j));
          if (p < 0.0) {
            if (p < -1e-12)
              throw NumericalError("Env: negative transition probability beyond clamp tolerance");
            p = 0.0;
          }
          acc += p;
          row[j] = acc;
        }
      }
    }
  }
}

int Env::sample_next(int h, int state, int action) {
  const auto& row = cdf_[h][state][action];
  const double u = unit_(rng_) * row.back();
  // linear scan; next-state lists are short on every instance here
  for (std::size_t j = 0; j < row.size(); ++j)
    if (u <= row[j]) return mdp_.step_states[h + 1][j];
  return mdp_.step_states[h + 1].back();
}

const Policy* Env::pick_component(const Policy& mixture) {
  const auto& mix = mixture.as_mixture();
  double u = unit_(rng_);
  double acc = 0.0;
  for (const auto& [w, comp] : mix.components) {
    acc += w;
    if (u <= acc) return comp.get();
  }
  return mix.components.back().second.get();
}

EpisodeLog Env::rollout(const Policy& policy, std::optional<int> truncate_at) {
  EpisodeLog log;
  log.steps.reserve(mdp_.H);
  log.truncated_at = truncate_at;
  simulate_visit(mdp_, policy, rng_, truncate_at,
                 [&](int, const StepRecord& rec) { log.steps.push_back(rec); });
  ++episodes_;
  return log;
}

}  // namespace pedel
