#include "pedel/regret_min.hpp"

#include <algorithm>
#include <cmath>

#include "pedel/dp.hpp"

namespace pedel {

RewardFunction RewardFunction::table(const LinearMdp& mdp,
                                     std::vector<std::vector<std::vector<double>>> r) {
  RewardFunction f;
  f.env_ = false;
  f.step_ = -1;
  for (int h = 0; h < mdp.H; ++h)
    for (int s : mdp.step_states[h])
      for (int a = 0; a < mdp.num_actions(s); ++a) {
        double v = r.at(h).at(s).at(a);
        if (v < 0.0 || v > 1.0 + 1e-12)
          throw ContractError("RewardFunction: value " + std::to_string(v) + " at (h=" +
                              std::to_string(h) + ", s=" + std::to_string(s) + ", a=" +
                              std::to_string(a) + ") outside [0,1]");
      }
  f.r_ = std::move(r);
  return f;
}

RewardFunction RewardFunction::step_table(const LinearMdp& mdp, int step,
                                          std::vector<std::vector<double>> r) {
  RewardFunction f;
  f.env_ = false;
  f.step_ = step;
  for (int s : mdp.step_states[step])
    for (int a = 0; a < mdp.num_actions(s); ++a) {
      double v = r.at(s).at(a);
      if (v < 0.0 || v > 1.0 + 1e-12)
        throw ContractError("RewardFunction: step-table value " + std::to_string(v) +
                            " outside [0,1] at (s=" + std::to_string(s) + ", a=" +
                            std::to_string(a) + ")");
    }
  f.step_r_ = std::move(r);
  return f;
}

RegMinKind regmin_kind_from_string(const std::string& name) {
  if (name == "lsvi") return RegMinKind::Lsvi;
  if (name == "oracle") return RegMinKind::Oracle;
  if (name == "uniform") return RegMinKind::Uniform;
  throw ContractError("unknown regret minimizer '" + name + "' (expected lsvi|oracle|uniform)");
}

std::string to_string(RegMinKind kind) {
  switch (kind) {
    case RegMinKind::Lsvi: return "lsvi";
    case RegMinKind::Oracle: return "oracle";
    case RegMinKind::Uniform: return "uniform";
  }
  return "?";
}

namespace {

Policy uniform_stochastic(const LinearMdp& mdp, int horizon) {
  StochasticTable t;
  t.probs.resize(mdp.H);
  for (int h = 0; h < horizon; ++h)
    for (int s : mdp.step_states[h]) {
      int n = mdp.num_actions(s);
      t.probs[h][s] = std::vector<double>(n, 1.0 / n);
    }
  return Policy::stochastic("uniform", std::move(t));
}

// Exact DP on the true dynamics for a given reward model (oracle planner).
Policy plan_greedy(const LinearMdp& mdp, int horizon, const RewardFunction& reward) {
  DeterministicTable table;
  table.action.resize(mdp.H);
  std::unordered_map<int, double> vnext;
  for (int h = horizon - 1; h >= 0; --h) {
    std::unordered_map<int, double> v;
    for (int s : mdp.step_states[h]) {
      double best = -1e300;
      int best_a = 0;
      for (int a = 0; a < mdp.num_actions(s); ++a) {
        double q = reward.use_env_reward() ? mdp.mean_reward(h, s, a) : reward(h, s, a);
        if (h + 1 < horizon) {
          for (std::size_t j = 0; j < mdp.mu[h].size(); ++j) {
            double p = mdp.transition_prob(h, s, a, static_cast<int>(j));
            if (p > 0.0) q += p * vnext[mdp.step_states[h + 1][j]];
          }
        }
        if (q > best) {
          best = q;
          best_a = a;
        }
      }
      v[s] = best;
      table.action[h][s] = best_a;
    }
    vnext = std::move(v);
  }
  return Policy::deterministic("oracle-greedy", std::move(table));
}

class OracleRegMin final : public RegretMinimizer {
 public:
  explicit OracleRegMin(const RegMinConfig& cfg) : cfg_(cfg) {}
  void reset(const LinearMdp& mdp, int horizon, const RewardFunction& reward, long, double) override {
    policy_ = plan_greedy(mdp, horizon, reward);
  }
  const Policy& policy() const override { return policy_; }
  void observe(const StepRecord*, int) override {}
  std::optional<Policy> recommend() const override { return policy_; }
  const RegMinConfig& config() const override { return cfg_; }

 private:
  RegMinConfig cfg_;
  Policy policy_;
};

class UniformRegMin final : public RegretMinimizer {
 public:
  explicit UniformRegMin(const RegMinConfig& cfg) : cfg_(cfg) {}
  void reset(const LinearMdp& mdp, int horizon, const RewardFunction&, long, double) override {
    policy_ = uniform_stochastic(mdp, horizon);
  }
  const Policy& policy() const override { return policy_; }
  void observe(const StepRecord*, int) override {}
  std::optional<Policy> recommend() const override { return std::nullopt; }
  const RegMinConfig& config() const override { return cfg_; }

 private:
  RegMinConfig cfg_;
  Policy policy_;
};

// Optimistic least-squares value iteration with ridge Q-estimates and a
// bonus * ||phi||_{Lambda^-1} exploration bonus. Finite states let the ridge
// solves run off (s,a) sufficient statistics; the greedy policy is recomputed
// only when some step's sample count doubles.
class LsviRegMin final : public RegretMinimizer {
 public:
  explicit LsviRegMin(const RegMinConfig& cfg) : cfg_(cfg) {}

  void reset(const LinearMdp& mdp, int horizon, const RewardFunction& reward, long K,
             double delta) override {
    mdp_ = &mdp;
    horizon_ = horizon;
    reward_ = reward;
    const double arg = std::max(
        2.0, double(mdp.d) * double(std::max<long>(K, 2)) * double(horizon) / std::max(delta, 1e-12));
    bonus_ = cfg_.bonus_c * mdp.d * horizon * std::sqrt(std::log(arg)) * cfg_.constant_scale;
    n_.assign(horizon, {});
    rsum_.assign(horizon, {});
    nxt_.assign(horizon, {});
    for (int h = 0; h < horizon; ++h) {
      n_[h].resize(mdp.num_states());
      rsum_[h].resize(mdp.num_states());
      nxt_[h].resize(mdp.num_states());
      for (int s : mdp.step_states[h]) {
        n_[h][s].assign(mdp.num_actions(s), 0);
        rsum_[h][s].assign(mdp.num_actions(s), 0.0);
        if (h + 1 < mdp.H)
          nxt_[h][s].assign(mdp.num_actions(s),
                            std::vector<long>(mdp.step_states[h + 1].size(), 0));
      }
    }
    total_.assign(horizon, 0);
    refit_at_.assign(horizon, 0);
    recompute();
  }

  const Policy& policy() const override { return policy_; }

  void observe(const StepRecord* steps, int horizon) override {
    bool refit = false;
    for (int h = 0; h < horizon; ++h) {
      const auto& rec = steps[h];
      ++n_[h][rec.state][rec.action];
      ++total_[h];
      if (reward_.use_env_reward()) rsum_[h][rec.state][rec.action] += rec.reward;
      if (rec.next_state >= 0 && h + 1 < mdp_->H) {
        int j = next_index(h, rec.next_state);
        ++nxt_[h][rec.state][rec.action][j];
      }
      if (total_[h] >= 2 * std::max<long>(refit_at_[h], 4)) refit = true;
    }
    if (refit) recompute();
  }

  std::optional<Policy> recommend() const override {
    long total = 0;
    for (long t : total_) total += t;
    if (total == 0) return std::nullopt;
    Policy out;
    const_cast<LsviRegMin*>(this)->backward_pass(0.0, &out);
    return out;
  }

  long version() const override { return version_; }

  const RegMinConfig& config() const override { return cfg_; }

 private:
  int next_index(int h, int next_state) const {
    const auto& list = mdp_->step_states[h + 1];
    for (std::size_t j = 0; j < list.size(); ++j)
      if (list[j] == next_state) return static_cast<int>(j);
    throw NumericalError("LSVI: next state not in step list");
  }

  void recompute() {
    backward_pass(bonus_, &policy_);
    for (int h = 0; h < horizon_; ++h) refit_at_[h] = total_[h];
    ++version_;
  }

  void backward_pass(double bonus, Policy* out) {
    const auto& mdp = *mdp_;
    DeterministicTable table;
    table.action.resize(mdp.H);
    std::unordered_map<int, double> vnext;
    for (int h = horizon_ - 1; h >= 0; --h) {
      // Lambda_h = ridge I + sum n(s,a) phi phi^T
      Mat lambda = cfg_.ridge * Mat::Identity(mdp.d, mdp.d);
      Vec target_sum = Vec::Zero(mdp.d);
      for (int s : mdp.step_states[h]) {
        for (int a = 0; a < mdp.num_actions(s); ++a) {
          const long cnt = n_[h][s][a];
          if (cnt == 0) continue;
          const Vec& f = mdp.phi[s][a];
          lambda.selfadjointView<Eigen::Lower>().rankUpdate(f, double(cnt));
          double y = reward_.use_env_reward() ? rsum_[h][s][a] : 0.0;
          if (h + 1 < horizon_) {
            const auto& row = nxt_[h][s][a];
            for (std::size_t j = 0; j < row.size(); ++j)
              if (row[j] > 0) y += double(row[j]) * vnext[mdp.step_states[h + 1][j]];
          }
          target_sum += y * f;
        }
      }
      Eigen::LDLT<Mat> ldlt(lambda.selfadjointView<Eigen::Lower>());
      Vec w = ldlt.solve(target_sum);
      const double vmax = double(horizon_ - h);
      std::unordered_map<int, double> v;
      for (int s : mdp.step_states[h]) {
        double best = -1e300;
        int best_a = 0;
        for (int a = 0; a < mdp.num_actions(s); ++a) {
          const Vec& f = mdp.phi[s][a];
          double q = f.dot(w) + bonus * std::sqrt(std::max(0.0, f.dot(ldlt.solve(f))));
          if (!reward_.use_env_reward()) q += reward_(h, s, a);
          q = std::clamp(q, 0.0, vmax);
          if (q > best) {
            best = q;
            best_a = a;
          }
        }
        v[s] = best;
        table.action[h][s] = best_a;
      }
      vnext = std::move(v);
    }
    *out = Policy::deterministic("lsvi-greedy", std::move(table));
  }

  RegMinConfig cfg_;
  const LinearMdp* mdp_ = nullptr;
  int horizon_ = 0;
  RewardFunction reward_ = RewardFunction::environment();
  double bonus_ = 0.0;
  std::vector<std::vector<std::vector<long>>> n_;
  std::vector<std::vector<std::vector<double>>> rsum_;
  std::vector<std::vector<std::vector<std::vector<long>>>> nxt_;
  std::vector<long> total_, refit_at_;
  Policy policy_;
  long version_ = 0;
};

}  // namespace

std::unique_ptr<RegretMinimizer> make_regmin(RegMinKind kind, const RegMinConfig& cfg) {
  switch (kind) {
    case RegMinKind::Lsvi: return std::make_unique<LsviRegMin>(cfg);
    case RegMinKind::Oracle: return std::make_unique<OracleRegMin>(cfg);
    case RegMinKind::Uniform: return std::make_unique<UniformRegMin>(cfg);
  }
  throw ContractError("make_regmin: bad kind");
}

RegMinRunResult run_regmin(Env& env, RegretMinimizer& rm, const RewardFunction& reward, long K,
                           double delta, const RunRegminOptions& opts) {
  if (K < 1) throw ContractError("run_regmin: K >= 1 required");
  const auto& mdp = env.mdp();
  const int horizon = opts.truncate_at >= 0 ? opts.truncate_at + 1 : mdp.H;
  if (horizon > mdp.H) throw ContractError("run_regmin: truncation step beyond horizon");
  rm.reset(mdp, horizon, reward, K, delta);

  RegMinRunResult out;
  out.covariance.assign(mdp.H, Mat::Zero(mdp.d, mdp.d));
  std::vector<StepRecord> ep(mdp.H);
  long last_version = -1;
  for (long k = 0; k < K; ++k) {
    const Policy& pol = rm.policy();
    if (opts.record_played) {
      if (out.played.empty() || rm.version() != last_version) {
        out.played.emplace_back(pol, 1);
        last_version = rm.version();
      } else {
        ++out.played.back().second;
      }
    }

    env.rollout_policy_fast(pol, opts.truncate_at,
                            [&](int h, const StepRecord& rec) { ep[h] = rec; });
    ++out.episodes;

    for (int h = 0; h < horizon; ++h) {
      const Vec& f = mdp.phi[ep[h].state][ep[h].action];
      out.covariance[h].selfadjointView<Eigen::Lower>().rankUpdate(f, 1.0);
      out.reward_sum +=
          reward.use_env_reward() ? ep[h].reward : reward(h, ep[h].state, ep[h].action);
    }
    if (opts.collect) {
      const auto& rec = ep[opts.collect->step];
      opts.collect->add(mdp.phi[rec.state][rec.action], rec.reward, rec.next_state);
    }
    if (opts.keep_logs) {
      EpisodeLog log;
      log.steps.assign(ep.begin(), ep.end());
      if (opts.truncate_at >= 0) log.truncated_at = opts.truncate_at;
      out.logs.push_back(std::move(log));
    }

    // mask the final played step's next state (and observed reward) in the
    // truncated regime before the learner sees the episode
    StepRecord masked[64];
    const int m = std::min(horizon, 64);
    for (int h = 0; h < m; ++h) masked[h] = ep[h];
    if (opts.truncate_at >= 0) {
      masked[m - 1].next_state = -1;
      masked[m - 1].reward = 0.0;
    }
    rm.observe(masked, m);
  }

  // symmetrize
  for (auto& c : out.covariance) c = c.selfadjointView<Eigen::Lower>();
  return out;
}

OnlineToBatchResult online_to_batch(Env& env, RegretMinimizer& rm, long budget, double delta) {
  OnlineToBatchResult out;
  if (budget <= 0) {
    out.undefined = true;
    out.recommended = Policy();
    out.episodes = 0;
    return out;
  }
  RunRegminOptions opts;
  opts.record_played = false;
  run_regmin(env, rm, RewardFunction::environment(), budget, delta, opts);
  out.episodes = budget;
  auto rec = rm.recommend();
  if (!rec) {
    out.undefined = true;
  } else {
    out.recommended = std::move(*rec);
  }
  return out;
}

}  // namespace pedel
