#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "pedel/data_pool.hpp"
#include "pedel/mdp.hpp"
#include "pedel/policy.hpp"
#include "pedel/simulate.hpp"

namespace pedel {

/// High-probability regret guarantee sqrt(C1 K log^p1(HK/d)) + C2 log^p2(HK/d).
/// The defaults are the constants of the efficient regret minimizer the theory
/// instantiates: C1 = c1 d^4 H^4, C2 = c2 d^4 H^3, p1 = 3, p2 = 7/2, c1 = c2 = 1.
struct RegretBound {
  double C1 = 1.0, C2 = 1.0, p1 = 1.0, p2 = 1.0;
  static RegretBound defaults(int d, int H) {
    RegretBound b;
    b.C1 = std::pow(double(d), 4) * std::pow(double(H), 4);
    b.C2 = std::pow(double(d), 4) * std::pow(double(H), 3);
    b.p1 = 3.0;
    b.p2 = 3.5;
    return b;
  }
};

/// Expected-regret guarantee C1 K^alpha + C2 (the contract the lower bound uses).
struct LowRegretBound {
  double C1 = 1.0, C2 = 1.0, alpha = 0.5;
};

/// Deterministic reward function over the finite MDP, or a sentinel meaning
/// "use the environment's observed rewards" (online-to-batch mode).
class RewardFunction {
 public:
  /// Environment rewards (no override).
  static RewardFunction environment() { return RewardFunction(); }

  /// Full table r[h][state][action]; validated to lie in [0,1].
  static RewardFunction table(const LinearMdp& mdp,
                              std::vector<std::vector<std::vector<double>>> r);

  /// Reward only at one step: r[state][action] at `step`, zero elsewhere.
  static RewardFunction step_table(const LinearMdp& mdp, int step,
                                   std::vector<std::vector<double>> r);

  bool use_env_reward() const { return env_; }
  int nonzero_step() const { return step_; }  // -1 if not a single-step table
  double operator()(int h, int state, int action) const {
    if (env_) throw ContractError("RewardFunction: environment mode has no table");
    if (step_ >= 0) return h == step_ ? step_r_[state][action] : 0.0;
    return r_[h][state][action];
  }

 private:
  RewardFunction() : env_(true) {}
  bool env_ = false;
  int step_ = -1;
  std::vector<std::vector<std::vector<double>>> r_;
  std::vector<std::vector<double>> step_r_;
};

struct RegMinConfig {
  double ridge = 1.0;
  double bonus_c = 1.0;          // bonus = bonus_c * d * H * sqrt(log(d K H / delta)) * scale
  double constant_scale = 1.0;
  RegretBound bound;             // declared high-probability guarantee
  LowRegretBound low_regret;     // declared expected-regret guarantee
};

/// A regret-minimization algorithm: proposes a policy per episode, observes the
/// episode afterwards. Episode k's policy depends only on episodes < k.
class RegretMinimizer {
 public:
  virtual ~RegretMinimizer() = default;

  /// horizon = number of steps actually played (h+1 in the h-truncated MDP).
  /// K = planned number of episodes (enters the confidence widths).
  virtual void reset(const LinearMdp& mdp, int horizon, const RewardFunction& reward, long K,
                     double delta) = 0;
  virtual const Policy& policy() const = 0;

  /// Steps [0, horizon) of one episode. In truncated mode the final step's
  /// next_state is masked out by the caller before this is invoked.
  virtual void observe(const StepRecord* steps, int horizon) = 0;

  /// Greedy policy w.r.t. current estimates without exploration bonus.
  /// nullopt before any data (degenerate recommendation, flagged by callers).
  virtual std::optional<Policy> recommend() const = 0;

  /// Bumped whenever policy() changes content (used to run-length encode plays).
  virtual long version() const { return 0; }

  virtual const RegMinConfig& config() const = 0;
};

enum class RegMinKind { Lsvi, Oracle, Uniform };

RegMinKind regmin_kind_from_string(const std::string& name);
std::string to_string(RegMinKind kind);

std::unique_ptr<RegretMinimizer> make_regmin(RegMinKind kind, const RegMinConfig& cfg);

struct RegMinRunResult {
  std::vector<std::pair<Policy, long>> played;  // run-length encoded policy sequence
  std::vector<Mat> covariance;                  // per step: sum phi phi^T (usable steps)
  long episodes = 0;
  double reward_sum = 0.0;                      // cumulative algo-reward collected
  std::vector<EpisodeLog> logs;                 // only when keep_logs
};

struct RunRegminOptions {
  int truncate_at = -1;        // -1: play the full horizon
  StepDataPool* collect = nullptr;  // optional estimation pool at its `step`
  bool keep_logs = false;
  bool record_played = true;
};

/// Runs `rm` for K episodes through `env` (truncated if requested), pooling
/// covariances. Validates table rewards into [0,1] on the fly.
RegMinRunResult run_regmin(Env& env, RegretMinimizer& rm, const RewardFunction& reward, long K,
                           double delta, const RunRegminOptions& opts = {});

struct OnlineToBatchResult {
  Policy recommended;
  long episodes = 0;
  bool undefined = false;  // stopped before any data; recommendation is uniform
};

/// Online-to-batch protocol: run the learner on the environment's own rewards
/// for `budget` episodes, then output its greedy recommendation.
OnlineToBatchResult online_to_batch(Env& env, RegretMinimizer& rm, long budget, double delta);

}  // namespace pedel
