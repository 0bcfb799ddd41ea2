#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "pedel/data_pool.hpp"
#include "pedel/mdp.hpp"
#include "pedel/regret_min.hpp"
#include "pedel/simulate.hpp"

namespace pedel {

/// Smoothed XY-design objective over time-normalized covariances:
///   f(Lambda) = (1/eta) log sum_phi exp(eta * phi^T (Lambda + Lambda0)^-1 phi).
/// Lambda0 must be positive definite. Cached smoothness constants:
/// L = M = ||Lambda0^-1||_op^2, beta = 2 ||Lambda0^-1||_op^3 (1 + eta ||Lambda0^-1||_op).
class SmoothedXy {
 public:
  SmoothedXy(std::vector<Vec> Phi, double eta, Mat Lambda0);

  double value(const Mat& Lambda) const;     // exact max_phi quadform
  double smoothed(const Mat& Lambda) const;  // logsumexp relaxation
  /// Xi = -grad f: softmax-weighted sum of A^-1 phi phi^T A^-1. PSD, tr <= M.
  Mat neg_gradient(const Mat& Lambda) const;
  /// Index of the max quadform target; lowest index wins ties.
  int argmax_target(const Mat& Lambda) const;

  const std::vector<Vec>& targets() const { return Phi_; }
  const Mat& regularizer() const { return Lambda0_; }
  double eta() const { return eta_; }
  double L() const { return L_; }
  double beta() const { return beta_; }
  double M() const { return M_; }
  double gamma_phi() const { return gamma_phi_; }  // max target norm

 private:
  std::vector<double> quadforms(const Mat& Lambda) const;

  std::vector<Vec> Phi_;
  double eta_;
  Mat Lambda0_;
  double L_ = 0, beta_ = 0, M_ = 0, gamma_phi_ = 0;
};

double xy_value(const Mat& Lambda, const std::vector<Vec>& Phi, const Mat& Lambda0);
double xy_smoothed(const Mat& Lambda, const std::vector<Vec>& Phi, double eta, const Mat& Lambda0);
Mat xy_gradient(const Mat& Lambda, const std::vector<Vec>& Phi, double eta, const Mat& Lambda0);

/// Theory default eta = (2/gamma_Phi)(1 + ||Lambda0||_op) log|Phi|, clipped to
/// [1, eta_max] for conditioning.
double default_eta(const std::vector<Vec>& Phi, const Mat& Lambda0, double eta_max = 1e6);

/// N*(eps; f) = inf_Omega f / eps given the infimum value.
inline double nstar(double inf_value, double eps) { return inf_value / eps; }

struct FwHistoryRow {
  double step_size;
  Mat y;
};

struct DesignState {
  Mat Lambda;   // current / final iterate (time-normalized)
  Mat x1;
  long raw_count = 0;  // episodes accumulated while producing Lambda
  std::vector<FwHistoryRow> history;  // filled when keep_history
};

struct FwOptions {
  bool keep_history = false;
  double feasibility_tol = 1e-9;
};

/// Approximate Frank-Wolfe with step sizes gamma_t = 1/(t+1).
/// neg_grad(Lambda) returns Xi = -grad f(Lambda); lmo(Xi) returns a feasible
/// y maximizing tr(Xi y) up to slack. LMO outputs are checked to be symmetric
/// PSD with operator norm <= 1 (the outer bounds of any covariance set).
DesignState approx_frank_wolfe(const std::function<Mat(const Mat&)>& neg_grad,
                               const std::function<Mat(const Mat&)>& lmo, int T, Mat x1,
                               const FwOptions& opts = {});

/// Exact LMO over the covariance set spanned by a finite policy list with known
/// dynamics: argmax_pi tr(Xi Lambda_pi). Returns the covariance and the index.
std::pair<Mat, int> known_omega_lmo(const LinearMdp& mdp, const std::vector<Policy>& policies,
                                    int step, const Mat& Xi);

struct DesignTraceRow {
  int iteration = 0;
  double objective_value = 0;
  double smoothed_value = 0;
  double min_eig = 0;
  long episodes_cumulative = 0;
};

struct FwRegretResult {
  DesignState state;     // Lambda_{T+1}
  StepDataPool pool;     // pooled (phi_h, r_h, s_{h+1}) aggregates, all K(T+1) episodes
  long episodes = 0;
  std::vector<std::pair<Policy, long>> played;
  std::vector<DesignTraceRow> trace;
};

/// Online Frank-Wolfe via regret minimization at step `step` (h-truncated runs):
/// one warmup burst of K episodes, then T iterations of RegMin on the reward
/// r(s,a) = phi^T Xi phi / M. Total (T+1) K episodes.
/// With tight_reward_norm, M is replaced by max_{s,a} phi^T Xi phi per iteration
/// (a valid normalizer since it only tightens the [0,1] bound; keeps the reward
/// informative when ||Lambda0^-1|| is large).
FwRegretResult fw_regret(Env& env, const SmoothedXy& f, RegretMinimizer& rm, int T, long K,
                         int step, double delta, bool record_played = false,
                         bool keep_trace = false, bool tight_reward_norm = false);

enum class GateMode { Theory, Scaled, Off };
GateMode gate_mode_from_string(const std::string&);

/// K0-burn-in pieces from the regret bound (R = 2 throughout):
/// K0(T) <= Ktilde0 T^2 + Ktilde1 T.
double ktilde0(double T, double beta, double M, double delta, const RegretBound& rb, int H);
double ktilde1(double T, double beta, double M, double delta, const RegretBound& rb, int H);

struct OptCovConfig {
  GateMode k0_gate = GateMode::Scaled;
  GateMode lower_gate = GateMode::Scaled;
  double constant_scale = 1.0;
  long episode_cap = std::numeric_limits<long>::max();
  int start_round = 1;
  int max_round = 24;
  bool record_played = false;
  bool keep_trace = false;
};

struct OptCovResult {
  Mat Sigma;            // unnormalized covariates of the accepted round
  StepDataPool pool;    // that round's estimation data
  long episodes = 0;    // total episodes across all rounds
  double achieved_f = std::numeric_limits<double>::quiet_NaN();
  int final_round = 0;
  bool budget_exhausted = false;
  std::vector<std::pair<Policy, long>> played;
  std::vector<DesignTraceRow> trace;
};

using ObjectiveFactory = std::function<SmoothedXy(int round, long round_budget)>;
using RegMinFactory = std::function<std::unique_ptr<RegretMinimizer>()>;

/// Doubling-schedule data collection: round i runs FWRegret(f_i, T_i - 1, K_i)
/// with T_i = 2^i, K_i = 2^i T_i^2, gated by the K0 burn-in condition, and stops
/// when f_i(Lambda_hat) <= K_i T_i eps (upper test) and
/// f_i(Lambda_hat) >= beta_i R^2 (log T_i + 3)/T_i (lower test, per gate mode).
OptCovResult opt_cov(Env& env, const ObjectiveFactory& make_objective, double eps_constraint,
                     double delta, const RegMinFactory& make_rm, int step,
                     const OptCovConfig& cfg);

struct CondCovConfig {
  double constant_scale = 1.0;
  long round_episodes = 256;  // first exploration burst; doubles each round
  int max_rounds = 40;
  int patience = 6;
  double min_rel_growth = 1e-3;
  long episode_cap = std::numeric_limits<long>::max();
};

struct CondCovResult {
  Mat Sigma;        // phase-1 + replay covariates at `step`
  StepDataPool pool;
  std::vector<std::pair<Policy, long>> policies;  // phase-1 policy list (replayed)
  long episodes = 0;
  double lambda_min = 0;
  double target = 0;
  bool reached = false;
};

/// Well-conditioned covariate collection. Phase 1 grows the minimum eigenvalue
/// by running the regret minimizer on the reward (phi^T v)^2 for v the current
/// minimum eigenvector, until lambda_min(Sigma) >= max{12544 cs d log(2N(2+32T)/delta),
/// lambda_floor}; phase 2 replays the stored policies ceil(N/|Pi|) times.
/// Throws ContractError on min-eigenvalue stagnation (explorability diagnostic).
CondCovResult conditioned_cov(Env& env, long N, double lambda_floor, double delta,
                              const RegMinFactory& make_rm, int step, const CondCovConfig& cfg);

struct DesignConfig {
  double constant_scale = 1.0;
  GateMode k0_gate = GateMode::Scaled;
  // The direct collection gate (max quadform <= eps_exp) is what terminates the
  // per-phase design; the 2-optimality lower test is vacuous at desk scale once
  // the smoothness constant blows up, so it defaults off here (opt_cov keeps it).
  GateMode lower_gate = GateMode::Off;
  long episode_cap = std::numeric_limits<long>::max();
  bool use_conditioned_cov = true;
  // Theory mode also enforces the rerun-lemma eigenvalue constant (12544 d log);
  // otherwise the phase-1 target is lambda_floor, and the floor is re-checked
  // directly on the returned covariates.
  bool theory_cond_target = false;
  double eta_max = 1e6;
  double ridge = -1.0;  // PEDEL gate regularizer; < 0 means 1/d
  int start_round = 1;
  long cond_round_episodes = 256;
  bool keep_trace = false;
};

struct XyCollectResult {
  StepDataPool pool;   // conditioned + final-round FW data (all step-h usable data)
  long episodes = 0;
  double achieved_quadform = std::numeric_limits<double>::quiet_NaN();
  double lambda_min = 0;
  int final_round = 0;
  bool budget_exhausted = false;
  std::vector<DesignTraceRow> trace;
};

/// Full online XY design for one (epoch, step) phase: ConditionedCov-backed
/// regularizer, OptCov rounds on the smoothed objective, and a direct final gate
/// max_phi ||phi||^2_{(Sigma + ridge I)^-1} <= eps_exp with lambda_min(Sigma +
/// ridge I) >= lambda_floor. Keeps collecting until the gate holds or the budget
/// is exhausted (flagged).
XyCollectResult collect_xy_design(Env& env, const std::vector<Vec>& Phi, int step, double eps_exp,
                                  double delta, double lambda_floor, const RegMinFactory& make_rm,
                                  const DesignConfig& cfg);

}  // namespace pedel
