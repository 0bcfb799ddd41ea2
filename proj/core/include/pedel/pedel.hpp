#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pedel/data_pool.hpp"
#include "pedel/design.hpp"
#include "pedel/mdp.hpp"
#include "pedel/policy.hpp"
#include "pedel/regret_min.hpp"
#include "pedel/simulate.hpp"

namespace pedel {

/// Ridge estimate of the transition operator applied through the data pool:
/// That_pi = (sum_tau phi_pi(s_{h+1,tau}) phi_{h,tau}^T) Lambda^-1 with
/// Lambda = Sigma + ridge I. Returns the d x d matrix.
Mat estimate_transition_operator(const LinearMdp& mdp, const StepDataPool& pool,
                                 const Policy& policy, double ridge);

/// Chained feature-visitation update: phihat_{pi,h+1} = That_pi * phihat_{pi,h},
/// computed without materializing That (O(S d + d^2) per policy).
Vec estimate_feature_visitation_step(const LinearMdp& mdp, const StepDataPool& pool,
                                     const Policy& policy, const Vec& phihat_prev, double ridge);

/// Ridge regression of the reward vector: thetahat = Lambda^-1 sum phi r.
Vec estimate_reward_vector(const LinearMdp& mdp, const StepDataPool& pool, double ridge);

/// Elimination rule: keep pi with vhat[pi] >= max vhat - 2 eps_ell.
/// Returns the surviving subset of `active`.
std::vector<int> eliminate(const std::vector<double>& vhat, const std::vector<int>& active,
                           double eps_ell);

struct PedelConfig {
  double epsilon = 0.05;
  double delta = 0.1;
  double constant_scale = 1.0;
  std::uint64_t seed = 0;
  long total_episode_cap = std::numeric_limits<long>::max();
  long phase_episode_cap = std::numeric_limits<long>::max();
  RegMinKind design_regmin = RegMinKind::Lsvi;
  double regmin_bonus_scale = -1.0;  // constant_scale when < 0
  GateMode k0_gate = GateMode::Scaled;
  GateMode lower_gate = GateMode::Off;
  bool use_conditioned_cov = true;
  double ridge = -1.0;  // Lambda_{h,l} regularizer; < 0 means 1/d
  bool keep_design_trace = false;
};

struct PedelTraceRow {
  int epoch = 0;
  int h = 0;  // 1-based step in outputs
  long episodes_this_phase = 0;
  double design_value_achieved = 0.0;
  int active_policies = 0;
  double vhat_max = 0.0;
  int eliminated_count = 0;
};

struct GateRecord {
  int epoch = 0;
  int h = 0;
  double eps_target = 0.0;    // eps_ell^2 / beta_ell
  double max_quadform = 0.0;  // max_pi ||phihat||^2_{Lambda^-1}, recomputed post hoc
  double lambda_min = 0.0;
  double lambda_floor = 0.0;
};

struct PedelResult {
  int policy_index = -1;  // into the input policy list
  long episodes = 0;
  bool budget_exhausted = false;
  bool early_terminated = false;
  int epochs_run = 0;
  std::vector<PedelTraceRow> trace;
  std::vector<GateRecord> gates;
  std::vector<int> survivors;          // active set at termination
  std::vector<double> vhat_final;      // estimated values at the last epoch (by input index)
  std::vector<DesignTraceRow> design_trace;
};

/// Policy elimination via per-step online experiment design.
///
/// Epochs l = max(1, ceil(log2(d^{3/2}/H))) .. ceil(log2(4/eps)), eps_l = 2^-l,
/// beta_l = 64 H^4 log(4 H^2 |Pi_l| l^2 / delta) * constant_scale. Per (l,h) the
/// design subroutine collects data until max_pi ||phihat_pi,h||^2_{Lambda^-1}
/// <= eps_l^2/beta_l with Lambda = Sigma + (1/d) I; feature-visitations and
/// reward vectors are estimated from that phase's data only; policies trailing
/// the empirical best by more than 2 eps_l are removed. Early return on a
/// singleton active set. Budget exhaustion returns the current best, flagged.
PedelResult run_pedel(Env& env, const std::vector<Policy>& policies, const PedelConfig& cfg);

}  // namespace pedel
