#include "pedel/pedel.hpp"

#include <algorithm>
#include <cmath>

namespace pedel {

namespace {

Eigen::LDLT<Mat> pool_factor(const LinearMdp& mdp, const StepDataPool& pool, double ridge) {
  Mat A = pool.full_sigma() + ridge * Mat::Identity(mdp.d, mdp.d);
  Eigen::LDLT<Mat> ldlt(A);
  if (ldlt.info() != Eigen::Success) {
    Mat jittered = A + 1e-12 * Mat::Identity(mdp.d, mdp.d);
    ldlt.compute(jittered);
    if (ldlt.info() != Eigen::Success) throw NumericalError("pedel: covariate factorization failed");
  }
  return ldlt;
}

}  // namespace

Mat estimate_transition_operator(const LinearMdp& mdp, const StepDataPool& pool,
                                 const Policy& policy, double ridge) {
  if (pool.n == 0) throw ContractError("estimate_transition_operator: empty data pool");
  auto ldlt = pool_factor(mdp, pool, ridge);
  const int next_step = pool.step + 1;
  Mat That = Mat::Zero(mdp.d, mdp.d);
  for (int s : mdp.step_states[next_step]) {
    const Vec& c = pool.next_phi_sum[s];
    if (c.size() == 0) continue;
    Vec pf = policy_state_feature(mdp, policy, next_step, s);
    That.noalias() += pf * ldlt.solve(c).transpose();
  }
  return That;
}

Vec estimate_feature_visitation_step(const LinearMdp& mdp, const StepDataPool& pool,
                                     const Policy& policy, const Vec& phihat_prev, double ridge) {
  if (pool.n == 0) throw ContractError("estimate_feature_visitation_step: empty data pool");
  auto ldlt = pool_factor(mdp, pool, ridge);
  Vec w = ldlt.solve(phihat_prev);
  const int next_step = pool.step + 1;
  Vec out = Vec::Zero(mdp.d);
  for (int s : mdp.step_states[next_step]) {
    const Vec& c = pool.next_phi_sum[s];
    if (c.size() == 0) continue;
    const double alpha = c.dot(w);
    if (alpha != 0.0) out += alpha * policy_state_feature(mdp, policy, next_step, s);
  }
  return out;
}

Vec estimate_reward_vector(const LinearMdp& mdp, const StepDataPool& pool, double ridge) {
  if (pool.n == 0) throw ContractError("estimate_reward_vector: empty data pool");
  auto ldlt = pool_factor(mdp, pool, ridge);
  return ldlt.solve(pool.phi_reward_sum);
}

std::vector<int> eliminate(const std::vector<double>& vhat, const std::vector<int>& active,
                           double eps_ell) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i : active) best = std::max(best, vhat[i]);
  std::vector<int> out;
  out.reserve(active.size());
  for (int i : active)
    if (vhat[i] >= best - 2.0 * eps_ell) out.push_back(i);
  return out;
}

PedelResult run_pedel(Env& env, const std::vector<Policy>& policies, const PedelConfig& cfg) {
  const auto& mdp = env.mdp();
  if (policies.empty()) throw ContractError("run_pedel: empty policy set");
  if (cfg.epsilon <= 0.0 || cfg.epsilon >= 1.0 || cfg.delta <= 0.0 || cfg.delta >= 1.0)
    throw ContractError("run_pedel: epsilon and delta must lie in (0,1)");
  const double ridge = cfg.ridge > 0.0 ? cfg.ridge : 1.0 / mdp.d;

  PedelResult out;
  std::vector<int> active(policies.size());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = static_cast<int>(i);

  if (policies.size() == 1) {
    out.policy_index = 0;
    out.survivors = active;
    out.early_terminated = true;
    return out;
  }

  const int l0 = std::max(
      1, static_cast<int>(std::ceil(std::log2(std::pow(double(mdp.d), 1.5) / double(mdp.H)))));
  const int lmax = static_cast<int>(std::ceil(std::log2(4.0 / cfg.epsilon)));

  // phihat[pi][h]; h = 0 entries are exact start-state features
  std::vector<std::vector<Vec>> phihat(policies.size(), std::vector<Vec>(mdp.H));
  std::vector<double> vhat(policies.size(), 0.0);

  RegMinConfig rm_cfg;
  rm_cfg.constant_scale = cfg.regmin_bonus_scale > 0.0 ? cfg.regmin_bonus_scale : cfg.constant_scale;
  rm_cfg.bound = RegretBound::defaults(mdp.d, mdp.H);
  auto make_rm = [&]() { return make_regmin(cfg.design_regmin, rm_cfg); };

  int design_round_hint = 1;
  for (int l = l0; l <= lmax; ++l) {
    const double eps_l = std::pow(2.0, -l);
    const double beta_l = 64.0 * std::pow(double(mdp.H), 4) *
                          std::log(4.0 * mdp.H * mdp.H * double(active.size()) * l * l /
                                   cfg.delta) *
                          cfg.constant_scale;
    const double lambda_floor =
        std::log(4.0 * mdp.H * mdp.H * double(active.size()) * l * l / cfg.delta) *
        cfg.constant_scale;
    const double eps_exp = eps_l * eps_l / beta_l;

    for (int i : active) phihat[i][0] = policy_state_feature(mdp, policies[i], 0, mdp.start_state());
    std::fill(vhat.begin(), vhat.end(), -std::numeric_limits<double>::infinity());
    for (int i : active) vhat[i] = 0.0;

    int next_round_hint = design_round_hint;
    for (int h = 0; h < mdp.H; ++h) {
      // target set Phi_{h,l} = { phihat_{pi,h} : pi active }
      std::vector<Vec> Phi;
      Phi.reserve(active.size());
      for (int i : active) Phi.push_back(phihat[i][h]);

      DesignConfig dcfg;
      dcfg.constant_scale = cfg.constant_scale;
      dcfg.k0_gate = cfg.k0_gate;
      dcfg.lower_gate = cfg.lower_gate;
      dcfg.use_conditioned_cov = cfg.use_conditioned_cov;
      dcfg.ridge = ridge;
      dcfg.start_round = design_round_hint;
      dcfg.keep_trace = cfg.keep_design_trace;
      const long remaining_total = cfg.total_episode_cap - out.episodes;
      dcfg.episode_cap = std::min(cfg.phase_episode_cap, std::max<long>(0, remaining_total));

      const long episodes_before = env.episodes_used();
      auto design = collect_xy_design(env, Phi, h, eps_exp, cfg.delta / (2.0 * mdp.H * l * l),
                                      lambda_floor, make_rm, dcfg);
      const long phase_episodes = env.episodes_used() - episodes_before;
      out.episodes += phase_episodes;
      if (cfg.keep_design_trace)
        for (auto& row : design.trace) out.design_trace.push_back(row);

      // estimation from this phase's data only
      Vec theta_hat = estimate_reward_vector(mdp, design.pool, ridge);
      if (h + 1 < mdp.H) {
        for (int i : active)
          phihat[i][h + 1] =
              estimate_feature_visitation_step(mdp, design.pool, policies[i], phihat[i][h], ridge);
      }
      for (int i : active) vhat[i] += phihat[i][h].dot(theta_hat);

      // gate certification record (pure arithmetic on stored quantities)
      auto ldlt = pool_factor(mdp, design.pool, ridge);
      double mx = 0.0;
      for (const Vec& p : Phi) mx = std::max(mx, p.dot(ldlt.solve(p)));
      Eigen::SelfAdjointEigenSolver<Mat> es(Mat(design.pool.full_sigma()));
      GateRecord gate;
      gate.epoch = l;
      gate.h = h + 1;
      gate.eps_target = eps_exp;
      gate.max_quadform = mx;
      gate.lambda_min = es.eigenvalues().minCoeff() + ridge;
      gate.lambda_floor = lambda_floor;
      out.gates.push_back(gate);

      PedelTraceRow row;
      row.epoch = l;
      row.h = h + 1;
      row.episodes_this_phase = phase_episodes;
      row.design_value_achieved = design.achieved_quadform;
      row.active_policies = static_cast<int>(active.size());
      out.trace.push_back(row);

      next_round_hint = std::max(next_round_hint, design_round_hint);
      if (design.budget_exhausted) {
        out.budget_exhausted = true;
        // best current policy under the (possibly partial) estimates
        double best = -std::numeric_limits<double>::infinity();
        for (int i : active)
          if (vhat[i] > best) {
            best = vhat[i];
            out.policy_index = i;
          }
        out.survivors = active;
        out.vhat_final = vhat;
        out.epochs_run = l - l0 + 1;
        return out;
      }
    }

    double vmax = -std::numeric_limits<double>::infinity();
    for (int i : active) vmax = std::max(vmax, vhat[i]);
    auto survivors = eliminate(vhat, active, eps_l);
    const int eliminated = static_cast<int>(active.size() - survivors.size());
    active = std::move(survivors);
    out.epochs_run = l - l0 + 1;

    // annotate the epoch's trace rows with the post-elimination state
    for (auto it = out.trace.rbegin(); it != out.trace.rend() && it->epoch == l; ++it) {
      it->vhat_max = vmax;
      it->eliminated_count = eliminated;
    }

    design_round_hint = next_round_hint;
    if (active.size() == 1) {
      out.policy_index = active[0];
      out.survivors = active;
      out.vhat_final = vhat;
      out.early_terminated = true;
      return out;
    }
  }

  double best = -std::numeric_limits<double>::infinity();
  for (int i : active)
    if (vhat[i] > best) {
      best = vhat[i];
      out.policy_index = i;
    }
  out.survivors = active;
  out.vhat_final = vhat;
  return out;
}

}  // namespace pedel
