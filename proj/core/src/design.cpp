#include "pedel/design.hpp"

#include <algorithm>
#include <cmath>

#include "pedel/dp.hpp"

namespace pedel {

namespace {

constexpr double kFwR = 2.0;  // feasible-set diameter; ||Lambda_pi||_F <= 1

Eigen::LDLT<Mat> factor_with_jitter(const Mat& A) {
  Eigen::LDLT<Mat> ldlt(A);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) return ldlt;
  Mat jittered = A + 1e-12 * Mat::Identity(A.rows(), A.cols());
  Eigen::LDLT<Mat> retry(jittered);
  if (retry.info() != Eigen::Success)
    throw NumericalError("symmetric factorization failed despite jitter");
  return retry;
}

double min_eigenvalue(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  return es.eigenvalues().minCoeff();
}

Vec min_eigenvector(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(A);
  int idx = 0;
  es.eigenvalues().minCoeff(&idx);
  return es.eigenvectors().col(idx);
}

Policy uniform_over(const LinearMdp& mdp, int horizon) {
  StochasticTable t;
  t.probs.resize(mdp.H);
  for (int h = 0; h < horizon; ++h)
    for (int s : mdp.step_states[h]) {
      int n = mdp.num_actions(s);
      t.probs[h][s] = std::vector<double>(n, 1.0 / n);
    }
  return Policy::stochastic("uniform", std::move(t));
}

// Plays a fixed policy for K episodes in the step-truncated regime, pooling data.
void play_fixed(Env& env, const Policy& pol, long K, int step, StepDataPool& pool) {
  const auto& mdp = env.mdp();
  for (long k = 0; k < K; ++k) {
    env.rollout_policy_fast(pol, step, [&](int h, const StepRecord& rec) {
      if (h == step) pool.add(mdp.phi[rec.state][rec.action], rec.reward, rec.next_state);
    });
  }
}

}  // namespace

SmoothedXy::SmoothedXy(std::vector<Vec> Phi, double eta, Mat Lambda0)
    : Phi_(std::move(Phi)), eta_(eta), Lambda0_(std::move(Lambda0)) {
  if (Phi_.empty()) throw ContractError("SmoothedXy: empty target set");
  if (eta_ <= 0.0) throw ContractError("SmoothedXy: eta must be positive");
  const double lmin = min_eigenvalue(Lambda0_);
  if (lmin <= 0.0) throw ContractError("SmoothedXy: Lambda0 must be positive definite");
  const double op = 1.0 / lmin;  // ||Lambda0^-1||_op
  L_ = op * op;
  M_ = op * op;
  beta_ = 2.0 * op * op * op * (1.0 + eta_ * op);
  for (const Vec& p : Phi_) gamma_phi_ = std::max(gamma_phi_, p.norm());
}

std::vector<double> SmoothedXy::quadforms(const Mat& Lambda) const {
  Mat A = Lambda + Lambda0_;
  auto ldlt = factor_with_jitter(A);
  std::vector<double> q(Phi_.size());
  for (std::size_t i = 0; i < Phi_.size(); ++i) q[i] = Phi_[i].dot(ldlt.solve(Phi_[i]));
  return q;
}

double SmoothedXy::value(const Mat& Lambda) const {
  auto q = quadforms(Lambda);
  return *std::max_element(q.begin(), q.end());
}

double SmoothedXy::smoothed(const Mat& Lambda) const {
  auto q = quadforms(Lambda);
  const double mx = *std::max_element(q.begin(), q.end());
  double z = 0.0;
  for (double v : q) z += std::exp(eta_ * (v - mx));  // max-subtraction
  return mx + std::log(z) / eta_;
}

Mat SmoothedXy::neg_gradient(const Mat& Lambda) const {
  Mat A = Lambda + Lambda0_;
  auto ldlt = factor_with_jitter(A);
  const int d = static_cast<int>(Lambda.rows());
  std::vector<Vec> solved(Phi_.size());
  std::vector<double> q(Phi_.size());
  for (std::size_t i = 0; i < Phi_.size(); ++i) {
    solved[i] = ldlt.solve(Phi_[i]);
    q[i] = Phi_[i].dot(solved[i]);
  }
  const double mx = *std::max_element(q.begin(), q.end());
  double z = 0.0;
  for (double v : q) z += std::exp(eta_ * (v - mx));
  Mat Xi = Mat::Zero(d, d);
  for (std::size_t i = 0; i < Phi_.size(); ++i) {
    const double w = std::exp(eta_ * (q[i] - mx)) / z;
    if (w > 0.0) Xi.selfadjointView<Eigen::Lower>().rankUpdate(solved[i], w);
  }
  return Xi.selfadjointView<Eigen::Lower>();
}

int SmoothedXy::argmax_target(const Mat& Lambda) const {
  auto q = quadforms(Lambda);
  int best = 0;
  for (std::size_t i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = static_cast<int>(i);  // strict: lowest index wins ties
  return best;
}

double xy_value(const Mat& Lambda, const std::vector<Vec>& Phi, const Mat& Lambda0) {
  return SmoothedXy(Phi, 1.0, Lambda0).value(Lambda);
}

double xy_smoothed(const Mat& Lambda, const std::vector<Vec>& Phi, double eta, const Mat& Lambda0) {
  return SmoothedXy(Phi, eta, Lambda0).smoothed(Lambda);
}

Mat xy_gradient(const Mat& Lambda, const std::vector<Vec>& Phi, double eta, const Mat& Lambda0) {
  return SmoothedXy(Phi, eta, Lambda0).neg_gradient(Lambda);
}

double default_eta(const std::vector<Vec>& Phi, const Mat& Lambda0, double eta_max) {
  double gamma_phi = 0.0;
  for (const Vec& p : Phi) gamma_phi = std::max(gamma_phi, p.norm());
  if (gamma_phi <= 0.0) throw ContractError("default_eta: all-zero target set");
  Eigen::SelfAdjointEigenSolver<Mat> es(Lambda0);
  const double op = es.eigenvalues().maxCoeff();
  const double theory = (2.0 / gamma_phi) * (1.0 + op) * std::log(double(Phi.size()));
  return std::clamp(theory, 1.0, eta_max);
}

DesignState approx_frank_wolfe(const std::function<Mat(const Mat&)>& neg_grad,
                               const std::function<Mat(const Mat&)>& lmo, int T, Mat x1,
                               const FwOptions& opts) {
  DesignState st;
  st.x1 = x1;
  st.Lambda = std::move(x1);
  for (int t = 1; t <= T; ++t) {
    const double gamma = 1.0 / (t + 1);
    Mat Xi = neg_grad(st.Lambda);
    Mat y = lmo(Xi);
    // feasibility: symmetric PSD with operator norm <= 1
    if ((y - Mat(y.transpose())).norm() > opts.feasibility_tol * (1.0 + y.norm()))
      throw ContractError("approx_frank_wolfe: LMO output is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(y);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw ContractError("approx_frank_wolfe: LMO output is not PSD");
    if (es.eigenvalues().maxCoeff() > 1.0 + opts.feasibility_tol)
      throw ContractError("approx_frank_wolfe: LMO output exceeds the covariance norm bound");
    st.Lambda = (1.0 - gamma) * st.Lambda + gamma * y;
    if (opts.keep_history) st.history.push_back({gamma, y});
  }
  return st;
}

std::pair<Mat, int> known_omega_lmo(const LinearMdp& mdp, const std::vector<Policy>& policies,
                                    int step, const Mat& Xi) {
  if (policies.empty()) throw ContractError("known_omega_lmo: empty policy list");
  double best = -std::numeric_limits<double>::infinity();
  int arg = 0;
  Mat best_cov;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    Mat cov = exact_covariance(mdp, policies[i], step);
    double tr = (Xi.transpose() * cov).trace();
    if (tr > best) {
      best = tr;
      arg = static_cast<int>(i);
      best_cov = std::move(cov);
    }
  }
  return {best_cov, arg};
}

FwRegretResult fw_regret(Env& env, const SmoothedXy& f, RegretMinimizer& rm, int T, long K,
                         int step, double delta, bool record_played, bool keep_trace,
                         bool tight_reward_norm) {
  if (K < 1 || T < 0) throw ContractError("fw_regret: K >= 1 and T >= 0 required");
  const auto& mdp = env.mdp();
  FwRegretResult out;
  out.pool.init(mdp, step);

  // warmup: any policy for K episodes
  Policy uniform = uniform_over(mdp, step + 1);
  {
    StepDataPool warm;
    warm.init(mdp, step);
    play_fixed(env, uniform, K, step, warm);
    out.episodes += K;
    if (record_played) out.played.emplace_back(uniform, K);
    out.state.Lambda = warm.full_sigma() / double(K);
    out.state.x1 = out.state.Lambda;
    out.pool.merge(warm);
  }

  for (int t = 1; t <= T; ++t) {
    const double gamma = 1.0 / (t + 1);
    Mat Xi = f.neg_gradient(out.state.Lambda);

    double norm = f.M();
    if (tight_reward_norm) {
      double mx = 0.0;
      for (int s : mdp.step_states[step])
        for (int a = 0; a < mdp.num_actions(s); ++a) {
          const Vec& phi = mdp.phi[s][a];
          mx = std::max(mx, phi.dot(Xi * phi));
        }
      if (mx > 0.0) norm = std::min(norm, mx);
    }

    // induced reward at the design step: r(s,a) = phi^T Xi phi / M in [0,1]
    std::vector<std::vector<double>> r(mdp.num_states());
    for (int s : mdp.step_states[step]) {
      r[s].resize(mdp.num_actions(s));
      for (int a = 0; a < mdp.num_actions(s); ++a) {
        const Vec& phi = mdp.phi[s][a];
        double v = phi.dot(Xi * phi) / norm;
        if (v > 1.0 + 1e-9 || v < -1e-12)
          throw ContractError("fw_regret: induced reward " + std::to_string(v) +
                              " outside [0,1]; tr(Xi phi phi^T)/M must lie in [0,1]");
        r[s][a] = std::clamp(v, 0.0, 1.0);
      }
    }
    RewardFunction reward = RewardFunction::step_table(mdp, step, std::move(r));

    StepDataPool iter_pool;
    iter_pool.init(mdp, step);
    RunRegminOptions opts;
    opts.truncate_at = step;
    opts.collect = &iter_pool;
    opts.record_played = record_played;
    auto res = run_regmin(env, rm, reward, K, delta / std::max(1, 2 * T), opts);
    out.episodes += res.episodes;
    if (record_played)
      for (auto& pr : res.played) out.played.push_back(std::move(pr));

    out.state.Lambda =
        (1.0 - gamma) * out.state.Lambda + gamma * (iter_pool.full_sigma() / double(K));
    out.pool.merge(iter_pool);

    if (keep_trace) {
      DesignTraceRow row;
      row.iteration = t;
      row.objective_value = f.value(out.state.Lambda);
      row.smoothed_value = f.smoothed(out.state.Lambda);
      row.min_eig = min_eigenvalue(out.pool.full_sigma());
      row.episodes_cumulative = out.episodes;
      out.trace.push_back(row);
    }
  }
  out.state.raw_count = out.episodes;
  return out;
}

GateMode gate_mode_from_string(const std::string& s) {
  if (s == "theory") return GateMode::Theory;
  if (s == "scaled") return GateMode::Scaled;
  if (s == "off") return GateMode::Off;
  throw ContractError("unknown gate mode '" + s + "' (theory|scaled|off)");
}

double ktilde0(double T, double beta, double M, double delta, const RegretBound& rb, int H) {
  const double R4 = kFwR * kFwR * kFwR * kFwR;
  const double a = 72.0 * M * M * std::log(4.0 * T / delta) / (beta * beta * R4);
  const double base = 8.0 * M * M * rb.C1 / (beta * beta * R4);
  const double lg = std::log(std::max(
      2.0, 32.0 * rb.p1 * H * T * T * T * M * M * rb.C1 / (beta * beta * R4 * delta)));
  const double b = base * std::pow(2.0 * rb.p1, rb.p1) * std::pow(lg, rb.p1);
  return std::max(a, b);
}

double ktilde1(double T, double beta, double M, double delta, const RegretBound& rb, int H) {
  const double R2 = kFwR * kFwR;
  const double base = 3.0 * M * rb.C2 / (beta * R2);
  const double lg =
      std::log(std::max(2.0, 12.0 * rb.p2 * H * T * T * M * rb.C2 / (beta * R2 * delta)));
  return base * std::pow(2.0 * rb.p2, rb.p2) * std::pow(lg, rb.p2);
}

OptCovResult opt_cov(Env& env, const ObjectiveFactory& make_objective, double eps_constraint,
                     double delta, const RegMinFactory& make_rm, int step,
                     const OptCovConfig& cfg) {
  if (eps_constraint <= 0.0) throw ContractError("opt_cov: eps must be positive");
  const int H = env.mdp().H;
  OptCovResult out;
  out.pool.init(env.mdp(), step);

  for (int i = std::max(1, cfg.start_round); i <= cfg.max_round; ++i) {
    const long Ti = 1L << i;
    long Ki = (1L << i) * Ti * Ti;
    const double delta_i = delta / (4.0 * i * i);
    auto f = make_objective(i, Ti * Ki);

    if (cfg.k0_gate != GateMode::Off) {
      const double scale = cfg.k0_gate == GateMode::Scaled ? cfg.constant_scale : 1.0;
      auto rm_probe = make_rm();
      const auto& rb = rm_probe->config().bound;
      const double need = scale * (ktilde0(double(Ti), f.beta(), f.M(), delta_i, rb, H) * Ti * Ti +
                                   ktilde1(double(Ti), f.beta(), f.M(), delta_i, rb, H) * Ti);
      if (double(Ki) < need) continue;  // burn-in gate not met; no episodes spent
    }

    bool partial = false;
    if (out.episodes + Ti * Ki > cfg.episode_cap) {
      const long remaining = cfg.episode_cap - out.episodes;
      Ki = std::max<long>(1, remaining / Ti);
      partial = true;
    }

    auto rm = make_rm();
    auto fw = fw_regret(env, f, *rm, static_cast<int>(Ti) - 1, Ki, step, delta_i,
                        cfg.record_played, cfg.keep_trace);
    out.episodes += fw.episodes;
    out.Sigma = fw.pool.full_sigma();
    out.pool = std::move(fw.pool);
    out.achieved_f = f.smoothed(fw.state.Lambda);
    out.final_round = i;
    if (cfg.record_played)
      for (auto& pr : fw.played) out.played.push_back(std::move(pr));
    if (cfg.keep_trace)
      for (auto& row : fw.trace) {
        row.episodes_cumulative += out.episodes - fw.episodes;
        out.trace.push_back(row);
      }

    if (partial) {
      out.budget_exhausted = true;
      return out;
    }

    const bool upper_ok = out.achieved_f <= double(Ki) * double(Ti) * eps_constraint;
    bool lower_ok = true;
    if (cfg.lower_gate != GateMode::Off) {
      const double scale = cfg.lower_gate == GateMode::Scaled ? cfg.constant_scale : 1.0;
      lower_ok = out.achieved_f >=
                 scale * f.beta() * kFwR * kFwR * (std::log(double(Ti)) + 3.0) / double(Ti);
    }
    if (upper_ok && lower_ok) return out;
  }
  out.budget_exhausted = true;
  return out;
}

CondCovResult conditioned_cov(Env& env, long N, double lambda_floor, double delta,
                              const RegMinFactory& make_rm, int step, const CondCovConfig& cfg) {
  const auto& mdp = env.mdp();
  CondCovResult out;
  out.pool.init(mdp, step);

  // phase 1: grow the minimum eigenvalue with E-optimal-style exploration
  double lmin = 0.0;
  double last_best = 0.0;
  int stagnant = 0;
  long phase1_episodes = 0;
  for (int j = 0; j < cfg.max_rounds; ++j) {
    out.target = std::max(12544.0 * cfg.constant_scale * mdp.d *
                              std::log(std::max(2.0, 2.0 * double(N) *
                                                         (2.0 + 32.0 * double(phase1_episodes + 1)) /
                                                         delta)),
                          lambda_floor);
    lmin = min_eigenvalue(out.pool.full_sigma());
    if (lmin >= out.target) break;
    if (j >= cfg.patience && lmin <= last_best * (1.0 + cfg.min_rel_growth)) {
      ++stagnant;
      if (stagnant >= cfg.patience)
        throw ContractError(
            "conditioned_cov: minimum eigenvalue stagnated at " + std::to_string(lmin) +
            " (target " + std::to_string(out.target) +
            "); the explorability assumption (lambda*_min > 0) likely fails at step " +
            std::to_string(step + 1));
    } else {
      stagnant = 0;
    }
    last_best = std::max(last_best, lmin);

    long Kj = cfg.round_episodes << std::min(j, 20);
    if (out.episodes + Kj > cfg.episode_cap) {
      out.reached = false;
      out.lambda_min = lmin;
      return out;
    }
    Vec v = out.pool.n == 0 ? Vec::Unit(mdp.d, 0) : min_eigenvector(out.pool.full_sigma());
    std::vector<std::vector<double>> r(mdp.num_states());
    for (int s : mdp.step_states[step]) {
      r[s].resize(mdp.num_actions(s));
      for (int a = 0; a < mdp.num_actions(s); ++a) {
        double val = mdp.phi[s][a].dot(v);
        r[s][a] = std::min(1.0, val * val);
      }
    }
    auto reward = RewardFunction::step_table(mdp, step, std::move(r));
    auto rm = make_rm();
    StepDataPool round_pool;
    round_pool.init(mdp, step);
    RunRegminOptions opts;
    opts.truncate_at = step;
    opts.collect = &round_pool;
    opts.record_played = true;
    auto res = run_regmin(env, *rm, reward, Kj, delta / (4.0 * (j + 1) * (j + 1)), opts);
    out.episodes += res.episodes;
    phase1_episodes += res.episodes;
    out.pool.merge(round_pool);
    for (auto& pr : res.played) out.policies.push_back(std::move(pr));
  }
  lmin = min_eigenvalue(out.pool.full_sigma());
  if (lmin < out.target) {
    out.lambda_min = lmin;
    out.reached = false;
    return out;
  }

  // phase 2: rerun the stored policy list ceil(N / |Pi|) times
  if (phase1_episodes > 0) {
    const long passes = (N + phase1_episodes - 1) / phase1_episodes;
    for (long p = 0; p < passes; ++p) {
      if (out.episodes + phase1_episodes > cfg.episode_cap) break;
      for (const auto& [pol, cnt] : out.policies) {
        play_fixed(env, pol, cnt, step, out.pool);
        out.episodes += cnt;
      }
    }
  }
  out.Sigma = out.pool.full_sigma();
  out.lambda_min = min_eigenvalue(out.Sigma);
  out.reached = out.lambda_min >= out.target;
  return out;
}

XyCollectResult collect_xy_design(Env& env, const std::vector<Vec>& Phi_in, int step,
                                  double eps_exp, double delta, double lambda_floor,
                                  const RegMinFactory& make_rm, const DesignConfig& cfg) {
  const auto& mdp = env.mdp();
  if (Phi_in.empty()) throw ContractError("collect_xy_design: empty target set");
  const double ridge = cfg.ridge > 0.0 ? cfg.ridge : 1.0 / mdp.d;

  // deduplicate identical targets (policy sets often share feature estimates)
  std::vector<Vec> Phi;
  Phi.reserve(Phi_in.size());
  for (const Vec& p : Phi_in) {
    bool dup = false;
    for (const Vec& q : Phi)
      if ((p - q).norm() == 0.0) {
        dup = true;
        break;
      }
    if (!dup) Phi.push_back(p);
  }

  XyCollectResult out;
  out.pool.init(mdp, step);

  // conditioned covariates: phase-1 exploration once, replays scale per round
  StepDataPool cond;
  cond.init(mdp, step);
  std::vector<std::pair<Policy, long>> stored;
  long phase1_episodes = 0;
  auto grow_min_eig = [&](double target) {
    double lmin = min_eigenvalue(cond.full_sigma());
    double last = lmin;
    int stagnant = 0;
    int j = 0;
    while (lmin < target) {
      long Kj = cfg.cond_round_episodes << std::min(j, 20);
      if (out.episodes + Kj > cfg.episode_cap) return false;
      Vec v = cond.n == 0 ? Vec::Unit(mdp.d, 0) : min_eigenvector(cond.full_sigma());
      std::vector<std::vector<double>> r(mdp.num_states());
      for (int s : mdp.step_states[step]) {
        r[s].resize(mdp.num_actions(s));
        for (int a = 0; a < mdp.num_actions(s); ++a) {
          double val = mdp.phi[s][a].dot(v);
          r[s][a] = std::min(1.0, val * val);
        }
      }
      auto reward = RewardFunction::step_table(mdp, step, std::move(r));
      auto rm = make_rm();
      StepDataPool round_pool;
      round_pool.init(mdp, step);
      RunRegminOptions opts;
      opts.truncate_at = step;
      opts.collect = &round_pool;
      opts.record_played = true;
      auto res = run_regmin(env, *rm, reward, Kj, delta / 4.0, opts);
      out.episodes += res.episodes;
      phase1_episodes += res.episodes;
      cond.merge(round_pool);
      for (auto& pr : res.played) stored.push_back(std::move(pr));
      lmin = min_eigenvalue(cond.full_sigma());
      if (lmin <= last * (1.0 + 1e-3)) {
        if (++stagnant >= 6)
          throw ContractError(
              "collect_xy_design: minimum eigenvalue stagnated; explorability assumption "
              "(lambda*_min > 0) likely fails at step " + std::to_string(step + 1));
      } else {
        stagnant = 0;
      }
      last = std::max(last, lmin);
      ++j;
    }
    return true;
  };

  auto raw_gate = [&](const Mat& sigma_total) {
    Mat A = sigma_total + ridge * Mat::Identity(mdp.d, mdp.d);
    auto ldlt = factor_with_jitter(A);
    double mx = 0.0;
    for (const Vec& p : Phi) mx = std::max(mx, p.dot(ldlt.solve(p)));
    return mx;
  };

  for (int i = std::max(1, cfg.start_round); i <= 24; ++i) {
    const long Ti = 1L << i;
    long Ki = (1L << i) * Ti * Ti;
    const double delta_i = delta / (4.0 * i * i);
    const long round_budget = Ti * Ki;

    // conditioned covariates for this round's scale
    if (cfg.use_conditioned_cov) {
      double target = lambda_floor;
      if (cfg.theory_cond_target)
        target = std::max(12544.0 * cfg.constant_scale * mdp.d *
                              std::log(std::max(2.0, 2.0 * double(round_budget) *
                                                         (2.0 + 32.0 * double(phase1_episodes + 1)) /
                                                         delta)),
                          lambda_floor);
      if (!grow_min_eig(target)) {
        out.budget_exhausted = true;
        break;
      }
      // replay to this round's scale; replays also serve later rounds
      while (phase1_episodes > 0 && cond.n < round_budget / 4 &&
             out.episodes + phase1_episodes <= cfg.episode_cap) {
        for (const auto& [pol, cnt] : stored) {
          play_fixed(env, pol, cnt, step, cond);
          out.episodes += cnt;
        }
      }
    }

    Mat Lambda0 = (cond.full_sigma() + ridge * Mat::Identity(mdp.d, mdp.d)) / double(round_budget);
    const double eta = default_eta(Phi, Lambda0, cfg.eta_max);
    SmoothedXy f(Phi, eta, Lambda0);

    if (cfg.k0_gate != GateMode::Off) {
      const double scale = cfg.k0_gate == GateMode::Scaled ? cfg.constant_scale : 1.0;
      auto rm_probe = make_rm();
      const auto& rb = rm_probe->config().bound;
      const double need =
          scale * (ktilde0(double(Ti), f.beta(), f.M(), delta_i, rb, mdp.H) * Ti * Ti +
                   ktilde1(double(Ti), f.beta(), f.M(), delta_i, rb, mdp.H) * Ti);
      if (double(Ki) < need) continue;
    }

    bool partial = false;
    if (out.episodes + round_budget > cfg.episode_cap) {
      const long remaining = cfg.episode_cap - out.episodes;
      Ki = std::max<long>(1, remaining / Ti);
      partial = true;
    }

    auto rm = make_rm();
    auto fw = fw_regret(env, f, *rm, static_cast<int>(Ti) - 1, Ki, step, delta_i, false,
                        cfg.keep_trace, /*tight_reward_norm=*/true);
    out.episodes += fw.episodes;
    if (cfg.keep_trace)
      for (auto& row : fw.trace) {
        row.episodes_cumulative += out.episodes - fw.episodes;
        out.trace.push_back(row);
      }

    Mat sigma_total = fw.pool.full_sigma() + cond.full_sigma();
    out.achieved_quadform = raw_gate(sigma_total);
    out.lambda_min = min_eigenvalue(sigma_total) + ridge;
    out.final_round = i;

    bool lower_ok = true;
    if (cfg.lower_gate != GateMode::Off) {
      const double scale = cfg.lower_gate == GateMode::Scaled ? cfg.constant_scale : 1.0;
      const double fval = f.smoothed(fw.state.Lambda);
      lower_ok = fval >= scale * f.beta() * kFwR * kFwR * (std::log(double(Ti)) + 3.0) / double(Ti);
    }
    const bool gate_ok = out.achieved_quadform <= eps_exp && out.lambda_min >= lambda_floor;

    if ((gate_ok && lower_ok) || partial) {
      out.pool = std::move(fw.pool);
      out.pool.merge(cond);
      out.budget_exhausted = partial && !gate_ok;
      return out;
    }
    // keep the data of the best round so far in case the cap hits next round
    out.pool = std::move(fw.pool);
    out.pool.merge(cond);
  }
  out.budget_exhausted = true;
  return out;
}

}  // namespace pedel
