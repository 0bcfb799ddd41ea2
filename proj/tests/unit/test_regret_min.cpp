#include <doctest.h>

#include <cmath>

#include "pedel/dp.hpp"
#include "pedel/instances.hpp"
#include "pedel/regret_min.hpp"
#include "pedel/rng.hpp"

using namespace pedel;

namespace {

LinearMdp one_action_mdp() {
  TabularMdp tab;
  tab.S = 2;
  tab.A = 1;
  tab.H = 2;
  tab.P.assign(2, std::vector<std::vector<std::vector<double>>>(
                      2, std::vector<std::vector<double>>(1, std::vector<double>(2, 0.0))));
  tab.r.assign(2, std::vector<std::vector<double>>(2, std::vector<double>(1, 0.6)));
  for (int h = 0; h < 2; ++h)
    for (int s = 0; s < 2; ++s) tab.P[h][s][0][1] = 1.0;
  return encode_tabular(tab);
}

RegMinConfig test_cfg(double cs) {
  RegMinConfig cfg;
  cfg.constant_scale = cs;
  return cfg;
}

}  // namespace

TEST_CASE("1-action MDP: regret is exactly zero for any K") {
  auto mdp = one_action_mdp();
  Env env(mdp, 17);
  auto rm = make_regmin(RegMinKind::Lsvi, test_cfg(0.05));
  auto res = run_regmin(env, *rm, RewardFunction::environment(), 200, 0.1);
  CHECK(res.episodes == 200);
  // only one policy exists; every played policy is optimal
  for (const auto& [pol, cnt] : res.played)
    CHECK(exact_policy_value(mdp, pol) == doctest::Approx(optimal_value(mdp)).epsilon(1e-12));
}

TEST_CASE("oracle mode plays the argmax policy every episode") {
  auto b = make_hard_bandit_preset(4, 0.05);
  auto mdp = embed_bandit_as_mdp(b);
  Env env(mdp, 3);
  auto rm = make_regmin(RegMinKind::Oracle, test_cfg(1.0));
  auto res = run_regmin(env, *rm, RewardFunction::environment(), 100, 0.1);
  REQUIRE(res.played.size() == 1);
  CHECK(exact_policy_value(mdp, res.played[0].first) ==
        doctest::Approx(optimal_value(mdp)).epsilon(1e-12));
}

TEST_CASE("covariance bookkeeping matches the logs exactly") {
  auto b = make_hard_bandit_preset(4, 0.05);
  auto mdp = embed_bandit_as_mdp(b);
  Env env(mdp, 5);
  auto rm = make_regmin(RegMinKind::Uniform, test_cfg(1.0));
  RunRegminOptions opts;
  opts.keep_logs = true;
  auto res = run_regmin(env, *rm, RewardFunction::environment(), 300, 0.1, opts);
  for (int h = 0; h < mdp.H; ++h) {
    Mat expect = Mat::Zero(mdp.d, mdp.d);
    for (const auto& log : res.logs) {
      const Vec& f = mdp.phi[log.steps[h].state][log.steps[h].action];
      expect += f * f.transpose();
    }
    CHECK((res.covariance[h] - expect).norm() == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("LSVI on the scaled hard instance: average reward approaches the optimum") {
  auto b = make_hard_bandit_preset(4, 0.05);
  auto mdp = embed_bandit_as_mdp(b);
  const double vstar = optimal_value(mdp);
  Env env(mdp, 11);
  auto rm = make_regmin(RegMinKind::Lsvi, test_cfg(0.02));
  auto res = run_regmin(env, *rm, RewardFunction::environment(), 5000, 0.1);
  double avg = res.reward_sum / 5000.0;
  MESSAGE("avg reward ", avg, " vs optimal ", vstar);
  CHECK(avg > vstar - 0.08);
}

TEST_CASE("strict hard instance: LSVI average reward within 0.02 of the optimum at K=5000") {
  auto b = make_hard_bandit(4, 1e-5);
  auto mdp = embed_bandit_as_mdp(b);
  // reward = step-2 indicator of s1 is exactly this instance's env reward
  const double vstar = b.params.xi + 0.5;
  Env env(mdp, 23);
  auto rm = make_regmin(RegMinKind::Lsvi, test_cfg(0.02));
  auto res = run_regmin(env, *rm, RewardFunction::environment(), 5000, 0.1);
  CHECK(std::abs(res.reward_sum / 5000.0 - vstar) < 0.02);
}

TEST_CASE("empirical regret per episode is non-increasing beyond burn-in (sign test)") {
  // 3 preset instances x 20 seeds; compare mean regret on [K/4, K/2) vs [K/2, K)
  std::vector<LinearMdp> instances;
  instances.push_back(embed_bandit_as_mdp(make_hard_bandit_preset(4, 0.05)));
  instances.push_back(encode_tabular(random_tabular(3, 3, 2, 5)));
  instances.push_back(encode_tabular(random_tabular(4, 2, 3, 9)));
  const long K = 2000;
  int wins = 0, losses = 0;
  for (const auto& mdp : instances) {
    const double vstar = optimal_value(mdp);
    for (int seed = 0; seed < 20; ++seed) {
      Env env(mdp, derive_seed(500, seed));
      auto rm = make_regmin(RegMinKind::Lsvi, test_cfg(0.02));
      auto res = run_regmin(env, *rm, RewardFunction::environment(), K, 0.1);
      // exact per-episode regret of the played policies, from the run-length encoding
      std::vector<double> regret;
      regret.reserve(K);
      for (const auto& [pol, cnt] : res.played) {
        double r = vstar - exact_policy_value(mdp, pol);
        for (long c = 0; c < cnt; ++c) regret.push_back(r);
      }
      // cumulative regret / K at K/2 vs K (both beyond the K/4 burn-in)
      auto cum_avg = [&](long upto) {
        double t = 0.0;
        for (long k = 0; k < upto; ++k) t += regret[k];
        return t / double(upto);
      };
      double first = cum_avg(K / 2);
      double second = cum_avg(K);
      if (second <= first)
        ++wins;
      else
        ++losses;
    }
  }
  // one-sided sign test at p < 0.05 over 60 trials: need >= 38 wins
  MESSAGE("wins ", wins, " losses ", losses);
  CHECK(wins >= 38);
}

TEST_CASE("online_to_batch: single-policy MDP is recommended after minimum budget") {
  auto mdp = one_action_mdp();
  Env env(mdp, 2);
  auto rm = make_regmin(RegMinKind::Lsvi, test_cfg(0.05));
  auto res = online_to_batch(env, *rm, 5, 0.1);
  CHECK(!res.undefined);
  CHECK(exact_policy_value(mdp, res.recommended) ==
        doctest::Approx(optimal_value(mdp)).epsilon(1e-12));
}

TEST_CASE("online_to_batch: zero budget flags an undefined recommendation") {
  auto mdp = one_action_mdp();
  Env env(mdp, 2);
  auto rm = make_regmin(RegMinKind::Lsvi, test_cfg(0.05));
  auto res = online_to_batch(env, *rm, 0, 0.1);
  CHECK(res.undefined);
}

TEST_CASE("online_to_batch: recommendation decodes to z* on the scaled hard instance") {
  auto b = make_hard_bandit_preset(4, 0.05);
  auto mdp = embed_bandit_as_mdp(b);
  const int s0 = mdp.start_state();
  int ok = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    Env env(mdp, derive_seed(900, t));
    auto rm = make_regmin(RegMinKind::Lsvi, test_cfg(0.02));
    auto res = online_to_batch(env, *rm, 12000, 0.1);
    REQUIRE(!res.undefined);
    Vec p = res.recommended.action_probs(mdp, 0, s0);
    int argmax = 0;
    p.maxCoeff(&argmax);
    if (argmax == 0) ++ok;  // action 0 plays z*
  }
  MESSAGE("decoded z* in ", ok, "/", trials);
  CHECK(ok >= 19);
}

TEST_CASE("reward table outside [0,1] is a contract error") {
  auto mdp = one_action_mdp();
  std::vector<std::vector<std::vector<double>>> r(
      2, std::vector<std::vector<double>>(mdp.num_states(), std::vector<double>(1, 0.5)));
  r[1][1][0] = 1.5;
  CHECK_THROWS_AS(RewardFunction::table(mdp, r), ContractError);
}
