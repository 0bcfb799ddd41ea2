#include <doctest.h>

#include <cmath>
#include <set>

#include "pedel/dp.hpp"
#include "pedel/instances.hpp"
#include "pedel/rng.hpp"
#include "pedel/simulate.hpp"

using namespace pedel;

TEST_CASE("make_hard_bandit: xi = 1/(52d) and constraints hold") {
  auto b = make_hard_bandit(4, 1e-5, 0.5, 1.0, 1.0);
  CHECK(b.params.xi == doctest::Approx(1.0 / 208.0).epsilon(1e-15));
  CHECK(b.params.xi == doctest::Approx(0.00480769230769).epsilon(1e-9));
  CHECK(hard_instance_constraint_violations(b.params).empty());
  CHECK(b.arms.size() == 2 * 4 - 1);
  // gaps: e_i arms have gap xi, x_i arms have gap Delta
  for (int i = 1; i < 4; ++i) CHECK(b.gap(i) == doctest::Approx(b.params.xi).epsilon(1e-12));
  for (int i = 4; i < 7; ++i) CHECK(b.gap(i) == doctest::Approx(b.params.Delta).epsilon(1e-9));
}

TEST_CASE("make_hard_bandit: oversized Delta is a parameter error naming the bound") {
  CHECK_THROWS_WITH_AS(make_hard_bandit(4, 1.0), doctest::Contains("parameter bound"),
                       ContractError);
}

TEST_CASE("make_hard_bandit: |<theta*,z>| <= xi for all arms") {
  auto b = make_hard_bandit(5, 1e-6);
  for (const auto& z : b.arms) CHECK(std::abs(b.theta_star.dot(z)) <= b.params.xi + 1e-15);
}

TEST_CASE("embed_bandit_as_mdp: transition law and normalization") {
  auto b = make_hard_bandit(4, 1e-5);
  auto mdp = embed_bandit_as_mdp(b);
  const int s0 = mdp.start_state();
  // P(s1 | s0, z) = <theta*, z> + 1/2 for every arm
  for (std::size_t arm = 0; arm < b.arms.size(); ++arm) {
    double expect = b.theta_star.dot(b.arms[arm]) + 0.5;
    CHECK(mdp.transition_prob(0, s0, static_cast<int>(arm), 0) ==
          doctest::Approx(expect).epsilon(1e-14));
  }
  // rows sum to exactly 1
  for (int a = 0; a < mdp.num_actions(s0); ++a) {
    double total = 0.0;
    for (std::size_t j = 0; j < mdp.mu[0].size(); ++j)
      total += mdp.transition_prob(0, s0, a, static_cast<int>(j));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
  // reward 1 at s1, 0 at sbar_i
  CHECK(mdp.mean_reward(1, 1, 0) == doctest::Approx(1.0));
  for (int s : mdp.step_states[1])
    if (s != 1) CHECK(mdp.mean_reward(1, s, 0) == doctest::Approx(0.0));
  CHECK(validate(mdp).empty());
}

TEST_CASE("hard_instance_policy_set: |Pi| = |A|^2 <= 4d^2 and contains the optimum") {
  auto b = make_hard_bandit(4, 1e-5);
  auto mdp = embed_bandit_as_mdp(b);
  auto pols = hard_instance_policy_set(mdp);
  const int A = mdp.num_actions(mdp.start_state());
  CHECK(A == 2 * 4);
  CHECK(static_cast<int>(pols.size()) == A * A);
  CHECK(static_cast<int>(pols.size()) <= 4 * 4 * 4 * 4);  // 4 d^2 with d = 4... 4*16
  auto [best, arg] = best_policy_value(mdp, pols);
  CHECK(best == doctest::Approx(b.params.xi + 0.5).epsilon(1e-12));
  CHECK(best == doctest::Approx(optimal_value(mdp)).epsilon(1e-12));
  // every non-optimal arm gives gap Delta or xi
  for (std::size_t i = 0; i < pols.size(); ++i) {
    double gap = best - exact_policy_value(mdp, pols[i]);
    int arm = static_cast<int>(i) / A;
    if (arm == 0 || arm == A - 1) {
      // z* or the e_{d+1}/2 action; the latter has gap xi
      if (arm == 0)
        CHECK(gap == doctest::Approx(0.0).epsilon(1e-12));
      else
        CHECK(gap == doctest::Approx(b.params.xi).epsilon(1e-10));
    } else {
      bool is_e_arm = arm >= 1 && arm <= 3;
      double expect = is_e_arm ? b.params.xi : b.params.Delta;
      CHECK(gap == doctest::Approx(expect).epsilon(1e-9));
    }
  }
}

TEST_CASE("encode_tabular: values match tabular DP; indicator visitation is one-hot on chains") {
  auto tab = random_tabular(2, 2, 3, 13);
  auto mdp = encode_tabular(tab);
  CHECK(mdp.d == 4);
  std::vector<std::vector<int>> act(tab.H, std::vector<int>(tab.S, 1));
  DeterministicTable table;
  table.action.resize(tab.H);
  table.action[0][0] = 1;
  for (int h = 1; h < tab.H; ++h)
    for (int s = 0; s < tab.S; ++s) table.action[h][1 + (h - 1) * tab.S + s] = 1;
  auto policy = Policy::deterministic("a1", std::move(table));
  CHECK(exact_policy_value(mdp, policy) ==
        doctest::Approx(tabular_policy_value(tab, act)).epsilon(1e-12));

  // deterministic chain: one-hot visitation per step
  TabularMdp chain;
  chain.S = 3;
  chain.A = 1;
  chain.H = 3;
  chain.P.assign(3, std::vector<std::vector<std::vector<double>>>(
                        3, std::vector<std::vector<double>>(1, std::vector<double>(3, 0.0))));
  chain.r.assign(3, std::vector<std::vector<double>>(3, std::vector<double>(1, 0.4)));
  for (int h = 0; h < 3; ++h)
    for (int s = 0; s < 3; ++s) chain.P[h][s][0][std::min(s + 1, 2)] = 1.0;
  auto cm = encode_tabular(chain);
  DeterministicTable ct;
  ct.action.resize(3);
  for (int h = 0; h < 3; ++h)
    for (int s : cm.step_states[h]) ct.action[h][s] = 0;
  auto cpol = Policy::deterministic("chain", std::move(ct));
  auto fv = exact_feature_visitation(cm, cpol);
  for (int h = 0; h < 3; ++h) {
    CHECK(fv[h].maxCoeff() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(fv[h].sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK(validate(cm).empty());
}

TEST_CASE("make_gap_vis_instances: M1 gap structure and reachability") {
  const double eps = 0.1;
  auto inst = make_gap_vis_instances(4, eps, 2);
  CHECK(validate(inst.m1).empty());
  double vstar = optimal_value(inst.m1);
  CHECK(vstar == doctest::Approx(2.0).epsilon(1e-12));
  // any policy deviating at h=1 has gap >= 1 - eps
  const auto& mdp = inst.m1;
  const int s0 = mdp.start_state();
  for (int a = 1; a < mdp.num_actions(s0); ++a) {
    DeterministicTable t;
    t.action.resize(mdp.H);
    t.action[0][s0] = a;
    for (int h = 1; h < mdp.H; ++h)
      for (int s : mdp.step_states[h]) t.action[h][s] = 0;  // best continuation
    double v = exact_policy_value(mdp, Policy::deterministic("dev", std::move(t)));
    CHECK(vstar - v >= 1.0 - eps - 1e-12);
  }
  // every tabular state reachable with probability 1 by some first action
  for (int j = 1; j < 4; ++j) {
    bool reachable = false;
    for (int a = 0; a < mdp.num_actions(s0); ++a)
      if (mdp.transition_prob(0, s0, a, j) > 1.0 - 1e-12) reachable = true;
    CHECK(reachable);
  }
  CHECK(inst.m2_approximate);
  CHECK(validate(inst.m2).empty());
}

TEST_CASE("embedding matches the bandit-driven simulation protocol (chi-square)") {
  auto b = make_hard_bandit(4, 1e-5);
  auto mdp = embed_bandit_as_mdp(b);
  auto pols = hard_instance_policy_set(mdp);
  const int A = mdp.num_actions(mdp.start_state());
  const int n = 100000;
  auto rng = make_engine(991);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // protocol: play the bandit, map reward to s1 / uniform sbar
  auto protocol_next = [&](int arm) {
    if (arm == A - 1) {  // the e_{d+1}/2 action: 1/2 to s1, 1/(2d) to each sbar
      if (unif(rng) < 0.5) return 1;
      return 2 + static_cast<int>(rng() % std::uint64_t(b.params.d));
    }
    double y = unif(rng) < b.mean(arm) ? 1.0 : 0.0;
    if (y > 0.5) return 1;
    return 2 + static_cast<int>(rng() % std::uint64_t(b.params.d));
  };

  for (int arm : {0, 2, 5, A - 1}) {
    std::vector<double> mdp_counts(mdp.step_states[1].size(), 0.0);
    std::vector<double> proto_counts(mdp.step_states[1].size(), 0.0);
    const auto& pol = pols[arm * A];
    for (int i = 0; i < n; ++i) {
      auto log = simulate(mdp, pol, derive_seed(arm * 77 + 1, i));
      for (std::size_t j = 0; j < mdp.step_states[1].size(); ++j)
        if (log.steps[0].next_state == mdp.step_states[1][j]) mdp_counts[j] += 1;
      int sp = protocol_next(arm);
      for (std::size_t j = 0; j < mdp.step_states[1].size(); ++j)
        if (sp == mdp.step_states[1][j]) proto_counts[j] += 1;
    }
    double chi2 = 0.0;
    int dof = 0;
    for (std::size_t c = 0; c < mdp_counts.size(); ++c) {
      double tot = mdp_counts[c] + proto_counts[c];
      if (tot < 10) continue;
      double e = tot / 2.0;
      chi2 += (mdp_counts[c] - e) * (mdp_counts[c] - e) / e +
              (proto_counts[c] - e) * (proto_counts[c] - e) / e;
      ++dof;
    }
    double bound = dof + 3.29 * std::sqrt(2.0 * dof) + 11.0;  // ~0.999 quantile
    CHECK(chi2 < bound);
  }
}

TEST_CASE("scaled preset: structure preserved, flagged non-strict") {
  auto b = make_hard_bandit_preset(8, 0.05);
  CHECK(!b.params.strict);
  CHECK(b.params.xi == doctest::Approx(0.3));
  auto mdp = embed_bandit_as_mdp(b);
  CHECK(validate(mdp).empty());
  auto pols = hard_instance_policy_set(mdp);
  auto [best, arg] = best_policy_value(mdp, pols);
  CHECK(best == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(arg / mdp.num_actions(mdp.start_state()) == 0);
}
