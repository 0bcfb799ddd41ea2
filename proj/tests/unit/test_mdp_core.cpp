#include <doctest.h>

#include <cmath>
#include <numeric>

#include "pedel/dp.hpp"
#include "pedel/instances.hpp"
#include "pedel/mdp.hpp"
#include "pedel/rng.hpp"
#include "pedel/serialize.hpp"
#include "pedel/simulate.hpp"

using namespace pedel;

namespace {

// Single-action deterministic chain s0 -> s1 -> ... of length H.
LinearMdp one_action_chain(int H) {
  TabularMdp tab;
  tab.S = H;
  tab.A = 1;
  tab.H = H;
  tab.P.assign(H, std::vector<std::vector<std::vector<double>>>(
                      tab.S, std::vector<std::vector<double>>(1, std::vector<double>(tab.S, 0.0))));
  tab.r.assign(H, std::vector<std::vector<double>>(tab.S, std::vector<double>(1, 0.0)));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < tab.S; ++s) {
      tab.P[h][s][0][std::min(s + 1, tab.S - 1)] = 1.0;
      tab.r[h][s][0] = (s == h) ? 0.5 : 0.0;
    }
  return encode_tabular(tab, RewardNoise::Deterministic);
}

Policy single_action_policy(const LinearMdp& mdp) {
  DeterministicTable t;
  t.action.resize(mdp.H);
  for (int h = 0; h < mdp.H; ++h)
    for (int s : mdp.step_states[h]) t.action[h][s] = 0;
  return Policy::deterministic("only", std::move(t));
}

Policy uniform_policy(const LinearMdp& mdp, const std::string& name = "uniform") {
  StochasticTable t;
  t.probs.resize(mdp.H);
  for (int h = 0; h < mdp.H; ++h)
    for (int s : mdp.step_states[h]) {
      int n = mdp.num_actions(s);
      t.probs[h][s] = std::vector<double>(n, 1.0 / n);
    }
  return Policy::stochastic(name, std::move(t));
}

Policy random_det_policy(const LinearMdp& mdp, std::uint64_t seed) {
  auto rng = make_engine(seed);
  DeterministicTable t;
  t.action.resize(mdp.H);
  for (int h = 0; h < mdp.H; ++h)
    for (int s : mdp.step_states[h])
      t.action[h][s] = static_cast<int>(rng() % std::uint64_t(mdp.num_actions(s)));
  return Policy::deterministic("rand" + std::to_string(seed), std::move(t));
}

}  // namespace

TEST_CASE("validate: hard instance d=4 is clean") {
  auto bandit = make_hard_bandit(4, 1e-5);
  auto mdp = embed_bandit_as_mdp(bandit);
  auto v = validate(mdp);
  for (const auto& x : v) MESSAGE(x.what);
  CHECK(v.empty());
}

TEST_CASE("validate: scaled theta is flagged with the theta bound named") {
  auto mdp = embed_bandit_as_mdp(make_hard_bandit(4, 1e-5));
  mdp.theta[1] *= 2.0 * std::sqrt(static_cast<double>(mdp.d));
  auto v = validate(mdp);
  REQUIRE(!v.empty());
  bool found_theta = false;
  for (const auto& x : v)
    if (x.what.find("theta") != std::string::npos) found_theta = true;
  CHECK(found_theta);
}

TEST_CASE("validate: tabular encoding of a 3-state MDP is clean") {
  auto tab = random_tabular(3, 2, 3, 7);
  auto mdp = encode_tabular(tab);
  CHECK(validate(mdp).empty());
}

TEST_CASE("simulate: deterministic 1-action chain gives the unique trajectory") {
  auto mdp = one_action_chain(4);
  auto policy = single_action_policy(mdp);
  auto log1 = simulate(mdp, policy, 1);
  auto log2 = simulate(mdp, policy, 99999);
  REQUIRE(log1.steps.size() == 4);
  for (int h = 0; h < 4; ++h) {
    CHECK(log1.steps[h].state == log2.steps[h].state);
    CHECK(log1.steps[h].action == 0);
    CHECK(log1.steps[h].reward == log2.steps[h].reward);
  }
}

TEST_CASE("simulate: identical seed, identical log") {
  auto mdp = embed_bandit_as_mdp(make_hard_bandit(4, 1e-5));
  auto pols = hard_instance_policy_set(mdp);
  auto a = simulate(mdp, pols[3], 42);
  auto b = simulate(mdp, pols[3], 42);
  for (int h = 0; h < mdp.H; ++h) {
    CHECK(a.steps[h].state == b.steps[h].state);
    CHECK(a.steps[h].action == b.steps[h].action);
    CHECK(a.steps[h].reward == b.steps[h].reward);
    CHECK(a.steps[h].next_state == b.steps[h].next_state);
  }
}

TEST_CASE("simulate: hard instance z* reaches s1 w.p. xi + 1/2") {
  auto bandit = make_hard_bandit(4, 1e-5);
  auto mdp = embed_bandit_as_mdp(bandit);
  auto pols = hard_instance_policy_set(mdp);
  // policy 0 plays arm 0 = xi*e1
  const double p = bandit.params.xi + 0.5;
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    auto log = simulate(mdp, pols[0], derive_seed(123, i));
    if (log.steps[1].state == 1) ++hits;
  }
  double freq = double(hits) / n;
  double sigma = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(freq - p) < 3 * sigma + 1e-12);
}

TEST_CASE("simulate: empirical next-state frequencies match <phi,mu> within 3 sigma") {
  auto tab = random_tabular(3, 2, 2, 11);
  auto mdp = encode_tabular(tab);
  auto policy = uniform_policy(mdp);
  const int n = 100000;
  std::vector<int> counts(mdp.step_states[1].size(), 0);
  for (int i = 0; i < n; ++i) {
    auto log = simulate(mdp, policy, derive_seed(7, i));
    for (std::size_t j = 0; j < mdp.step_states[1].size(); ++j)
      if (log.steps[0].next_state == mdp.step_states[1][j]) ++counts[j];
  }
  // exact law: average over actions of <phi, mu_j>
  for (std::size_t j = 0; j < mdp.step_states[1].size(); ++j) {
    double p = 0.0;
    int s0 = mdp.start_state();
    for (int a = 0; a < mdp.num_actions(s0); ++a)
      p += 0.5 * mdp.transition_prob(0, s0, a, static_cast<int>(j));
    double sigma = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
    CHECK(std::abs(double(counts[j]) / n - p) < 3 * sigma + 1e-3);
  }
}

TEST_CASE("exact_feature_visitation: tabular entries are visitation probabilities") {
  auto tab = random_tabular(3, 2, 3, 21);
  auto mdp = encode_tabular(tab);
  auto policy = random_det_policy(mdp, 5);
  auto fv = exact_feature_visitation(mdp, policy);
  // Monte-Carlo estimate of Pr[s_h = s, a_h = a]
  const int n = 200000;
  std::vector<Vec> counts(mdp.H, Vec::Zero(mdp.d));
  for (int i = 0; i < n; ++i) {
    auto log = simulate(mdp, policy, derive_seed(1234, i));
    for (int h = 0; h < mdp.H; ++h) {
      const Vec& f = mdp.phi[log.steps[h].state][log.steps[h].action];
      counts[h] += f;
    }
  }
  for (int h = 0; h < mdp.H; ++h) {
    counts[h] /= n;
    for (int k = 0; k < mdp.d; ++k) {
      double sigma = std::sqrt(std::max(fv[h][k] * (1 - fv[h][k]), 1e-12) / n);
      CHECK(std::abs(counts[h][k] - fv[h][k]) < 4 * sigma + 2e-3);
    }
  }
}

TEST_CASE("exact_feature_visitation: H=1 is the start-state policy feature") {
  auto tab = random_tabular(2, 3, 1, 3);
  auto mdp = encode_tabular(tab);
  auto policy = uniform_policy(mdp);
  auto fv = exact_feature_visitation(mdp, policy);
  Vec expect = policy_state_feature(mdp, policy, 0, mdp.start_state());
  CHECK((fv[0] - expect).norm() < 1e-14);
}

TEST_CASE("exact_feature_visitation: hard-instance closed form at step 2") {
  auto bandit = make_hard_bandit(5, 1e-6);
  auto mdp = embed_bandit_as_mdp(bandit);
  auto pols = hard_instance_policy_set(mdp);
  const int db = bandit.params.d;
  // pick policies playing each bandit arm z (z' = 0)
  for (int arm = 0; arm < static_cast<int>(bandit.arms.size()); ++arm) {
    const auto& pol = pols[arm * (2 * db)];  // |A| = 2*db actions, z-major order
    auto fv = exact_feature_visitation(mdp, pol);
    double m = bandit.theta_star.dot(bandit.arms[arm]);
    Vec expect = Vec::Zero(mdp.d);
    expect[0] = m + 0.5;
    for (int i = 1; i <= db; ++i) expect[i] = (0.5 - m) / db;
    CHECK((fv[1] - expect).norm() < 1e-12);
  }
}

TEST_CASE("exact_policy_value: forward equals backward to 1e-10, random tabular") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto tab = random_tabular(4, 3, 4, seed);
    auto mdp = encode_tabular(tab);
    // draw a deterministic action table and use it for both code paths
    auto rng = make_engine(seed + 100);
    std::vector<std::vector<int>> act(tab.H, std::vector<int>(tab.S, 0));
    DeterministicTable table;
    table.action.resize(tab.H);
    for (int h = 0; h < tab.H; ++h)
      for (int s = 0; s < tab.S; ++s) {
        act[h][s] = static_cast<int>(rng() % std::uint64_t(tab.A));
        int id = h == 0 ? 0 : 1 + (h - 1) * tab.S + s;
        if (h == 0 && s != 0) continue;
        table.action[h][id] = act[h][s];
      }
    auto policy = Policy::deterministic("tab", std::move(table));
    double vf = exact_policy_value(mdp, policy);
    double vb = exact_policy_value_backward(mdp, policy);
    CHECK(std::abs(vf - vb) < 1e-10);
    double vt = tabular_policy_value(tab, act);  // independent tabular oracle
    CHECK(std::abs(vf - vt) < 1e-12);
  }
}

TEST_CASE("exact_policy_value: hard instance optimum is xi + 1/2") {
  auto bandit = make_hard_bandit(4, 1e-5);
  auto mdp = embed_bandit_as_mdp(bandit);
  auto pols = hard_instance_policy_set(mdp);
  auto [best, arg] = best_policy_value(mdp, pols);
  CHECK(best == doctest::Approx(1.0 / 208.0 + 0.5).epsilon(1e-12));
  CHECK(best == doctest::Approx(0.50480769230769).epsilon(1e-10));
  // optimal policies play arm 0
  CHECK(arg / (2 * bandit.params.d) == 0);
}

TEST_CASE("exact_policy_value: zero-reward MDP gives 0") {
  auto tab = random_tabular(3, 2, 3, 2);
  for (auto& per_h : tab.r)
    for (auto& per_s : per_h)
      for (auto& r : per_s) r = 0.0;
  auto mdp = encode_tabular(tab);
  CHECK(exact_policy_value(mdp, uniform_policy(mdp)) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("exact_covariance: deterministic policy in deterministic MDP is rank one") {
  auto mdp = one_action_chain(3);
  auto policy = single_action_policy(mdp);
  for (int h = 0; h < 3; ++h) {
    Mat cov = exact_covariance(mdp, policy, h);
    auto fv = exact_feature_visitation(mdp, policy);
    Mat expect = fv[h] * fv[h].transpose();
    CHECK((cov - expect).norm() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    int rank = 0;
    for (int i = 0; i < cov.rows(); ++i)
      if (es.eigenvalues()[i] > 1e-12) ++rank;
    CHECK(rank == 1);
  }
}

TEST_CASE("exact_covariance: mixture covariance is the weighted sum") {
  auto tab = random_tabular(3, 3, 2, 31);
  auto mdp = encode_tabular(tab);
  auto p1 = random_det_policy(mdp, 1);
  auto p2 = random_det_policy(mdp, 2);
  Mat c1 = exact_covariance(mdp, p1, 1);
  Mat c2 = exact_covariance(mdp, p2, 1);
  auto mix = Policy::mixture("mix", {{0.3, p1}, {0.7, p2}});
  Mat cm = exact_covariance(mdp, mix, 1);
  CHECK((cm - (0.3 * c1 + 0.7 * c2)).norm() < 1e-14);
}

TEST_CASE("Jensen domination: Lambda - phi phi^T is PSD, 100 random instances") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto tab = random_tabular(3, 2, 3, seed);
    auto mdp = encode_tabular(tab);
    auto policy = seed % 2 == 0 ? uniform_policy(mdp) : random_det_policy(mdp, seed);
    auto fv = exact_feature_visitation(mdp, policy);
    for (int h = 0; h < mdp.H; ++h) {
      Mat gap = exact_covariance(mdp, policy, h) - fv[h] * fv[h].transpose();
      Eigen::SelfAdjointEigenSolver<Mat> es(gap);
      CHECK(es.eigenvalues().minCoeff() > -1e-10);
    }
  }
}

TEST_CASE("truncation: steps <= h match the untruncated law (chi-square)") {
  auto bandit = make_hard_bandit(4, 1e-5);
  auto mdp = embed_bandit_as_mdp(bandit);
  auto policy = hard_exploration_mixture(mdp);
  const int n = 10000;
  // distribution of (a_1, s_2) with and without truncation at step 0
  const int s0 = mdp.start_state();
  const int na = mdp.num_actions(s0);
  const int ns = static_cast<int>(mdp.step_states[1].size());
  std::vector<double> cell_a(na * ns, 0.0), cell_b(na * ns, 0.0);
  for (int i = 0; i < n; ++i) {
    auto la = simulate(mdp, policy, derive_seed(50, i));
    auto lb = simulate(mdp, policy, derive_seed(51, i), 0);
    auto idx = [&](const EpisodeLog& log) {
      int a = log.steps[0].action;
      int j = 0;
      for (int k = 0; k < ns; ++k)
        if (mdp.step_states[1][k] == log.steps[1].state) j = k;
      return a * ns + j;
    };
    cell_a[idx(la)] += 1;
    cell_b[idx(lb)] += 1;
  }
  // two-sample chi-square over populated cells
  double chi2 = 0.0;
  int dof = 0;
  for (int c = 0; c < na * ns; ++c) {
    double tot = cell_a[c] + cell_b[c];
    if (tot < 10) continue;
    double e = tot / 2.0;
    chi2 += (cell_a[c] - e) * (cell_a[c] - e) / e + (cell_b[c] - e) * (cell_b[c] - e) / e;
    ++dof;
  }
  // p > 0.001 <=> chi2 below the 0.999 quantile; for dof up to ~40 use a loose bound
  // chi2_{0.999}(k) <= k + 3.29*sqrt(2k) + 11 (Laurent-Massart style)
  double bound = dof + 3.29 * std::sqrt(2.0 * dof) + 11.0;
  CHECK(chi2 < bound);
}

TEST_CASE("serialization: bit-stable round trip") {
  auto bandit = make_hard_bandit(4, 1e-5);
  auto mdp = embed_bandit_as_mdp(bandit);
  auto text = mdp_to_json(mdp);
  auto back = mdp_from_json(text);
  REQUIRE(back.d == mdp.d);
  REQUIRE(back.H == mdp.H);
  for (int s = 0; s < mdp.num_states(); ++s)
    for (int a = 0; a < mdp.num_actions(s); ++a)
      for (int k = 0; k < mdp.d; ++k) CHECK(back.phi[s][a][k] == mdp.phi[s][a][k]);
  for (int h = 0; h + 1 < mdp.H; ++h)
    for (std::size_t j = 0; j < mdp.mu[h].size(); ++j)
      for (int k = 0; k < mdp.d; ++k) CHECK(back.mu[h][j][k] == mdp.mu[h][j][k]);
  CHECK(mdp_to_json(back) == text);
}

TEST_CASE("policy: softmax distributions are simplices; mixtures validated") {
  auto tab = random_tabular(3, 4, 2, 77);
  auto mdp = encode_tabular(tab);
  LinearSoftmax sm;
  sm.eta = 3.0;
  sm.w.assign(mdp.H, Vec::Random(mdp.d));
  auto pol = Policy::softmax("sm", sm);
  for (int h = 0; h < mdp.H; ++h)
    for (int s : mdp.step_states[h]) {
      Vec p = pol.action_probs(mdp, h, s);
      CHECK(std::abs(p.sum() - 1.0) < 1e-12);
      CHECK(p.minCoeff() >= 0.0);
    }
  CHECK_THROWS_AS(Policy::mixture("bad", {{0.5, pol}, {0.6, pol}}), ContractError);
}

TEST_CASE("policy undefined at a reached state is a hard error") {
  auto mdp = one_action_chain(3);
  DeterministicTable t;
  t.action.resize(mdp.H);
  t.action[0][mdp.start_state()] = 0;  // nothing defined for later steps
  auto partial = Policy::deterministic("partial", std::move(t));
  CHECK_THROWS_AS(simulate(mdp, partial, 3), ContractError);
}
