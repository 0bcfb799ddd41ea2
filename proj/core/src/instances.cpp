#include "pedel/instances.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pedel/rng.hpp"

namespace pedel {

std::vector<std::string> hard_instance_constraint_violations(const HardInstanceParams& p) {
  std::vector<std::string> out;
  const double sqd = std::sqrt(static_cast<double>(p.d));
  const double tol = 1e-12;
  if (p.xi > 1.0 / (52.0 * p.d) + tol)
    out.push_back("xi > 1/(52d)");
  if (p.xi + tol < p.gamma / sqd)
    out.push_back("xi < gamma/sqrt(d)");
  if (p.xi + tol < std::sqrt(p.Delta))
    out.push_back("xi < sqrt(Delta)");
  if (p.gamma * p.gamma + tol < p.zeta)
    out.push_back("gamma^2 < zeta");
  if (p.gamma * p.gamma + tol < p.Delta)
    out.push_back("gamma^2 < Delta");
  return out;
}

double hard_bandit_max_delta(int d, double alpha, double C1, double C2) {
  const double b1 = 1.0 / (2704.0 * d * d);
  const double b2 = std::sqrt(1.0 / (10816.0 * C2));
  const double b3 = std::pow(1.0 / (10816.0 * std::pow(double(d), alpha) * C1),
                             1.0 / (2.0 * (1.0 - alpha)));
  return std::min({b1, b2, b3});
}

namespace {

double compute_zeta(int d, double Delta, double alpha, double C1, double C2) {
  return 2.0 * C1 / std::pow(d / (Delta * Delta), 1.0 - alpha) + 2.0 * C2 * Delta * Delta / d;
}

HardBandit build_bandit(HardInstanceParams p) {
  if (p.d < 2) throw ContractError("hard bandit requires d >= 2");
  HardBandit b;
  b.theta_star = Vec::Zero(p.d);
  b.theta_star[0] = 1.0;
  // Z = { xi*e1, e2..ed, x2..xd }, x_i = (xi - Delta) e1 + gamma e_i
  Vec zstar = Vec::Zero(p.d);
  zstar[0] = p.xi;
  b.arms.push_back(zstar);
  for (int i = 1; i < p.d; ++i) {
    Vec e = Vec::Zero(p.d);
    e[i] = 1.0;
    b.arms.push_back(e);
  }
  for (int i = 1; i < p.d; ++i) {
    Vec x = Vec::Zero(p.d);
    x[0] = p.xi - p.Delta;
    x[i] = p.gamma;
    b.arms.push_back(x);
  }
  b.optimal_arm = 0;
  for (const Vec& z : b.arms)
    if (z.norm() > 1.0 + 1e-12)
      throw ContractError("hard bandit: arm norm exceeds 1");
  b.params = p;
  return b;
}

}  // namespace

HardBandit make_hard_bandit(int d, double Delta, double alpha, double C1, double C2) {
  if (Delta <= 0.0) throw ContractError("hard bandit: Delta must be positive");
  const double dmax = hard_bandit_max_delta(d, alpha, C1, C2);
  if (Delta > dmax) {
    std::ostringstream os;
    os << "hard bandit: Delta = " << Delta << " violates the parameter bound Delta <= " << dmax
       << " = min{1/(2704 d^2), sqrt(1/(10816 C2)), (1/(10816 d^alpha C1))^(1/(2(1-alpha)))}";
    throw ContractError(os.str());
  }
  HardInstanceParams p;
  p.d = d;
  p.Delta = Delta;
  p.alpha = alpha;
  p.C1 = C1;
  p.C2 = C2;
  p.xi = 1.0 / (52.0 * d);
  p.zeta = compute_zeta(d, Delta, alpha, C1, C2);
  // gamma^2 = max{zeta, d*Delta}; the constraint set wants gamma^2 bounds, so the
  // closed form is taken on the squared scale and asserted below.
  p.gamma = std::sqrt(std::max(p.zeta, d * Delta));
  p.strict = true;
  auto violations = hard_instance_constraint_violations(p);
  if (!violations.empty()) {
    std::string msg = "hard bandit: constraint set violated:";
    for (const auto& v : violations) msg += " " + v + ";";
    throw ContractError(msg);
  }
  return build_bandit(p);
}

HardBandit make_hard_bandit_scaled(int d, double Delta, double xi, double gamma) {
  if (Delta <= 0.0 || xi <= 0.0 || gamma < 0.0)
    throw ContractError("hard bandit (scaled): parameters must be positive");
  if (xi > 0.5 - 1e-9 || std::abs(xi - Delta) > 0.5 - 1e-9)
    throw ContractError("hard bandit (scaled): |<theta*,z>| must stay below 1/2");
  if (Delta >= xi)
    throw ContractError("hard bandit (scaled): Delta < xi required so arm gaps order as in the "
                        "strict instance");
  HardInstanceParams p;
  p.d = d;
  p.Delta = Delta;
  p.xi = xi;
  p.gamma = gamma;
  p.zeta = compute_zeta(d, Delta, p.alpha, p.C1, p.C2);
  p.strict = false;
  return build_bandit(p);
}

HardBandit make_hard_bandit_preset(int d, double Delta) {
  const double gamma = std::sqrt(std::min(d * Delta, 0.1 / std::max(1, d - 1)));
  return make_hard_bandit_scaled(d, Delta, 0.3, gamma);
}

LinearMdp embed_bandit_as_mdp(const HardBandit& bandit) {
  const int db = bandit.params.d;
  const int d = db + 1;
  LinearMdp mdp;
  mdp.d = d;
  mdp.H = 2;
  mdp.reward_noise = RewardNoise::Bernoulli;

  // states: 0 = s0; 1 = s1; 2..db+1 = sbar_2..sbar_{db+1}
  const int s0 = 0, s1 = 1;
  const int num_states = 2 + db;
  mdp.step_states = {{s0}, {s1}};
  mdp.state_names.assign(num_states, "");
  mdp.state_names[s0] = "s0";
  mdp.state_names[s1] = "s1";
  for (int i = 2; i <= db + 1; ++i) {
    mdp.step_states[1].push_back(i);
    mdp.state_names[i] = "sbar" + std::to_string(i);
  }

  // actions: arms of Z, plus e_{d}/2 (the extra coordinate), same list in every state
  const int num_arms = static_cast<int>(bandit.arms.size());
  const int num_actions = num_arms + 1;
  mdp.phi.resize(num_states);
  auto lift = [&](const Vec& z, double last) {
    Vec f = Vec::Zero(d);
    f.head(db) = z;
    f[d - 1] = last;
    return f;
  };
  for (int a = 0; a < num_arms; ++a) mdp.phi[s0].push_back(lift(bandit.arms[a] / 2.0, 0.5));
  {
    Vec f = Vec::Zero(d);
    f[d - 1] = 0.5;
    mdp.phi[s0].push_back(f);  // e_{d+1}/2
  }
  for (int j = 0; j < 1 + db; ++j) {
    const int s = mdp.step_states[1][j];
    Vec f = Vec::Zero(d);
    f[j] = 1.0;  // phi(s1,.) = e1, phi(sbar_i,.) = e_i
    mdp.phi[s].assign(num_actions, f);
  }

  mdp.theta.resize(2);
  mdp.theta[0] = Vec::Zero(d);
  mdp.theta[1] = Vec::Zero(d);
  mdp.theta[1][0] = 1.0;

  mdp.mu.resize(1);
  Vec mu_s1 = lift(2.0 * bandit.theta_star, 1.0);
  Vec mu_sbar = lift(-2.0 * bandit.theta_star / db, 1.0 / db);
  mdp.mu[0].push_back(mu_s1);
  for (int i = 0; i < db; ++i) mdp.mu[0].push_back(mu_sbar);

  check_shape(mdp);
  return mdp;
}

std::vector<Policy> hard_instance_policy_set(const LinearMdp& mdp) {
  const int s0 = mdp.start_state();
  const int num_actions = mdp.num_actions(s0);
  std::vector<Policy> out;
  out.reserve(static_cast<std::size_t>(num_actions) * num_actions);
  for (int z = 0; z < num_actions; ++z) {
    for (int zp = 0; zp < num_actions; ++zp) {
      DeterministicTable t;
      t.action.resize(mdp.H);
      t.action[0][s0] = z;
      // downstream behavior fixed: intended action z' everywhere at step 2
      // (all step-2 states share their feature across actions, so z' is vacuous)
      for (int s : mdp.step_states[1]) t.action[1][s] = zp;
      out.push_back(Policy::deterministic(
          "pi[z=" + std::to_string(z) + ",z'=" + std::to_string(zp) + "]", std::move(t)));
    }
  }
  return out;
}

Policy hard_exploration_mixture(const LinearMdp& mdp) {
  const int s0 = mdp.start_state();
  const int num_actions = mdp.num_actions(s0);
  const int db = mdp.d - 1;
  // arms: 0 = z*, 1..db-1 = e_i, db..2db-2 = x_i, last = e_{d+1}/2
  std::vector<double> w(num_actions, 0.0);
  w[0] = 0.25;
  w[num_actions - 1] = 0.25;
  const int num_e = db - 1;
  for (int i = 1; i <= num_e; ++i) w[i] = 0.25 / num_e;
  double rest = 0.25;
  const int num_x = num_actions - 2 - num_e;
  for (int i = 0; i < num_x; ++i) w[1 + num_e + i] = rest / num_x;

  StochasticTable t;
  t.probs.resize(mdp.H);
  t.probs[0][s0] = w;
  std::vector<double> down(num_actions, 0.0);
  down[0] = 1.0;
  for (int s : mdp.step_states[1]) t.probs[1][s] = down;
  return Policy::stochastic("hard-exploration-mixture", std::move(t));
}

LinearMdp encode_tabular(const TabularMdp& tab, RewardNoise noise) {
  if (tab.S <= 0 || tab.A <= 0 || tab.H <= 0) throw ContractError("encode_tabular: empty MDP");
  LinearMdp mdp;
  mdp.d = tab.S * tab.A;
  mdp.H = tab.H;
  mdp.reward_noise = noise;
  // one state id per (step, tabular state) so step lists stay disjoint;
  // the start step has only tabular state 0
  // state id at step h for tabular state s: 1 + (h-1)*S + s for h >= 1; id 0 for (0, 0).
  auto sid = [&](int h, int s) { return h == 0 ? 0 : 1 + (h - 1) * tab.S + s; };
  const int num_states = 1 + (tab.H - 1) * tab.S;
  mdp.phi.resize(num_states);
  mdp.state_names.assign(num_states, "");
  mdp.step_states.resize(tab.H);
  mdp.step_states[0] = {0};
  mdp.state_names[0] = "t0_s0";
  for (int h = 1; h < tab.H; ++h) {
    for (int s = 0; s < tab.S; ++s) {
      mdp.step_states[h].push_back(sid(h, s));
      if (mdp.state_names[sid(h, s)].empty())
        mdp.state_names[sid(h, s)] = "t" + std::to_string(h) + "_s" + std::to_string(s);
    }
  }
  // indicator features phi(s,a) = e_{(s,a)}: tied to the tabular state, not the step copy
  auto feature = [&](int tab_s, int a) {
    Vec f = Vec::Zero(mdp.d);
    f[tab_s * tab.A + a] = 1.0;
    return f;
  };
  for (int h = 0; h < tab.H; ++h) {
    for (int s = 0; s < tab.S; ++s) {
      int id = sid(h, s);
      if (h > 0 || s == 0) {
        if (mdp.phi[id].empty())
          for (int a = 0; a < tab.A; ++a) mdp.phi[id].push_back(feature(s, a));
      }
    }
  }
  // theta_h[(s,a)] = r_h(s,a); mu_h(s')[(s,a)] = P_h(s'|s,a)
  mdp.theta.resize(tab.H);
  for (int h = 0; h < tab.H; ++h) {
    Vec th = Vec::Zero(mdp.d);
    for (int s = 0; s < tab.S; ++s)
      for (int a = 0; a < tab.A; ++a) th[s * tab.A + a] = tab.r[h][s][a];
    mdp.theta[h] = th;
  }
  mdp.mu.resize(tab.H - 1);
  for (int h = 0; h + 1 < tab.H; ++h) {
    for (int sp = 0; sp < tab.S; ++sp) {
      Vec m = Vec::Zero(mdp.d);
      for (int s = 0; s < tab.S; ++s)
        for (int a = 0; a < tab.A; ++a) m[s * tab.A + a] = tab.P[h][s][a][sp];
      mdp.mu[h].push_back(m);
    }
  }
  check_shape(mdp);
  return mdp;
}

TabularMdp random_tabular(int S, int A, int H, std::uint64_t seed) {
  TabularMdp tab;
  tab.S = S;
  tab.A = A;
  tab.H = H;
  auto rng = make_engine(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  tab.P.assign(H, std::vector<std::vector<std::vector<double>>>(
                      S, std::vector<std::vector<double>>(A, std::vector<double>(S, 0.0))));
  tab.r.assign(H, std::vector<std::vector<double>>(S, std::vector<double>(A, 0.0)));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        double total = 0.0;
        for (int sp = 0; sp < S; ++sp) {
          tab.P[h][s][a][sp] = 0.05 + unif(rng);
          total += tab.P[h][s][a][sp];
        }
        for (int sp = 0; sp < S; ++sp) tab.P[h][s][a][sp] /= total;
        tab.r[h][s][a] = unif(rng);
      }
  return tab;
}

double tabular_optimal_value(const TabularMdp& tab) {
  std::vector<double> v(tab.S, 0.0);
  for (int h = tab.H - 1; h >= 0; --h) {
    std::vector<double> nv(tab.S, 0.0);
    for (int s = 0; s < tab.S; ++s) {
      double best = -1e300;
      for (int a = 0; a < tab.A; ++a) {
        double q = tab.r[h][s][a];
        if (h + 1 < tab.H)
          for (int sp = 0; sp < tab.S; ++sp) q += tab.P[h][s][a][sp] * v[sp];
        best = std::max(best, q);
      }
      nv[s] = best;
    }
    v = std::move(nv);
  }
  return v[0];
}

double tabular_policy_value(const TabularMdp& tab, const std::vector<std::vector<int>>& act) {
  std::vector<double> v(tab.S, 0.0);
  for (int h = tab.H - 1; h >= 0; --h) {
    std::vector<double> nv(tab.S, 0.0);
    for (int s = 0; s < tab.S; ++s) {
      int a = act[h][s];
      double q = tab.r[h][s][a];
      if (h + 1 < tab.H)
        for (int sp = 0; sp < tab.S; ++sp) q += tab.P[h][s][a][sp] * v[sp];
      nv[s] = q;
    }
    v = std::move(nv);
  }
  return v[0];
}

GapVisInstances make_gap_vis_instances(int S, double eps, int H) {
  if (S < 2) throw ContractError("make_gap_vis_instances: S >= 2 required");
  GapVisInstances out;

  // M1: action 0 self-loops (reward 1 at state 0, eps elsewhere);
  // action i (i >= 1) moves deterministically to state i with reward 0.
  TabularMdp m1;
  m1.S = S;
  m1.A = S;
  m1.H = H;
  m1.P.assign(H, std::vector<std::vector<std::vector<double>>>(
                     S, std::vector<std::vector<double>>(S, std::vector<double>(S, 0.0))));
  m1.r.assign(H, std::vector<std::vector<double>>(S, std::vector<double>(S, 0.0)));
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      m1.P[h][s][0][s] = 1.0;  // a0 self-loop
      m1.r[h][s][0] = (s == 0) ? 1.0 : eps;
      for (int a = 1; a < S; ++a) {
        m1.P[h][s][a][a] = 1.0;
        m1.r[h][s][a] = 0.0;
      }
    }
  }
  out.m1 = encode_tabular(m1, RewardNoise::Bernoulli);

  // M2 (documented approximation): states reached with geometrically decaying
  // probability, each carrying an order-1 action gap; policy gaps shrink like the
  // visitation weight. Stands in for an instance class from prior work.
  TabularMdp m2;
  m2.S = S;
  m2.A = 2;
  m2.H = H;
  m2.P.assign(H, std::vector<std::vector<std::vector<double>>>(
                     S, std::vector<std::vector<double>>(2, std::vector<double>(S, 0.0))));
  m2.r.assign(H, std::vector<std::vector<double>>(S, std::vector<double>(2, 0.0)));
  std::vector<double> reach(S);
  double total = 0.0;
  for (int s = 0; s < S; ++s) total += std::pow(2.0, -s);
  for (int s = 0; s < S; ++s) reach[s] = std::pow(2.0, -s) / total;
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < 2; ++a) {
        for (int sp = 0; sp < S; ++sp) m2.P[h][s][a][sp] = reach[sp];
        m2.r[h][s][a] = (a == 0) ? 0.75 : 0.25;  // uniform order-1 value gap
      }
    }
  }
  out.m2 = encode_tabular(m2, RewardNoise::Bernoulli);
  out.m2_approximate = true;
  return out;
}

}  // namespace pedel
