#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pedel/mdp.hpp"
#include "pedel/policy.hpp"

namespace pedel {

struct HardInstanceParams {
  int d = 0;            // bandit dimension (the embedded MDP has dimension d+1)
  double Delta = 0.0;   // gap of the x_i arms
  double xi = 0.0;      // <theta*, z*>; gap of the e_i arms
  double gamma = 0.0;   // e_i-weight of the x_i arms
  double zeta = 0.0;    // low-regret leakage constant
  double alpha = 0.5;
  double C1 = 1.0;
  double C2 = 1.0;
  bool strict = true;   // true iff built under the parameter-lemma constraints
};

struct HardBandit {
  std::vector<Vec> arms;  // Z = { xi*e1, e2..ed, x2..xd }, arm 0 optimal
  Vec theta_star;         // e1
  HardInstanceParams params;
  int optimal_arm = 0;

  double mean(int arm) const { return theta_star.dot(arms[arm]) + 0.5; }
  double gap(int arm) const { return mean(optimal_arm) - mean(arm); }
};

/// Checks the constraint set 1/(52d) >= xi >= max{gamma/sqrt(d), sqrt(Delta)},
/// max{zeta, Delta} <= gamma^2, ||z|| <= 1 directly on a parameter struct.
/// Returns human-readable descriptions of violated inequalities (empty if ok).
std::vector<std::string> hard_instance_constraint_violations(const HardInstanceParams& p);

/// Hard linear-bandit instance under the parameter-lemma regime:
/// xi = 1/(52d), gamma^2 = max{zeta, d*Delta}. Throws ContractError (naming the
/// violated inequality) if Delta exceeds the lemma's bound
/// min{ 1/(2704 d^2), sqrt(1/(10816 C2)), (1/(10816 d^alpha C1))^(1/(2(1-alpha))) }.
HardBandit make_hard_bandit(int d, double Delta, double alpha = 0.5, double C1 = 1.0,
                            double C2 = 1.0);

/// Largest Delta the parameter lemma admits at (d, alpha, C1, C2).
double hard_bandit_max_delta(int d, double alpha = 0.5, double C1 = 1.0, double C2 = 1.0);

/// Desk-scale variant with the same arm structure but caller-chosen (xi, gamma),
/// bypassing the parameter lemma. Marked strict=false; still requires
/// |<theta*,z>| <= 1/2 - 1e-9 so the Bernoulli embedding stays valid.
HardBandit make_hard_bandit_scaled(int d, double Delta, double xi, double gamma);

/// Scaled preset used by the experiments: xi = 0.3, gamma^2 = min(d*Delta, 0.1/(d-1)).
HardBandit make_hard_bandit_preset(int d, double Delta);

/// Embeds the bandit as the H=2 linear MDP in dimension d+1:
/// states {s0; s1, sbar_2..sbar_{d+1}}, actions Z plus e_{d+1}/2,
/// phi(s0,z) = [z/2, 1/2], mu_1(s1) = [2 theta*, 1], mu_1(sbar_i) = (1/d)[-2 theta*, 1],
/// theta_1 = 0, theta_2 = e1, Bernoulli rewards.
LinearMdp embed_bandit_as_mdp(const HardBandit& bandit);

/// The finite policy set {pi^{z,z'}}: first-step action z, second-step intended
/// action z' (vacuous downstream, all downstream states share their feature),
/// |Pi| = |A|^2 <= 4d^2. Contains the optimal policy.
std::vector<Policy> hard_instance_policy_set(const LinearMdp& mdp);

/// Reference exploration mixture from the instance analysis: weight 1/4 on z*,
/// 1/4 on e_{d+1}/2, and 1/(4(d-1))-style weights spread over the e_i arms
/// (remaining mass spread uniformly over the rest). Provided as a preset; unused
/// by the algorithms.
Policy hard_exploration_mixture(const LinearMdp& mdp);

/// Plain tabular MDP (dense tables) used for encoding and as an independent oracle.
struct TabularMdp {
  int S = 0, A = 0, H = 0;
  // P[h][s][a][s'], r[h][s][a]; start state 0
  std::vector<std::vector<std::vector<std::vector<double>>>> P;
  std::vector<std::vector<std::vector<double>>> r;
};

/// Indicator-feature encoding: d = S*A, phi(s,a) = e_{(s,a)},
/// mu_h(s')[(s,a)] = P_h(s'|s,a), theta_h[(s,a)] = r_h(s,a).
LinearMdp encode_tabular(const TabularMdp& tab, RewardNoise noise = RewardNoise::Bernoulli);

/// Random dense tabular MDP (rewards in [0,1], rows normalized), for tests.
TabularMdp random_tabular(int S, int A, int H, std::uint64_t seed);

/// Classic tabular value iteration on TabularMdp (independent of the linear-MDP
/// code path). Returns V*_0(start).
double tabular_optimal_value(const TabularMdp& tab);

/// Tabular policy evaluation for a deterministic action table act[h][s].
double tabular_policy_value(const TabularMdp& tab, const std::vector<std::vector<int>>& act);

/// Deterministic S-state chain MDP (M1): action a0 self-loops on s0 paying 1
/// (eps at other states); action a_i jumps to state i. Any policy deviating from
/// a0 at the first step has gap >= 1-eps. Encoded as tabular-as-linear.
/// M2 is a documented stand-in (geometrically decaying visitation weights with
/// large per-state action gaps), flagged approximate and excluded from acceptance.
struct GapVisInstances {
  LinearMdp m1;
  LinearMdp m2;
  bool m2_approximate = true;
};
GapVisInstances make_gap_vis_instances(int S, double eps, int H = 2);

}  // namespace pedel
