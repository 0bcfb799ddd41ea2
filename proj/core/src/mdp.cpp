#include "pedel/mdp.hpp"

#include <cmath>
#include <sstream>

namespace pedel {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(12);
  os << x;
  return os.str();
}

}  // namespace

void check_shape(const LinearMdp& mdp) {
  if (mdp.d <= 0 || mdp.H <= 0) throw ContractError("LinearMdp: d and H must be positive");
  if (static_cast<int>(mdp.step_states.size()) != mdp.H)
    throw ContractError("LinearMdp: step_states must have H entries");
  if (mdp.step_states[0].size() != 1)
    throw ContractError("LinearMdp: exactly one start state expected");
  if (static_cast<int>(mdp.theta.size()) != mdp.H)
    throw ContractError("LinearMdp: theta must have H entries");
  if (static_cast<int>(mdp.mu.size()) != mdp.H - 1)
    throw ContractError("LinearMdp: mu must have H-1 entries");
  for (int h = 0; h + 1 < mdp.H; ++h)
    if (mdp.mu[h].size() != mdp.step_states[h + 1].size())
      throw ContractError("LinearMdp: mu[h] must align with step_states[h+1]");
  for (const auto& acts : mdp.phi)
    for (const auto& f : acts)
      if (f.size() != mdp.d) throw ContractError("LinearMdp: feature dimension mismatch");
  for (const auto& th : mdp.theta)
    if (th.size() != mdp.d) throw ContractError("LinearMdp: theta dimension mismatch");
}

std::vector<Violation> validate(const LinearMdp& mdp) {
  check_shape(mdp);
  std::vector<Violation> out;
  const double sqd = std::sqrt(static_cast<double>(mdp.d));

  // transition tables: nonnegative, normalized
  for (int h = 0; h + 1 < mdp.H; ++h) {
    for (int s : mdp.step_states[h]) {
      for (int a = 0; a < mdp.num_actions(s); ++a) {
        double total = 0.0;
        for (std::size_t j = 0; j < mdp.mu[h].size(); ++j) {
          const double p = mdp.transition_prob(h, s, a, static_cast<int>(j));
          if (p < -1e-12) {
            out.push_back({"P_" + std::to_string(h + 1) + "(" +
                           mdp.state_name(mdp.step_states[h + 1][j]) + "|" + mdp.state_name(s) +
                           ",a" + std::to_string(a) + ") = " + fmt(p) + " < 0"});
          }
          total += p;
        }
        if (total < 1.0 - 1e-9 || total > 1.0 + 1e-9) {
          out.push_back({"sum_s' P_" + std::to_string(h + 1) + "(s'|" + mdp.state_name(s) + ",a" +
                         std::to_string(a) + ") = " + fmt(total) + " not within 1e-9 of 1"});
        }
      }
    }
  }

  // feature norms
  for (int s = 0; s < mdp.num_states(); ++s) {
    for (int a = 0; a < mdp.num_actions(s); ++a) {
      const double n = mdp.phi[s][a].norm();
      if (n > 1.0 + 1e-12)
        out.push_back({"||phi(" + mdp.state_name(s) + ",a" + std::to_string(a) +
                       ")|| = " + fmt(n) + " > 1"});
      if (n < 1.0 / sqd - 1e-12)
        out.push_back({"||phi(" + mdp.state_name(s) + ",a" + std::to_string(a) +
                       ")|| = " + fmt(n) + " < 1/sqrt(d) = " + fmt(1.0 / sqd)});
    }
  }

  // theta norm and reward range per step
  for (int h = 0; h < mdp.H; ++h) {
    const double tn = mdp.theta[h].norm();
    if (tn > sqd + 1e-12)
      out.push_back({"||theta_" + std::to_string(h + 1) + "|| = " + fmt(tn) +
                     " > sqrt(d) = " + fmt(sqd)});
    for (int s : mdp.step_states[h]) {
      for (int a = 0; a < mdp.num_actions(s); ++a) {
        const double r = mdp.mean_reward(h, s, a);
        if (r < -1e-12 || r > 1.0 + 1e-12)
          out.push_back({"<phi,theta_" + std::to_string(h + 1) + "> = " + fmt(r) + " at (" +
                         mdp.state_name(s) + ",a" + std::to_string(a) + ") outside [0,1]"});
      }
    }
  }

  // measure total-variation bound; 2*sqrt(d) (see header comment)
  for (int h = 0; h + 1 < mdp.H; ++h) {
    Vec abs_sum = Vec::Zero(mdp.d);
    for (const auto& m : mdp.mu[h]) abs_sum += m.cwiseAbs();
    const double n = abs_sum.norm();
    if (n > 2.0 * sqd * (1.0 + 1e-9))
      out.push_back({"||sum_s' |mu_" + std::to_string(h + 1) + "(s')||| = " + fmt(n) +
                     " > 2*sqrt(d) = " + fmt(2.0 * sqd)});
  }

  return out;
}

}  // namespace pedel
