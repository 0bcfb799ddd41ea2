#pragma once

#include <string>
#include <vector>

#include "pedel/mdp.hpp"
#include "pedel/policy.hpp"

namespace pedel {

/// JSON serialization of an MDP: {d, H, states, actions, phi, mu, theta, reward_noise}.
/// Array entries are hex-float strings, so round-trips are bit-stable.
std::string mdp_to_json(const LinearMdp& mdp);
LinearMdp mdp_from_json(const std::string& json_text);
void save_mdp(const LinearMdp& mdp, const std::string& path);
LinearMdp load_mdp(const std::string& path);

/// Policy-class serialization (explicit lists of table policies only).
std::string policies_to_json(const LinearMdp& mdp, const std::vector<Policy>& policies);
std::vector<Policy> policies_from_json(const std::string& json_text);

/// Stable FNV-1a hash of a canonical JSON string; recorded in output artifacts.
std::uint64_t stable_hash(const std::string& text);

std::string hex_double(double x);
double parse_hex_double(const std::string& s);

}  // namespace pedel
