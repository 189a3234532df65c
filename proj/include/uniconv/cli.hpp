#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "uniconv/reducer.hpp"
#include "uniconv/signsolver.hpp"

namespace uniconv::cli {

inline constexpr const char* kVersion = "uniconv 0.1.0";

/// Everything a run depends on. The thread count is deliberately absent:
/// outputs must not depend on it.
struct RunConfig {
  std::string command;
  std::string function = "cusp";  // built-in descriptor or grid CSV path
  reducer::ReductionConfig reduction;
  int grid = 12;         // sampling exponent for haar tails and evaluation
  int points = 64;       // eval-field: number of midpoint nodes
  std::string k_policy = "paper";
  std::string theta_file;
  std::string tau_file;
  std::string instance_file;
  std::string restrictor_file;
  std::string phi_file;
  std::string suite = "core";
  std::string out;
};

nlohmann::ordered_json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::ordered_json& j);

/// "paper", "paper:c4" or "fixed:K".
signsolver::KPolicy parse_k_policy(const std::string& text);

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string checksum(const std::string& bytes);

signsolver::SignInstance read_instance_json(std::istream& in);
void write_instance_json(std::ostream& out, const signsolver::SignInstance& inst);

/// Parses argv and runs one subcommand; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace uniconv::cli
