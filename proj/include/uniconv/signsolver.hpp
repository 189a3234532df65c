#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uniconv/errors.hpp"

namespace uniconv::signsolver {

struct SignEntry {
  std::int64_t j = 0;
  std::int64_t l = 0;  // location in [0, n)
  std::int64_t b = 1;  // magnitude class, >= 1
  std::vector<double> values;  // v_{i,j}, i = 0..n-1
};

struct SignInstance {
  std::int64_t n = 0;
  std::vector<SignEntry> entries;
  double gamma = 0.0;
  double M = 2.0;
};

struct KPolicy {
  enum class Kind { kPaperFormula, kFixed };
  Kind kind = Kind::kPaperFormula;
  std::int64_t fixed_k = 2;
  /// K = ceil(c4 * theta^7), clamped to [2, n].
  double c4 = 1e-28;

  static KPolicy fixed(std::int64_t k) { return {Kind::kFixed, k, 1e-28}; }
  static KPolicy paper(double c4 = 1e-28) { return {Kind::kPaperFormula, 2, c4}; }
};

struct SolverParams {
  double alpha = 1.0;
  double beta = 1.0 / 50.0;
  KPolicy k_policy;
  double sigma_scale = 1.0;
  int max_retries = 200;
  std::uint64_t seed = 0;
  /// Constant in the reduced budget M' = C2 M K^{2 gamma + 3}.
  double c2 = 4.0;
  int threads = 1;
  /// After a block sample is accepted, flip single signs while that lowers
  /// max_j b^beta |w_{s,j}| and keeps every far-entry bound.
  bool block_polish = true;
};

/// Result of checking the two instance hypotheses. Counts are compared in
/// log space because M b^gamma overflows quickly for the reduced instances.
struct InstanceCheck {
  bool valid = true;
  double worst_value_ratio = 0.0;      // max |v| / min{(|i-l| mod n + 1)^-alpha, 1/b}
  double worst_log_count_excess = -INFINITY;  // max log(count) - log(M b^gamma)
  std::string detail;
};

/// min{(|i-l| mod n + 1)^-alpha, 1/b}, the per-coordinate value bound.
double hypothesis_bound(std::int64_t i, std::int64_t l, std::int64_t b, std::int64_t n, double alpha);

InstanceCheck check_instance(const SignInstance& inst, double alpha, double tolerance = 1e-9);

struct LevelDiagnostics {
  int level = 0;
  std::int64_t n = 0;
  std::int64_t K = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double log_M = 0.0;
  double sigma = 0.0;
  std::int64_t total_attempts = 0;
  int worst_block_attempts = 0;
  InstanceCheck instance;  // hypotheses of the instance handed to this level
};

struct SolveResult {
  std::vector<int> signs;
  double value = 0.0;  // verify_bound with params.beta
  std::int64_t argmax_entry = -1;
  std::vector<LevelDiagnostics> levels;
};

/// Thrown when a block exhausts its retry budget.
class BlockSamplingFailure : public SolverFailure {
 public:
  BlockSamplingFailure(int level, std::int64_t block, std::vector<int> best_sample, double best_ratio);

  int level() const { return level_; }
  std::int64_t block() const { return block_; }
  const std::vector<int>& best_sample() const { return best_; }
  double best_ratio() const { return best_ratio_; }

 private:
  int level_;
  std::int64_t block_;
  std::vector<int> best_;
  double best_ratio_;
};

/// Hierarchical block-sign recursion: random block signs accepted under the
/// block bound, recursion on block sums, signs combined multiplicatively.
/// The hypotheses of every level's instance are checked and recorded in
/// levels[k].instance; a violation does not stop the solver.
SolveResult solve_signs(const SignInstance& inst, const SolverParams& params);

/// Coordinate-wise greedy: each sign in turn minimizes the running max of
/// b^beta |partial sum|; ties choose -1.
SolveResult solve_signs_greedy(const SignInstance& inst, const SolverParams& params);

struct BoundValue {
  double value = 0.0;
  std::int64_t argmax_entry = -1;  // index into inst.entries, -1 when there are none
};

/// max_j b(j)^beta |sum_i eps_i v_{i,j}|.
BoundValue verify_bound(const SignInstance& inst, const std::vector<int>& eps, double beta);

struct BruteForceResult {
  std::vector<int> signs;
  double value = 0.0;
};

/// Exact minimizer over all 2^n sign vectors, n <= 20. Ties (within 1e-12
/// relative) go to the lexicographically smallest vector, -1 before +1,
/// eps_0 most significant.
BruteForceResult brute_force_signs(const SignInstance& inst, double beta);

/// Values equal to +- the hypothesis bound with random signs; for each l
/// and each b in {1,2,3}, exactly floor(M b^gamma) entries.
SignInstance make_structured_instance(std::uint64_t seed, std::int64_t n, double gamma, double M, double alpha);

/// Block size chosen by the policy for the given level parameters.
std::int64_t choose_k(const KPolicy& policy, std::int64_t n, double alpha, double beta, double gamma, double log_M);

/// Per-b maximum of |sum eps v| and entry counts.
std::map<std::int64_t, std::pair<double, std::int64_t>> achieved_by_b(const SignInstance& inst,
                                                                       const std::vector<int>& eps);

}  // namespace uniconv::signsolver
