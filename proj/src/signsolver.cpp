#include "uniconv/signsolver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "uniconv/dyadic.hpp"
#include "uniconv/parallel.hpp"
#include "uniconv/rng.hpp"

namespace uniconv::signsolver {

double hypothesis_bound(std::int64_t i, std::int64_t l, std::int64_t b, std::int64_t n, double alpha) {
  const auto dist = static_cast<double>(std::abs(centered_mod(i - l, n)));
  return std::min(std::pow(dist + 1.0, -alpha), 1.0 / static_cast<double>(b));
}

namespace {

// One level of the recursion. Values are stored row-major by entry.
struct Level {
  std::int64_t n = 0;
  std::vector<std::int64_t> l;
  std::vector<std::int64_t> b;
  std::vector<double> values;  // entries * n
  double alpha = 1.0;
  double beta = 0.02;
  double gamma = 0.0;
  double log_m = std::log(2.0);

  std::size_t entries() const { return l.size(); }
  const double* row(std::size_t j) const { return values.data() + j * static_cast<std::size_t>(n); }
};

InstanceCheck check_level(std::int64_t n, const std::vector<std::int64_t>& ls, const std::vector<std::int64_t>& bs,
                          const std::vector<double>& values, double alpha, double gamma, double log_m,
                          double tolerance) {
  InstanceCheck out;
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> counts;
  std::ostringstream detail;
  for (std::size_t j = 0; j < ls.size(); ++j) {
    if (ls[j] < 0 || ls[j] >= n || bs[j] < 1) {
      out.valid = false;
      detail << "entry " << j << " has l or b out of range; ";
      continue;
    }
    ++counts[{ls[j], bs[j]}];
    for (std::int64_t i = 0; i < n; ++i) {
      const double v = std::abs(values[j * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)]);
      if (v == 0.0) continue;
      out.worst_value_ratio = std::max(out.worst_value_ratio, v / hypothesis_bound(i, ls[j], bs[j], n, alpha));
    }
  }
  for (const auto& [key, count] : counts) {
    const double excess = std::log(static_cast<double>(count)) - (log_m + gamma * std::log(static_cast<double>(key.second)));
    out.worst_log_count_excess = std::max(out.worst_log_count_excess, excess);
  }
  if (out.worst_value_ratio > 1.0 + tolerance) {
    out.valid = false;
    detail << "value ratio " << out.worst_value_ratio << " exceeds 1; ";
  }
  if (out.worst_log_count_excess > tolerance) {
    out.valid = false;
    detail << "count budget exceeded by factor " << std::exp(out.worst_log_count_excess) << "; ";
  }
  out.detail = detail.str();
  return out;
}

Level to_level(const SignInstance& inst, double alpha, double beta) {
  if (inst.n < 1) throw DomainError("sign instance needs n >= 1");
  if (!(inst.M > 0.0)) throw DomainError("sign instance needs M > 0");
  Level lv;
  lv.n = inst.n;
  lv.alpha = alpha;
  lv.beta = beta;
  lv.gamma = inst.gamma;
  lv.log_m = std::log(inst.M);
  lv.values.reserve(inst.entries.size() * static_cast<std::size_t>(inst.n));
  for (const auto& e : inst.entries) {
    if (static_cast<std::int64_t>(e.values.size()) != inst.n) {
      throw DomainError("entry " + std::to_string(e.j) + " has " + std::to_string(e.values.size()) +
                        " values, expected " + std::to_string(inst.n));
    }
    lv.l.push_back(e.l);
    lv.b.push_back(e.b);
    lv.values.insert(lv.values.end(), e.values.begin(), e.values.end());
  }
  return lv;
}

void check_params(const SolverParams& p) {
  if (!(p.alpha > 0.99 && p.alpha <= 1.0)) throw DomainError("alpha must lie in (0.99, 1]");
  if (!(p.beta >= 1.0 / 50.0 && p.beta < 1.0 / 25.0)) throw DomainError("beta must lie in [1/50, 1/25)");
  if (p.max_retries < 1) throw DomainError("max_retries must be positive");
  if (!(p.sigma_scale > 0.0)) throw DomainError("sigma_scale must be positive");
  if (p.k_policy.kind == KPolicy::Kind::kFixed && p.k_policy.fixed_k < 2) throw DomainError("fixed K must be >= 2");
}

// Greedy single-flip descent on max_j b^beta |w_{s,j}| over all entries,
// subject to the far-entry bounds. Deterministic, scans in index order.
void polish_block(const Level& lv, std::int64_t first, std::int64_t last, const std::vector<std::size_t>& active,
                  const std::vector<double>& bound, const std::vector<std::size_t>& near, double beta,
                  std::vector<int>& sample, std::vector<double>& far_sums) {
  std::vector<double> near_sums(near.size(), 0.0);
  std::vector<double> near_weight(near.size());
  std::vector<double> far_weight(active.size());
  for (std::size_t a = 0; a < near.size(); ++a) {
    const double* row = lv.row(near[a]);
    for (std::int64_t i = first; i < last; ++i) near_sums[a] += sample[static_cast<std::size_t>(i - first)] * row[i];
    near_weight[a] = std::pow(static_cast<double>(lv.b[near[a]]), beta);
  }
  for (std::size_t a = 0; a < active.size(); ++a) far_weight[a] = std::pow(static_cast<double>(lv.b[active[a]]), beta);
  auto objective = [&](std::int64_t flip) -> double {
    double worst = 0.0;
    for (std::size_t a = 0; a < near.size(); ++a) {
      double v = near_sums[a];
      if (flip >= 0) v -= 2.0 * sample[static_cast<std::size_t>(flip - first)] * lv.row(near[a])[flip];
      worst = std::max(worst, near_weight[a] * std::abs(v));
    }
    for (std::size_t a = 0; a < active.size(); ++a) {
      double v = far_sums[a];
      if (flip >= 0) {
        v -= 2.0 * sample[static_cast<std::size_t>(flip - first)] * lv.row(active[a])[flip];
        if (std::abs(v) > bound[a]) return INFINITY;
      }
      worst = std::max(worst, far_weight[a] * std::abs(v));
    }
    return worst;
  };
  double current = objective(-1);
  const int max_passes = 8;
  for (int pass = 0; pass < max_passes; ++pass) {
    bool improved = false;
    for (std::int64_t i = first; i < last; ++i) {
      const double candidate = objective(i);
      if (candidate < current * (1.0 - 1e-12)) {
        const double sign = sample[static_cast<std::size_t>(i - first)];
        for (std::size_t a = 0; a < near.size(); ++a) near_sums[a] -= 2.0 * sign * lv.row(near[a])[i];
        for (std::size_t a = 0; a < active.size(); ++a) far_sums[a] -= 2.0 * sign * lv.row(active[a])[i];
        sample[static_cast<std::size_t>(i - first)] = -sample[static_cast<std::size_t>(i - first)];
        current = candidate;
        improved = true;
      }
    }
    if (!improved) break;
  }
}

struct BlockOutcome {
  int attempts = 0;
  bool ok = false;
  std::vector<int> best;
  double best_ratio = INFINITY;
};

std::vector<int> solve_level(const Level& lv, const SolverParams& params, int depth,
                             std::vector<LevelDiagnostics>& diagnostics) {
  LevelDiagnostics diag;
  diag.level = depth;
  diag.n = lv.n;
  diag.alpha = lv.alpha;
  diag.beta = lv.beta;
  diag.gamma = lv.gamma;
  diag.log_M = lv.log_m;
  diag.instance = check_level(lv.n, lv.l, lv.b, lv.values, lv.alpha, lv.gamma, lv.log_m, 1e-9);
  if (lv.n == 1) {
    diag.K = 1;
    diagnostics.push_back(diag);
    return {1};
  }

  const double alpha_p = 0.5 * (lv.alpha + 0.99);
  const double beta_p = 0.5 * (lv.beta + 1.0 / 25.0);
  const std::int64_t K = choose_k(params.k_policy, lv.n, lv.alpha, lv.beta, lv.gamma, lv.log_m);
  const std::int64_t n = lv.n;
  const std::int64_t n_p = (n + K - 1) / K;
  const double sigma = params.sigma_scale *
                       std::sqrt((lv.gamma + 1.0) * (1.0 / (lv.alpha - alpha_p) + 1.0 / (beta_p - lv.beta) + lv.log_m));
  diag.K = K;
  diag.sigma = sigma;
  const double root_k = std::sqrt(static_cast<double>(K));
  const double reduced_scale = 2.0 * sigma * std::pow(static_cast<double>(K), 0.5 - alpha_p);

  // Per entry quantities shared by every block.
  const std::size_t entries = lv.entries();
  std::vector<double> b_cap(entries);
  std::vector<std::int64_t> l_p(entries);
  for (std::size_t j = 0; j < entries; ++j) {
    b_cap[j] = sigma * root_k / std::pow(static_cast<double>(lv.b[j]), lv.beta / beta_p);
    l_p[j] = lv.l[j] / K;
  }

  std::vector<int> delta(static_cast<std::size_t>(n), 1);
  std::vector<double> w(entries * static_cast<std::size_t>(n_p), 0.0);
  std::vector<BlockOutcome> outcomes(static_cast<std::size_t>(n_p));

  parallel_chunks(static_cast<std::size_t>(n_p), params.threads, [&](std::size_t s_index) {
    const auto s = static_cast<std::int64_t>(s_index);
    const std::int64_t first = s * K;
    const std::int64_t last = std::min(n, first + K);
    std::vector<std::size_t> active;
    std::vector<double> bound;
    std::vector<std::size_t> near;
    for (std::size_t j = 0; j < entries; ++j) {
      const std::int64_t dist = std::abs(centered_mod(first - lv.l[j], n));
      if (dist < 2 * K) {
        near.push_back(j);
        continue;
      }
      const double far = sigma * root_k / std::pow(static_cast<double>(dist) + 1.0, alpha_p);
      const std::int64_t dist_p = std::abs(centered_mod(s - l_p[j], n_p));
      const double far_p = reduced_scale / std::pow(static_cast<double>(dist_p) + 1.0, alpha_p);
      active.push_back(j);
      bound.push_back(std::min({far, far_p, b_cap[j]}));
    }
    BlockOutcome& out = outcomes[s_index];
    std::vector<int> sample(static_cast<std::size_t>(last - first));
    std::vector<double> sums(active.size());
    const std::uint64_t block_key = hash_keys(params.seed, static_cast<std::uint64_t>(depth), s_index);
    for (int attempt = 0; attempt < params.max_retries; ++attempt) {
      ++out.attempts;
      for (std::int64_t i = first; i < last; ++i) {
        const double u = counter_uniform(block_key, static_cast<std::uint64_t>(attempt), static_cast<std::uint64_t>(i));
        sample[static_cast<std::size_t>(i - first)] = u < 0.5 ? -1 : 1;
      }
      double ratio = 0.0;
      for (std::size_t a = 0; a < active.size(); ++a) {
        const double* row = lv.row(active[a]);
        double acc = 0.0;
        for (std::int64_t i = first; i < last; ++i) acc += sample[static_cast<std::size_t>(i - first)] * row[i];
        sums[a] = acc;
        ratio = std::max(ratio, std::abs(acc) / bound[a]);
      }
      if (ratio < out.best_ratio) {
        out.best_ratio = ratio;
        out.best = sample;
      }
      if (ratio <= 1.0) {
        out.ok = true;
        if (params.block_polish) polish_block(lv, first, last, active, bound, near, params.beta, sample, sums);
        for (std::int64_t i = first; i < last; ++i) delta[static_cast<std::size_t>(i)] = sample[static_cast<std::size_t>(i - first)];
        for (std::size_t a = 0; a < active.size(); ++a) {
          w[active[a] * static_cast<std::size_t>(n_p) + s_index] = sums[a] / reduced_scale;
        }
        return;
      }
    }
  });

  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    diag.total_attempts += outcomes[s].attempts;
    diag.worst_block_attempts = std::max(diag.worst_block_attempts, outcomes[s].attempts);
  }
  diagnostics.push_back(diag);
  for (std::size_t s = 0; s < outcomes.size(); ++s) {
    if (!outcomes[s].ok) {
      throw BlockSamplingFailure(depth, static_cast<std::int64_t>(s), outcomes[s].best, outcomes[s].best_ratio);
    }
  }

  Level next;
  next.n = n_p;
  next.alpha = alpha_p;
  next.beta = beta_p;
  next.gamma = 2.0 * lv.gamma + 1.0;
  next.log_m = std::log(params.c2) + lv.log_m + (2.0 * lv.gamma + 3.0) * std::log(static_cast<double>(K));
  next.l = l_p;
  next.b.resize(entries);
  for (std::size_t j = 0; j < entries; ++j) {
    const double scaled = 2.0 * std::pow(static_cast<double>(lv.b[j]), lv.beta / beta_p) /
                          std::pow(static_cast<double>(K), alpha_p);
    next.b[j] = std::max<std::int64_t>(static_cast<std::int64_t>(std::floor(scaled)), 1);
  }
  next.values = std::move(w);
  const std::vector<int> mu = solve_level(next, params, depth + 1, diagnostics);

  std::vector<int> eps(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    eps[static_cast<std::size_t>(i)] = mu[static_cast<std::size_t>(i / K)] * delta[static_cast<std::size_t>(i)];
  }
  return eps;
}

std::string failure_message(int level, std::int64_t block, double ratio) {
  std::ostringstream os;
  os << "retry budget exhausted at level " << level << ", block " << block << " (best bound ratio " << ratio << ")";
  return os.str();
}

}  // namespace

BlockSamplingFailure::BlockSamplingFailure(int level, std::int64_t block, std::vector<int> best_sample,
                                           double best_ratio)
    : SolverFailure(failure_message(level, block, best_ratio)),
      level_(level),
      block_(block),
      best_(std::move(best_sample)),
      best_ratio_(best_ratio) {}

InstanceCheck check_instance(const SignInstance& inst, double alpha, double tolerance) {
  const Level lv = to_level(inst, alpha, 0.02);
  return check_level(lv.n, lv.l, lv.b, lv.values, alpha, lv.gamma, lv.log_m, tolerance);
}

std::int64_t choose_k(const KPolicy& policy, std::int64_t n, double alpha, double beta, double gamma, double log_M) {
  std::int64_t k = 2;
  if (policy.kind == KPolicy::Kind::kFixed) {
    k = policy.fixed_k;
  } else {
    const double theta = (gamma + 1.0) * log_M / ((alpha - 0.99) * (1.0 / 25.0 - beta));
    const double raw = std::ceil(policy.c4 * std::pow(theta, 7.0));
    k = raw >= static_cast<double>(n) ? n : static_cast<std::int64_t>(raw);
  }
  return std::clamp<std::int64_t>(k, 2, std::max<std::int64_t>(n, 2));
}

SolveResult solve_signs(const SignInstance& inst, const SolverParams& params) {
  check_params(params);
  const Level lv = to_level(inst, params.alpha, params.beta);
  SolveResult result;
  result.signs = solve_level(lv, params, 0, result.levels);
  const auto bound = verify_bound(inst, result.signs, params.beta);
  result.value = bound.value;
  result.argmax_entry = bound.argmax_entry;
  return result;
}

SolveResult solve_signs_greedy(const SignInstance& inst, const SolverParams& params) {
  const Level lv = to_level(inst, params.alpha, params.beta);
  const std::size_t entries = lv.entries();
  std::vector<double> weight(entries);
  for (std::size_t j = 0; j < entries; ++j) weight[j] = std::pow(static_cast<double>(lv.b[j]), params.beta);
  std::vector<double> sums(entries, 0.0);
  SolveResult result;
  result.signs.resize(static_cast<std::size_t>(lv.n));
  for (std::int64_t i = 0; i < lv.n; ++i) {
    double score[2] = {0.0, 0.0};
    for (int c = 0; c < 2; ++c) {
      const double sign = c == 0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < entries; ++j) {
        score[c] = std::max(score[c], weight[j] * std::abs(sums[j] + sign * lv.row(j)[i]));
      }
    }
    const int pick = score[1] < score[0] ? 1 : -1;
    result.signs[static_cast<std::size_t>(i)] = pick;
    for (std::size_t j = 0; j < entries; ++j) sums[j] += pick * lv.row(j)[i];
  }
  const auto bound = verify_bound(inst, result.signs, params.beta);
  result.value = bound.value;
  result.argmax_entry = bound.argmax_entry;
  return result;
}

BoundValue verify_bound(const SignInstance& inst, const std::vector<int>& eps, double beta) {
  if (static_cast<std::int64_t>(eps.size()) != inst.n) throw DomainError("sign vector length differs from n");
  BoundValue out;
  for (std::size_t j = 0; j < inst.entries.size(); ++j) {
    const auto& e = inst.entries[j];
    double acc = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) acc += eps[i] * e.values[i];
    const double v = std::pow(static_cast<double>(e.b), beta) * std::abs(acc);
    if (out.argmax_entry < 0 || v > out.value) {
      out.value = v;
      out.argmax_entry = static_cast<std::int64_t>(j);
    }
  }
  return out;
}

BruteForceResult brute_force_signs(const SignInstance& inst, double beta) {
  if (inst.n > 20) throw DomainError("brute force limited to n <= 20");
  const auto n = static_cast<std::size_t>(inst.n);
  const Level lv = to_level(inst, 1.0, beta);
  const std::size_t entries = lv.entries();
  std::vector<double> weight(entries);
  for (std::size_t j = 0; j < entries; ++j) weight[j] = std::pow(static_cast<double>(lv.b[j]), beta);

  // Gray-code walk starting from all -1; bit p of the code is sign index n-1-p.
  std::vector<int> eps(n, -1);
  std::vector<double> sums(entries, 0.0);
  for (std::size_t j = 0; j < entries; ++j) {
    for (std::size_t i = 0; i < n; ++i) sums[j] -= lv.row(j)[i];
  }
  auto score = [&] {
    double worst = 0.0;
    for (std::size_t j = 0; j < entries; ++j) worst = std::max(worst, weight[j] * std::abs(sums[j]));
    return worst;
  };
  BruteForceResult best{eps, score()};
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t step = 1; step < total; ++step) {
    const int p = std::countr_zero(step);
    const std::size_t i = n - 1 - static_cast<std::size_t>(p);
    eps[i] = -eps[i];
    for (std::size_t j = 0; j < entries; ++j) sums[j] += 2.0 * eps[i] * lv.row(j)[i];
    const double value = score();
    const double tie = 1e-12 * (1.0 + best.value);
    if (value < best.value - tie) {
      best = {eps, value};
    } else if (value <= best.value + tie && eps < best.signs) {
      best = {eps, std::min(value, best.value)};
    }
  }
  best.value = verify_bound(inst, best.signs, beta).value;
  return best;
}

SignInstance make_structured_instance(std::uint64_t seed, std::int64_t n, double gamma, double M, double alpha) {
  if (n < 1) throw DomainError("instance size must be positive");
  if (!(M >= 1.0)) throw DomainError("M must be at least 1");
  if (!(gamma >= 0.0)) throw DomainError("gamma must be nonnegative");
  SignInstance inst;
  inst.n = n;
  inst.gamma = gamma;
  inst.M = M;
  std::int64_t j = 0;
  for (std::int64_t l = 0; l < n; ++l) {
    for (std::int64_t b = 1; b <= 3; ++b) {
      const auto count = static_cast<std::int64_t>(std::floor(M * std::pow(static_cast<double>(b), gamma) + 1e-9));
      for (std::int64_t c = 0; c < count; ++c, ++j) {
        SignEntry e;
        e.j = j;
        e.l = l;
        e.b = b;
        e.values.resize(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
          const double sign = counter_uniform(seed, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(i)) < 0.5 ? -1.0 : 1.0;
          e.values[static_cast<std::size_t>(i)] = sign * hypothesis_bound(i, l, b, n, alpha);
        }
        inst.entries.push_back(std::move(e));
      }
    }
  }
  return inst;
}

std::map<std::int64_t, std::pair<double, std::int64_t>> achieved_by_b(const SignInstance& inst,
                                                                       const std::vector<int>& eps) {
  std::map<std::int64_t, std::pair<double, std::int64_t>> table;
  for (const auto& e : inst.entries) {
    double acc = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) acc += eps[i] * e.values[i];
    auto& slot = table[e.b];
    slot.first = std::max(slot.first, std::abs(acc));
    ++slot.second;
  }
  return table;
}

}  // namespace uniconv::signsolver
