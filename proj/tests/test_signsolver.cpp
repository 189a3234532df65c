#include <doctest.h>

#include <cmath>
#include <random>

#include "uniconv/errors.hpp"
#include "uniconv/signsolver.hpp"

using namespace uniconv;
using namespace uniconv::signsolver;

namespace {

SignInstance two_by_one() {
  SignInstance inst;
  inst.n = 2;
  inst.entries.push_back({0, 0, 1, {1.0, 1.0}});
  inst.M = 2.0;
  return inst;
}

// Independent enumeration in plain lexicographic order.
double exhaustive_min(const SignInstance& inst, double beta, std::vector<int>* argmin) {
  const auto n = static_cast<std::size_t>(inst.n);
  double best = INFINITY;
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
    std::vector<int> eps(n);
    for (std::size_t i = 0; i < n; ++i) eps[i] = ((code >> (n - 1 - i)) & 1) ? 1 : -1;
    double worst = 0.0;
    for (const auto& e : inst.entries) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += eps[i] * e.values[i];
      worst = std::max(worst, std::pow(static_cast<double>(e.b), beta) * std::abs(acc));
    }
    if (code == 0 || worst < best - 1e-12 * (1.0 + best)) {
      best = worst;
      if (argmin) *argmin = eps;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("single sign") {
  SignInstance inst;
  inst.n = 1;
  inst.entries.push_back({0, 0, 3, {0.7}});
  SolverParams params;
  const auto r = solve_signs(inst, params);
  REQUIRE(r.signs.size() == 1);
  CHECK(std::abs(r.signs[0]) == 1);
  CHECK(r.value == doctest::Approx(0.7 * std::pow(3.0, params.beta)));
  const auto bf = brute_force_signs(inst, params.beta);
  CHECK(bf.value == doctest::Approx(0.7 * std::pow(3.0, params.beta)));
}

TEST_CASE("two signs cancel") {
  const auto inst = two_by_one();
  const auto r = solve_signs(inst, SolverParams{});
  CHECK(r.signs[0] == -r.signs[1]);
  CHECK(r.value == doctest::Approx(0.0));
  CHECK(verify_bound(inst, {1, -1}, 0.02).value == 0.0);
  CHECK(verify_bound(inst, {1, 1}, 0.02).value == doctest::Approx(2.0));
  const auto bf = brute_force_signs(inst, 0.02);
  CHECK(bf.value == 0.0);
  CHECK(bf.signs == std::vector<int>{-1, 1});
  SignInstance zeros = inst;
  zeros.entries[0].values = {0.0, 0.0};
  CHECK(verify_bound(zeros, {1, 1}, 0.02).value == 0.0);
  CHECK_THROWS_AS(verify_bound(inst, {1}, 0.02), DomainError);
}

TEST_CASE("structured instances") {
  const auto small = make_structured_instance(1, 4, 0.0, 1.0, 1.0);
  CHECK(small.entries.size() == 12);  // one per (l, b) with b in {1,2,3}
  std::map<std::pair<std::int64_t, std::int64_t>, int> counts;
  for (const auto& e : small.entries) ++counts[{e.l, e.b}];
  for (const auto& [key, c] : counts) CHECK(c == 1);
  CHECK(check_instance(small, 1.0).valid);

  const auto a = make_structured_instance(7, 12, 2.0, 2.0, 1.0);
  const auto b = make_structured_instance(8, 12, 2.0, 2.0, 1.0);
  const auto a2 = make_structured_instance(7, 12, 2.0, 2.0, 1.0);
  CHECK(check_instance(a, 1.0).valid);
  CHECK(check_instance(a, 1.0).worst_value_ratio == doctest::Approx(1.0));
  CHECK(a.entries[5].values != b.entries[5].values);
  CHECK(a.entries[5].values == a2.entries[5].values);
}

TEST_CASE("brute force matches an independent enumeration") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto inst = make_structured_instance(seed, 8, 1.0, 2.0, 1.0);
    std::vector<int> expected;
    const double value = exhaustive_min(inst, 0.02, &expected);
    const auto bf = brute_force_signs(inst, 0.02);
    CHECK(bf.value == doctest::Approx(value).epsilon(1e-12));
    CHECK(bf.signs == expected);
  }
  SignInstance big;
  big.n = 21;
  CHECK_THROWS_AS(brute_force_signs(big, 0.02), DomainError);
}

TEST_CASE("solver against the oracle") {
  SolverParams params;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = make_structured_instance(100 + seed, 10, 2.0, 2.0, 1.0);
    params.seed = seed;
    const auto r = solve_signs(inst, params);
    const auto bf = brute_force_signs(inst, params.beta);
    CHECK(r.value >= bf.value - 1e-12);
    const auto g = solve_signs_greedy(inst, params);
    CHECK(g.value >= bf.value - 1e-12);
  }
}

TEST_CASE("determinism and thread independence") {
  const auto inst = make_structured_instance(3, 64, 2.0, 2.0, 1.0);
  SolverParams params;
  params.seed = 99;
  params.k_policy = KPolicy::fixed(8);
  const auto one = solve_signs(inst, params);
  params.threads = 4;
  const auto four = solve_signs(inst, params);
  CHECK(one.signs == four.signs);
  CHECK(one.value == four.value);
  params.seed = 100;
  const auto other = solve_signs(inst, params);
  CHECK(other.signs.size() == 64);
}

TEST_CASE("recursion bookkeeping keeps the hypotheses") {
  const auto inst = make_structured_instance(5, 64, 2.0, 2.0, 1.0);
  for (std::int64_t k : {2, 4, 8}) {
    SolverParams params;
    params.k_policy = KPolicy::fixed(k);
    const auto r = solve_signs(inst, params);
    CHECK(r.levels.size() >= 2);
    for (const auto& level : r.levels) {
      CAPTURE(k);
      CAPTURE(level.level);
      CHECK(level.instance.valid);
    }
    // Block-level baseline: brute force on each block of 8, signs concatenated.
    std::vector<int> blockwise;
    for (std::int64_t s = 0; s < 8; ++s) {
      SignInstance sub;
      sub.n = 8;
      sub.M = inst.M;
      for (const auto& e : inst.entries) {
        if (e.l / 8 != s) continue;
        SignEntry cut{e.j, e.l - 8 * s, e.b, std::vector<double>(e.values.begin() + 8 * s, e.values.begin() + 8 * s + 8)};
        sub.entries.push_back(std::move(cut));
      }
      const auto part = brute_force_signs(sub, params.beta).signs;
      blockwise.insert(blockwise.end(), part.begin(), part.end());
    }
    const double baseline = verify_bound(inst, blockwise, params.beta).value;
    MESSAGE("K=" << k << " solver value " << r.value << " blockwise baseline " << baseline);
    CHECK(r.value <= 4.0 * baseline);
  }
}

TEST_CASE("removing an entry never raises the remaining maximum") {
  auto inst = make_structured_instance(2, 16, 1.0, 2.0, 1.0);
  const auto r = solve_signs(inst, SolverParams{});
  double previous = verify_bound(inst, r.signs, 0.02).value;
  while (inst.entries.size() > 1) {
    inst.entries.erase(inst.entries.begin() + static_cast<std::ptrdiff_t>(inst.entries.size() / 2));
    const double now = verify_bound(inst, r.signs, 0.02).value;
    CHECK(now <= previous);
    previous = now;
  }
}

TEST_CASE("retry exhaustion reports the stage") {
  const auto inst = make_structured_instance(4, 64, 2.0, 2.0, 1.0);
  SolverParams params;
  params.k_policy = KPolicy::fixed(4);
  params.sigma_scale = 1e-4;
  params.max_retries = 3;
  try {
    solve_signs(inst, params);
    FAIL("expected a solver failure");
  } catch (const BlockSamplingFailure& e) {
    CHECK(e.level() == 0);
    CHECK(e.block() >= 0);
    CHECK(e.best_sample().size() == 4);
    CHECK(e.code() == ExitCode::kSolverFailure);
  }
}

TEST_CASE("parameter ranges") {
  const auto inst = two_by_one();
  SolverParams params;
  params.alpha = 0.98;
  CHECK_THROWS_AS(solve_signs(inst, params), DomainError);
  params = SolverParams{};
  params.beta = 0.05;
  CHECK_THROWS_AS(solve_signs(inst, params), DomainError);
  CHECK(choose_k(KPolicy::paper(), 100, 1.0, 0.02, 2.0, std::log(2.0)) >= 2);
  CHECK(choose_k(KPolicy::fixed(500), 100, 1.0, 0.02, 2.0, std::log(2.0)) == 100);
}
