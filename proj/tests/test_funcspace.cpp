#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "uniconv/errors.hpp"
#include "uniconv/funcspace.hpp"

using namespace uniconv;
using namespace uniconv::funcspace;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Reference integral of g(x) D_r(x - xi) by a fine midpoint rule.
double brute_partial_sum(const FunctionSpec& g, std::int64_t r, double xi, int points = 1 << 16) {
  double acc = 0.0;
  for (int i = 0; i < points; ++i) {
    const double x = (i + 0.5) / points;
    double kernel = 1.0;
    for (std::int64_t l = 1; l <= r; ++l) kernel += 2.0 * std::cos(kTwoPi * static_cast<double>(l) * (x - xi));
    acc += g(x) * kernel;
  }
  return acc / points;
}

double direct_dirichlet(std::int64_t r, double x) {
  double acc = 1.0;
  for (std::int64_t l = 1; l <= r; ++l) acc += 2.0 * std::cos(kTwoPi * static_cast<double>(l) * x);
  return acc;
}

}  // namespace

TEST_CASE("evaluation of built-ins and samples") {
  CHECK(FunctionSpec::constant(0.3)(0.77) == doctest::Approx(0.3));
  CHECK(FunctionSpec::sampled(1, {0.0, 1.0, 0.0})(0.25) == doctest::Approx(0.5));
  CHECK(FunctionSpec::parse("sin1")(0.25) == doctest::Approx(1.0));
  CHECK(FunctionSpec::parse("tent")(0.75) == doctest::Approx(0.5));
  CHECK(FunctionSpec::parse("haar:1:0")(0.2) == doctest::Approx(1.0));
  CHECK(FunctionSpec::parse("haar:1:0")(0.6) == doctest::Approx(-1.0));
  CHECK(FunctionSpec::standard()(1.0 / 3.0) == doctest::Approx(0.0));
  CHECK(FunctionSpec::standard()(1.0 / 3.0 + 0.5) == doctest::Approx(1.0));
  CHECK_THROWS_AS(FunctionSpec::constant(1.0)(1.5), DomainError);
  CHECK_THROWS_AS(FunctionSpec::constant(1.0)(-0.01), DomainError);
  CHECK_THROWS_AS(FunctionSpec::sampled(1, {0.0, 1.0, 0.5}), InvariantError);
  CHECK_THROWS_AS(FunctionSpec::sampled(2, {0.0, 1.0, 0.0}), InvariantError);
  CHECK_THROWS_AS(FunctionSpec::parse("sin:x"), DomainError);
}

TEST_CASE("exact integrals agree with fine quadrature") {
  for (std::string name : {"cusp", "cusp:0.9", "tent", "sin:3", "cos:2", "haar:3:2:0.5", "randhaar:4:6"}) {
    const auto f = FunctionSpec::parse(name);
    for (auto [a, b] : {std::pair{0.0, 1.0}, std::pair{0.1, 0.45}, std::pair{0.3, 0.97}}) {
      const int points = 1 << 18;
      double acc = 0.0;
      for (int i = 0; i < points; ++i) acc += f(a + (b - a) * (i + 0.5) / points);
      acc *= (b - a) / points;
      CAPTURE(name);
      CHECK(std::abs(f.integral(a, b) - acc) < 1e-5);  // midpoint rule error at jumps
    }
  }
}

TEST_CASE("affine images and restriction") {
  const auto f = FunctionSpec::parse("tent").affine(2.0, -1.0);
  CHECK(f(0.5) == doctest::Approx(1.0));
  CHECK(f.integral(0.0, 1.0) == doctest::Approx(0.0).epsilon(1e-14));
  const auto s = FunctionSpec::sampled(2, {0.0, 1.0, 3.0, 1.0, 0.0});
  const auto r = s.restrict_to(2, 1);
  CHECK(r.grid_depth() == 1);
  CHECK(r(0.0) == doctest::Approx(3.0));
  CHECK(r(0.25) == doctest::Approx(2.0));
}

TEST_CASE("modulus of continuity") {
  CHECK(modulus_of_continuity(FunctionSpec::constant(2.0), 0.1, 10) == 0.0);
  CHECK(modulus_of_continuity(FunctionSpec::sampled(1, {0.0, 1.0, 0.0}), 0.25, 10) == doctest::Approx(0.5));
  const double w = modulus_of_continuity(FunctionSpec::parse("sin1"), 0.01, 12);
  CHECK(w <= kTwoPi * 0.01);
  CHECK(w >= 0.9 * kTwoPi * 0.01);
  CHECK_THROWS_AS(modulus_of_continuity(FunctionSpec::parse("sin1"), 0.0, 10), DomainError);

  const auto cusp = FunctionSpec::standard();
  double previous = 0.0;
  for (double delta = 0.002; delta <= 0.5; delta += 0.0173) {
    const double now = modulus_of_continuity(cusp, delta, 10);
    CHECK(now >= previous);
    if (2.0 * delta <= 0.5) CHECK(modulus_of_continuity(cusp, 2.0 * delta, 10) <= 2.0 * now + 1e-3);
    previous = now;
  }
}

TEST_CASE("Dirichlet kernel") {
  CHECK(dirichlet_kernel(0, 0.37) == doctest::Approx(1.0));
  CHECK(dirichlet_kernel(2, 0.0) == doctest::Approx(5.0));
  CHECK(dirichlet_kernel(2, 3.0) == doctest::Approx(5.0));
  CHECK_THROWS_AS(dirichlet_kernel(-1, 0.1), DomainError);
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const double x = unit(gen);
    const std::int64_t r = static_cast<std::int64_t>(gen() % 40);
    CHECK(dirichlet_kernel(r, x) == doctest::Approx(direct_dirichlet(r, x)).epsilon(1e-9));
  }
  // D_r is a trigonometric polynomial: an equispaced rule with more than r nodes is exact.
  for (std::int64_t r = 1; r <= 8; ++r) {
    const int nodes = 64;
    double acc = 0.0;
    for (int k = 0; k < nodes; ++k) acc += dirichlet_kernel(r, (k + 0.3) / nodes);
    CHECK(acc / nodes == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("trigonometric block sums") {
  CHECK(std::abs(trig_block_sum(0, 0, 0.0, BlockSign::kPlus) - std::complex<double>(1.0, 0.0)) < 1e-14);
  CHECK(std::abs(trig_block_sum(3, 2, 0.0, BlockSign::kPlus) - std::complex<double>(4.0, 0.0)) < 1e-14);
  const auto plus = trig_block_sum(3, 2, 0.3, BlockSign::kPlus);
  const auto minus = trig_block_sum(3, 2, 0.3, BlockSign::kMinus);
  CHECK(std::abs(minus - std::conj(plus)) < 1e-13);
  for (int s = 0; s < 6; ++s) {
    for (std::int64_t t : {0, 5, 32, 100}) {
      const double x = 0.123 + 0.01 * s;
      std::complex<double> direct{0.0, 0.0};
      for (std::int64_t z = t + 1; z <= t + (1 << s); ++z) direct += std::polar(1.0, kTwoPi * z * x);
      CHECK(std::abs(trig_block_sum(t, s, x, BlockSign::kPlus) - direct) < 1e-11);
    }
  }
}

TEST_CASE("binary decomposition of the Dirichlet kernel") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::int64_t r = 1; r < 200; r += 7) {
    int u = 1;
    while ((std::int64_t{1} << u) <= r) ++u;
    const double x = unit(gen);
    double total = dirichlet_kernel(std::int64_t{1} << (u - 1), x);
    std::int64_t t = std::int64_t{1} << (u - 1);
    for (int s = u - 2; s >= 0; --s) {
      if (((r >> s) & 1) == 0) continue;
      total += (trig_block_sum(t, s, x, BlockSign::kPlus) + trig_block_sum(t, s, x, BlockSign::kMinus)).real();
      t += std::int64_t{1} << s;
    }
    CHECK(total == doctest::Approx(dirichlet_kernel(r, x)).epsilon(1e-10));
  }
}

TEST_CASE("partial and Cesaro sums") {
  CHECK(partial_sum(FunctionSpec::constant(0.7), 5, 0.31) == doctest::Approx(0.7));
  CHECK(partial_sum(FunctionSpec::parse("cos:1"), 1, 0.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(partial_sum(FunctionSpec::parse("cos:5"), 1, 0.42) == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  CHECK(cesaro_sum(FunctionSpec::constant(-0.2), 4, 0.9) == doctest::Approx(-0.2));
  CHECK(cesaro_sum(FunctionSpec::parse("cos:1"), 1, 0.0) == doctest::Approx(0.5).epsilon(1e-6));
  const auto cusp = FunctionSpec::standard();
  CHECK(cesaro_sum(cusp, 0, 0.2) == doctest::Approx(cusp.integral(0.0, 1.0)).epsilon(1e-6));

  // Exact for the interpolant: compare with a brute-force kernel integral.
  const auto tent = FunctionSpec::sampled(1, {0.0, 1.0, 0.0});
  const GridFunction tent_grid{1, {0.0, 1.0, 0.0}};
  for (double xi : {0.0, 0.21, 0.5}) {
    CHECK(partial_sum(sample(tent, 8), 7, xi) == doctest::Approx(brute_partial_sum(tent, 7, xi)).epsilon(1e-7));
  }
  CHECK_THROWS_AS(partial_sum(tent_grid, 1, 0.0), ResolutionError);
  CHECK_THROWS_AS(partial_sum(sample(tent, 3), 3, 0.0), ResolutionError);

  // Linearity.
  const auto g = sample(cusp, 10);
  const auto h = sample(FunctionSpec::parse("sin:3"), 10);
  GridFunction mix = g;
  for (std::size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = 2.0 * g.values[i] - 0.5 * h.values[i];
  CHECK(partial_sum(mix, 9, 0.4) ==
        doctest::Approx(2.0 * partial_sum(g, 9, 0.4) - 0.5 * partial_sum(h, 9, 0.4)).epsilon(1e-12));
}

TEST_CASE("Fourier coefficients of a non-periodic grid function") {
  const GridFunction ramp{6, [] {
                            std::vector<double> v(65);
                            for (int k = 0; k <= 64; ++k) v[k] = k / 64.0;
                            return v;
                          }()};
  const FourierSeries series(ramp, 3);
  // int_0^1 x e(-lx) dx = i / (2 pi l)
  CHECK(std::abs(series.coefficient(1) - std::complex<double>(0.0, 1.0 / kTwoPi)) < 1e-13);
  CHECK(std::abs(series.coefficient(-2) - std::complex<double>(0.0, -1.0 / (2 * kTwoPi))) < 1e-13);
  CHECK(series.coefficient(0).real() == doctest::Approx(0.5));
}

TEST_CASE("Bernstein globalization") {
  CHECK(bernstein_globalize(0.0, 1, 1) == 0.0);
  CHECK(bernstein_globalize(0.1, 3, 2) == doctest::Approx(0.4659).epsilon(1e-4));
  CHECK_THROWS_AS(bernstein_globalize(1.0, 4, 2), ContractError);
}

TEST_CASE("H^1/2 norm") {
  CHECK(h_half_norm({{0, {5.0, 0.0}}}) == 0.0);
  CHECK(h_half_norm({{1, {1.0, 0.0}}}) == doctest::Approx(1.0));
  CHECK(h_half_norm({{-2, {1.0, 0.0}}, {2, {1.0, 0.0}}}) == doctest::Approx(2.0));
}

TEST_CASE("grid CSV round trip") {
  const auto g = sample(FunctionSpec::standard(), 5);
  std::stringstream buffer;
  write_grid_csv(buffer, g);
  const auto back = read_grid_csv(buffer);
  CHECK(back.depth == 5);
  for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(back.values[i] == g.values[i]);
  std::stringstream bad("x,y\n0,1\n");
  CHECK_THROWS_AS(read_grid_csv(bad), DomainError);
  std::stringstream uneven("x,value\n0,0\n0.5,1\n0.75,0\n1,0\n");
  CHECK_THROWS_AS(read_grid_csv(uneven), DomainError);
}
