#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "uniconv/errors.hpp"
#include "uniconv/homeo.hpp"

using namespace uniconv;
using namespace uniconv::homeo;
using funcspace::FunctionSpec;

namespace {

ThetaMap random_theta(int depth, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  ThetaMap t = DyadicField::constant(depth, 0.5);
  for (std::size_t i = 1; i < t.values.size(); ++i) t.values[i] = dist(gen);
  return t;
}

}  // namespace

TEST_CASE("building psi inverse") {
  for (int n : {0, 1, 5, 12}) {
    const auto h = build_psi_inverse(DyadicField::constant(12, 0.5), n);
    for (std::size_t k = 0; k < h.inverse_breakpoints().size(); ++k) {
      CHECK(h.inverse_breakpoints()[k] == std::ldexp(static_cast<double>(k), -n));
    }
  }
  ThetaMap theta = DyadicField::constant(3, 0.5);
  theta[{1, 1}] = 0.6;
  CHECK(build_psi_inverse(theta, 1).inverse(0.5) == doctest::Approx(0.6));
  theta[{1, 2}] = 0.5;
  CHECK(build_psi_inverse(theta, 2).inverse(0.25) == doctest::Approx(0.3));
  theta[{3, 3}] = 0.8;
  CHECK_THROWS_AS(build_psi_inverse(theta, 3), InvariantError);
  CHECK_THROWS_AS(build_psi_inverse(theta, 4), DomainError);
}

TEST_CASE("forward and inverse evaluation") {
  const auto id = DyadicHomeomorphism::identity(4);
  CHECK(id.forward(0.3) == doctest::Approx(0.3));
  ThetaMap theta = DyadicField::constant(1, 0.5);
  theta[{1, 1}] = 0.6;
  CHECK(eval_forward(build_psi_inverse(theta, 1), 0.6) == doctest::Approx(0.5));

  const auto h = build_psi_inverse(random_theta(10, 0.25, 0.75, 4), 10);
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = unit(gen);
    worst = std::max(worst, std::abs(h.forward(h.inverse(x)) - x));
    worst = std::max(worst, std::abs(h.inverse(h.forward(x)) - x));
  }
  CHECK(worst < 1e-12);
  CHECK(h.forward(0.0) == 0.0);
  CHECK(h.forward(1.0) == 1.0);
  CHECK_THROWS_AS(h.forward(1.5), DomainError);
}

TEST_CASE("stabilization across depths") {
  const auto theta = random_theta(12, 0.25, 0.75, 77);
  const auto coarse = build_psi_inverse(theta, 6);
  const auto fine = build_psi_inverse(theta, 12);
  for (std::size_t k = 0; k < coarse.inverse_breakpoints().size(); ++k) {
    CHECK(coarse.inverse_breakpoints()[k] == fine.inverse_breakpoints()[k << 6]);
  }
}

TEST_CASE("locality of psi inverse") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto theta = random_theta(9, 0.25, 0.75, seed);
    const auto whole = build_psi_inverse(theta, 9);
    for (int n = 0; n <= 3; ++n) {
      for (std::int64_t k = 1; k <= (std::int64_t{1} << n); ++k) {
        const DyadicInterval cell{k, n};
        const auto local = build_psi_inverse(locality_restrict(theta, cell), 9 - n);
        const double a = whole.inverse(cell.lo());
        const double b = whole.inverse(cell.hi());
        double worst = 0.0;
        for (int p = 0; p <= 64; ++p) {
          const double t = p / 64.0 + (p < 64 ? 0.0031 : 0.0);
          worst = std::max(worst, std::abs(whole.inverse(cell.map(t)) - (a + (b - a) * local.inverse(t))));
        }
        CHECK(worst < 1e-12);
      }
    }
  }
  const auto half = locality_restrict(DyadicField::constant(6, 0.5), {3, 2});
  CHECK(half.depth == 4);
  for (std::size_t i = 1; i < half.values.size(); ++i) CHECK(half.values[i] == 0.5);
}

TEST_CASE("derivative profile") {
  for (double s : DyadicHomeomorphism::identity(5).derivative_profile()) CHECK(s == doctest::Approx(1.0));
  ThetaMap theta = DyadicField::constant(1, 0.5);
  theta[{1, 1}] = 0.6;
  const auto slopes = derivative_profile(build_psi_inverse(theta, 1));
  CHECK(slopes[0] == doctest::Approx(1.2));
  CHECK(slopes[1] == doctest::Approx(0.8));
  const auto random = build_psi_inverse(random_theta(11, 0.25, 0.75, 5), 11);
  double total = 0.0;
  for (double s : random.derivative_profile()) {
    CHECK(s > 0.0);
    total += std::ldexp(s, -11);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Holder checks") {
  const auto id = check_holder(DyadicHomeomorphism::identity(10), true);
  CHECK(id.pass);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = check_holder(build_psi_inverse(random_theta(14, 0.375, 0.625, seed), 14), false);
    CHECK(r.dyadic_pass);
    CHECK(r.pass);
  }
  const auto extreme = check_holder(build_psi_inverse(DyadicField::constant(14, 0.375), 14), false);
  CHECK(extreme.dyadic_pass);
  const auto bad = check_holder(build_psi_inverse(DyadicField::constant(6, 0.74), 6), false);
  CHECK_FALSE(bad.pass);
  CHECK(bad.first_failing_m == 1);
}

TEST_CASE("theta from tau") {
  const auto f = haar::haar_coefficients(FunctionSpec::parse("haar:1:0").affine(1.0 / std::sqrt(2.0), 0.0), 6);
  TauMap tau = DyadicField::constant(6, 0.0);
  const auto zero = theta_from_tau(f, tau, 0.1);
  for (std::size_t i = 1; i < zero.values.size(); ++i) CHECK(zero.values[i] == 0.5);
  tau[{1, 1}] = 1.0;
  CHECK(theta_from_tau(f, tau, 0.1)({1, 1}) == doctest::Approx(0.55));
  CHECK_THROWS_AS(theta_from_tau(f, tau, 1.0), ContractError);

  const auto constant = haar::haar_coefficients(FunctionSpec::constant(0.3), 6);
  tau = DyadicField::constant(6, 1.0);
  const auto h = build_psi_inverse(theta_from_tau(constant, tau, 0.5), 6);
  for (std::size_t k = 0; k < h.inverse_breakpoints().size(); ++k) {
    CHECK(h.inverse_breakpoints()[k] == std::ldexp(static_cast<double>(k), -6));
  }
}

TEST_CASE("derivative bound with the frozen constant") {
  const auto f = FunctionSpec::standard().affine(0.5, -0.25);
  const auto table = haar::haar_coefficients(f, 10);
  const double eta = std::min(0.5, admissible_eta_bound(table));
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    TauMap tau = DyadicField::constant(10, 0.0);
    for (std::size_t i = 1; i < tau.values.size(); ++i) tau.values[i] = unit(gen);
    const auto h = build_psi_inverse(theta_from_tau(table, tau, eta), 10);
    const auto report = check_derivative_bound(h, table, eta);
    CHECK(report.pass);
    CHECK(check_holder(h, false).dyadic_pass);
  }
}

TEST_CASE("homeomorphism CSV round trip") {
  const auto h = build_psi_inverse(random_theta(5, 0.3, 0.7, 1), 5);
  std::stringstream buffer;
  write_homeo_csv(buffer, h);
  const auto back = read_homeo_csv(buffer);
  CHECK(back.inverse_breakpoints() == h.inverse_breakpoints());
}
