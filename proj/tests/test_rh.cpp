#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "uniconv/errors.hpp"
#include "uniconv/rh.hpp"

using namespace uniconv;
using namespace uniconv::rh;
using funcspace::FunctionSpec;

namespace {

// h_[0,1] / sqrt(2): q(1/2) = 1/2 and q vanishes below.
FunctionSpec half_haar() { return FunctionSpec::builtin("haar", {1, 0, std::sqrt(0.5)}); }

RHRestrictor halves(int depth, double tau_half) {
  RHRestrictor r = RHRestrictor::unrestricted(depth);
  r[{1, 1}] = {tau_half, tau_half};
  r.partition = {{1, 1}, {2, 1}};
  return r;
}

}  // namespace

TEST_CASE("sample_tau") {
  RHRestrictor frozen = RHRestrictor::unrestricted(5);
  for (auto& iv : frozen.intervals) iv = {0.0, 0.0};
  for (double t : sample_tau(frozen, 7).values) CHECK(t == 0.0);

  const RHRestrictor free = RHRestrictor::unrestricted(4);
  const auto a = sample_tau(free, 99);
  const auto b = sample_tau(free, 99);
  CHECK(a.values == b.values);
  for (std::size_t h = 1; h < a.values.size(); ++h) CHECK(std::abs(a.values[h]) <= 1.0);

  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int s = 0; s < n; ++s) {
    const double t = sample_tau(free, 1000 + s)({1, 1});
    sum += t;
    sumsq += t * t;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sumsq / n - mean * mean) / (n - 1));
  CHECK(std::abs(mean) <= 3.0 * se);

  RHRestrictor narrow = RHRestrictor::unrestricted(3);
  narrow[{3, 3}] = {0.25, 0.5};
  for (std::uint64_t s = 0; s < 50; ++s) {
    const double t = sample_tau(narrow, s)({3, 3});
    CHECK(t >= 0.25);
    CHECK(t <= 0.5);
  }
}

TEST_CASE("phi_inverse_partition") {
  const auto table = haar::haar_coefficients(half_haar(), 4);
  CHECK(table.q(DyadicRational{1, 1}) == doctest::Approx(0.5));

  const auto trivial = phi_inverse_partition(RHRestrictor::unrestricted(5), table, 0.1);
  REQUIRE(trivial.size() == 1);
  CHECK(trivial[0].lo == 0.0);
  CHECK(trivial[0].hi == 1.0);

  const auto centred = phi_inverse_partition(halves(5, 0.0), table, 0.1);
  REQUIRE(centred.size() == 2);
  CHECK(centred[0].hi == 0.5);
  CHECK(centred[1].lo == 0.5);

  const auto shifted = phi_inverse_partition(halves(5, 1.0), table, 0.1);
  CHECK(shifted[0].hi == doctest::Approx(0.55).epsilon(1e-15));

  RHRestrictor loose = halves(5, 0.0);
  loose[{1, 1}] = {-1.0, 1.0};
  CHECK_THROWS_AS(phi_inverse_partition(loose, table, 0.1), InvariantError);

  RHRestrictor gap = halves(5, 0.0);
  gap.partition = {{1, 1}};
  CHECK_THROWS_AS(phi_inverse_partition(gap, table, 0.1), InvariantError);

  // Four quarters: the deeper split uses the outer breakpoints found first.
  RHRestrictor quarters = RHRestrictor::unrestricted(5);
  quarters[{1, 1}] = {1.0, 1.0};
  quarters[{1, 2}] = {0.0, 0.0};
  quarters[{3, 2}] = {-1.0, -1.0};
  quarters.partition = {{1, 2}, {2, 2}, {3, 2}, {4, 2}};
  const auto q4 = phi_inverse_partition(quarters, table, 0.2);
  CHECK(q4[0].hi == doctest::Approx(0.3));
  CHECK(q4[1].hi == doctest::Approx(0.6));
  CHECK(q4[2].hi == doctest::Approx(0.8));
  CHECK(q4[3].hi == 1.0);
}

TEST_CASE("type check") {
  const auto table = haar::haar_coefficients(half_haar(), 4);
  CHECK(check_type(RHRestrictor::unrestricted(5), table, 0.1).valid);

  RHRestrictor r = halves(5, 0.0);
  r.delta = 0.5;
  CHECK(check_type(r, table, 0.1).valid);
  r.delta = 0.4;
  CHECK_FALSE(check_type(r, table, 0.1).valid);

  RHRestrictor inner = RHRestrictor::unrestricted(5);
  inner[{3, 3}] = {0.0, 0.5};
  const auto rep = check_type(inner, table, 0.1);
  CHECK_FALSE(rep.valid);
  CHECK(rep.detail.find("restricted") != std::string::npos);

  RHRestrictor m1 = RHRestrictor::unrestricted(5);
  m1.m = 1;
  m1[{1, 1}] = {0.5, 1.0};
  CHECK(check_type(m1, table, 0.1).valid);
  m1[{1, 1}] = {0.25, 0.75};
  CHECK_FALSE(check_type(m1, table, 0.1).valid);
  m1[{1, 1}] = {0.6, 0.6};
  CHECK_FALSE(check_type(m1, table, 0.1).valid);
  CHECK(check_type(m1, table, 0.1, true).valid);
}

TEST_CASE("neighbourhoods") {
  const std::vector<Span> cells{{0.0, 0.2}, {0.2, 0.5}, {0.5, 0.7}, {0.7, 1.0}};
  CHECK(locate_cell(cells, 0.0) == 0);
  CHECK(locate_cell(cells, 0.2) == 1);
  CHECK(locate_cell(cells, 0.69) == 2);
  CHECK(locate_cell(cells, 1.0) == 3);
  CHECK(in_neighbourhood(cells, 3, 0.1));
  CHECK(in_neighbourhood(cells, 1, 0.1));
  CHECK_FALSE(in_neighbourhood(cells, 2, 0.1));
}

TEST_CASE("expectation field") {
  const FunctionSpec c = FunctionSpec::constant(0.3);
  const auto ct = haar::haar_coefficients(c, 5);
  const auto est = expectation_field(c, ct, RHRestrictor::unrestricted(6), 1.0, {0.0, 0.1, 0.7, 1.0}, 64, 3);
  for (const auto& e : est) {
    CHECK(e.mean == 0.3);
    CHECK(e.std_error == 0.0);
    CHECK(e.samples == 64);
  }

  const FunctionSpec f = FunctionSpec::standard();
  const auto table = haar::haar_coefficients(f, 7);
  const double eta = homeo::admissible_eta_bound(table);
  const auto ends = expectation_field(f, table, RHRestrictor::unrestricted(8), eta, {0.0, 1.0}, 32, 5);
  CHECK(ends[0].mean == f(0.0));
  CHECK(ends[1].mean == f(1.0));
  CHECK(ends[0].std_error == 0.0);

  RHRestrictor frozen = RHRestrictor::unrestricted(8);
  for (std::size_t h = 1; h < frozen.intervals.size(); ++h) {
    const double t = std::sin(static_cast<double>(h));
    frozen.intervals[h] = {t, t};
  }
  const auto phi = homeo::build_psi_inverse(homeo::theta_from_tau(table, sample_tau(frozen, 0), eta), 8);
  const auto fixed = expectation_field(f, table, frozen, eta, {0.13, 0.5, 0.91}, 16, 1);
  CHECK(fixed[0].mean == f(phi.forward(0.13)));
  CHECK(fixed[2].mean == f(phi.forward(0.91)));
  CHECK(fixed[1].std_error == 0.0);

  // Same seed, ordered functions, ordered fields.
  const FunctionSpec g = f.affine(1.0, 0.05);
  const std::vector<double> xs{0.2, 0.4, 0.6};
  const auto ef = expectation_field(f, table, RHRestrictor::unrestricted(8), eta, xs, 64, 11);
  const auto eg = expectation_field(g, table, RHRestrictor::unrestricted(8), eta, xs, 64, 11);
  for (std::size_t k = 0; k < xs.size(); ++k) CHECK(ef[k].mean <= eg[k].mean);

  const auto seq = expectation_field(f, table, RHRestrictor::unrestricted(8), eta, xs, 100, 4, 1);
  const auto par = expectation_field(f, table, RHRestrictor::unrestricted(8), eta, xs, 100, 4, 3);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    CHECK(seq[k].mean == par[k].mean);
    CHECK(seq[k].std_error == par[k].std_error);
  }
}

TEST_CASE("martingale identity") {
  const auto flat = haar::haar_coefficients(FunctionSpec::constant(1.0), 5);
  const auto exact = martingale_check(flat, RHRestrictor::unrestricted(6), 1.0, 100, 1);
  CHECK(exact.max_abs_dev == 0.0);
  CHECK(exact.pass);

  const auto table = haar::haar_coefficients(half_haar(), 5);
  const double eta = homeo::admissible_eta_bound(table);
  const auto rep = martingale_check(table, RHRestrictor::unrestricted(6), eta, 100000, 2024);
  CHECK(rep.pass);
  CHECK(rep.max_abs_dev > 0.0);
  CHECK(rep.max_z <= 4.0);

  RHRestrictor restricted = RHRestrictor::unrestricted(6);
  restricted[{1, 1}] = {0.0, 1.0};
  CHECK_THROWS_AS(martingale_check(table, restricted, eta, 10, 1), ContractError);
}

TEST_CASE("delta_i") {
  const FunctionSpec f = half_haar();
  const auto table = haar::haar_coefficients(f, 6);
  const double eta = homeo::admissible_eta_bound(table);
  const RHRestrictor r = RHRestrictor::unrestricted(7);

  // phi(1/2) < 1/2 exactly when tau(1/2) > 0, so Delta(1/2) = h(0)/sqrt(2).
  const auto centre = delta_i(f, table, r, 0, eta, {0.5}, 256, 3);
  CHECK(centre.mean[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(centre.plus_mean[0] == doctest::Approx(std::sqrt(0.5)));
  CHECK(centre.minus_mean[0] == doctest::Approx(-std::sqrt(0.5)));

  const std::vector<double> xs{0.1, 0.35, 0.45, 0.55, 0.8};
  const auto d = delta_i(f, table, r, 0, eta, xs, 4096, 17);
  const auto plain = cell_expectation(f, table, r, 0, eta, xs, 4096, 23);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    CHECK(d.mean[k] == doctest::Approx(0.5 * (d.plus_mean[k] - d.minus_mean[k])).epsilon(1e-12));
    const double pooled = 0.5 * (d.plus_mean[k] + d.minus_mean[k]);
    const double gap = std::abs(pooled - plain.mean[k]);
    const double se = std::sqrt(2.0) * plain.std_error[k];
    CHECK(gap <= 4.0 * se + 1e-12);
  }

  const FunctionSpec c = FunctionSpec::constant(-0.2);
  const auto ct = haar::haar_coefficients(c, 6);
  const auto zero = delta_i(c, ct, r, 0, 1.0, xs, 64, 1);
  for (double v : zero.mean) CHECK(v == 0.0);

  RHRestrictor frozen = r;
  frozen[{1, 1}] = {0.25, 0.25};
  frozen.m = 60;
  const auto still = delta_i(f, table, frozen, 0, eta, xs, 64, 1);
  for (double v : still.mean) CHECK(v == 0.0);

  RHRestrictor split = halves(7, 0.0);
  split.delta = 1.0;
  CHECK_THROWS_AS(delta_i(f, table, split, 0, eta, {0.25}, 8, 1), ContractError);

  const auto seq = delta_i(f, table, r, 0, eta, xs, 300, 5, 1);
  const auto par = delta_i(f, table, r, 0, eta, xs, 300, 5, 4);
  CHECK(seq.mean == par.mean);
  CHECK(seq.std_error == par.std_error);
}

TEST_CASE("w vectors") {
  const FunctionSpec f = FunctionSpec::standard();
  const auto table = haar::haar_coefficients(f, 7);
  const double eta = homeo::admissible_eta_bound(table);
  const RHRestrictor r = RHRestrictor::unrestricted(8);
  const Span all{0.0, 1.0};
  const auto xs = midpoint_nodes(all, quadrature_nodes_needed(1.0, 5));
  const auto d = delta_i(f, table, r, 0, eta, xs, 512, 9);

  CellField none = d;
  std::fill(none.mean.begin(), none.mean.end(), 0.0);
  CHECK(w_vector(none, 0.25, 3, 0, 0, WKind::kZero, {}) == std::complex<double>(0.0));
  CHECK(w_vector(d, 0.25, 4, 0, 0, WKind::kZero, {0.1, true}) == std::complex<double>(0.0));
  CHECK(w_vector(d, 0.25, 3, 0, 0, WKind::kZero, {0.1, true}) != std::complex<double>(0.0));

  // D_{2^u} = D_{2^{u-1}} + the two blocks of length 2^{u-1} starting after 2^{u-1}.
  for (int u = 1; u <= 5; ++u) {
    for (double xi : {0.0, 0.3, 0.875}) {
      const auto top = w_vector(d, xi, u, 0, 0, WKind::kZero, {});
      const std::int64_t t = std::int64_t{1} << (u - 1);
      const auto sum = w_vector(d, xi, u - 1, 0, 0, WKind::kZero, {}) +
                       w_vector(d, xi, u, u - 1, t, WKind::kPlus, {}) +
                       w_vector(d, xi, u, u - 1, t, WKind::kMinus, {});
      CHECK(std::abs(top - sum) <= 1e-10);
      CHECK(std::abs(top.imag()) <= 1e-10);
    }
  }

  // The spectral route gives the same numbers.
  const auto sp = spectrum(d, 32);
  for (double xi : {0.0, 0.3}) {
    std::complex<double> w0 = sp.c[0];
    for (std::int64_t z = 1; z <= 8; ++z) w0 += 2.0 * (sp.c[z] * std::polar(1.0, -2.0 * std::numbers::pi * z * xi)).real();
    CHECK(std::abs(w0 - w_vector(d, xi, 3, 0, 0, WKind::kZero, {})) <= 1e-10);
    std::complex<double> blk = 0.0;
    for (std::int64_t z = 9; z <= 12; ++z) blk += sp.c[z] * std::polar(1.0, -2.0 * std::numbers::pi * z * xi);
    CHECK(std::abs(blk - w_vector(d, xi, 4, 2, 8, WKind::kPlus, {})) <= 1e-10);
  }
  for (double se : sp.c_stderr) CHECK(se >= 0.0);

  CellField coarse = d;
  coarse.xs.resize(8);
  coarse.mean.resize(8);
  CHECK_THROWS_AS(w_vector(coarse, 0.0, 2, 0, 0, WKind::kZero, {}), ResolutionError);
}

TEST_CASE("restrictor json") {
  RHRestrictor r = halves(6, 0.25);
  r[{1, 2}] = {-1.0, 0.0};
  r.m = 0;
  r.delta = 0.625;
  std::stringstream ss;
  write_restrictor_json(ss, r);
  const RHRestrictor back = read_restrictor_json(ss);
  CHECK(back.depth == 6);
  CHECK(back.intervals == r.intervals);
  CHECK(back.partition == r.partition);
  CHECK(back.m == 0);
  CHECK(back.delta == 0.625);

  std::stringstream bad(R"({"depth": 3, "entries": [{"k":1,"n":1,"a":0.5,"b":0.1}], "partition": [{"k":1,"n":0}], "m": -1, "delta": 1})");
  CHECK_THROWS_AS(read_restrictor_json(bad), DomainError);
  std::stringstream junk("{not json");
  CHECK_THROWS_AS(read_restrictor_json(junk), DomainError);
}
