#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uniconv/errors.hpp"
#include "uniconv/reducer.hpp"

using namespace uniconv;
using namespace uniconv::reducer;
using funcspace::FunctionSpec;

namespace {

ReductionConfig small_config() {
  ReductionConfig c;
  c.depth = 6;
  c.u_max = 3;
  c.m_max = 2;
  c.delta_min = 0.3;
  c.mc_samples = 256;
  c.seed = 5;
  return c;
}

FunctionSpec bump() { return FunctionSpec::builtin("cusp", {0.4}).affine(0.4, 0.0); }

}  // namespace

TEST_CASE("r values") {
  CHECK(r_values(1, 4) == std::vector<std::int64_t>{1});
  CHECK(r_values(3, 0) == std::vector<std::int64_t>{4, 5, 6, 7});
  const auto r = r_values(6, 4);
  REQUIRE(r.size() == 4);
  CHECK(r.front() == 32);
  CHECK(r.back() == 63);
  CHECK_THROWS_AS(solver_kind_from_string("simplex"), DomainError);
  CHECK(solver_kind_from_string(to_string(SolverKind::kGreedy)) == SolverKind::kGreedy);
}

TEST_CASE("config validation") {
  ReductionConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.delta_min = 1.0 / 32.0;  // not above 2^{-depth+2}
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = small_config();
  c.mc_samples = 1;
  CHECK_THROWS_AS(c.validate(), DomainError);
}

TEST_CASE("constant function reduces to nothing") {
  const FunctionSpec f = FunctionSpec::constant(0.3);
  ReductionConfig c = small_config();
  const auto haar = haar::haar_coefficients(f, c.depth - 1);
  const auto r = rh::RHRestrictor::unrestricted(c.depth);
  const auto step = reduce_step(r, f, haar, 1.0, c);
  CHECK(step.report.max_error == 0.0);
  CHECK(step.report.two_path_pass);
  CHECK(step.restrictor.m == 0);

  const auto res = run_pipeline(f, c);
  for (int k = 0; k <= 64; ++k) {
    const double x = k / 64.0;
    CHECK(res.phi.forward(x) == doctest::Approx(x).epsilon(1e-12));
  }
  for (const auto& row : evaluate_result(f, res.phi, 3, 8)) {
    CHECK(row.xi_max_dev == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
    CHECK(row.baseline_dev == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("nothing to reduce") {
  const FunctionSpec f = bump();
  const auto c = small_config();
  const auto haar = haar::haar_coefficients(f, c.depth - 1);
  auto r = rh::RHRestrictor::unrestricted(c.depth);
  r[{1, 1}] = {0.0, 0.0};
  CHECK_THROWS_AS(reduce_step(r, f, haar, 1.0, c), ContractError);
}

TEST_CASE("instance layout and budget") {
  const FunctionSpec f = bump();
  ReductionConfig c = small_config();
  c.u_max = 2;
  const auto haar = haar::haar_coefficients(f, c.depth - 1);
  const double eta = homeo::admissible_eta_bound(haar);
  const auto r = rh::RHRestrictor::unrestricted(c.depth);
  const auto inst = assemble_instance(r, f, haar, eta, c);
  CHECK(inst.instance.n == 1);
  // u = 1: w0 only on 8 xi; u = 2: w0 and Re/Im of the s = 0, t = 2 block on 16 xi.
  CHECK(inst.keys.size() == 8 + 16 * 3);
  int blocks = 0;
  for (const auto& k : inst.keys) {
    if (k.kind != EntryKey::Kind::kZero) {
      CHECK(k.u == 2);
      CHECK(k.s == 0);
      CHECK(k.t == 2);
      ++blocks;
    }
  }
  CHECK(blocks == 32);
  const auto check = signsolver::check_instance(inst.instance, c.solver.alpha);
  CHECK(check.valid);
  for (const auto& row : inst.budget) {
    CHECK(static_cast<double>(row.count) <= inst.instance.M * std::pow(static_cast<double>(row.b), kGamma));
  }
}

TEST_CASE("one reduction step") {
  const FunctionSpec f = bump();
  const auto c = small_config();
  const auto haar = haar::haar_coefficients(f, c.depth - 1);
  const double eta = homeo::admissible_eta_bound(haar);
  const auto r = rh::RHRestrictor::unrestricted(c.depth);
  const auto step = reduce_step(r, f, haar, eta, c);
  const auto& j = step.restrictor;
  CHECK(j.m == 0);
  for (std::size_t h = 1; h < r.intervals.size(); ++h) CHECK(r.intervals[h].contains(j.intervals[h]));
  CHECK(j.intervals[1].length() == doctest::Approx(1.0));
  CHECK(rh::check_type(j, haar, eta).valid);
  CHECK(step.report.two_path_checked);
  CHECK(step.report.two_path_pass);
  CHECK(step.report.signs.size() == 1);
  // At delta = 1 every cell is in every neighbourhood, so all Dirichlet integrals are zeroed.
  CHECK(step.report.max_error == 0.0);
}

TEST_CASE("later stages see nonzero errors") {
  ReductionConfig c = small_config();
  c.depth = 8;
  c.delta_min = 0.2;
  c.m_max = 1;
  const auto res = run_pipeline(bump(), c);
  REQUIRE(res.stages.size() >= 3);
  double worst = 0.0;
  for (const auto& s : res.steps) {
    worst = std::max(worst, s.max_error);
    CHECK(s.two_path_pass);
  }
  CHECK(worst > 0.0);
  CHECK(res.mc_budget > 0.0);
}

TEST_CASE("collapse and split") {
  const FunctionSpec f = bump();
  ReductionConfig c = small_config();
  c.m_max = 0;
  const auto haar = haar::haar_coefficients(f, c.depth - 1);
  const double eta = homeo::admissible_eta_bound(haar);
  const auto st = collapse_stage(rh::RHRestrictor::unrestricted(c.depth), f, haar, eta, c);
  CHECK(st.steps.size() == 1);
  CHECK(st.restrictor.intervals[1].degenerate());
  CHECK(rh::check_type(st.restrictor, haar, eta, true).valid);

  const auto split = split_partition(st.restrictor, haar, eta);
  CHECK(split.partition.size() == 2);
  CHECK(split.delta == doctest::Approx(0.625));
  CHECK(split.m == -1);

  CHECK_THROWS_AS(split_partition(rh::RHRestrictor::unrestricted(c.depth), haar, eta), ContractError);
}

TEST_CASE("split of a flat function halves the cells") {
  const FunctionSpec f = FunctionSpec::constant(0.2);
  const auto haar = haar::haar_coefficients(f, 5);
  auto r = rh::RHRestrictor::unrestricted(6);
  r.intervals[1] = {0.0, 0.0};
  const auto s = split_partition(r, haar, 1.0);
  const auto cells = rh::phi_inverse_partition(s, haar, 1.0);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].width() == doctest::Approx(0.5));
  CHECK(cells[1].width() == doctest::Approx(0.5));
}

TEST_CASE("narrow cells are carried over") {
  const FunctionSpec f = FunctionSpec::constant(0.2);
  const auto haar = haar::haar_coefficients(f, 5);
  auto r = rh::RHRestrictor::unrestricted(6);
  r.intervals[1] = {0.0, 0.0};
  r.partition = {{1, 1}, {2, 1}};
  r.delta = 0.625;
  r.intervals[2] = {0.0, 0.0};
  r.intervals[3] = {0.0, 0.0};
  r.delta = 1.0;  // cells of width 1/2 are not wide at delta = 1
  const auto s = split_partition(r, haar, 1.0);
  CHECK(s.partition.size() == 2);
}

TEST_CASE("evaluation of a trigonometric polynomial") {
  const FunctionSpec f = FunctionSpec::builtin("cos", {1.0});
  const auto id = homeo::DyadicHomeomorphism::identity(6);
  for (const auto& row : evaluate_result(f, id, 3, 10)) {
    CHECK(row.xi_max_dev < 1e-5);
    CHECK(row.baseline_dev < 1e-5);
  }
  CHECK_THROWS_AS(evaluate_result(f, id, 3, 4), ResolutionError);
}

TEST_CASE("determinism across thread counts") {
  const FunctionSpec f = bump();
  ReductionConfig c = small_config();
  c.m_max = 1;
  const auto a = run_pipeline(f, c);
  c.threads = 3;
  const auto b = run_pipeline(f, c);
  std::ostringstream ja, jb;
  write_reports_json(ja, a);
  write_reports_json(jb, b);
  CHECK(ja.str() == jb.str());
  CHECK(a.phi.inverse_breakpoints() == b.phi.inverse_breakpoints());
}
