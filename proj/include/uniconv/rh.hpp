#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "uniconv/dyadic.hpp"
#include "uniconv/funcspace.hpp"
#include "uniconv/haar.hpp"
#include "uniconv/homeo.hpp"

namespace uniconv::rh {

/// Closed subinterval [a,b] of [-1,1]; a == b is a frozen parameter.
struct Interval {
  double a = -1.0;
  double b = 1.0;

  bool degenerate() const { return a == b; }
  double length() const { return b - a; }
  double mid() const { return 0.5 * (a + b); }
  Interval left_half() const { return {a, mid()}; }
  Interval right_half() const { return {mid(), b}; }
  bool contains(const Interval& o) const { return a <= o.a && o.b <= b; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// An interval I(d) for every dyadic rational of rank <= depth, a dyadic
/// partition of [0,1], the current value m and the scale delta.
struct RHRestrictor {
  int depth = 0;
  std::vector<Interval> intervals;  // heap-indexed, size 2^depth, index 0 unused
  std::vector<DyadicInterval> partition{DyadicInterval{1, 0}};
  int m = -1;
  double delta = 1.0;

  /// Every I(d) = [-1,1], trivial partition, m = -1, delta = 1.
  static RHRestrictor unrestricted(int depth);

  const Interval& operator()(const DyadicRational& d) const;
  Interval& operator[](const DyadicRational& d);
};

struct Span {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
};

/// Independent uniforms tau(d) in I(d) for every d of rank <= depth.
homeo::TauMap sample_tau(const RHRestrictor& r, std::uint64_t seed);

/// The deterministic preimages V_i of the partition cells, in partition order.
std::vector<Span> phi_inverse_partition(const RHRestrictor& r, const haar::HaarTable& f, double eta);

struct TypeReport {
  bool valid = true;
  std::string detail;
  std::vector<Span> cells;
};

/// Checks that r is of type (f, r.delta) with value r.m. With snapped_centers
/// the wide cells may carry a single point at their centre instead.
TypeReport check_type(const RHRestrictor& r, const haar::HaarTable& f, double eta, bool snapped_centers = false);

/// Index of the cell containing x (cells are half-open, the last one closed).
std::size_t locate_cell(const std::vector<Span>& cells, double x);

/// True when cell i is the cell containing xi or one of its two cyclic neighbours.
bool in_neighbourhood(const std::vector<Span>& cells, std::size_t i, double xi);

/// Cells with |V_i| > delta / 2.
std::vector<std::size_t> wide_cells(const RHRestrictor& r, const std::vector<Span>& cells);

struct ExpectationEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
};

/// Monte-Carlo E f(phi_I(x)) at depth r.depth; every sample evaluates one
/// homeomorphism at all xs.
std::vector<ExpectationEstimate> expectation_field(const funcspace::FunctionSpec& f, const haar::HaarTable& haar,
                                                   const RHRestrictor& r, double eta,
                                                   const std::vector<double>& xs, std::int64_t samples,
                                                   std::uint64_t seed, int threads = 1);

struct MartingaleReport {
  std::vector<double> mean;    // per-cell mean slope of psi^-1
  std::vector<double> std_error;
  double max_abs_dev = 0.0;    // max |mean - 1|
  double max_z = 0.0;          // max |mean - 1| / stderr (0/0 counted as 0)
  bool pass = true;            // every cell within 4 stderr
};

MartingaleReport martingale_check(const haar::HaarTable& f, const RHRestrictor& r, double eta,
                                  std::int64_t samples, std::uint64_t seed, int threads = 1);

/// Monte-Carlo estimates on the nodes of one cell V_i, with per-batch means
/// so that the standard error of any linear functional can be recovered.
struct CellField {
  std::size_t cell = 0;
  Span span;
  std::vector<double> xs;
  std::vector<double> mean;
  std::vector<double> std_error;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> batch_sizes;
  std::vector<std::vector<double>> batch_means;  // [batch][node]
  // Delta only: the two conditional fields F+ and F- (without h(xi)).
  std::vector<double> plus_mean;
  std::vector<double> minus_mean;
};

/// Delta_i = (F+ - F-)/2 at xs in V_i: the centre parameter of U_i is drawn
/// in the right half for F+ and mirrored into the left half for F-, all other
/// parameters shared. Requires |V_i| > delta/2.
CellField delta_i(const funcspace::FunctionSpec& f, const haar::HaarTable& haar, const RHRestrictor& r,
                  std::size_t i, double eta, const std::vector<double>& xs, std::int64_t samples,
                  std::uint64_t seed, int threads = 1);

/// E f(phi_I(x)) for xs in V_i, sampling only the parameters inside U_i.
CellField cell_expectation(const funcspace::FunctionSpec& f, const haar::HaarTable& haar, const RHRestrictor& r,
                           std::size_t i, double eta, const std::vector<double>& xs, std::int64_t samples,
                           std::uint64_t seed, int threads = 1);

/// Number of midpoint nodes needed on a cell of the given width for
/// frequencies up to 2^u: max(16, 4 (ceil(2^u width) + 1)).
std::size_t quadrature_nodes_needed(double width, int u);
std::vector<double> midpoint_nodes(const Span& span, std::size_t count);

/// c(z) = sum_k h g(x_k) e(z x_k) for 0 <= z <= z_max, i.e. the midpoint rule
/// for int g(x) e(zx) dx over the cell, with per-batch copies.
struct Spectrum {
  std::int64_t z_max = 0;
  std::vector<std::complex<double>> c;
  std::vector<double> c_stderr;                         // batch-means stderr of |c(z)|
  std::vector<std::vector<std::complex<double>>> batch;  // [batch][z]
  std::vector<std::int64_t> batch_sizes;
};

Spectrum spectrum(const CellField& field, std::int64_t z_max);

enum class WKind { kZero, kPlus, kMinus };

/// Zeroing rule: w = 0 when 2^u > 1/delta and V_i lies in B_xi.
struct Zeroing {
  double delta = 1.0;
  bool near = false;
  bool applies(int u) const { return near && std::ldexp(1.0, u) * delta > 1.0; }
};

/// Quadrature of a Delta field against D_{2^u}(x - xi) (kZero) or against the
/// frequency block of trig_block_sum(t, s) shifted by xi (kPlus / kMinus).
std::complex<double> w_vector(const CellField& delta, double xi, int u, int s, std::int64_t t, WKind kind,
                              const Zeroing& zeroing);

/// Batch-means standard error of a linear statistic given its per-batch values.
double batch_stderr(const std::vector<double>& batch_values, const std::vector<std::int64_t>& batch_sizes,
                    double overall);

void write_restrictor_json(std::ostream& out, const RHRestrictor& r);
RHRestrictor read_restrictor_json(std::istream& in);

}  // namespace uniconv::rh
