#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace uniconv::funcspace {

/// Samples of a function on the uniform dyadic grid k 2^-depth, k = 0..2^depth.
struct GridFunction {
  int depth = 0;
  std::vector<double> values;

  std::size_t cells() const { return std::size_t{1} << depth; }
  double spacing() const { return 1.0 / static_cast<double>(cells()); }
  /// Linear interpolation between samples.
  double interpolate(double x) const;
  void check() const;
};

/// A real function on [0,1] identified with the circle. Either a named
/// built-in with parameters, or a piecewise-linear interpolant of uniform
/// dyadic samples.
///
/// Built-ins (text form accepted by parse()):
///   const:c        constant c
///   sin1, sin:k    sin(2 pi k x)
///   cos:k          cos(2 pi k x)
///   tent           1 - |2x - 1|
///   haar:k:n[:a]   a * h_J for J = [(k-1)2^-n, k 2^-n] (right-continuous steps)
///   cusp[:c]       sqrt(2 dist(x, c)), cusp at c (default 1/3); the standard test function
///   randhaar:seed:levels   Haar series over ranks < levels; each coefficient is
///                  switched on with probability 1/2 and then equals +-|J|^{1/2}/levels,
///                  so the sup norm is at most 1
class FunctionSpec {
 public:
  enum class Kind { kBuiltin, kSampled };

  static FunctionSpec builtin(std::string name, std::vector<double> params = {});
  static FunctionSpec sampled(int grid_depth, std::vector<double> values);
  static FunctionSpec sampled(const GridFunction& grid) { return sampled(grid.depth, grid.values); }
  static FunctionSpec constant(double c) { return builtin("const", {c}); }
  /// The standard test function used by the experiment harness.
  static FunctionSpec standard() { return builtin("cusp", {1.0 / 3.0}); }

  /// Parses a built-in descriptor or, failing that, loads a GridFunction CSV file.
  static FunctionSpec parse(std::string_view text);

  Kind kind() const { return kind_; }
  bool is_sampled() const { return kind_ == Kind::kSampled; }
  const std::string& name() const { return name_; }
  const std::vector<double>& params() const { return params_; }
  int grid_depth() const { return grid_depth_; }
  const std::vector<double>& values() const { return values_; }
  /// Text form round-trippable through parse() for built-ins.
  std::string describe() const;

  /// Value at x in [0,1]; throws DomainError outside.
  double operator()(double x) const;
  /// Exact integral over [a,b], 0 <= a <= b <= 1 (exact for the stored interpolant).
  double integral(double a, double b) const;
  /// Affine image offset + scale * f.
  FunctionSpec affine(double scale, double offset) const;
  /// f restricted to the dyadic interval [(k-1)2^-n, k 2^-n] and rescaled to [0,1].
  /// Exact for sampled functions of grid depth >= n; built-ins are resampled at extra_depth.
  FunctionSpec restrict_to(std::int64_t k, int n, int extra_depth = 16) const;

 private:
  double eval_unchecked(double x) const;
  double antiderivative(double x) const;

  Kind kind_ = Kind::kBuiltin;
  std::string name_;
  std::vector<double> params_;
  int grid_depth_ = 0;
  std::vector<double> values_;
  double scale_ = 1.0;
  double offset_ = 0.0;
  // Prefix integrals for sampled / piecewise-constant built-ins.
  std::shared_ptr<const std::vector<double>> prefix_;
  std::shared_ptr<const std::vector<double>> cells_;
};

double eval_function(const FunctionSpec& f, double x);

GridFunction sample(const FunctionSpec& f, int depth);

/// Upper estimate of sup{|f(x)-f(y)| : cyclic dist(x,y) < delta} from an
/// exhaustive scan of 2^probe_depth base points against all grid offsets up to
/// delta; between grid offsets the running maximum is linearly interpolated.
double modulus_of_continuity(const FunctionSpec& f, double delta, int probe_depth);
double modulus_of_continuity(const GridFunction& g, double delta);

/// D_r(x) = sum_{|l| <= r} e(lx) = sin((2r+1) pi x) / sin(pi x).
double dirichlet_kernel(std::int64_t r, double x);

enum class BlockSign { kPlus, kMinus };

/// sum_{z=t+1}^{t+2^s} e(zx) (plus) or sum_{z=-t-2^s}^{-t-1} e(zx) (minus), closed form.
std::complex<double> trig_block_sum(std::int64_t t, int s, double x, BlockSign sign);

/// Exact Fourier coefficients of the piecewise-linear interpolant of a grid
/// function, cached up to a maximal frequency. Partial sums are the exact
/// integrals of the interpolant against D_r and the Fejer kernel.
class FourierSeries {
 public:
  FourierSeries(const GridFunction& g, std::int64_t max_frequency);

  std::int64_t max_frequency() const { return max_frequency_; }
  /// hat g(l) = int g(x) e(-lx) dx for |l| <= max_frequency.
  std::complex<double> coefficient(std::int64_t l) const;
  double partial_sum(std::int64_t r, double xi) const;
  double cesaro_sum(std::int64_t r, double xi) const;

 private:
  void check_order(std::int64_t r) const;

  int depth_;
  std::int64_t max_frequency_;
  std::vector<std::complex<double>> coeffs_;  // l = 0..max_frequency
};

/// Throws ResolutionError when the grid has fewer than 4 samples per period of e(rx).
void check_kernel_resolution(int grid_depth, std::int64_t r);

double partial_sum(const GridFunction& g, std::int64_t r, double xi);
double partial_sum(const FunctionSpec& f, std::int64_t r, double xi);
double cesaro_sum(const GridFunction& g, std::int64_t r, double xi);
double cesaro_sum(const FunctionSpec& f, std::int64_t r, double xi);

/// Grid depth used when a FunctionSpec is handed to the quadrature routines directly.
inline constexpr int kDefaultQuadratureDepth = 12;

/// Global sup bound grid_max / (1 - pi/4) for a degree-r trigonometric polynomial
/// sampled on the grid 2^-u-2 Z; requires r < 2^u.
double bernstein_globalize(double grid_max, std::int64_t r, int u);

/// sqrt(sum_k |k| |c_k|^2).
double h_half_norm(const std::map<std::int64_t, std::complex<double>>& coeffs);

/// CSV with header `x,value`, 2^depth+1 rows.
void write_grid_csv(std::ostream& out, const GridFunction& g);
GridFunction read_grid_csv(std::istream& in);
GridFunction read_grid_csv_file(const std::string& path);

}  // namespace uniconv::funcspace
