#pragma once

#include <utility>
#include <vector>

#include "uniconv/dyadic.hpp"
#include "uniconv/funcspace.hpp"

namespace uniconv::haar {

/// Haar coefficients <f, h_J> for every dyadic J of rank 0..depth, together
/// with the flexibility function q and the cell integrals needed for the
/// martingale partial sums. Immutable once built.
class HaarTable {
 public:
  HaarTable() = default;

  int depth() const { return depth_; }
  double mean() const { return mean_; }

  /// <f, h_J>; zero for J deeper than the table.
  double coeff(const DyadicInterval& j) const;
  /// q at the middle of I, truncated to J of rank <= depth().
  double q(const DyadicInterval& i) const;
  /// q(d) for the dyadic rational d, i.e. q of the interval whose middle is d.
  double q(const DyadicRational& d) const;
  double sup_q() const { return sup_q_; }

  /// Heap-indexed storage (index 0 unused).
  const std::vector<double>& coefficients() const { return coeffs_; }
  const std::vector<double>& q_values() const { return q_; }

  /// Integral of f over the rank-(depth+1) cell c.
  const std::vector<double>& fine_cell_integrals() const { return fine_; }

  friend HaarTable haar_coefficients(const funcspace::FunctionSpec& f, int depth);
  friend HaarTable haar_coefficients(const funcspace::GridFunction& g, int depth);

 private:
  template <class Integral>
  static HaarTable build(const Integral& integral, int depth);

  int depth_ = 0;
  double mean_ = 0.0;
  double sup_q_ = 0.0;
  std::vector<double> coeffs_;
  std::vector<double> q_;
  std::vector<double> fine_;
};

/// Exact integrals of the stored interpolant against h_J. A sampled f needs
/// grid depth > depth so that every Haar midpoint is a grid point.
HaarTable haar_coefficients(const funcspace::FunctionSpec& f, int depth);
/// Same for a (not necessarily periodic) grid function.
HaarTable haar_coefficients(const funcspace::GridFunction& g, int depth);

double q_value(const HaarTable& table, const DyadicInterval& i);

/// z(x) = sum_{n=0}^{depth} Q_n(x), cells taken right-continuously.
double z_value(const HaarTable& table, double x, int depth);

struct TailStatistics {
  std::vector<std::pair<double, double>> ladder;  // (lambda, |{z > lambda}|)
  double slope = 0.0;                             // least-squares d log(measure) / d lambda
  int fit_points = 0;                             // slope is NaN when fewer than 2
  double mean_z = 0.0;
};

/// Distribution of z on 2^grid cell midpoints over a uniform lambda ladder.
TailStatistics tail_statistics(const HaarTable& table, int depth, int grid, int ladder_steps = 64);

/// X_k(x) = 2^k * integral of f over the rank-k cell containing x.
double partial_haar_sum(const HaarTable& table, int k, double x);
/// The same quantity from mean + sum of Haar terms of rank < k.
double partial_haar_sum_direct(const HaarTable& table, int k, double x);

}  // namespace uniconv::haar
