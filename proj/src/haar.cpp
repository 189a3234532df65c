#include "uniconv/haar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uniconv/errors.hpp"

namespace uniconv::haar {

template <class Integral>
HaarTable HaarTable::build(const Integral& integral, int depth) {
  if (depth < 1) throw DomainError("Haar depth must be at least 1");
  if (depth > 24) throw DomainError("Haar depth above 24 is not supported");
  HaarTable t;
  t.depth_ = depth;
  const int fine_rank = depth + 1;
  const std::size_t fine_cells = std::size_t{1} << fine_rank;
  t.fine_.resize(fine_cells);
  for (std::size_t c = 0; c < fine_cells; ++c) {
    t.fine_[c] = integral(std::ldexp(static_cast<double>(c), -fine_rank),
                          std::ldexp(static_cast<double>(c + 1), -fine_rank));
  }

  // Interval integrals for ranks 0..depth+1 in heap order.
  std::vector<double> sums(std::size_t{2} << fine_rank, 0.0);
  for (std::size_t c = 0; c < fine_cells; ++c) sums[fine_cells + c] = t.fine_[c];
  for (std::size_t i = fine_cells - 1; i >= 1; --i) sums[i] = sums[2 * i] + sums[2 * i + 1];
  t.mean_ = sums[1];

  const std::size_t table_size = std::size_t{1} << fine_rank;  // heap indices 1..2^(depth+1)-1
  t.coeffs_.assign(table_size, 0.0);
  t.q_.assign(table_size, 0.0);
  for (std::size_t i = 1; i < table_size; ++i) {
    const double length = DyadicInterval::from_heap_index(i).length();
    t.coeffs_[i] = (sums[2 * i] - sums[2 * i + 1]) / std::sqrt(length);
  }

  // S(I) = sum_{J in I} c_J^2 |J|^{1/2}, accumulated from the leaves up.
  std::vector<double> s(table_size, 0.0);
  for (std::size_t i = table_size - 1; i >= 1; --i) {
    const double length = DyadicInterval::from_heap_index(i).length();
    s[i] = t.coeffs_[i] * t.coeffs_[i] * std::sqrt(length);
    if (2 * i + 1 < table_size) s[i] += s[2 * i] + s[2 * i + 1];
    t.q_[i] = s[i] / std::pow(length, 1.5);
    t.sup_q_ = std::max(t.sup_q_, t.q_[i]);
  }
  return t;
}

HaarTable haar_coefficients(const funcspace::FunctionSpec& f, int depth) {
  if (f.is_sampled() && depth >= f.grid_depth()) {
    throw ResolutionError("Haar depth " + std::to_string(depth) + " needs samples finer than grid depth " +
                          std::to_string(f.grid_depth()));
  }
  return HaarTable::build([&](double a, double b) { return f.integral(a, b); }, depth);
}

HaarTable haar_coefficients(const funcspace::GridFunction& g, int depth) {
  g.check();
  if (depth >= g.depth) {
    throw ResolutionError("Haar depth " + std::to_string(depth) + " needs samples finer than grid depth " +
                          std::to_string(g.depth));
  }
  // Prefix integrals of the interpolant at grid points; ranks <= depth+1 land on them.
  std::vector<double> prefix(g.values.size(), 0.0);
  const double h = g.spacing();
  for (std::size_t k = 0; k + 1 < g.values.size(); ++k) {
    prefix[k + 1] = prefix[k] + 0.5 * h * (g.values[k] + g.values[k + 1]);
  }
  const double cells = static_cast<double>(g.cells());
  return HaarTable::build(
      [&](double a, double b) {
        const auto ia = static_cast<std::size_t>(std::llround(a * cells));
        const auto ib = static_cast<std::size_t>(std::llround(b * cells));
        return prefix[ib] - prefix[ia];
      },
      depth);
}

double HaarTable::coeff(const DyadicInterval& j) const {
  if (!j.valid()) throw DomainError("invalid dyadic interval");
  if (j.n > depth_) return 0.0;
  return coeffs_[j.heap_index()];
}

double HaarTable::q(const DyadicInterval& i) const {
  if (!i.valid()) throw DomainError("invalid dyadic interval");
  if (i.n > depth_) return 0.0;
  return q_[i.heap_index()];
}

double HaarTable::q(const DyadicRational& d) const {
  if (!d.valid()) throw DomainError("invalid dyadic rational");
  return q(DyadicInterval{(d.k + 1) / 2, d.n - 1});
}

double q_value(const HaarTable& table, const DyadicInterval& i) { return table.q(i); }

double z_value(const HaarTable& table, double x, int depth) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("z argument outside [0,1]");
  const int top = std::min(depth, table.depth());
  double z = 0.0;
  for (int n = 0; n <= top; ++n) z += table.q(DyadicInterval{cell_of(x, n) + 1, n});
  return z;
}

TailStatistics tail_statistics(const HaarTable& table, int depth, int grid, int ladder_steps) {
  if (grid < 1 || grid > 24) throw DomainError("tail grid out of range");
  if (ladder_steps < 2) throw DomainError("tail ladder needs at least two steps");
  const std::size_t cells = std::size_t{1} << grid;
  std::vector<double> z(cells);
  double z_max = 0.0;
  double z_sum = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    z[c] = z_value(table, (static_cast<double>(c) + 0.5) / static_cast<double>(cells), depth);
    z_max = std::max(z_max, z[c]);
    z_sum += z[c];
  }
  std::sort(z.begin(), z.end());

  TailStatistics out;
  out.mean_z = z_sum / static_cast<double>(cells);
  const double top = z_max > 0.0 ? z_max : 1.0;
  const double lo_measure = std::ldexp(1.0, -grid + 2);
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int s = 0; s <= ladder_steps; ++s) {
    const double lambda = top * static_cast<double>(s) / static_cast<double>(ladder_steps);
    const auto above = static_cast<double>(z.end() - std::upper_bound(z.begin(), z.end(), lambda));
    const double measure = above / static_cast<double>(cells);
    out.ladder.emplace_back(lambda, measure);
    if (measure >= lo_measure && measure <= 0.5) {
      const double y = std::log(measure);
      sx += lambda;
      sy += y;
      sxx += lambda * lambda;
      sxy += lambda * y;
      ++out.fit_points;
    }
  }
  if (out.fit_points >= 2) {
    const double n = out.fit_points;
    const double denom = n * sxx - sx * sx;
    out.slope = denom > 0.0 ? (n * sxy - sx * sy) / denom : std::numeric_limits<double>::quiet_NaN();
  } else {
    out.slope = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

double partial_haar_sum(const HaarTable& table, int k, double x) {
  if (k < 0 || k > table.depth() + 1) throw DomainError("Haar partial sum order out of range");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("Haar partial sum argument outside [0,1]");
  const int fine_rank = table.depth() + 1;
  const std::size_t width = std::size_t{1} << (fine_rank - k);
  const auto first = static_cast<std::size_t>(cell_of(x, k)) * width;
  double total = 0.0;
  for (std::size_t c = first; c < first + width; ++c) total += table.fine_cell_integrals()[c];
  return std::ldexp(total, k);
}

double partial_haar_sum_direct(const HaarTable& table, int k, double x) {
  if (k < 0 || k > table.depth() + 1) throw DomainError("Haar partial sum order out of range");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("Haar partial sum argument outside [0,1]");
  double total = table.mean();
  for (int n = 0; n < k; ++n) {
    const DyadicInterval j{cell_of(x, n) + 1, n};
    const bool left = cell_of(x, n + 1) % 2 == 0;
    const double h = (left ? 1.0 : -1.0) / std::sqrt(j.length());
    total += table.coeff(j) * h;
  }
  return total;
}

}  // namespace uniconv::haar
