#include "uniconv/reducer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>

#include <json.hpp>

#include "uniconv/errors.hpp"
#include "uniconv/rng.hpp"

namespace uniconv::reducer {

namespace {

constexpr std::uint64_t kDeltaTag = 0xd1;
constexpr std::uint64_t kDirectI = 0xd2;
constexpr std::uint64_t kDirectJ = 0xd3;
constexpr std::uint64_t kSolverTag = 0xd4;
constexpr std::uint64_t kExpectTag = 0xd5;
constexpr double kBCap = 1e9;
constexpr int kModulusProbe = 10;
constexpr double kWidthSlack = 1e-12;
// Zeroed cells are removed from a running total, which leaves rounding residue of this order.
constexpr double kRoundoffFloor = 1e-12;

using cplx = std::complex<double>;

std::uint64_t step_seed(std::uint64_t seed, const rh::RHRestrictor& r) {
  return hash_keys(seed, std::bit_cast<std::uint64_t>(r.delta), static_cast<std::uint64_t>(r.m + 1));
}

// e(-k/g) for k = 0..g-1.
std::vector<cplx> roots(std::int64_t g) {
  std::vector<cplx> out(static_cast<std::size_t>(g));
  for (std::int64_t k = 0; k < g; ++k) {
    out[static_cast<std::size_t>(k)] =
        std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(g));
  }
  return out;
}

std::int64_t floor_b(double v) {
  if (!(v >= 1.0)) return 1;
  return static_cast<std::int64_t>(std::floor(std::min(v, kBCap)));
}

std::int64_t pow2(int e) { return std::int64_t{1} << e; }

std::int64_t xi_grid(int u, int xi_cap) { return pow2(std::min(u, xi_cap) + 2); }

std::vector<std::size_t> active_cells(const rh::RHRestrictor& r, const std::vector<rh::Span>& cells) {
  std::vector<std::size_t> out;
  for (std::size_t i : rh::wide_cells(r, cells)) {
    const DyadicRational d = r.partition[i].midpoint();
    if (d.n > r.depth) throw ContractError("wide cell " + std::to_string(i) + " has no centre within the depth");
    if (!r(d).degenerate()) out.push_back(i);
  }
  return out;
}

// A signed sum of per-cell spectra, evaluated against D_r(x - xi) over E_xi.
struct Term {
  const rh::Spectrum* spectrum;
  double weight;
  std::size_t cell;
};

struct Measured {
  int u;
  std::int64_t r;
  double xi;
  double value;
  double std_error;
};

std::vector<Measured> measure(const std::vector<Term>& terms, const std::vector<rh::Span>& cells, double delta,
                              const ReductionConfig& cfg, bool zeroing = true) {
  std::vector<Measured> out;
  if (terms.empty()) return out;
  const auto zc = static_cast<std::size_t>(pow2(cfg.u_max)) + 1;
  const std::size_t batches = terms.front().spectrum->batch.size();
  const auto& sizes = terms.front().spectrum->batch_sizes;
  std::vector<cplx> total(zc, 0.0);
  std::vector<std::vector<cplx>> total_b(batches, std::vector<cplx>(zc, 0.0));
  std::vector<std::vector<std::size_t>> by_cell(cells.size());
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const auto& t = terms[k];
    by_cell[t.cell].push_back(k);
    for (std::size_t z = 0; z < zc; ++z) total[z] += t.weight * t.spectrum->c[z];
    for (std::size_t b = 0; b < batches; ++b) {
      for (std::size_t z = 0; z < zc; ++z) total_b[b][z] += t.weight * t.spectrum->batch[b][z];
    }
  }
  std::vector<cplx> a(zc);
  std::vector<std::vector<cplx>> a_b(batches, std::vector<cplx>(zc));
  std::vector<double> bvals(batches);
  const std::size_t n = cells.size();
  for (int u = 1; u <= cfg.u_max; ++u) {
    const bool high = zeroing && std::ldexp(delta, u) > 1.0;
    const auto rs = r_values(u, cfg.r_per_u);
    const std::int64_t g = xi_grid(u, cfg.xi_cap);
    const auto e = roots(g);
    const auto zmax = static_cast<std::size_t>(rs.back());
    for (std::int64_t j = 0; j < g; ++j) {
      const double xi = static_cast<double>(j) / static_cast<double>(g);
      a.assign(total.begin(), total.begin() + static_cast<std::ptrdiff_t>(zmax + 1));
      for (std::size_t b = 0; b < batches; ++b) {
        a_b[b].assign(total_b[b].begin(), total_b[b].begin() + static_cast<std::ptrdiff_t>(zmax + 1));
      }
      if (high) {
        const std::size_t l = rh::locate_cell(cells, xi);
        const std::size_t near[3] = {l, (l + 1) % n, (l + n - 1) % n};
        for (int q = 0; q < 3; ++q) {
          if (q > 0 && (near[q] == near[0] || (q == 2 && near[2] == near[1]))) continue;
          for (std::size_t k : by_cell[near[q]]) {
            const auto& t = terms[k];
            for (std::size_t z = 0; z <= zmax; ++z) a[z] -= t.weight * t.spectrum->c[z];
            for (std::size_t b = 0; b < batches; ++b) {
              for (std::size_t z = 0; z <= zmax; ++z) a_b[b][z] -= t.weight * t.spectrum->batch[b][z];
            }
          }
        }
      }
      double acc = 0.0;
      std::vector<double> acc_b(batches, 0.0);
      std::size_t next = 0;
      for (std::size_t z = 1; z <= zmax; ++z) {
        const cplx ez = e[static_cast<std::size_t>((static_cast<std::int64_t>(z) * j) % g)];
        acc += (a[z] * ez).real();
        for (std::size_t b = 0; b < batches; ++b) acc_b[b] += (a_b[b][z] * ez).real();
        while (next < rs.size() && static_cast<std::size_t>(rs[next]) == z) {
          const double value = a[0].real() + 2.0 * acc;
          for (std::size_t b = 0; b < batches; ++b) bvals[b] = a_b[b][0].real() + 2.0 * acc_b[b];
          out.push_back({u, rs[next], xi, value, rh::batch_stderr(bvals, sizes, value)});
          ++next;
        }
      }
    }
  }
  return out;
}

double least_squares_slope(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [x, y] : pts) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  return sxy / sxx;
}

// Spectrum of the constant 1 on the nodes of a field, for int_V D_r(x - xi).
rh::Spectrum unit_spectrum(const rh::CellField& field, std::int64_t z_max) {
  rh::CellField one;
  one.span = field.span;
  one.xs = field.xs;
  one.mean.assign(field.xs.size(), 1.0);
  return rh::spectrum(one, z_max);
}

double interpolate_field(const rh::CellField& field, double x) {
  const auto& xs = field.xs;
  if (x <= xs.front()) return field.mean.front();
  if (x >= xs.back()) return field.mean.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto k = static_cast<std::size_t>(it - xs.begin());
  const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return field.mean[k - 1] + t * (field.mean[k] - field.mean[k - 1]);
}

// Measured int over E_{k+1} \ E_k of (E f o phi_{I_{k+1}}(x) - E f o phi_{I_{k+1}}(xi)) D_r(x - xi).
std::vector<double> e_set_corrections(const funcspace::FunctionSpec& f, const haar::HaarTable& haar,
                                      const rh::RHRestrictor& before, const rh::RHRestrictor& after, double eta,
                                      const ReductionConfig& cfg, std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(cfg.u_max) + 1, 0.0);
  const auto old_cells = rh::phi_inverse_partition(before, haar, eta);
  const auto new_cells = rh::phi_inverse_partition(after, haar, eta);
  bool any = false;
  for (int u = 1; u <= cfg.u_max; ++u) any = any || std::ldexp(before.delta, u) > 1.0;
  if (!any) return out;
  const std::int64_t zmax = pow2(cfg.u_max);
  std::vector<rh::CellField> fields;
  std::vector<rh::Spectrum> spec, unit;
  std::vector<std::size_t> parent(new_cells.size());
  for (std::size_t i = 0; i < new_cells.size(); ++i) {
    const auto nodes = rh::midpoint_nodes(new_cells[i], rh::quadrature_nodes_needed(new_cells[i].width(), cfg.u_max));
    fields.push_back(rh::cell_expectation(f, haar, after, i, eta, nodes, cfg.mc_samples,
                                          hash_keys(seed, after.partition[i].heap_index()), cfg.threads));
    spec.push_back(rh::spectrum(fields.back(), zmax));
    unit.push_back(unit_spectrum(fields.back(), zmax));
    parent[i] = rh::locate_cell(old_cells, 0.5 * (new_cells[i].lo + new_cells[i].hi));
  }
  const std::size_t n_old = old_cells.size();
  std::vector<cplx> a;
  for (int u = 1; u <= cfg.u_max; ++u) {
    if (!(std::ldexp(before.delta, u) > 1.0)) continue;
    const bool still_high = std::ldexp(after.delta, u) > 1.0;
    const auto rs = r_values(u, cfg.r_per_u);
    const std::int64_t g = xi_grid(u, cfg.xi_cap);
    const auto e = roots(g);
    const auto top = static_cast<std::size_t>(rs.back());
    for (std::int64_t j = 0; j < g; ++j) {
      const double xi = static_cast<double>(j) / static_cast<double>(g);
      const std::size_t l_old = rh::locate_cell(old_cells, xi);
      const double h_xi = interpolate_field(fields[rh::locate_cell(new_cells, xi)], xi);
      a.assign(top + 1, 0.0);
      bool empty = true;
      for (std::size_t i = 0; i < new_cells.size(); ++i) {
        const std::size_t p = parent[i];
        const bool in_old = p == l_old || p == (l_old + 1) % n_old || p == (l_old + n_old - 1) % n_old;
        if (!in_old) continue;
        if (still_high && rh::in_neighbourhood(new_cells, i, xi)) continue;
        empty = false;
        for (std::size_t z = 0; z <= top; ++z) a[z] += spec[i].c[z] - h_xi * unit[i].c[z];
      }
      if (empty) continue;
      double acc = 0.0;
      std::size_t next = 0;
      for (std::size_t z = 1; z <= top; ++z) {
        acc += (a[z] * e[static_cast<std::size_t>((static_cast<std::int64_t>(z) * j) % g)]).real();
        while (next < rs.size() && static_cast<std::size_t>(rs[next]) == z) {
          out[static_cast<std::size_t>(u)] =
              std::max(out[static_cast<std::size_t>(u)], std::abs(a[0].real() + 2.0 * acc));
          ++next;
        }
      }
    }
  }
  return out;
}

rh::RHRestrictor snap_all(rh::RHRestrictor r) {
  for (auto& iv : r.intervals) iv = {iv.mid(), iv.mid()};
  return r;
}

}  // namespace

std::string to_string(SolverKind kind) { return kind == SolverKind::kGreedy ? "greedy" : "hierarchical"; }

SolverKind solver_kind_from_string(const std::string& name) {
  if (name == "hierarchical") return SolverKind::kHierarchical;
  if (name == "greedy") return SolverKind::kGreedy;
  throw DomainError("unknown solver '" + name + "' (expected hierarchical or greedy)");
}

void ReductionConfig::validate() const {
  if (depth < 3 || depth > 24) throw DomainError("depth must lie in [3, 24]");
  if (u_max < 1 || u_max > 20) throw DomainError("u_max must lie in [1, 20]");
  if (m_max < 0 || m_max > 60) throw DomainError("m_max must lie in [0, 60]");
  if (!(delta_min > std::ldexp(1.0, -depth + 2) && delta_min <= 1.0)) {
    throw DomainError("delta_min must lie in (2^{-depth+2}, 1]");
  }
  if (mc_samples < 2) throw DomainError("mc_samples must be at least 2");
  if (!(eta >= 0.0)) throw DomainError("eta must be nonnegative");
  if (!(precision_fraction > 0.0)) throw DomainError("precision_fraction must be positive");
  if (r_per_u < 0 || xi_cap < 0) throw DomainError("r_per_u and xi_cap must be nonnegative");
  if (threads < 1) throw DomainError("threads must be at least 1");
}

std::string EntryKey::describe() const {
  std::string k = kind == Kind::kZero ? "w0" : kind == Kind::kPlusReal ? "Re w+" : "Im w+";
  std::string out = k + " u=" + std::to_string(u) + " xi=" + std::to_string(xi_index) + "/" + std::to_string(xi_grid);
  if (kind != Kind::kZero) out += " s=" + std::to_string(s) + " t=" + std::to_string(t);
  return out;
}

std::vector<std::int64_t> r_values(int u, int r_per_u) {
  const std::int64_t lo = pow2(u - 1);
  const std::int64_t hi = pow2(u) - 1;
  const std::int64_t count = hi - lo + 1;
  std::vector<std::int64_t> out;
  if (r_per_u == 0 || count <= r_per_u) {
    for (std::int64_t r = lo; r <= hi; ++r) out.push_back(r);
    return out;
  }
  if (r_per_u == 1) return {lo};
  for (int k = 0; k < r_per_u; ++k) {
    const std::int64_t r = lo + (static_cast<std::int64_t>(k) * (count - 1) + (r_per_u - 1) / 2) / (r_per_u - 1);
    if (out.empty() || out.back() != r) out.push_back(r);
  }
  return out;
}

CellDeltas estimate_deltas(const funcspace::FunctionSpec& f, const haar::HaarTable& haar, const rh::RHRestrictor& r,
                           double eta, const ReductionConfig& config, std::uint64_t seed) {
  CellDeltas out;
  out.cells = rh::phi_inverse_partition(r, haar, eta);
  out.active = active_cells(r, out.cells);
  const std::int64_t zmax = pow2(config.u_max);
  for (std::size_t i : out.active) {
    const auto& v = out.cells[i];
    const auto nodes = rh::midpoint_nodes(v, rh::quadrature_nodes_needed(v.width(), config.u_max));
    out.fields.push_back(rh::delta_i(f, haar, r, i, eta, nodes, config.mc_samples,
                                     hash_keys(seed, r.partition[i].heap_index()), config.threads));
    out.spectra.push_back(rh::spectrum(out.fields.back(), zmax));
  }
  return out;
}

AssembledInstance assemble_instance(const rh::RHRestrictor& r, const CellDeltas& deltas, double omega,
                                    const ReductionConfig& cfg) {
  const auto n = static_cast<std::int64_t>(deltas.active.size());
  if (n == 0) throw ContractError("nothing to reduce: no wide cell has a free centre");
  const double delta = r.delta;
  const double alpha = cfg.solver.alpha;
  AssembledInstance out;
  out.omega = omega;
  out.b_floor = omega > 0.0 ? floor_b(std::pow(omega, -0.2)) : static_cast<std::int64_t>(kBCap);
  auto with_floor = [&](std::int64_t bt) { return std::max(bt, out.b_floor); };

  // Envelope of the Monte-Carlo error of every kernel: prefix sums of stderr |c(z)|.
  const auto zc = static_cast<std::size_t>(pow2(cfg.u_max)) + 1;
  std::vector<std::vector<double>> se_prefix(static_cast<std::size_t>(n), std::vector<double>(zc + 1, 0.0));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& cs = deltas.spectra[static_cast<std::size_t>(i)].c_stderr;
    auto& p = se_prefix[static_cast<std::size_t>(i)];
    for (std::size_t z = 0; z < zc; ++z) p[z + 1] = p[z] + cs[z];
  }
  auto se_range = [&](std::size_t i, std::size_t z0, std::size_t z1) { return se_prefix[i][z1 + 1] - se_prefix[i][z0]; };

  std::vector<std::int64_t> active_sorted(deltas.active.begin(), deltas.active.end());
  const auto n_cells = deltas.cells.size();
  std::vector<cplx> pre;
  std::vector<double> kernel_se;
  std::vector<EntryKey> templ;
  std::vector<std::int64_t> templ_b;
  double worst_se = 0.0;
  std::string worst_se_entry;

  for (int u = 1; u <= cfg.u_max; ++u) {
    const std::int64_t U = std::max(pow2(u + 2), static_cast<std::int64_t>(std::bit_ceil(static_cast<std::uint64_t>(n))));
    const bool high = std::ldexp(delta, u) > 1.0;
    const auto e = roots(U);
    // Entry templates for one xi.
    templ.clear();
    templ_b.clear();
    {
      const int ku = u - 1;
      const std::int64_t bt = std::ldexp(delta, ku) <= 1.0 ? floor_b(1.0 / std::ldexp(delta, ku + 1))
                                                           : floor_b(std::pow(std::ldexp(delta, ku), 1.0 / 44.0));
      templ.push_back({EntryKey::Kind::kZero, u, 0, U, 0, 0});
      templ_b.push_back(with_floor(bt));
    }
    for (int s = 0; s <= u - 2; ++s) {
      const double low = 1.0 / std::ldexp(delta, s);
      const std::int64_t bt = high ? floor_b(std::max(low, std::pow(std::ldexp(delta, u), 1.0 / 44.0))) : floor_b(low);
      for (std::int64_t t = pow2(u - 1); t < pow2(u); t += pow2(s + 1)) {
        templ.push_back({EntryKey::Kind::kPlusReal, u, 0, U, s, t});
        templ_b.push_back(with_floor(bt));
        templ.push_back({EntryKey::Kind::kPlusImag, u, 0, U, s, t});
        templ_b.push_back(with_floor(bt));
      }
    }
    // Error envelope does not depend on xi.
    for (std::size_t q = 0; q < templ.size(); ++q) {
      const auto& k = templ[q];
      for (std::int64_t i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const double se = k.kind == EntryKey::Kind::kZero
                              ? se_range(ii, 0, 0) + 2.0 * se_range(ii, 1, static_cast<std::size_t>(pow2(u - 1)))
                              : se_range(ii, static_cast<std::size_t>(k.t + 1), static_cast<std::size_t>(k.t + pow2(k.s)));
        if (se > worst_se) {
          worst_se = se;
          worst_se_entry = k.describe() + " cell " + std::to_string(deltas.active[ii]);
        }
      }
    }
    const std::size_t first = out.keys.size();
    for (std::int64_t j = 0; j < U; ++j) {
      const double xi = static_cast<double>(j) / static_cast<double>(U);
      const std::size_t lc = rh::locate_cell(deltas.cells, xi);
      auto it = std::lower_bound(active_sorted.begin(), active_sorted.end(), static_cast<std::int64_t>(lc));
      const std::int64_t l = it == active_sorted.end() ? 0 : static_cast<std::int64_t>(it - active_sorted.begin());
      for (std::size_t q = 0; q < templ.size(); ++q) {
        EntryKey key = templ[q];
        key.xi_index = j;
        out.keys.push_back(key);
        signsolver::SignEntry entry;
        entry.j = static_cast<std::int64_t>(out.instance.entries.size());
        entry.l = l;
        entry.b = templ_b[q];
        entry.values.assign(static_cast<std::size_t>(n), 0.0);
        out.instance.entries.push_back(std::move(entry));
      }
      for (std::int64_t i = 0; i < n; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        if (high && rh::in_neighbourhood(deltas.cells, deltas.active[ii], xi)) continue;
        const auto& c = deltas.spectra[ii].c;
        const auto top = static_cast<std::size_t>(pow2(u));
        pre.assign(top, 0.0);
        for (std::size_t z = 1; z < top; ++z) {
          pre[z] = pre[z - 1] + c[z] * e[static_cast<std::size_t>((static_cast<std::int64_t>(z) * j) % U)];
        }
        const std::size_t base = first + static_cast<std::size_t>(j) * templ.size();
        for (std::size_t q = 0; q < templ.size(); ++q) {
          const auto& k = templ[q];
          double v = 0.0;
          if (k.kind == EntryKey::Kind::kZero) {
            v = c[0].real() + 2.0 * pre[static_cast<std::size_t>(pow2(u - 1))].real();
          } else {
            const cplx blk = pre[static_cast<std::size_t>(k.t + pow2(k.s))] - pre[static_cast<std::size_t>(k.t)];
            v = k.kind == EntryKey::Kind::kPlusReal ? blk.real() : blk.imag();
          }
          out.instance.entries[base + q].values[ii] = v;
        }
      }
    }
  }
  (void)n_cells;

  // Calibrate the scale so that every |v| meets its hypothesis bound.
  double scale = 0.0;
  for (const auto& entry : out.instance.entries) {
    for (std::int64_t i = 0; i < n; ++i) {
      const double v = std::abs(entry.values[static_cast<std::size_t>(i)]);
      if (v == 0.0) continue;
      scale = std::max(scale, v / signsolver::hypothesis_bound(i, entry.l, entry.b, n, alpha));
    }
  }
  if (scale == 0.0) scale = 1.0;
  out.scale = scale;
  out.worst_stderr_ratio = worst_se / scale;
  if (out.worst_stderr_ratio > cfg.precision_fraction) {
    throw PrecisionError("Monte-Carlo error of " + worst_se_entry + " is " + std::to_string(worst_se) + ", above " +
                         std::to_string(cfg.precision_fraction) + " of the bound scale " + std::to_string(scale));
  }
  for (auto& entry : out.instance.entries) {
    for (double& v : entry.values) v /= scale;
  }

  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> counts;
  for (const auto& entry : out.instance.entries) ++counts[{entry.l, entry.b}];
  double m_budget = 2.0;
  for (const auto& [lb, count] : counts) {
    out.budget.push_back({lb.first, lb.second, count});
    m_budget = std::max(m_budget, static_cast<double>(count) / std::pow(static_cast<double>(lb.second), kGamma));
  }
  out.instance.n = n;
  out.instance.gamma = kGamma;
  out.instance.M = m_budget;
  return out;
}

AssembledInstance assemble_instance(const rh::RHRestrictor& r, const funcspace::FunctionSpec& f,
                                    const haar::HaarTable& haar, double eta, const ReductionConfig& config) {
  config.validate();
  const auto deltas = estimate_deltas(f, haar, r, eta, config, hash_keys(step_seed(config.seed, r), kDeltaTag));
  const double omega = funcspace::modulus_of_continuity(f, std::pow(r.delta, 0.8), kModulusProbe);
  return assemble_instance(r, deltas, omega, config);
}

StepResult reduce_step(const rh::RHRestrictor& r, const funcspace::FunctionSpec& f, const haar::HaarTable& haar,
                       double eta, const ReductionConfig& config, int stage) {
  config.validate();
  const auto type = rh::check_type(r, haar, eta, true);
  if (!type.valid) throw InvariantError("restrictor is not of type (f, delta): " + type.detail);
  const std::uint64_t seed = step_seed(config.seed, r);
  const auto deltas = estimate_deltas(f, haar, r, eta, config, hash_keys(seed, kDeltaTag));
  if (deltas.active.empty()) throw ContractError("nothing to reduce: no wide cell has a free centre");
  const double omega = funcspace::modulus_of_continuity(f, std::pow(r.delta, 0.8), kModulusProbe);
  const auto inst = assemble_instance(r, deltas, omega, config);

  signsolver::SolverParams params = config.solver;
  params.seed = hash_keys(seed, kSolverTag);
  params.threads = config.threads;
  const auto sol = config.solver_kind == SolverKind::kGreedy ? signsolver::solve_signs_greedy(inst.instance, params)
                                                             : signsolver::solve_signs(inst.instance, params);

  StepResult out;
  out.restrictor = r;
  out.restrictor.m = r.m + 1;
  for (std::size_t k = 0; k < deltas.active.size(); ++k) {
    const DyadicRational d = r.partition[deltas.active[k]].midpoint();
    const auto& iv = r(d);
    out.restrictor[d] = sol.signs[k] > 0 ? iv.right_half() : iv.left_half();
  }

  StepReport& rep = out.report;
  rep.stage = stage;
  rep.m = out.restrictor.m;
  rep.delta = r.delta;
  rep.cells = deltas.cells.size();
  rep.active = deltas.active.size();
  rep.solver = to_string(config.solver_kind);
  rep.solver_value = sol.value;
  rep.scale = inst.scale;
  rep.log_m_budget = std::log(inst.instance.M);
  rep.entries = inst.instance.entries.size();
  rep.worst_stderr_ratio = inst.worst_stderr_ratio;
  rep.signs = sol.signs;

  // E f o phi_I - E f o phi_J = -sum eps_i Delta_i.
  std::vector<Term> terms;
  for (std::size_t k = 0; k < deltas.active.size(); ++k) {
    terms.push_back({&deltas.spectra[k], -static_cast<double>(sol.signs[k]), deltas.active[k]});
  }
  const auto measured = measure(terms, deltas.cells, r.delta, config);
  rep.max_error_by_u.assign(static_cast<std::size_t>(config.u_max) + 1, 0.0);
  double max_se = 0.0;
  for (const auto& m : measured) {
    ErrorEntry e;
    e.u = m.u;
    e.r = m.r;
    e.xi = m.xi;
    e.signed_value = m.value;
    e.std_error = m.std_error;
    rep.errors.push_back(e);
    rep.max_error_by_u[static_cast<std::size_t>(m.u)] = std::max(rep.max_error_by_u[static_cast<std::size_t>(m.u)], e.error());
    rep.max_error = std::max(rep.max_error, e.error());
    max_se = std::max(max_se, m.std_error);
  }
  rep.mc_budget = 4.0 * max_se;

  if (config.two_path) {
    const std::int64_t zmax = pow2(config.u_max);
    std::vector<rh::Spectrum> si, sj;
    si.reserve(deltas.active.size());
    sj.reserve(deltas.active.size());
    for (std::size_t k = 0; k < deltas.active.size(); ++k) {
      const std::size_t i = deltas.active[k];
      const auto heap = r.partition[i].heap_index();
      const auto& nodes = deltas.fields[k].xs;
      si.push_back(rh::spectrum(rh::cell_expectation(f, haar, r, i, eta, nodes, config.mc_samples,
                                                     hash_keys(seed, kDirectI, heap), config.threads),
                                zmax));
      sj.push_back(rh::spectrum(rh::cell_expectation(f, haar, out.restrictor, i, eta, nodes, config.mc_samples,
                                                     hash_keys(seed, kDirectJ, heap), config.threads),
                                zmax));
    }
    std::vector<Term> ti, tj;
    for (std::size_t k = 0; k < deltas.active.size(); ++k) {
      ti.push_back({&si[k], 1.0, deltas.active[k]});
      tj.push_back({&sj[k], 1.0, deltas.active[k]});
    }
    const auto mi = measure(ti, deltas.cells, r.delta, config);
    const auto mj = measure(tj, deltas.cells, r.delta, config);
    rep.two_path_checked = true;
    for (std::size_t q = 0; q < rep.errors.size(); ++q) {
      auto& e = rep.errors[q];
      e.direct = mi[q].value - mj[q].value;
      e.direct_std_error = std::hypot(mi[q].std_error, mj[q].std_error);
      const double diff = std::abs(e.signed_value - e.direct);
      const double se = std::max(std::hypot(e.std_error, e.direct_std_error), kRoundoffFloor);
      const double z = diff / se;
      rep.two_path_max_z = std::max(rep.two_path_max_z, z);
    }
    // The same comparison over all of [0,1], where nothing is zeroed.
    const auto full = measure(terms, deltas.cells, r.delta, config, false);
    const auto fi = measure(ti, deltas.cells, r.delta, config, false);
    const auto fj = measure(tj, deltas.cells, r.delta, config, false);
    for (std::size_t q = 0; q < full.size(); ++q) {
      const double diff = std::abs(full[q].value - (fi[q].value - fj[q].value));
      const double se = std::max(std::hypot(full[q].std_error, fi[q].std_error, fj[q].std_error), kRoundoffFloor);
      rep.two_path_max_z = std::max(rep.two_path_max_z, diff / se);
    }
    rep.two_path_pass = rep.two_path_max_z <= 4.0;
  }
  return out;
}

StageResult collapse_stage(const rh::RHRestrictor& r, const funcspace::FunctionSpec& f, const haar::HaarTable& haar,
                           double eta, const ReductionConfig& config, int stage) {
  config.validate();
  StageResult out;
  out.restrictor = r;
  while (out.restrictor.m < config.m_max) {
    const auto cells = rh::phi_inverse_partition(out.restrictor, haar, eta);
    if (active_cells(out.restrictor, cells).empty()) break;
    auto step = reduce_step(out.restrictor, f, haar, eta, config, stage);
    out.restrictor = std::move(step.restrictor);
    out.steps.push_back(std::move(step.report));
  }
  const auto cells = rh::phi_inverse_partition(out.restrictor, haar, eta);
  for (std::size_t i : rh::wide_cells(out.restrictor, cells)) {
    const DyadicRational d = out.restrictor.partition[i].midpoint();
    if (d.n > out.restrictor.depth) continue;
    const double mid = out.restrictor(d).mid();
    out.restrictor[d] = {mid, mid};
  }
  out.truncation_budget = std::pow(2.0, -static_cast<double>(config.m_max) / 22.0);
  std::vector<std::pair<double, double>> pts;
  for (const auto& s : out.steps) {
    if (s.max_error > 0.0) pts.emplace_back(static_cast<double>(s.m), std::log(s.max_error));
  }
  out.decay_slope = least_squares_slope(pts);
  return out;
}

rh::RHRestrictor split_partition(const rh::RHRestrictor& r, const haar::HaarTable& haar, double eta) {
  const auto cells = rh::phi_inverse_partition(r, haar, eta);
  rh::RHRestrictor out = r;
  out.partition.clear();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const DyadicInterval& u = r.partition[i];
    if (cells[i].width() > 0.5 * r.delta) {
      const DyadicRational d = u.midpoint();
      if (d.n > r.depth || !r(d).degenerate()) {
        throw ContractError("cannot split cell " + std::to_string(i) + ": its centre is not a single point");
      }
      out.partition.push_back(u.left_child());
      out.partition.push_back(u.right_child());
    } else {
      out.partition.push_back(u);
    }
  }
  out.delta = 0.625 * r.delta;
  out.m = -1;
  const auto fresh = rh::phi_inverse_partition(out, haar, eta);
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    const double w = fresh[i].width();
    if (w < 0.25 * out.delta * (1.0 - kWidthSlack) || w > out.delta * (1.0 + kWidthSlack)) {
      throw InvariantError("split cell " + std::to_string(i) + " has width " + std::to_string(w) +
                           " outside [delta'/4, delta'] for delta' = " + std::to_string(out.delta));
    }
  }
  return out;
}

PipelineResult run_pipeline(const funcspace::FunctionSpec& f, const ReductionConfig& config,
                            const std::function<void(const PipelineResult&)>& checkpoint) {
  config.validate();
  PipelineResult res;
  const auto grid = funcspace::sample(f, std::max(config.depth + 2, 12));
  double sup = 0.0;
  for (double v : grid.values) sup = std::max(sup, std::abs(v));
  res.scale = sup > 0.5 ? 0.5 / sup : 1.0;
  res.offset = 0.0;
  const funcspace::FunctionSpec g = res.scale == 1.0 ? f : f.affine(res.scale, 0.0);
  const auto haar = haar::haar_coefficients(g, config.depth - 1);
  const double bound = homeo::admissible_eta_bound(haar);
  res.eta = config.eta > 0.0 ? config.eta : (std::isinf(bound) ? 1.0 : bound);

  rh::RHRestrictor r = rh::RHRestrictor::unrestricted(config.depth);
  for (int stage = 0;; ++stage) {
    auto st = collapse_stage(r, g, haar, res.eta, config, stage);
    StageSummary sum;
    sum.stage = stage;
    sum.delta = r.delta;
    sum.cells = r.partition.size();
    sum.active = st.steps.empty() ? 0 : st.steps.front().active;
    sum.truncation_budget = st.truncation_budget;
    sum.decay_slope = st.decay_slope;
    for (int u = 0; u <= config.u_max; ++u) {
      const double reach = std::min(0.5, 4.0 * std::pow(2.0, -0.8 * u));
      sum.telescoping_bound.push_back(u == 0 ? 0.0 : funcspace::modulus_of_continuity(g, reach, kModulusProbe));
    }
    for (auto& s : st.steps) {
      res.mc_budget += s.mc_budget / res.scale;
      res.steps.push_back(std::move(s));
    }
    r = std::move(st.restrictor);
    int deepest = 0;
    for (const auto& u : r.partition) deepest = std::max(deepest, u.n);
    const bool stop = 0.625 * r.delta < config.delta_min || deepest >= config.depth - 2;
    if (!stop) {
      auto next = split_partition(r, haar, res.eta);
      sum.e_set_correction = e_set_corrections(g, haar, r, next, res.eta, config,
                                               hash_keys(step_seed(config.seed, next), kExpectTag));
      r = std::move(next);
    } else {
      sum.e_set_correction.assign(static_cast<std::size_t>(config.u_max) + 1, 0.0);
    }
    res.stages.push_back(std::move(sum));
    res.restrictor = r;
    if (checkpoint) checkpoint(res);
    if (stop) break;
  }
  res.restrictor = snap_all(r);
  const auto tau = rh::sample_tau(res.restrictor, 0);
  res.phi = homeo::build_psi_inverse(homeo::theta_from_tau(haar, tau, res.eta), config.depth);
  return res;
}

PipelineResult run_pipeline(const funcspace::FunctionSpec& f, const ReductionConfig& config) {
  return run_pipeline(f, config, {});
}

std::vector<EvalRow> evaluate_result(const funcspace::FunctionSpec& f, const homeo::DyadicHomeomorphism& phi, int u_max,
                                     int grid_exp, int r_per_u) {
  if (u_max < 1 || u_max > 20) throw DomainError("u_max must lie in [1, 20]");
  if (grid_exp < 1 || grid_exp > 24) throw DomainError("grid exponent must lie in [1, 24]");
  funcspace::check_kernel_resolution(grid_exp, pow2(u_max) - 1);
  if (grid_exp < u_max + 2) throw ResolutionError("grid exponent must be at least u_max + 2 to hold the xi grid");
  funcspace::GridFunction comp{grid_exp, std::vector<double>(static_cast<std::size_t>(pow2(grid_exp)) + 1)};
  for (std::size_t k = 0; k < comp.values.size(); ++k) {
    comp.values[k] = f(phi.forward(std::ldexp(static_cast<double>(k), -grid_exp)));
  }
  const auto base = funcspace::sample(f, grid_exp);
  const funcspace::FourierSeries sc(comp, pow2(u_max));
  const funcspace::FourierSeries sb(base, pow2(u_max));
  std::vector<EvalRow> rows;
  for (int u = 1; u <= u_max; ++u) {
    const std::int64_t g = pow2(u + 2);
    const std::int64_t stride = pow2(grid_exp) / g;
    for (std::int64_t r : r_values(u, r_per_u)) {
      EvalRow row;
      row.u = u;
      row.r = r;
      double pmax = 0.0;
      for (std::int64_t j = 0; j < g; ++j) {
        const double xi = static_cast<double>(j) / static_cast<double>(g);
        const auto k = static_cast<std::size_t>(j * stride);
        const double s = sc.partial_sum(r, xi);
        row.xi_max_dev = std::max(row.xi_max_dev, std::abs(s - comp.values[k]));
        row.baseline_dev = std::max(row.baseline_dev, std::abs(sb.partial_sum(r, xi) - base.values[k]));
        pmax = std::max(pmax, std::abs(s - sc.cesaro_sum(r, xi)));
      }
      double fejer = 0.0;
      for (std::size_t k = 0; k < comp.values.size(); ++k) {
        const double x = std::ldexp(static_cast<double>(k), -grid_exp);
        fejer = std::max(fejer, std::abs(sc.cesaro_sum(r, x) - comp.values[k]));
      }
      row.bernstein_bound = funcspace::bernstein_globalize(pmax, r, u) + fejer;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows) {
  out << "u,r,xi_max_dev,bernstein_bound,baseline_dev\n";
  out.precision(17);
  for (const auto& row : rows) {
    out << row.u << ',' << row.r << ',' << row.xi_max_dev << ',' << row.bernstein_bound << ',' << row.baseline_dev
        << '\n';
  }
}

namespace {

nlohmann::ordered_json step_json(const StepReport& s) {
  nlohmann::ordered_json j;
  j["stage"] = s.stage;
  j["m"] = s.m;
  j["delta"] = s.delta;
  j["cells"] = s.cells;
  j["active"] = s.active;
  j["solver"] = s.solver;
  j["solver_value"] = s.solver_value;
  j["scale"] = s.scale;
  j["log_M"] = s.log_m_budget;
  j["entries"] = s.entries;
  j["worst_stderr_ratio"] = s.worst_stderr_ratio;
  j["max_error"] = s.max_error;
  j["max_error_by_u"] = s.max_error_by_u;
  j["mc_budget"] = s.mc_budget;
  j["two_path"] = {{"checked", s.two_path_checked}, {"max_z", s.two_path_max_z}, {"pass", s.two_path_pass}};
  j["signs"] = s.signs;
  // Per (u, r): the worst xi.
  std::map<std::pair<int, std::int64_t>, const ErrorEntry*> worst;
  for (const auto& e : s.errors) {
    auto& w = worst[{e.u, e.r}];
    if (!w || e.error() > w->error()) w = &e;
  }
  auto rows = nlohmann::ordered_json::array();
  for (const auto& [key, e] : worst) {
    rows.push_back({{"u", e->u},
                    {"r", e->r},
                    {"xi", e->xi},
                    {"error", e->error()},
                    {"stderr", e->std_error},
                    {"direct", e->direct},
                    {"direct_stderr", e->direct_std_error}});
  }
  j["errors"] = std::move(rows);
  return j;
}

}  // namespace

void write_reports_json(std::ostream& out, const PipelineResult& result) {
  nlohmann::ordered_json j;
  j["scale"] = result.scale;
  j["offset"] = result.offset;
  j["eta"] = result.eta;
  j["mc_budget"] = result.mc_budget;
  auto stages = nlohmann::ordered_json::array();
  for (const auto& st : result.stages) {
    nlohmann::ordered_json s;
    s["stage"] = st.stage;
    s["delta"] = st.delta;
    s["cells"] = st.cells;
    s["active"] = st.active;
    s["truncation_budget"] = st.truncation_budget;
    s["decay_slope"] = std::isnan(st.decay_slope) ? nlohmann::ordered_json() : nlohmann::ordered_json(st.decay_slope);
    s["e_set_correction"] = st.e_set_correction;
    s["telescoping_bound"] = st.telescoping_bound;
    auto steps = nlohmann::ordered_json::array();
    for (const auto& step : result.steps) {
      if (step.stage == st.stage) steps.push_back(step_json(step));
    }
    s["steps"] = std::move(steps);
    stages.push_back(std::move(s));
  }
  j["stages"] = std::move(stages);
  out << j.dump(1) << '\n';
}

}  // namespace uniconv::reducer
