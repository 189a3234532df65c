#include "uniconv/rh.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "uniconv/errors.hpp"
#include "uniconv/parallel.hpp"
#include "uniconv/rng.hpp"

namespace uniconv::rh {

namespace {

constexpr std::size_t kMaxBatches = 32;
constexpr double kWidthSlack = 1e-12;

void check_eta(const haar::HaarTable& f, double eta) {
  if (!(eta > 0.0)) throw DomainError("eta must be positive");
  if (eta * f.sup_q() > 0.125 + 1e-15) {
    throw ContractError("eta=" + std::to_string(eta) + " is not admissible: eta * sup q = " +
                        std::to_string(eta * f.sup_q()) + " exceeds 1/8");
  }
}

double draw(const Interval& iv, std::uint64_t sample_seed, std::size_t heap) {
  if (iv.degenerate()) return iv.a;
  return iv.a + (iv.b - iv.a) * counter_uniform(sample_seed, heap, 0);
}

std::uint64_t sample_seed(std::uint64_t seed, std::int64_t s) {
  return hash_keys(seed, static_cast<std::uint64_t>(s));
}

std::string cell_name(const DyadicInterval& u) {
  return "[" + std::to_string(u.k - 1) + "/2^" + std::to_string(u.n) + "," + std::to_string(u.k) + "/2^" +
         std::to_string(u.n) + "]";
}

void check_partition(const RHRestrictor& r) {
  if (r.partition.empty()) throw InvariantError("empty partition");
  double edge = 0.0;
  for (const auto& u : r.partition) {
    if (!u.valid() || u.n > r.depth) throw InvariantError("partition cell " + cell_name(u) + " invalid or too deep");
    if (u.lo() != edge) throw InvariantError("partition is not an increasing disjoint cover at " + cell_name(u));
    edge = u.hi();
  }
  if (edge != 1.0) throw InvariantError("partition does not reach 1");
}

// Sample range of batch b out of the given number of batches.
std::pair<std::int64_t, std::int64_t> batch_range(std::int64_t samples, std::size_t batches, std::size_t b) {
  const auto nb = static_cast<std::int64_t>(batches);
  const auto bi = static_cast<std::int64_t>(b);
  return {bi * samples / nb, (bi + 1) * samples / nb};
}

std::size_t batch_count(std::int64_t samples) {
  return std::min<std::size_t>(kMaxBatches, static_cast<std::size_t>(samples));
}

// Welford accumulation of channel 0 plus plain means of the other channels,
// per batch, then combined in batch order.
struct Moments {
  std::vector<std::int64_t> count;
  std::vector<std::vector<double>> mean;  // [batch][node]
  std::vector<std::vector<double>> m2;
  std::vector<std::vector<std::vector<double>>> extra;  // [batch][channel-1][node]
};

struct Combined {
  std::vector<double> mean;
  std::vector<double> std_error;
  std::vector<std::vector<double>> extra;
};

// body(sample_index, out) fills out[channel][node].
template <class Body>
Moments run_batches(std::int64_t samples, std::size_t nodes, std::size_t channels, int threads,
                    const Body& body) {
  const std::size_t batches = batch_count(samples);
  Moments mo;
  mo.count.assign(batches, 0);
  mo.mean.assign(batches, std::vector<double>(nodes, 0.0));
  mo.m2.assign(batches, std::vector<double>(nodes, 0.0));
  mo.extra.assign(batches, std::vector<std::vector<double>>(channels - 1, std::vector<double>(nodes, 0.0)));
  parallel_chunks(batches, threads, [&](std::size_t b) {
    auto state = body.make_state();
    std::vector<std::vector<double>> out(channels, std::vector<double>(nodes));
    const auto [first, last] = batch_range(samples, batches, b);
    auto& mean = mo.mean[b];
    auto& m2 = mo.m2[b];
    std::int64_t k = 0;
    for (std::int64_t s = first; s < last; ++s) {
      body(state, s, out);
      ++k;
      const double inv_k = 1.0 / static_cast<double>(k);
      for (std::size_t x = 0; x < nodes; ++x) {
        const double d = out[0][x] - mean[x];
        mean[x] += d * inv_k;
        m2[x] += d * (out[0][x] - mean[x]);
      }
      for (std::size_t c = 1; c < channels; ++c) {
        auto& e = mo.extra[b][c - 1];
        for (std::size_t x = 0; x < nodes; ++x) e[x] += (out[c][x] - e[x]) * inv_k;
      }
    }
    mo.count[b] = k;
  });
  return mo;
}

Combined combine(const Moments& mo, std::size_t nodes) {
  Combined out;
  out.mean.assign(nodes, 0.0);
  out.std_error.assign(nodes, 0.0);
  const std::size_t channels = mo.extra.empty() ? 1 : mo.extra.front().size() + 1;
  out.extra.assign(channels - 1, std::vector<double>(nodes, 0.0));
  std::vector<double> m2(nodes, 0.0);
  double n = 0.0;
  for (std::size_t b = 0; b < mo.count.size(); ++b) {
    const auto nb = static_cast<double>(mo.count[b]);
    if (nb == 0.0) continue;
    const double total = n + nb;
    for (std::size_t x = 0; x < nodes; ++x) {
      const double d = mo.mean[b][x] - out.mean[x];
      out.mean[x] += d * nb / total;
      m2[x] += mo.m2[b][x] + d * d * n * nb / total;
    }
    for (std::size_t c = 0; c + 1 < channels; ++c) {
      for (std::size_t x = 0; x < nodes; ++x) {
        out.extra[c][x] += (mo.extra[b][c][x] - out.extra[c][x]) * nb / total;
      }
    }
    n = total;
  }
  for (std::size_t x = 0; x < nodes; ++x) {
    out.std_error[x] = n > 1.0 ? std::sqrt(std::max(0.0, m2[x]) / (n - 1.0) / n) : 0.0;
  }
  return out;
}

// The homeomorphism restricted to one partition cell: only the parameters
// strictly inside U are random, and V = phi^-1(U) is fixed.
class LocalSampler {
 public:
  LocalSampler(const haar::HaarTable& haar, const RHRestrictor& r, const DyadicInterval& cell, const Span& span,
               double eta)
      : cell_(cell), span_(span), local_depth_(r.depth - cell.n) {
    const std::size_t size = std::size_t{1} << local_depth_;
    gheap_.assign(size, 0);
    scale_.assign(size, 0.0);
    iv_.assign(size, Interval{});
    for (std::size_t h = 1; h < size; ++h) {
      const DyadicRational d = cell.map(DyadicRational::from_heap_index(h));
      gheap_[h] = d.heap_index();
      scale_[h] = eta * haar.q(d);
      iv_[h] = r.intervals[gheap_[h]];
    }
  }

  int local_depth() const { return local_depth_; }
  std::size_t centre_heap() const { return gheap_.size() > 1 ? gheap_[1] : 0; }
  const Interval& centre() const { return iv_[1]; }

  // Breakpoints of the local psi^-1; the centre parameter is overridden when requested.
  void build(std::uint64_t seed, bool override_centre, double centre_tau, std::vector<double>& b) const {
    const std::size_t cells = std::size_t{1} << local_depth_;
    b.assign(cells + 1, 0.0);
    b[cells] = 1.0;
    std::size_t heap = 1;
    for (int rank = 1; rank <= local_depth_; ++rank) {
      const std::size_t stride = cells >> rank;
      for (std::size_t idx = stride; idx < cells; idx += 2 * stride, ++heap) {
        const double tau = (heap == 1 && override_centre) ? centre_tau : draw(iv_[heap], seed, gheap_[heap]);
        const double theta = 0.5 + scale_[heap] * tau;
        const double lo = b[idx - stride];
        b[idx] = lo + theta * (b[idx + stride] - lo);
      }
    }
  }

  // f(phi(x)) for xs sorted ascending inside the span.
  void evaluate(const funcspace::FunctionSpec& f, const std::vector<double>& b, const std::vector<double>& xs,
                std::vector<double>& out) const {
    const std::size_t cells = b.size() - 1;
    const double width = span_.width();
    std::size_t j = 0;
    for (std::size_t x = 0; x < xs.size(); ++x) {
      const double t = std::clamp((xs[x] - span_.lo) / width, 0.0, 1.0);
      while (j + 1 < cells && b[j + 1] <= t) ++j;
      const double frac = (t - b[j]) / (b[j + 1] - b[j]);
      const double y_local = (static_cast<double>(j) + frac) / static_cast<double>(cells);
      out[x] = f(std::clamp(cell_.map(y_local), 0.0, 1.0));
    }
  }

 private:
  DyadicInterval cell_;
  Span span_;
  int local_depth_;
  std::vector<std::size_t> gheap_;
  std::vector<double> scale_;
  std::vector<Interval> iv_;
};

struct SortedPoints {
  std::vector<double> xs;
  std::vector<std::size_t> order;  // xs[k] = original[order[k]]
};

SortedPoints sort_points(const std::vector<double>& xs) {
  SortedPoints sp;
  sp.order.resize(xs.size());
  std::iota(sp.order.begin(), sp.order.end(), std::size_t{0});
  std::stable_sort(sp.order.begin(), sp.order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  sp.xs.resize(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) sp.xs[k] = xs[sp.order[k]];
  return sp;
}

template <class T>
std::vector<T> unsort(const std::vector<T>& sorted, const std::vector<std::size_t>& order) {
  std::vector<T> out(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) out[order[k]] = sorted[k];
  return out;
}

struct LocalBody {
  const funcspace::FunctionSpec& f;
  const LocalSampler& sampler;
  const std::vector<double>& xs;
  std::uint64_t seed;
  bool antithetic;

  struct State {
    std::vector<double> b;
    std::vector<double> plus;
    std::vector<double> minus;
  };
  State make_state() const { return {{}, std::vector<double>(xs.size()), std::vector<double>(xs.size())}; }

  void operator()(State& st, std::int64_t s, std::vector<std::vector<double>>& out) const {
    const std::uint64_t ss = sample_seed(seed, s);
    if (!antithetic) {
      sampler.build(ss, false, 0.0, st.b);
      sampler.evaluate(f, st.b, xs, out[0]);
      return;
    }
    const Interval& c = sampler.centre();
    const double half = 0.5 * c.length();
    const double u = c.degenerate() ? 0.0 : counter_uniform(ss, sampler.centre_heap(), 0);
    sampler.build(ss, true, c.mid() + u * half, st.b);
    sampler.evaluate(f, st.b, xs, st.plus);
    sampler.build(ss, true, c.mid() - u * half, st.b);
    sampler.evaluate(f, st.b, xs, st.minus);
    for (std::size_t x = 0; x < xs.size(); ++x) {
      out[0][x] = 0.5 * (st.plus[x] - st.minus[x]);
      out[1][x] = st.plus[x];
      out[2][x] = st.minus[x];
    }
  }
};

CellField local_field(const funcspace::FunctionSpec& f, const haar::HaarTable& haar, const RHRestrictor& r,
                      std::size_t i, double eta, const std::vector<double>& xs, std::int64_t samples,
                      std::uint64_t seed, int threads, bool antithetic) {
  if (samples < 2) throw DomainError("need at least 2 samples");
  check_eta(haar, eta);
  const auto cells = phi_inverse_partition(r, haar, eta);
  if (i >= cells.size()) throw DomainError("cell index out of range");
  const Span span = cells[i];
  for (double x : xs) {
    if (!(x >= span.lo - 1e-15 && x <= span.hi + 1e-15)) throw DomainError("evaluation point outside V_i");
  }
  const LocalSampler sampler(haar, r, r.partition[i], span, eta);
  if (antithetic && sampler.local_depth() < 1) throw ContractError("cell centre deeper than the restrictor");
  const SortedPoints sp = sort_points(xs);
  const LocalBody body{f, sampler, sp.xs, seed, antithetic};
  const auto mo = run_batches(samples, xs.size(), antithetic ? 3 : 1, threads, body);
  const auto comb = combine(mo, xs.size());

  CellField out;
  out.cell = i;
  out.span = span;
  out.xs = xs;
  out.mean = unsort(comb.mean, sp.order);
  out.std_error = unsort(comb.std_error, sp.order);
  out.samples = samples;
  out.seed = seed;
  out.batch_sizes = mo.count;
  for (const auto& bm : mo.mean) out.batch_means.push_back(unsort(bm, sp.order));
  if (antithetic) {
    out.plus_mean = unsort(comb.extra[0], sp.order);
    out.minus_mean = unsort(comb.extra[1], sp.order);
  }
  return out;
}

}  // namespace

RHRestrictor RHRestrictor::unrestricted(int depth) {
  if (depth < 0 || depth > 26) throw DomainError("restrictor depth out of range");
  RHRestrictor r;
  r.depth = depth;
  r.intervals.assign(std::size_t{1} << depth, Interval{});
  return r;
}

const Interval& RHRestrictor::operator()(const DyadicRational& d) const {
  if (!d.valid() || d.n > depth) throw DomainError("dyadic rational outside restrictor depth");
  return intervals[d.heap_index()];
}

Interval& RHRestrictor::operator[](const DyadicRational& d) {
  if (!d.valid() || d.n > depth) throw DomainError("dyadic rational outside restrictor depth");
  return intervals[d.heap_index()];
}

homeo::TauMap sample_tau(const RHRestrictor& r, std::uint64_t seed) {
  homeo::TauMap tau = homeo::DyadicField::constant(r.depth, 0.0);
  for (std::size_t h = 1; h < tau.values.size(); ++h) tau.values[h] = draw(r.intervals[h], seed, h);
  return tau;
}

std::vector<Span> phi_inverse_partition(const RHRestrictor& r, const haar::HaarTable& f, double eta) {
  check_eta(f, eta);
  check_partition(r);
  std::map<std::size_t, std::size_t> position;
  int deepest = 0;
  for (std::size_t i = 0; i < r.partition.size(); ++i) {
    position[r.partition[i].heap_index()] = i;
    deepest = std::max(deepest, r.partition[i].n);
  }
  std::vector<Span> out(r.partition.size());
  struct Node {
    DyadicInterval j;
    double lo, hi;
  };
  std::vector<Node> stack{{DyadicInterval{1, 0}, 0.0, 1.0}};
  while (!stack.empty()) {
    const Node nd = stack.back();
    stack.pop_back();
    if (auto it = position.find(nd.j.heap_index()); it != position.end()) {
      out[it->second] = {nd.lo, nd.hi};
      continue;
    }
    if (nd.j.n >= deepest) throw InvariantError("partition does not cover " + cell_name(nd.j));
    const DyadicRational d = nd.j.midpoint();
    const Interval& iv = r(d);
    if (!iv.degenerate()) {
      throw InvariantError("boundary dyadic " + std::to_string(d.k) + "/2^" + std::to_string(d.n) +
                           " is not a single point");
    }
    const double theta = 0.5 + eta * f.q(d) * iv.a;
    const double mid = nd.lo + theta * (nd.hi - nd.lo);
    stack.push_back({nd.j.right_child(), mid, nd.hi});
    stack.push_back({nd.j.left_child(), nd.lo, mid});
  }
  return out;
}

TypeReport check_type(const RHRestrictor& r, const haar::HaarTable& f, double eta, bool snapped_centers) {
  TypeReport rep;
  auto fail = [&](const std::string& why) {
    if (rep.valid) rep.detail = why;
    rep.valid = false;
  };
  try {
    rep.cells = phi_inverse_partition(r, f, eta);
  } catch (const InvariantError& e) {
    fail(e.what());
    return rep;
  }
  const double delta = r.delta;
  const double centre_length = std::ldexp(1.0, -r.m);
  for (std::size_t i = 0; i < rep.cells.size(); ++i) {
    const DyadicInterval& u = r.partition[i];
    const double w = rep.cells[i].width();
    if (w < 0.25 * delta * (1.0 - kWidthSlack) || w > delta * (1.0 + kWidthSlack)) {
      fail("cell " + cell_name(u) + " has preimage width " + std::to_string(w) + " outside [delta/4, delta]");
    }
    const bool wide = w > 0.5 * delta;
    if (u.n + 1 > r.depth) {
      if (wide) fail("wide cell " + cell_name(u) + " has no centre within the restrictor depth");
      continue;
    }
    // Walk the subtree of U: its centre and every other interior dyadic.
    for (int local = 1; local <= r.depth - u.n; ++local) {
      for (std::int64_t k = 1; k < (std::int64_t{1} << local); k += 2) {
        const DyadicRational d = u.map(DyadicRational{k, local});
        const Interval& iv = r(d);
        if (local == 1 && wide) {
          const double pos = (iv.a + 1.0) / centre_length;
          const bool dyadic_len = iv.length() == centre_length && pos == std::floor(pos);
          if (!(dyadic_len || (snapped_centers && iv.degenerate())) || iv.a < -1.0 || iv.b > 1.0) {
            fail("centre of wide cell " + cell_name(u) + " is not a dyadic interval of length 2^" +
                 std::to_string(-r.m));
          }
        } else if (!(iv == Interval{})) {
          fail("interior dyadic " + std::to_string(d.k) + "/2^" + std::to_string(d.n) + " is restricted");
        }
      }
    }
  }
  return rep;
}

std::size_t locate_cell(const std::vector<Span>& cells, double x) {
  auto it = std::upper_bound(cells.begin(), cells.end(), x, [](double v, const Span& s) { return v < s.lo; });
  if (it == cells.begin()) return 0;
  return static_cast<std::size_t>(it - cells.begin()) - 1;
}

bool in_neighbourhood(const std::vector<Span>& cells, std::size_t i, double xi) {
  const std::size_t n = cells.size();
  const std::size_t l = locate_cell(cells, xi);
  return i == l || i == (l + 1) % n || i == (l + n - 1) % n;
}

std::vector<std::size_t> wide_cells(const RHRestrictor& r, const std::vector<Span>& cells) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].width() > 0.5 * r.delta) out.push_back(i);
  }
  return out;
}

std::vector<ExpectationEstimate> expectation_field(const funcspace::FunctionSpec& f, const haar::HaarTable& haar,
                                                   const RHRestrictor& r, double eta,
                                                   const std::vector<double>& xs, std::int64_t samples,
                                                   std::uint64_t seed, int threads) {
  if (samples < 2) throw DomainError("need at least 2 samples");
  check_eta(haar, eta);
  struct Body {
    const funcspace::FunctionSpec& f;
    const haar::HaarTable& haar;
    const RHRestrictor& r;
    double eta;
    const std::vector<double>& xs;
    std::uint64_t seed;
    int make_state() const { return 0; }
    void operator()(int, std::int64_t s, std::vector<std::vector<double>>& out) const {
      const auto tau = sample_tau(r, sample_seed(seed, s));
      const auto psi = homeo::build_psi_inverse(homeo::theta_from_tau(haar, tau, eta), r.depth);
      for (std::size_t x = 0; x < xs.size(); ++x) out[0][x] = f(psi.forward(xs[x]));
    }
  };
  const Body body{f, haar, r, eta, xs, seed};
  const auto comb = combine(run_batches(samples, xs.size(), 1, threads, body), xs.size());
  std::vector<ExpectationEstimate> out(xs.size());
  for (std::size_t x = 0; x < xs.size(); ++x) out[x] = {comb.mean[x], comb.std_error[x], samples, seed};
  return out;
}

MartingaleReport martingale_check(const haar::HaarTable& f, const RHRestrictor& r, double eta,
                                  std::int64_t samples, std::uint64_t seed, int threads) {
  if (samples < 2) throw DomainError("need at least 2 samples");
  check_eta(f, eta);
  for (std::size_t h = 1; h < r.intervals.size(); ++h) {
    if (!(r.intervals[h] == Interval{})) throw ContractError("martingale check needs an unrestricted restrictor");
  }
  struct Body {
    const haar::HaarTable& f;
    const RHRestrictor& r;
    double eta;
    std::uint64_t seed;
    int make_state() const { return 0; }
    void operator()(int, std::int64_t s, std::vector<std::vector<double>>& out) const {
      const auto tau = sample_tau(r, sample_seed(seed, s));
      out[0] = homeo::build_psi_inverse(homeo::theta_from_tau(f, tau, eta), r.depth).derivative_profile();
    }
  };
  const std::size_t cells = std::size_t{1} << r.depth;
  const Body body{f, r, eta, seed};
  const auto comb = combine(run_batches(samples, cells, 1, threads, body), cells);
  MartingaleReport rep;
  rep.mean = comb.mean;
  rep.std_error = comb.std_error;
  for (std::size_t c = 0; c < cells; ++c) {
    const double dev = std::abs(rep.mean[c] - 1.0);
    rep.max_abs_dev = std::max(rep.max_abs_dev, dev);
    if (dev > 0.0) rep.max_z = std::max(rep.max_z, rep.std_error[c] > 0.0 ? dev / rep.std_error[c] : INFINITY);
    if (dev > 4.0 * rep.std_error[c]) rep.pass = false;
  }
  return rep;
}

CellField delta_i(const funcspace::FunctionSpec& f, const haar::HaarTable& haar, const RHRestrictor& r,
                  std::size_t i, double eta, const std::vector<double>& xs, std::int64_t samples,
                  std::uint64_t seed, int threads) {
  check_eta(haar, eta);
  const auto cells = phi_inverse_partition(r, haar, eta);
  if (i >= cells.size()) throw DomainError("cell index out of range");
  if (!(cells[i].width() > 0.5 * r.delta)) {
    throw ContractError("cell " + std::to_string(i) + " is not wide: |V_i| = " + std::to_string(cells[i].width()) +
                        " <= delta/2");
  }
  return local_field(f, haar, r, i, eta, xs, samples, seed, threads, true);
}

CellField cell_expectation(const funcspace::FunctionSpec& f, const haar::HaarTable& haar, const RHRestrictor& r,
                           std::size_t i, double eta, const std::vector<double>& xs, std::int64_t samples,
                           std::uint64_t seed, int threads) {
  return local_field(f, haar, r, i, eta, xs, samples, seed, threads, false);
}

std::size_t quadrature_nodes_needed(double width, int u) {
  const double per_period = std::ceil(std::ldexp(width, u) - 1e-12);
  return std::max<std::size_t>(16, 4 * (static_cast<std::size_t>(per_period) + 1));
}

std::vector<double> midpoint_nodes(const Span& span, std::size_t count) {
  std::vector<double> xs(count);
  const double h = span.width() / static_cast<double>(count);
  for (std::size_t k = 0; k < count; ++k) xs[k] = span.lo + (static_cast<double>(k) + 0.5) * h;
  return xs;
}

double batch_stderr(const std::vector<double>& batch_values, const std::vector<std::int64_t>& batch_sizes,
                    double overall) {
  const std::size_t batches = batch_values.size();
  if (batches < 2) return 0.0;
  double ss = 0.0;
  double total = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const double d = batch_values[b] - overall;
    ss += static_cast<double>(batch_sizes[b]) * d * d;
    total += static_cast<double>(batch_sizes[b]);
  }
  return std::sqrt(ss / static_cast<double>(batches - 1) / total);
}

Spectrum spectrum(const CellField& field, std::int64_t z_max) {
  if (z_max < 0) throw DomainError("negative frequency bound");
  const std::size_t nodes = field.xs.size();
  const std::size_t batches = field.batch_means.size();
  const double h = nodes ? field.span.width() / static_cast<double>(nodes) : 0.0;
  const auto zc = static_cast<std::size_t>(z_max) + 1;
  Spectrum sp;
  sp.z_max = z_max;
  sp.c.assign(zc, 0.0);
  sp.c_stderr.assign(zc, 0.0);
  sp.batch.assign(batches, std::vector<std::complex<double>>(zc, 0.0));
  sp.batch_sizes = field.batch_sizes;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double x = field.xs[k];
    for (std::size_t z = 0; z < zc; ++z) {
      const double ang = 2.0 * std::numbers::pi * std::remainder(static_cast<double>(z) * x, 1.0);
      const std::complex<double> e = std::polar(h, ang);
      sp.c[z] += field.mean[k] * e;
      for (std::size_t b = 0; b < batches; ++b) sp.batch[b][z] += field.batch_means[b][k] * e;
    }
  }
  std::vector<double> re(batches), im(batches);
  for (std::size_t z = 0; z < zc; ++z) {
    for (std::size_t b = 0; b < batches; ++b) {
      re[b] = sp.batch[b][z].real();
      im[b] = sp.batch[b][z].imag();
    }
    const double se_re = batch_stderr(re, sp.batch_sizes, sp.c[z].real());
    const double se_im = batch_stderr(im, sp.batch_sizes, sp.c[z].imag());
    sp.c_stderr[z] = std::hypot(se_re, se_im);
  }
  return sp;
}

std::complex<double> w_vector(const CellField& delta, double xi, int u, int s, std::int64_t t, WKind kind,
                              const Zeroing& zeroing) {
  if (u < 0) throw DomainError("negative frequency scale");
  const std::size_t need = quadrature_nodes_needed(delta.span.width(), u);
  if (delta.xs.size() < need) {
    throw ResolutionError("w vector at u=" + std::to_string(u) + " needs " + std::to_string(need) +
                          " quadrature nodes, have " + std::to_string(delta.xs.size()));
  }
  if (zeroing.applies(u)) return 0.0;
  const double h = delta.span.width() / static_cast<double>(delta.xs.size());
  std::complex<double> acc = 0.0;
  for (std::size_t k = 0; k < delta.xs.size(); ++k) {
    const double x = delta.xs[k] - xi;
    std::complex<double> kernel;
    switch (kind) {
      case WKind::kZero:
        kernel = funcspace::dirichlet_kernel(std::int64_t{1} << u, x);
        break;
      case WKind::kPlus:
        kernel = funcspace::trig_block_sum(t, s, x, funcspace::BlockSign::kPlus);
        break;
      case WKind::kMinus:
        kernel = funcspace::trig_block_sum(t, s, x, funcspace::BlockSign::kMinus);
        break;
    }
    acc += h * delta.mean[k] * kernel;
  }
  return acc;
}

void write_restrictor_json(std::ostream& out, const RHRestrictor& r) {
  nlohmann::ordered_json j;
  j["depth"] = r.depth;
  auto entries = nlohmann::ordered_json::array();
  for (std::size_t h = 1; h < r.intervals.size(); ++h) {
    if (r.intervals[h] == Interval{}) continue;
    const auto d = DyadicRational::from_heap_index(h);
    entries.push_back({{"k", d.k}, {"n", d.n}, {"a", r.intervals[h].a}, {"b", r.intervals[h].b}});
  }
  j["entries"] = std::move(entries);
  auto part = nlohmann::ordered_json::array();
  for (const auto& u : r.partition) part.push_back({{"k", u.k}, {"n", u.n}});
  j["partition"] = std::move(part);
  j["m"] = r.m;
  j["delta"] = r.delta;
  out << j.dump(1) << '\n';
}

RHRestrictor read_restrictor_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
    RHRestrictor r = RHRestrictor::unrestricted(j.at("depth").get<int>());
    for (const auto& e : j.at("entries")) {
      const DyadicRational d{e.at("k").get<std::int64_t>(), e.at("n").get<int>()};
      const Interval iv{e.at("a").get<double>(), e.at("b").get<double>()};
      if (!(iv.a >= -1.0 && iv.a <= iv.b && iv.b <= 1.0)) throw DomainError("restrictor interval outside [-1,1]");
      r[d] = iv;
    }
    r.partition.clear();
    for (const auto& p : j.at("partition")) {
      r.partition.push_back({p.at("k").get<std::int64_t>(), p.at("n").get<int>()});
    }
    r.m = j.at("m").get<int>();
    r.delta = j.at("delta").get<double>();
    if (r.m < -1) throw DomainError("restrictor value m must be >= -1");
    if (!(r.delta > 0.0)) throw DomainError("restrictor delta must be positive");
    check_partition(r);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("bad restrictor JSON: ") + e.what());
  }
}

}  // namespace uniconv::rh
