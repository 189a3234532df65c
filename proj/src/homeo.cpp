#include "uniconv/homeo.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "uniconv/errors.hpp"

namespace uniconv::homeo {

DyadicField DyadicField::constant(int depth, double value) {
  if (depth < 0 || depth > 26) throw DomainError("dyadic field depth out of range");
  return DyadicField{depth, std::vector<double>(std::size_t{1} << depth, value)};
}

double DyadicField::operator()(const DyadicRational& d) const {
  if (!d.valid() || d.n > depth) throw DomainError("dyadic rational outside field depth");
  return values[d.heap_index()];
}

double& DyadicField::operator[](const DyadicRational& d) {
  if (!d.valid() || d.n > depth) throw DomainError("dyadic rational outside field depth");
  return values[d.heap_index()];
}

DyadicHomeomorphism::DyadicHomeomorphism(int depth, std::vector<double> inverse_breakpoints)
    : depth_(depth), inv_(std::move(inverse_breakpoints)) {
  if (depth < 0 || depth > 26) throw DomainError("homeomorphism depth out of range");
  if (inv_.size() != (std::size_t{1} << depth) + 1) {
    throw InvariantError("homeomorphism of depth " + std::to_string(depth) + " needs " +
                         std::to_string((std::size_t{1} << depth) + 1) + " breakpoints");
  }
  if (inv_.front() != 0.0 || inv_.back() != 1.0) throw InvariantError("homeomorphism must fix 0 and 1");
  for (std::size_t k = 0; k + 1 < inv_.size(); ++k) {
    if (!(inv_[k] < inv_[k + 1])) {
      throw InvariantError("breakpoints not strictly increasing at k=" + std::to_string(k));
    }
  }
}

DyadicHomeomorphism DyadicHomeomorphism::identity(int depth) {
  const std::size_t cells = std::size_t{1} << depth;
  std::vector<double> v(cells + 1);
  for (std::size_t k = 0; k <= cells; ++k) v[k] = std::ldexp(static_cast<double>(k), -depth);
  return {depth, std::move(v)};
}

double DyadicHomeomorphism::inverse(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("homeomorphism argument outside [0,1]");
  const std::size_t cells = inv_.size() - 1;
  const double pos = x * static_cast<double>(cells);
  auto k = static_cast<std::size_t>(std::floor(pos));
  if (k >= cells) k = cells - 1;
  return inv_[k] + (inv_[k + 1] - inv_[k]) * (pos - static_cast<double>(k));
}

double DyadicHomeomorphism::forward(double y) const {
  if (!(y >= 0.0 && y <= 1.0)) throw DomainError("homeomorphism argument outside [0,1]");
  const std::size_t cells = inv_.size() - 1;
  auto it = std::upper_bound(inv_.begin(), inv_.end(), y);
  std::size_t k = it == inv_.begin() ? 0 : static_cast<std::size_t>(it - inv_.begin()) - 1;
  if (k >= cells) k = cells - 1;
  const double frac = (y - inv_[k]) / (inv_[k + 1] - inv_[k]);
  return (static_cast<double>(k) + frac) / static_cast<double>(cells);
}

std::vector<double> DyadicHomeomorphism::derivative_profile() const {
  const std::size_t cells = inv_.size() - 1;
  std::vector<double> slopes(cells);
  for (std::size_t k = 0; k < cells; ++k) slopes[k] = (inv_[k + 1] - inv_[k]) * static_cast<double>(cells);
  return slopes;
}

double eval_inverse(const DyadicHomeomorphism& h, double x) { return h.inverse(x); }
double eval_forward(const DyadicHomeomorphism& h, double y) { return h.forward(y); }

DyadicHomeomorphism build_psi_inverse(const ThetaMap& theta, int n) {
  if (n < 0 || n > theta.depth) throw DomainError("build depth exceeds theta depth");
  const std::size_t cells = std::size_t{1} << n;
  std::vector<double> b(cells + 1, 0.0);
  b[cells] = 1.0;
  for (int rank = 1; rank <= n; ++rank) {
    const std::size_t stride = cells >> rank;
    for (std::int64_t k = 1; k < (std::int64_t{1} << rank); k += 2) {
      const double t = theta(DyadicRational{k, rank});
      if (!(t >= 0.25 && t <= 0.75)) {
        throw InvariantError("theta(" + std::to_string(k) + "/2^" + std::to_string(rank) + ") = " +
                             std::to_string(t) + " outside [1/4,3/4]");
      }
      const auto idx = static_cast<std::size_t>(k) * stride;
      const double lo = b[idx - stride];
      const double hi = b[idx + stride];
      b[idx] = lo + t * (hi - lo);
    }
  }
  return {n, std::move(b)};
}

ThetaMap locality_restrict(const ThetaMap& theta, const DyadicInterval& i) {
  if (!i.valid() || i.n > theta.depth) throw DomainError("restriction interval deeper than theta");
  const int depth = theta.depth - i.n;
  ThetaMap out = DyadicField::constant(depth, 0.5);
  for (std::size_t heap = 1; heap < out.values.size(); ++heap) {
    out.values[heap] = theta(i.map(DyadicRational::from_heap_index(heap)));
  }
  return out;
}

HolderReport check_holder(const DyadicHomeomorphism& h, bool eta_admissible) {
  constexpr double kSlack = 1e-12;
  HolderReport r;
  const auto& b = h.inverse_breakpoints();
  const int depth = h.depth();
  for (int m = 1; m <= depth; ++m) {
    const std::size_t stride = std::size_t{1} << (depth - m);
    const double lower = std::pow(3.0 / 8.0, m);
    const double upper = std::pow(5.0 / 8.0, m);
    bool level_ok = true;
    for (std::size_t k = 0; k + stride < b.size(); k += stride) {
      const double inc = b[k + stride] - b[k];
      r.worst_lower_ratio = std::min(r.worst_lower_ratio, inc / lower);
      r.worst_upper_ratio = std::max(r.worst_upper_ratio, inc / upper);
      if (inc < lower * (1.0 - kSlack) || inc > upper * (1.0 + kSlack)) level_ok = false;
    }
    if (!level_ok && r.first_failing_m < 0) r.first_failing_m = m;
  }
  r.dyadic_pass = r.first_failing_m < 0;

  r.probe_depth = std::min(depth, 9);
  const std::size_t probe_cells = std::size_t{1} << r.probe_depth;
  const std::size_t stride = std::size_t{1} << (depth - r.probe_depth);
  for (std::size_t i = 0; i < probe_cells; ++i) {
    for (std::size_t j = i + 1; j <= probe_cells; ++j) {
      const double gap = static_cast<double>(j - i) / static_cast<double>(probe_cells);
      const double inc = b[j * stride] - b[i * stride];
      const double lower = std::pow(0.25 * gap, 1.25);
      const double upper = std::pow(4.0 * gap, 0.8);
      r.probe_lower_ratio = std::min(r.probe_lower_ratio, inc / lower);
      r.probe_upper_ratio = std::max(r.probe_upper_ratio, inc / upper);
    }
  }
  r.probe_pass = r.probe_lower_ratio >= 1.0 - kSlack && r.probe_upper_ratio <= 1.0 + kSlack;
  r.pass = r.dyadic_pass && (!eta_admissible || r.probe_pass);
  return r;
}

double admissible_eta_bound(const haar::HaarTable& f) {
  return f.sup_q() > 0.0 ? 0.125 / f.sup_q() : INFINITY;
}

ThetaMap theta_from_tau(const haar::HaarTable& f, const TauMap& tau, double eta) {
  if (!(eta > 0.0)) throw DomainError("eta must be positive");
  if (eta * f.sup_q() > 0.125 + 1e-15) {
    throw ContractError("eta=" + std::to_string(eta) + " is not admissible: eta * sup q = " +
                        std::to_string(eta * f.sup_q()) + " exceeds 1/8");
  }
  ThetaMap theta = DyadicField::constant(tau.depth, 0.5);
  for (std::size_t heap = 1; heap < tau.values.size(); ++heap) {
    const double t = tau.values[heap];
    if (!(t >= -1.0 && t <= 1.0)) throw DomainError("tau value outside [-1,1]");
    const double q = f.q(DyadicRational::from_heap_index(heap));
    theta.values[heap] = 0.5 + eta * q * t;
  }
  return theta;
}

DerivativeBoundReport check_derivative_bound(const DyadicHomeomorphism& h, const haar::HaarTable& f,
                                             double nu) {
  DerivativeBoundReport r;
  const auto slopes = h.derivative_profile();
  const int depth = h.depth();
  for (std::size_t c = 0; c < slopes.size(); ++c) {
    const double x = (static_cast<double>(c) + 0.5) / static_cast<double>(slopes.size());
    double z = 0.0;
    for (int n = 0; n < depth; ++n) z += f.q(DyadicInterval{cell_of(x, n) + 1, n});
    const double bound = kDerivativeConstant * nu * z;
    const double excess = std::abs(std::log(slopes[c]));
    if (excess == 0.0) continue;
    const double ratio = bound > 0.0 ? excess / bound : INFINITY;
    r.worst_ratio = std::max(r.worst_ratio, ratio);
  }
  r.pass = r.worst_ratio <= 1.0 + 1e-12;
  return r;
}

void write_homeo_csv(std::ostream& out, const DyadicHomeomorphism& h) {
  out << "k,psi_inv\n";
  out.precision(17);
  const auto& b = h.inverse_breakpoints();
  for (std::size_t k = 0; k < b.size(); ++k) out << k << ',' << b[k] << '\n';
}

DyadicHomeomorphism read_homeo_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || (line != "k,psi_inv" && line != "k,psi_inv\r")) {
    throw DomainError("homeomorphism CSV header must be 'k,psi_inv'");
  }
  std::vector<double> b;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DomainError("bad homeomorphism CSV row: " + line);
    try {
      if (std::stoull(line.substr(0, comma)) != b.size()) throw DomainError("rows out of order");
      b.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::invalid_argument&) {
      throw DomainError("bad homeomorphism CSV row: " + line);
    }
  }
  if (b.size() < 2) throw DomainError("homeomorphism CSV needs at least two rows");
  const std::size_t cells = b.size() - 1;
  if ((cells & (cells - 1)) != 0) throw DomainError("homeomorphism CSV must have 2^depth+1 rows");
  int depth = 0;
  while ((std::size_t{1} << depth) < cells) ++depth;
  return {depth, std::move(b)};
}

}  // namespace uniconv::homeo
