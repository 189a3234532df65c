#pragma once

#include <iosfwd>
#include <vector>

#include "uniconv/dyadic.hpp"
#include "uniconv/haar.hpp"

namespace uniconv::homeo {

/// A real value for every dyadic rational of rank 1..depth, stored by heap index.
struct DyadicField {
  int depth = 0;
  std::vector<double> values;  // size 2^depth, index 0 unused

  static DyadicField constant(int depth, double value);

  double operator()(const DyadicRational& d) const;
  double& operator[](const DyadicRational& d);
  double at(std::size_t heap) const { return values[heap]; }
};

/// theta(d) in [1/4, 3/4]: where psi^-1 splits the gap around d.
using ThetaMap = DyadicField;
/// tau(d) in [-1, 1].
using TauMap = DyadicField;

/// Increasing piecewise-linear map of [0,1] stored through its inverse at the
/// dyadic grid of the given depth.
class DyadicHomeomorphism {
 public:
  DyadicHomeomorphism() : DyadicHomeomorphism(0, {0.0, 1.0}) {}
  DyadicHomeomorphism(int depth, std::vector<double> inverse_breakpoints);

  static DyadicHomeomorphism identity(int depth);

  int depth() const { return depth_; }
  const std::vector<double>& inverse_breakpoints() const { return inv_; }

  double inverse(double x) const;
  double forward(double y) const;
  /// Per-cell slopes of the inverse, 2^depth entries.
  std::vector<double> derivative_profile() const;

 private:
  int depth_;
  std::vector<double> inv_;
};

DyadicHomeomorphism build_psi_inverse(const ThetaMap& theta, int n);

double eval_inverse(const DyadicHomeomorphism& h, double x);
double eval_forward(const DyadicHomeomorphism& h, double y);
inline std::vector<double> derivative_profile(const DyadicHomeomorphism& h) {
  return h.derivative_profile();
}

/// theta composed with L_I: the field on [0,1] seen through the interval I.
ThetaMap locality_restrict(const ThetaMap& theta, const DyadicInterval& i);

struct HolderReport {
  bool pass = true;
  bool dyadic_pass = true;
  bool probe_pass = true;
  int first_failing_m = -1;        // first level whose increments leave [(3/8)^m, (5/8)^m]
  double worst_lower_ratio = 1.0;  // min over increments of inc / (3/8)^m
  double worst_upper_ratio = 0.0;  // max over increments of inc / (5/8)^m
  double probe_lower_ratio = 1.0;  // min of inc / (|y-x|/4)^{5/4}
  double probe_upper_ratio = 0.0;  // max of inc / (4|y-x|)^{4/5}
  int probe_depth = 0;
};

/// Dyadic increment bounds at every level m <= depth plus the power-law
/// bounds on a probe grid. When eta_admissible is set both must hold for
/// pass; otherwise pass reflects the dyadic bounds only.
HolderReport check_holder(const DyadicHomeomorphism& h, bool eta_admissible);

/// theta = 1/2 + eta q_f tau. Requires eta * sup q <= 1/8.
ThetaMap theta_from_tau(const haar::HaarTable& f, const TauMap& tau, double eta);

/// Largest eta with eta * sup q <= 1/8 (infinite when q vanishes).
double admissible_eta_bound(const haar::HaarTable& f);

/// Constant in exp(-C nu z_n) <= (psi^-1)' <= exp(C nu z_n); from |log(1+2t)| <= 4|t| on |t| <= 1/4.
inline constexpr double kDerivativeConstant = 4.0;

struct DerivativeBoundReport {
  bool pass = true;
  double worst_ratio = 0.0;  // max over cells of |log slope| / (C nu sum Q), 0/0 counted as 0
};

DerivativeBoundReport check_derivative_bound(const DyadicHomeomorphism& h, const haar::HaarTable& f,
                                             double nu);

void write_homeo_csv(std::ostream& out, const DyadicHomeomorphism& h);
DyadicHomeomorphism read_homeo_csv(std::istream& in);

}  // namespace uniconv::homeo
