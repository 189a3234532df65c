#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "uniconv/funcspace.hpp"
#include "uniconv/haar.hpp"
#include "uniconv/homeo.hpp"
#include "uniconv/rh.hpp"
#include "uniconv/signsolver.hpp"

namespace uniconv::reducer {

enum class SolverKind { kHierarchical, kGreedy };

std::string to_string(SolverKind kind);
SolverKind solver_kind_from_string(const std::string& name);

struct ReductionConfig {
  int depth = 12;
  /// 0 selects the largest admissible eta, 1/(8 sup q).
  double eta = 0.0;
  int u_max = 6;
  int m_max = 8;
  double delta_min = 1.0 / 256.0;
  std::int64_t mc_samples = 4096;
  std::uint64_t seed = 1;
  signsolver::SolverParams solver;
  SolverKind solver_kind = SolverKind::kHierarchical;
  /// Largest allowed Monte-Carlo stderr of an instance entry, relative to the
  /// calibrated bound scale.
  double precision_fraction = 0.25;
  /// Values of r checked per dyadic block [2^{u-1}, 2^u); 0 checks every r.
  int r_per_u = 4;
  /// xi runs over all of 2^{-u-2}Z up to this u and is thinned to 2^{xi_cap+2} points above.
  int xi_cap = 8;
  bool two_path = true;
  int threads = 1;

  /// Throws DomainError for unusable settings.
  void validate() const;
};

/// Per-cell Monte-Carlo Delta_i on the quadrature grid, with spectra.
struct CellDeltas {
  std::vector<rh::Span> cells;
  std::vector<std::size_t> active;  // wide cells with a non-degenerate centre
  std::vector<rh::CellField> fields;
  std::vector<rh::Spectrum> spectra;
};

CellDeltas estimate_deltas(const funcspace::FunctionSpec& f, const haar::HaarTable& haar, const rh::RHRestrictor& r,
                           double eta, const ReductionConfig& config, std::uint64_t seed);

struct EntryKey {
  enum class Kind { kZero, kPlusReal, kPlusImag };
  Kind kind = Kind::kZero;
  int u = 1;
  std::int64_t xi_index = 0;
  std::int64_t xi_grid = 1;  // xi = xi_index / xi_grid
  int s = 0;
  std::int64_t t = 0;

  std::string describe() const;
};

struct BudgetRow {
  std::int64_t l = 0;
  std::int64_t b = 1;
  std::int64_t count = 0;
};

struct AssembledInstance {
  signsolver::SignInstance instance;
  std::vector<EntryKey> keys;
  std::vector<BudgetRow> budget;  // (l, b) assignment table with counts
  double scale = 1.0;             // raw w = scale * v, i.e. C_1 2^{-m/44}
  double omega = 0.0;             // omega_f(delta^{4/5})
  std::int64_t b_floor = 1;       // floor(omega^{-1/5})
  double worst_stderr_ratio = 0.0;
};

inline constexpr double kGamma = 91.0;

/// Builds the sign instance from the Delta spectra: w0 against D_{2^{u-1}} and
/// the real and imaginary parts of every block w+ (s <= u-2, 2^{s+1} | t) for
/// u = 1..u_max, xi on (1/U)Z. Throws PrecisionError when an entry's Monte-Carlo
/// error exceeds precision_fraction of the calibrated scale.
AssembledInstance assemble_instance(const rh::RHRestrictor& r, const CellDeltas& deltas, double omega,
                                    const ReductionConfig& config);

/// Convenience form that estimates Delta first.
AssembledInstance assemble_instance(const rh::RHRestrictor& r, const funcspace::FunctionSpec& f,
                                    const haar::HaarTable& haar, double eta, const ReductionConfig& config);

/// One measured |int_{E_xi} (E f o phi_I - E f o phi_J) D_r(x - xi) dx|.
struct ErrorEntry {
  int u = 1;
  std::int64_t r = 1;
  double xi = 0.0;
  double signed_value = 0.0;
  double std_error = 0.0;
  double direct = 0.0;  // fresh re-estimate, when the two-path check ran
  double direct_std_error = 0.0;

  double error() const { return signed_value < 0 ? -signed_value : signed_value; }
};

struct StepReport {
  int stage = 0;
  int m = 0;  // value of J
  double delta = 1.0;
  std::size_t cells = 0;
  std::size_t active = 0;
  std::string solver;
  double solver_value = 0.0;
  double scale = 1.0;
  double log_m_budget = 0.0;
  std::size_t entries = 0;
  double worst_stderr_ratio = 0.0;
  std::vector<int> signs;
  std::vector<ErrorEntry> errors;
  std::vector<double> max_error_by_u;  // index u, entry 0 unused
  double max_error = 0.0;
  double mc_budget = 0.0;  // 4 * max stderr of the reported errors
  bool two_path_checked = false;
  double two_path_max_z = 0.0;
  bool two_path_pass = true;
};

struct StepResult {
  rh::RHRestrictor restrictor;
  StepReport report;
};

/// One reduction step: halves the centre interval of every active cell according
/// to the signs and reports the induced change of the Dirichlet integrals.
StepResult reduce_step(const rh::RHRestrictor& r, const funcspace::FunctionSpec& f, const haar::HaarTable& haar,
                       double eta, const ReductionConfig& config, int stage = 0);

struct StageResult {
  rh::RHRestrictor restrictor;  // wide-cell centres snapped to points
  std::vector<StepReport> steps;
  double truncation_budget = 0.0;  // (2^{-m_max})^{1/22}
  double decay_slope = 0.0;        // least-squares d log(max_error) / dm, NaN with < 2 points
};

StageResult collapse_stage(const rh::RHRestrictor& r, const funcspace::FunctionSpec& f, const haar::HaarTable& haar,
                           double eta, const ReductionConfig& config, int stage = 0);

/// Splits every wide cell (its centre must be a point) and moves to delta' = 5/8 delta, m = -1.
rh::RHRestrictor split_partition(const rh::RHRestrictor& r, const haar::HaarTable& haar, double eta);

struct StageSummary {
  int stage = 0;
  double delta = 1.0;
  std::size_t cells = 0;
  std::size_t active = 0;
  double truncation_budget = 0.0;
  double decay_slope = 0.0;
  std::vector<double> e_set_correction;  // per u: max over (r, xi) of the measured E_{k+1} \ E_k term
  std::vector<double> telescoping_bound;  // per u: omega_f(4 * 2^{-4u/5})
};

struct PipelineResult {
  homeo::DyadicHomeomorphism phi;
  rh::RHRestrictor restrictor;
  std::vector<StepReport> steps;
  std::vector<StageSummary> stages;
  double scale = 1.0;  // f was replaced by scale * f + offset
  double offset = 0.0;
  double eta = 0.0;
  double mc_budget = 0.0;  // sum of the step budgets, in the units of the input f
};

PipelineResult run_pipeline(const funcspace::FunctionSpec& f, const ReductionConfig& config);

/// Same, calling checkpoint with the partial result after every stage.
PipelineResult run_pipeline(const funcspace::FunctionSpec& f, const ReductionConfig& config,
                            const std::function<void(const PipelineResult&)>& checkpoint);

struct EvalRow {
  int u = 1;
  std::int64_t r = 1;
  double xi_max_dev = 0.0;
  double bernstein_bound = 0.0;
  double baseline_dev = 0.0;
};

/// For every u <= u_max and r in [2^{u-1}, 2^u) (thinned to r_per_u values),
/// max over xi in 2^{-u-2}Z of |S_r(f o phi)(xi) - f(phi(xi))|, a global bound
/// from Bernstein's inequality applied to S_r - F_r, and the same deviation
/// for phi = identity.
std::vector<EvalRow> evaluate_result(const funcspace::FunctionSpec& f, const homeo::DyadicHomeomorphism& phi, int u_max,
                                     int grid_exp, int r_per_u = 4);

/// The r values checked in [2^{u-1}, 2^u): both ends and evenly spaced interior points.
std::vector<std::int64_t> r_values(int u, int r_per_u);

void write_eval_csv(std::ostream& out, const std::vector<EvalRow>& rows);
void write_reports_json(std::ostream& out, const PipelineResult& result);

}  // namespace uniconv::reducer
