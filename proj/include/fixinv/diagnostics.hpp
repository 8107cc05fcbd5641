#pragma once

#include <cmath>
#include <optional>
#include <ostream>
#include <vector>

#include "fixinv/models.hpp"
#include "fixinv/solvers.hpp"

namespace fixinv {

inline constexpr double kNmseFloorDb = -300.0;

/// 10 log10(||z_est - z_ref||^2 / ||z_ref||^2), clamped to -300 dB.
template <typename DerivedA, typename DerivedB>
double nmse_db(const Eigen::MatrixBase<DerivedA>& z_est, const Eigen::MatrixBase<DerivedB>& z_ref) {
  if (z_est.size() != z_ref.size()) throw Error(ErrorCode::DimensionMismatch, "nmse_db operands differ in size");
  const double ref = z_ref.squaredNorm();
  if (!(ref > 0.0)) throw Error(ErrorCode::ZeroReference, "nmse_db reference has zero norm");
  const double err = (z_est - z_ref).squaredNorm();
  if (err == 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(err / ref));
}

// ---------------------------------------------------------------------------
// Cocoercivity scan

/// Ratios <ED z_inf - ED z^k, z_inf - z^k> / ||ED z_inf - ED z^k||^2 along a
/// trajectory.
struct CocoercivityScan {
  std::vector<double> ratios;   ///< included steps only
  std::vector<int> steps;       ///< step index of each ratio
  int excluded = 0;             ///< denominator below kScanDenominatorFloor
  double min_ratio = NAN;       ///< NaN when every step was excluded
  Vector reference_iterate;     ///< z_inf
  double convergence_norm = 0;  ///< ||z^{window} - z_inf||
};

inline constexpr double kScanDenominatorFloor = 1e-20;

/// Scans k = 0..window of a Full trace. Throws TraceTooShort when the trace
/// holds fewer than window + 1 iterates.
CocoercivityScan cocoercivity_scan(const OperatorPair& pair, const IterateTrace& trace, const Vector& z_inf,
                                   int window, Precision p = Precision::Full);

/// Reference iterate at 3x the scan window.
inline int reference_step(int window) { return 3 * window; }

// ---------------------------------------------------------------------------
// Theorem checks

struct Theorem1Report {
  bool evaluated = false;
  bool hypothesis_ok = true;     ///< <T z^k, z^k - z*> >= beta ||T z^k||^2
  double hypothesis_worst_slack = INFINITY;
  bool per_step_descent_ok = true;
  /// min over k of rhs - lhs of ||z^{k+1}-z*||^2 <= ||z^k-z*||^2 - rho(2 beta - rho)||T z^k||^2
  double worst_slack = INFINITY;
  int violations = 0;
  double residual_final = NAN;   ///< ||T z^n||
  double summed_residuals = 0;   ///< sum ||T z^k||^2
  double summed_bound = 0;       ///< ||z^0 - z*||^2 / (rho (2 beta - rho))
};

struct Theorem2Report {
  bool evaluated = false;
  double alpha = 0;
  double lambda = 0;
  double rho = 0;
  double nu = 0;
  double epsilon = 0;
  bool condition10_ok = false;   ///< lambda (1 - alpha + 2 alpha^2) < (1 - alpha)^2
  bool hypothesis_ok = true;     ///< <T y^k, y^k - z*> >= beta ||T y^k||^2
  double hypothesis_worst_slack = INFINITY;
  bool lemma_ok = true;          ///< the per-step lemma inequality
  double lemma_worst_slack = INFINITY;
  bool lyapunov_descent_ok = true;
  double lyapunov_worst_slack = INFINITY;
  int lyapunov_violations = 0;
  bool bound_B_evaluated = false;
  bool bound_B_ok = true;
  double bound_B_worst_slack = INFINITY;
  double M_constant = NAN;       ///< (1 + alpha)^2 / (epsilon rho^2)
  // Conclusion (A): partial sums of the three series.
  double sum_second_diff_sq = 0;
  double sum_step_sq = 0;
  double sum_ty_sq = 0;
  // Conclusion (C): ||z^n - z*|| and its spread over the last tenth of the run.
  double limit_exists_estimate = NAN;
  double limit_spread = NAN;
  // Conclusion (D): ||y^n - z^n||, zero in the limit.
  double yz_gap_final = NAN;
};

struct Remark2Report {
  bool evaluated = false;
  double max_dev_from_identity = NAN;
};

struct TheoremReport {
  Theorem1Report theorem1;
  Theorem2Report theorem2;
  Remark2Report remark2;
  double beta = NAN;

  bool all_ok() const;
};

inline constexpr double kTheoremSlack = 1e-9;

/// Evaluates every inequality applicable to cfg.method on a Full trace.
/// beta defaults to cocoercivity_constant(pair). Throws OracleUnavailable
/// without a finite z_star, TraceTooShort without iterates.
TheoremReport theorem_report(const OperatorPair& pair, const IterateTrace& trace, const SolverConfig& cfg,
                             const Vector& z_star, std::optional<double> beta = std::nullopt);

/// max_ij |(E D)_ij - I_ij|. Throws NotLinear.
double remark2_check(const OperatorPair& pair);

/// Solution of E D z = E x for linear pairs: the oracle zero of T.
Vector linear_oracle_solution(const OperatorPair& pair, const Vector& x);

// ---------------------------------------------------------------------------
// Scatter export

struct ScatterRow {
  int instance_id = 0;
  double min_ratio = NAN;
  double convergence_norm = NAN;
  double final_nmse_db = NAN;
};

struct LinearFit {
  double slope = NAN;
  double intercept = NAN;
};

struct ScatterTable {
  std::vector<ScatterRow> rows;
  std::optional<LinearFit> fit;  ///< convergence_norm against min_ratio
};

/// Least-squares line through (x_i, y_i); empty for fewer than two points or
/// a degenerate x spread.
std::optional<LinearFit> least_squares_fit(const std::vector<double>& xs, const std::vector<double>& ys);

/// Throws EmptyInput on no scans, DimensionMismatch on unequal lengths.
ScatterTable scatter_export(const std::vector<CocoercivityScan>& scans, const std::vector<double>& nmse_db_values);

/// CSV with header instance_id,min_ratio,convergence_norm,final_nmse_db.
void write_scatter_csv(std::ostream& out, const ScatterTable& table);

}  // namespace fixinv
