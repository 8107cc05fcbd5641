#include "fixinv/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace fixinv {

CocoercivityScan cocoercivity_scan(const OperatorPair& pair, const IterateTrace& trace, const Vector& z_inf,
                                   int window, Precision p) {
  if (window < 0) throw Error(ErrorCode::InvalidSpec, "scan window must be >= 0");
  if (static_cast<int>(trace.iterates.size()) < window + 1)
    throw Error(ErrorCode::TraceTooShort, "scan needs " + std::to_string(window + 1) + " iterates, trace has " +
                                              std::to_string(trace.iterates.size()));
  require_dim(z_inf, pair.latent_dim(), "reference iterate");

  CocoercivityScan scan;
  scan.reference_iterate = z_inf;
  const Vector ed_inf = pair.encode(pair.decode(z_inf, p), p);
  double min_ratio = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= window; ++k) {
    const Vector& zk = trace.iterates[static_cast<std::size_t>(k)];
    const Vector d = ed_inf - pair.encode(pair.decode(zk, p), p);
    const double den = d.squaredNorm();
    if (den < kScanDenominatorFloor) {
      ++scan.excluded;
      continue;
    }
    const double ratio = d.dot(z_inf - zk) / den;
    scan.ratios.push_back(ratio);
    scan.steps.push_back(k);
    min_ratio = std::min(min_ratio, ratio);
  }
  if (!scan.ratios.empty()) scan.min_ratio = min_ratio;
  scan.convergence_norm = (trace.iterates[static_cast<std::size_t>(window)] - z_inf).norm();
  return scan;
}

bool TheoremReport::all_ok() const {
  bool ok = true;
  if (theorem1.evaluated) ok = ok && theorem1.hypothesis_ok && theorem1.per_step_descent_ok;
  if (theorem2.evaluated) {
    ok = ok && theorem2.condition10_ok && theorem2.hypothesis_ok && theorem2.lemma_ok && theorem2.lyapunov_descent_ok;
    if (theorem2.bound_B_evaluated) ok = ok && theorem2.bound_B_ok;
  }
  return ok;
}

namespace {

// T z = ED z - ED z*, which equals ED z - E x whenever z* is a zero of T.
class OracleResidual {
 public:
  OracleResidual(const OperatorPair& pair, const Vector& z_star)
      : pair_(pair), ed_star_(pair.encode(pair.decode(z_star))) {}

  Vector operator()(const Vector& z) const { return pair_.encode(pair_.decode(z)) - ed_star_; }

 private:
  const OperatorPair& pair_;
  Vector ed_star_;
};

void check_theorem1(Theorem1Report& rep, const std::vector<Vector>& zs, const Vector& z_star,
                    const OracleResidual& residual, const Schedule& schedule, double beta) {
  rep.evaluated = true;
  const std::size_t n = zs.size() - 1;
  double rho_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const double rho = schedule_lr(schedule, std::min(static_cast<int>(k) + 1, schedule.total_steps));
    rho_min = std::min(rho_min, rho * (2.0 * beta - rho));
    const Vector tz = residual(zs[k]);
    const double tz_sq = tz.squaredNorm();
    const double dist_sq = (zs[k] - z_star).squaredNorm();
    const double next_sq = (zs[k + 1] - z_star).squaredNorm();

    const double hyp = tz.dot(zs[k] - z_star) - beta * tz_sq;
    rep.hypothesis_worst_slack = std::min(rep.hypothesis_worst_slack, hyp);

    const double slack = dist_sq - rho * (2.0 * beta - rho) * tz_sq - next_sq;
    rep.worst_slack = std::min(rep.worst_slack, slack);
    if (slack < -kTheoremSlack) ++rep.violations;
    rep.summed_residuals += tz_sq;
  }
  rep.hypothesis_ok = rep.hypothesis_worst_slack >= -kTheoremSlack;
  rep.per_step_descent_ok = rep.violations == 0;
  rep.residual_final = residual(zs[n]).norm();
  rep.summed_bound = n > 0 && rho_min > 0.0 ? (zs[0] - z_star).squaredNorm() / rho_min
                                            : std::numeric_limits<double>::infinity();
}

void check_theorem2(Theorem2Report& rep, const std::vector<Vector>& zs, const Vector& z_star,
                    const OracleResidual& residual, double alpha, double rho, double beta) {
  rep.evaluated = true;
  rep.alpha = alpha;
  rep.rho = rho;
  rep.lambda = rho / (2.0 * beta);
  const double lambda = rep.lambda;
  rep.nu = 1.0 / lambda - 1.0;
  const double nu = rep.nu;
  rep.epsilon = nu * (1.0 - alpha) - alpha * (1.0 + alpha) - nu * alpha * (1.0 - alpha);
  rep.condition10_ok = lambda * (1.0 - alpha + 2.0 * alpha * alpha) < (1.0 - alpha) * (1.0 - alpha);

  const std::size_t n = zs.size() - 1;  // iterates z^0..z^n
  // z^{-1} = z^0, so every quantity below is defined from k = 0.
  auto z = [&](std::ptrdiff_t k) -> const Vector& { return zs[static_cast<std::size_t>(std::max<std::ptrdiff_t>(k, 0))]; };
  auto dist_sq = [&](std::ptrdiff_t k) { return (z(k) - z_star).squaredNorm(); };
  auto step_sq = [&](std::ptrdiff_t k) { return (z(k) - z(k - 1)).squaredNorm(); };
  auto second_sq = [&](std::ptrdiff_t k) { return (z(k + 1) - 2.0 * z(k) + z(k - 1)).squaredNorm(); };
  auto delta = [&](std::ptrdiff_t k) { return nu * (1.0 - alpha) * step_sq(k); };
  auto big_delta = [&](std::ptrdiff_t k) { return dist_sq(k) - dist_sq(k - 1); };
  auto lyapunov = [&](std::ptrdiff_t k) { return dist_sq(k) - alpha * dist_sq(k - 1) + delta(k); };

  std::vector<double> ty_sq(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<std::ptrdiff_t>(k);
    const Vector y = z(kk) + alpha * (z(kk) - z(kk - 1));
    const Vector ty = residual(y);
    ty_sq[k] = ty.squaredNorm();
    rep.hypothesis_worst_slack = std::min(rep.hypothesis_worst_slack, ty.dot(y - z_star) - beta * ty_sq[k]);

    const double lemma_lhs = big_delta(kk + 1) + delta(kk + 1) + nu * alpha * second_sq(kk);
    const double lemma_rhs =
        alpha * big_delta(kk) + (alpha * (1.0 + alpha) + nu * alpha * (1.0 - alpha)) * step_sq(kk);
    rep.lemma_worst_slack = std::min(rep.lemma_worst_slack, lemma_rhs - lemma_lhs);

    const double lyap_lhs = lyapunov(kk + 1) + nu * alpha * second_sq(kk) + rep.epsilon * step_sq(kk);
    const double lyap_slack = lyapunov(kk) - lyap_lhs;
    rep.lyapunov_worst_slack = std::min(rep.lyapunov_worst_slack, lyap_slack);
    if (lyap_slack < -kTheoremSlack) ++rep.lyapunov_violations;

    if (k >= 1) {
      rep.sum_second_diff_sq += second_sq(kk);
      rep.sum_ty_sq += ty_sq[k];
    }
  }
  for (std::size_t k = 1; k <= n; ++k) rep.sum_step_sq += step_sq(static_cast<std::ptrdiff_t>(k));
  rep.hypothesis_ok = rep.hypothesis_worst_slack >= -kTheoremSlack;
  rep.lemma_ok = rep.lemma_worst_slack >= -kTheoremSlack;
  rep.lyapunov_descent_ok = rep.lyapunov_violations == 0;

  // Conclusion (B): min_{1<=k<=m} ||T y^k||^2 <= M ||z^1 - z*||^2 / m.
  if (rep.epsilon > 0.0 && n >= 2) {
    rep.bound_B_evaluated = true;
    rep.M_constant = (1.0 + alpha) * (1.0 + alpha) / (rep.epsilon * rho * rho);
    const double z1_sq = dist_sq(1);
    double running_min = std::numeric_limits<double>::infinity();
    for (std::size_t m = 1; m < n; ++m) {
      running_min = std::min(running_min, ty_sq[m]);
      const double bound = rep.M_constant * z1_sq / static_cast<double>(m);
      rep.bound_B_worst_slack = std::min(rep.bound_B_worst_slack, bound - running_min);
    }
    rep.bound_B_ok = rep.bound_B_worst_slack >= -kTheoremSlack;
  }

  const auto last = static_cast<std::ptrdiff_t>(n);
  rep.limit_exists_estimate = std::sqrt(dist_sq(last));
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::ptrdiff_t k = last - last / 10; k <= last; ++k) {
    const double d = std::sqrt(dist_sq(k));
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  rep.limit_spread = hi - lo;
  rep.yz_gap_final = alpha * std::sqrt(step_sq(last));
}

}  // namespace

TheoremReport theorem_report(const OperatorPair& pair, const IterateTrace& trace, const SolverConfig& cfg,
                             const Vector& z_star, std::optional<double> beta) {
  if (z_star.size() != pair.latent_dim() || !z_star.allFinite())
    throw Error(ErrorCode::OracleUnavailable, "theorem report needs a finite z* of latent dimension");
  if (trace.iterates.empty()) throw Error(ErrorCode::TraceTooShort, "theorem report needs a Full trace");
  if (!beta) beta = cocoercivity_constant(pair);
  if (!beta || !(*beta > 0.0))
    throw Error(ErrorCode::OracleUnavailable, "no cocoercivity constant for this pair; pass beta explicitly");

  TheoremReport report;
  report.beta = *beta;
  const OracleResidual residual(pair, z_star);
  if (std::holds_alternative<ForwardStep>(cfg.method)) {
    check_theorem1(report.theorem1, trace.iterates, z_star, residual, cfg.schedule, *beta);
  } else if (const auto* km = std::get_if<InertialKM>(&cfg.method);
             km && cfg.schedule.kind == Schedule::Kind::Fixed) {
    check_theorem2(report.theorem2, trace.iterates, z_star, residual, km->alpha, cfg.schedule.lr, *beta);
  }
  if (pair.linear()) {
    report.remark2.evaluated = true;
    report.remark2.max_dev_from_identity = remark2_check(pair);
  }
  return report;
}

double remark2_check(const OperatorPair& pair) {
  const Matrix m = composite(pair);
  return (m - Matrix::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff();
}

Vector linear_oracle_solution(const OperatorPair& pair, const Vector& x) {
  const Matrix m = composite(pair);
  require_dim(x, pair.pixel_dim(), "image");
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible()) throw Error(ErrorCode::OracleUnavailable, "composite E*D is singular");
  return lu.solve(pair.linear()->encoder * x);
}

std::optional<LinearFit> least_squares_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::DimensionMismatch, "fit inputs differ in length");
  if (xs.size() < 2) return std::nullopt;
  const auto n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, scale = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    scale += xs[i] * xs[i];
  }
  if (!(sxx > 1e-14 * std::max(1.0, scale))) return std::nullopt;
  const double slope = sxy / sxx;
  return LinearFit{slope, my - slope * mx};
}

ScatterTable scatter_export(const std::vector<CocoercivityScan>& scans, const std::vector<double>& nmse_db_values) {
  if (scans.empty()) throw Error(ErrorCode::EmptyInput, "scatter export needs at least one scan");
  if (scans.size() != nmse_db_values.size())
    throw Error(ErrorCode::DimensionMismatch, "scans and NMSE values differ in length");
  ScatterTable table;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < scans.size(); ++i) {
    table.rows.push_back({static_cast<int>(i), scans[i].min_ratio, scans[i].convergence_norm, nmse_db_values[i]});
    if (std::isfinite(scans[i].min_ratio) && std::isfinite(scans[i].convergence_norm)) {
      xs.push_back(scans[i].min_ratio);
      ys.push_back(scans[i].convergence_norm);
    }
  }
  table.fit = least_squares_fit(xs, ys);
  return table;
}

void write_scatter_csv(std::ostream& out, const ScatterTable& table) {
  // Shortest text that round-trips each double.
  auto put = [&out](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
  };
  out << "instance_id,min_ratio,convergence_norm,final_nmse_db\n";
  for (const auto& r : table.rows) {
    out << r.instance_id << ',';
    put(r.min_ratio);
    out << ',';
    put(r.convergence_norm);
    out << ',';
    put(r.final_nmse_db);
    out << '\n';
  }
}

}  // namespace fixinv
