#include "effdiff/montecarlo.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "effdiff/rng.hpp"

namespace effdiff {

using detail::kLanes;
using detail::Pack;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct RunPlan {
  VectorXd x0;
  long long steps = 0;
  double T_adj = 0.0;
  SchemeConfig scheme;  // force_commutative resolved for the whole run
  bool commutative = false;
  int draws = 0;  // normals consumed per (particle, step)
  long long hist_cells = 0;
  long long hist_start = 0;  // first recorded step index; 0 records x0 too
  long long hist_samples = 0;  // recorded positions per surviving particle
  int workers = 1;
  bool batch = false;
};

RunPlan plan_run(const ProblemDefinition& p, const EnsembleConfig& c,
                 const ExecutionPolicy& exec) {
  if (c.M < 1) throw ArgumentError("ensemble needs at least one particle");
  if (!(c.scheme.h > 0.0)) throw ArgumentError("time step must be positive");
  if (!(c.T > 0.0)) throw ArgumentError("horizon must be positive");
  if (c.scheme.fl_order < 1) throw ArgumentError("series order must be at least 1");
  if (!(c.burn_in_fraction >= 0.0 && c.burn_in_fraction < 1.0))
    throw ArgumentError("burn-in fraction must lie in [0, 1)");

  RunPlan plan;
  plan.x0 = c.x0.size() ? c.x0 : VectorXd::Zero(p.dim());
  if (plan.x0.size() != p.dim())
    throw ArgumentError("initial point has dimension " +
                        std::to_string(plan.x0.size()) + ", problem has " +
                        std::to_string(p.dim()));
  plan.steps = std::llround(c.T / c.scheme.h);
  if (plan.steps < 1) plan.steps = 1;
  plan.T_adj = static_cast<double>(plan.steps) * c.scheme.h;
  plan.scheme = c.scheme;
  // Resolved once per run; only the Milstein family ever looks at it, and a
  // values-only problem cannot answer the commutativity probe.
  if (c.scheme.force_commutative.has_value())
    plan.commutative = *c.scheme.force_commutative;
  else if (c.scheme.kind != SchemeKind::euler_maruyama)
    plan.commutative = p.commutativity().commutative;
  else
    plan.commutative = true;
  plan.scheme.force_commutative = plan.commutative;
  plan.draws = normals_per_step(p.dim(), plan.scheme, plan.commutative);

  if (c.histogram_bins != 0) {
    if (c.histogram_bins < 2)
      throw ArgumentError("histogram needs at least 2 bins per axis");
    long long cells = 1;
    for (int k = 0; k < p.dim(); ++k) {
      cells *= c.histogram_bins;
      if (cells > (1LL << 31)) throw ArgumentError("histogram grid too fine");
    }
    plan.hist_cells = cells;
    plan.hist_start = static_cast<long long>(
        std::ceil(c.burn_in_fraction * static_cast<double>(plan.steps)));
    plan.hist_samples = plan.steps - std::max(plan.hist_start, 1LL) + 1 +
                        (plan.hist_start == 0 ? 1 : 0);
  }

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  plan.workers = std::max(1, exec.workers > 0 ? exec.workers : hw);
  plan.batch = !exec.force_scalar && p.has_batch_kernel() &&
               p.sigma_is_diagonal() && p.dim() <= 3;
  return plan;
}

inline long long cell_of(const double* x, int d, int bins) {
  long long flat = 0, stride = 1;
  for (int a = 0; a < d; ++a) {
    const double w = x[a] - std::floor(x[a]);
    long long c = static_cast<long long>(w * bins);
    if (c < 0) c = 0;
    if (c >= bins) c = bins - 1;
    flat += c * stride;
    stride *= bins;
  }
  return flat;
}

// Lane-parallel trajectories for kLanes consecutive particles. Groups are
// aligned to absolute particle index, so the lane a particle lands in never
// depends on the worker partition and the results stay bitwise stable.
class BatchRunner {
 public:
  BatchRunner(const ProblemDefinition& p, const RunPlan& plan,
              const EnsembleConfig& cfg)
      : p_(p), plan_(plan), d_(p.dim()), bins_(cfg.histogram_bins),
        seed_(cfg.seed), h_(plan.scheme.h), rt_(std::sqrt(plan.scheme.h)),
        half_h_(0.5 * plan.scheme.h), q_(plan.scheme.fl_order) {
    kind_ = plan.scheme.kind;
    if (kind_ == SchemeKind::milstein && p.sigma_is_constant())
      kind_ = SchemeKind::euler_maruyama;
    skip_correction_ = p.sigma_is_constant();
    level_ = kind_ == SchemeKind::euler_maruyama ? DerivLevel::values
             : kind_ == SchemeKind::milstein     ? DerivLevel::first
                                                 : DerivLevel::second;
    z_.resize(plan.draws);
    if (plan.hist_cells > 0)
      lane_cells_.resize(static_cast<size_t>(plan.hist_samples) * kLanes);
  }

  // Runs particles [first, first + count) and writes surviving rows of
  // `positions`, failure flags, and histogram counts for this worker.
  void run_group(long long first, int count, MatrixXd& positions,
                 std::uint8_t* failed_flags, long long* counts) {
    Pack x[3];
    for (int i = 0; i < d_; ++i) x[i] = Pack::Constant(plan_.x0[i]);
    std::array<bool, kLanes> failed{};
    long long cursor = 0;
    if (plan_.hist_cells > 0 && plan_.hist_start == 0) record(x, cursor++);

    for (long long n = 1; n <= plan_.steps; ++n) {
      detail::fill_normals_batch(seed_, static_cast<std::uint64_t>(first),
                                 static_cast<std::uint64_t>(n - 1),
                                 plan_.draws, z_.data());
      step(x);
      Eigen::Array<bool, kLanes, 1> ok = x[0].isFinite();
      for (int i = 1; i < d_; ++i) ok = ok && x[i].isFinite();
      if (!ok.all())
        for (int l = 0; l < kLanes; ++l)
          if (!ok[l]) {
            failed[l] = true;
            for (int i = 0; i < d_; ++i) x[i][l] = plan_.x0[i];
          }
      if (plan_.hist_cells > 0 && n >= std::max(plan_.hist_start, 1LL))
        record(x, cursor++);
    }

    for (int l = 0; l < count; ++l) {
      const long long i = first + l;
      if (failed[l]) {
        failed_flags[i] = 1;
        continue;
      }
      for (int a = 0; a < d_; ++a) positions(i, a) = x[a][l];
      for (long long s = 0; s < cursor; ++s)
        ++counts[lane_cells_[static_cast<size_t>(s) * kLanes + l]];
    }
  }

 private:
  void record(const Pack* x, long long cursor) {
    double pt[3];
    for (int l = 0; l < kLanes; ++l) {
      for (int a = 0; a < d_; ++a) pt[a] = x[a][l];
      lane_cells_[static_cast<size_t>(cursor) * kLanes + l] =
          static_cast<std::uint32_t>(cell_of(pt, d_, bins_));
    }
  }

  void step(Pack* x) {
    p_.evaluate_batch(x, level_, coef_);
    Pack inc[3];
    if (kind_ == SchemeKind::modified_milstein) {
      Pack sst[3], bh[3], sh[3][3];
      for (int k = 0; k < d_; ++k) sst[k] = coef_.sig[k] * coef_.sig[k];
      for (int i = 0; i < d_; ++i) {
        Pack advect = coef_.jac_b[i][0] * coef_.b[0];
        Pack diffuse = sst[0] * coef_.hess_b[i][0][0];
        for (int k = 1; k < d_; ++k) {
          advect += coef_.jac_b[i][k] * coef_.b[k];
          diffuse += sst[k] * coef_.hess_b[i][k][k];
        }
        bh[i] = coef_.b[i] + h_ * (0.5 * advect + 0.25 * diffuse);
      }
      for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) {
          Pack s1 = 0.5 * coef_.jac_b[i][j] * coef_.sig[j];
          if (i == j) {
            for (int k = 0; k < d_; ++k) {
              s1 += 0.5 * coef_.b[k] * coef_.dsig[k][i];
              s1 += 0.25 * sst[k] * coef_.hsig[k][k][i];
            }
            sh[i][j] = coef_.sig[i] + h_ * s1;
          } else {
            sh[i][j] = h_ * s1;
          }
        }
      for (int i = 0; i < d_; ++i) {
        Pack noise = sh[i][0] * z_[0];
        for (int j = 1; j < d_; ++j) noise += sh[i][j] * z_[j];
        inc[i] = bh[i] * h_ + rt_ * noise;
      }
      if (!skip_correction_) add_correction(inc);
    } else {
      for (int i = 0; i < d_; ++i)
        inc[i] = coef_.b[i] * h_ + rt_ * (coef_.sig[i] * z_[i]);
      if (kind_ == SchemeKind::milstein) add_correction(inc);
    }
    for (int i = 0; i < d_; ++i) x[i] += inc[i];
  }

  void add_correction(Pack* inc) {
    Pack J[3][3];
    for (int a = 0; a < d_; ++a)
      J[a][a] = (z_[a] * z_[a] - 1.0) * half_h_;
    if (plan_.commutative) {
      for (int a = 0; a < d_; ++a)
        for (int b = a + 1; b < d_; ++b) {
          const Pack s = (z_[a] * z_[b]) * half_h_;
          J[a][b] = s;
          J[b][a] = s;
        }
    } else {
      // v(k)[a] = z[k d + a]: the primary vector then the q auxiliaries
      for (int a = 0; a < d_; ++a)
        for (int b = a + 1; b < d_; ++b) {
          Pack t = Pack::Zero();
          for (int k = 1; k <= q_; ++k) {
            const double ck = 1.0 / std::sqrt(4.0 * k * k - 1.0);
            t += ck * (z_[(k - 1) * d_ + a] * z_[k * d_ + b] -
                       z_[k * d_ + a] * z_[(k - 1) * d_ + b]);
          }
          const Pack s = (z_[a] * z_[b]) * half_h_;
          J[a][b] = s + t * half_h_;
          J[b][a] = h_ * (z_[a] * z_[b]) - J[a][b];
        }
    }
    for (int i = 0; i < d_; ++i) {
      Pack m = (coef_.sig[0] * coef_.dsig[0][i]) * J[0][i];
      for (int j = 1; j < d_; ++j)
        m += (coef_.sig[j] * coef_.dsig[j][i]) * J[j][i];
      inc[i] += m;
    }
  }

  const ProblemDefinition& p_;
  const RunPlan& plan_;
  int d_;
  int bins_;
  std::uint64_t seed_;
  double h_, rt_, half_h_;
  int q_;
  SchemeKind kind_;
  bool skip_correction_ = false;
  DerivLevel level_ = DerivLevel::values;
  BatchCoefficients coef_;
  std::vector<Pack> z_;
  std::vector<std::uint32_t> lane_cells_;
};

// Per-particle fallback: NormalStream plus the scalar steps. Used for
// problems without a batch kernel and for the diagnostic scalar mode.
class ScalarRunner {
 public:
  ScalarRunner(const ProblemDefinition& p, const RunPlan& plan,
               const EnsembleConfig& cfg)
      : p_(p), plan_(plan), d_(p.dim()), bins_(cfg.histogram_bins),
        seed_(cfg.seed) {
    aux_count_ = (plan.draws - d_) / d_;
    g_.xi.resize(d_);
    g_.xi_aux.assign(aux_count_, VectorXd(d_));
    if (plan.hist_cells > 0)
      cells_.reserve(static_cast<size_t>(plan.hist_samples));
  }

  void run_group(long long first, int count, MatrixXd& positions,
                 std::uint8_t* failed_flags, long long* counts) {
    for (int l = 0; l < count; ++l) run_one(first + l, positions, failed_flags, counts);
  }

 private:
  void run_one(long long i, MatrixXd& positions, std::uint8_t* failed_flags,
               long long* counts) {
    VectorXd x = plan_.x0;
    cells_.clear();
    if (plan_.hist_cells > 0 && plan_.hist_start == 0)
      cells_.push_back(static_cast<std::uint32_t>(cell_of(x.data(), d_, bins_)));
    for (long long n = 1; n <= plan_.steps; ++n) {
      NormalStream s(seed_, static_cast<std::uint64_t>(i),
                     static_cast<std::uint64_t>(n - 1));
      s.fill(g_.xi);
      for (int k = 0; k < aux_count_; ++k) s.fill(g_.xi_aux[k]);
      try {
        x = scheme_step(p_, plan_.scheme, x, g_);
      } catch (const StepError&) {
        failed_flags[i] = 1;
        return;
      } catch (const EvaluationError&) {
        failed_flags[i] = 1;
        return;
      }
      if (plan_.hist_cells > 0 && n >= std::max(plan_.hist_start, 1LL))
        cells_.push_back(static_cast<std::uint32_t>(cell_of(x.data(), d_, bins_)));
    }
    for (int a = 0; a < d_; ++a) positions(i, a) = x[a];
    for (const std::uint32_t c : cells_) ++counts[c];
  }

  const ProblemDefinition& p_;
  const RunPlan& plan_;
  int d_;
  int bins_;
  std::uint64_t seed_;
  int aux_count_ = 0;
  GaussianDraw g_;
  std::vector<std::uint32_t> cells_;
};

TorusGridField field_from_counts(int d, int bins,
                                 const std::vector<long long>& counts,
                                 long long total) {
  TorusGridField f(d, bins, 1);
  const double volume = std::pow(1.0 / bins, d);
  const double scale = 1.0 / (volume * static_cast<double>(total));
  for (long long c = 0; c < static_cast<long long>(counts.size()); ++c)
    f.values(c, 0) = static_cast<double>(counts[c]) * scale;
  return f;
}

}  // namespace

EnsembleResult simulate_ensemble(const ProblemDefinition& problem,
                                 const EnsembleConfig& config,
                                 const ExecutionPolicy& exec) {
  const RunPlan plan = plan_run(problem, config, exec);
  const long long M = config.M;
  const int d = problem.dim();
  const long long groups = (M + kLanes - 1) / kLanes;
  const int W = static_cast<int>(
      std::min<long long>(plan.workers, std::max<long long>(groups, 1)));

  MatrixXd positions(M, d);
  std::vector<std::uint8_t> failed(M, 0);
  std::vector<std::vector<long long>> counts(
      W, std::vector<long long>(plan.hist_cells, 0));
  std::vector<std::exception_ptr> errors(W);

  auto work = [&](int w) {
    try {
      const long long glo = groups * w / W;
      const long long ghi = groups * (w + 1) / W;
      if (plan.batch) {
        BatchRunner runner(problem, plan, config);
        for (long long g = glo; g < ghi; ++g) {
          const long long first = g * kLanes;
          const int count = static_cast<int>(std::min<long long>(kLanes, M - first));
          runner.run_group(first, count, positions, failed.data(), counts[w].data());
        }
      } else {
        ScalarRunner runner(problem, plan, config);
        for (long long g = glo; g < ghi; ++g) {
          const long long first = g * kLanes;
          const int count = static_cast<int>(std::min<long long>(kLanes, M - first));
          runner.run_group(first, count, positions, failed.data(), counts[w].data());
        }
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };

  if (W == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(W - 1);
    for (int w = 1; w < W; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& t : pool) t.join();
  }
  for (int w = 0; w < W; ++w)
    if (errors[w]) std::rethrow_exception(errors[w]);

  long long failures = 0;
  for (long long i = 0; i < M; ++i) failures += failed[i];
  if (failures * 100 > M)
    throw EnsembleError("aborted trajectories exceed 1% of the ensemble (" +
                        std::to_string(failures) + " of " + std::to_string(M) +
                        "); the time step is too large for this problem");

  const long long kept = M - failures;
  MatrixXd pos(kept, d);
  for (long long i = 0, r = 0; i < M; ++i)
    if (!failed[i]) pos.row(r++) = positions.row(i);

  EnsembleResult result;
  result.failures = failures;
  result.steps = plan.steps;
  result.T_adjusted = plan.T_adj;
  result.diffusivity =
      effective_diffusivity_estimate(pos, plan.T_adj, plan.scheme.h);
  auto md = mean_drift_estimate(pos, plan.x0, plan.T_adj);
  result.mean_drift = std::move(md.first);
  result.mean_drift_std_error = std::move(md.second);

  if (plan.hist_cells > 0) {
    std::vector<long long> merged(plan.hist_cells, 0);
    long long total = 0;
    for (int w = 0; w < W; ++w)
      for (long long c = 0; c < plan.hist_cells; ++c) merged[c] += counts[w][c];
    for (long long c = 0; c < plan.hist_cells; ++c) total += merged[c];
    result.histogram =
        field_from_counts(d, config.histogram_bins, merged, total);
  }
  return result;
}

DiffusivityEstimate effective_diffusivity_estimate(const MatrixXd& final_positions,
                                                   double T, double h) {
  const long long M = final_positions.rows();
  if (M < 2) throw ArgumentError("diffusivity estimate needs at least 2 positions");
  if (!(T > 0.0)) throw ArgumentError("horizon must be positive");
  const int d = static_cast<int>(final_positions.cols());

  // deviations against row 0, so an exact constant shift of every row
  // cancels before any rounding can act
  const Eigen::RowVectorXd base = final_positions.row(0);
  VectorXd mean_shift = VectorXd::Zero(d);
  for (long long i = 0; i < M; ++i)
    mean_shift += (final_positions.row(i) - base).transpose();
  mean_shift /= static_cast<double>(M);

  MatrixXd cov = MatrixXd::Zero(d, d);
  MatrixXd m2 = MatrixXd::Zero(d, d);
  VectorXd dev(d);
  for (long long i = 0; i < M; ++i) {
    dev = (final_positions.row(i) - base).transpose() - mean_shift;
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        const double w = dev[a] * dev[b];
        cov(a, b) += w;
        m2(a, b) += w * w;
      }
  }
  cov /= static_cast<double>(M);
  m2 /= static_cast<double>(M);

  DiffusivityEstimate est;
  est.matrix.resize(d, d);
  est.std_error.resize(d, d);
  const double scale = 1.0 / (2.0 * T);
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      est.matrix(a, b) = cov(a, b) * scale;
      est.matrix(b, a) = est.matrix(a, b);
      const double var = std::max(0.0, m2(a, b) - cov(a, b) * cov(a, b));
      est.std_error(a, b) = std::sqrt(var / static_cast<double>(M)) * scale;
      est.std_error(b, a) = est.std_error(a, b);
    }
  est.M = M;
  est.T = T;
  est.h = h;
  return est;
}

std::pair<VectorXd, VectorXd> mean_drift_estimate(const MatrixXd& final_positions,
                                                  const VectorXd& x0, double T) {
  const long long M = final_positions.rows();
  if (M < 1) throw ArgumentError("mean drift needs at least one position");
  if (!(T > 0.0)) throw ArgumentError("horizon must be positive");
  const int d = static_cast<int>(final_positions.cols());
  if (x0.size() != d)
    throw ArgumentError("initial point has dimension " + std::to_string(x0.size()) +
                        ", positions have " + std::to_string(d));

  VectorXd mean = VectorXd::Zero(d);
  for (long long i = 0; i < M; ++i) mean += final_positions.row(i).transpose();
  mean /= static_cast<double>(M);
  VectorXd var = VectorXd::Zero(d);
  VectorXd dev(d);
  for (long long i = 0; i < M; ++i) {
    dev = final_positions.row(i).transpose() - mean;
    var += dev.cwiseProduct(dev);
  }
  var /= static_cast<double>(M);

  VectorXd md = (mean - x0) / T;
  VectorXd se = (var / static_cast<double>(M)).cwiseSqrt() / T;
  return {std::move(md), std::move(se)};
}

TorusGridField invariant_histogram(const MatrixXd& wrapped_samples, int bins) {
  const long long M = wrapped_samples.rows();
  if (M < 1) throw ArgumentError("histogram needs at least one sample");
  if (bins < 2) throw ArgumentError("histogram needs at least 2 bins per axis");
  const int d = static_cast<int>(wrapped_samples.cols());
  if (d < 1) throw ArgumentError("histogram needs at least one coordinate");
  long long cells = 1;
  for (int k = 0; k < d; ++k) {
    cells *= bins;
    if (cells > (1LL << 31)) throw ArgumentError("histogram grid too fine");
  }

  std::vector<long long> counts(cells, 0);
  double pt[8];
  if (d > 8) throw ArgumentError("histogram supports up to 8 dimensions");
  for (long long i = 0; i < M; ++i) {
    for (int a = 0; a < d; ++a) pt[a] = wrapped_samples(i, a);
    ++counts[cell_of(pt, d, bins)];
  }
  return field_from_counts(d, bins, counts, M);
}

double fit_loglog_slope(const std::vector<std::pair<double, double>>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long long n = 0;
  for (const auto& [h, err] : pts) {
    if (!(h > 0.0) || !(err > 0.0)) continue;
    const double lx = std::log(h), ly = std::log(err);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) throw ArgumentError("slope fit needs at least 2 positive points");
  const double nd = static_cast<double>(n);
  const double denom = sxx - sx * sx / nd;
  if (denom <= 0.0) throw ArgumentError("slope fit needs distinct step sizes");
  return (sxy - sx * sy / nd) / denom;
}

ConvergenceStudy convergence_study(const ProblemDefinition& problem,
                                   const std::vector<double>& h_list,
                                   const EnsembleConfig& base,
                                   const MatrixXd& reference,
                                   const ExecutionPolicy& exec) {
  std::set<double> distinct(h_list.begin(), h_list.end());
  if (distinct.size() < 3)
    throw ArgumentError("convergence study needs at least 3 distinct step sizes");
  for (double h : h_list)
    if (!(h > 0.0)) throw ArgumentError("step sizes must be positive");
  if (reference.rows() != problem.dim() || reference.cols() != problem.dim())
    throw ArgumentError("reference matrix dimension mismatch");

  ConvergenceStudy study;
  std::vector<std::pair<double, double>> fit_pts;
  for (double h : h_list) {
    EnsembleConfig cfg = base;
    cfg.scheme.h = h;
    const auto t0 = std::chrono::steady_clock::now();
    const EnsembleResult run = simulate_ensemble(problem, cfg, exec);
    const auto t1 = std::chrono::steady_clock::now();

    ConvergencePoint pt;
    pt.h = h;
    pt.scheme = cfg.scheme.kind;
    pt.estimate = run.diffusivity;
    pt.err_entries = (run.diffusivity.matrix - reference).cwiseAbs();
    pt.std_error_entries = run.diffusivity.std_error;
    pt.err_frobenius = pt.err_entries.norm();
    pt.std_error_frobenius =
        pt.err_frobenius > 0.0
            ? pt.err_entries.cwiseProduct(pt.std_error_entries).norm() /
                  pt.err_frobenius
            : 0.0;
    pt.wallclock_seconds = std::chrono::duration<double>(t1 - t0).count();
    pt.excluded = !(pt.std_error_frobenius < 0.2 * pt.err_frobenius);
    if (!pt.excluded && pt.err_frobenius > 0.0)
      fit_pts.emplace_back(h, pt.err_frobenius);
    study.points.push_back(std::move(pt));
  }
  study.points_used = static_cast<int>(fit_pts.size());
  study.slope_frobenius = fit_pts.size() >= 2
                              ? fit_loglog_slope(fit_pts)
                              : std::numeric_limits<double>::quiet_NaN();
  return study;
}

}  // namespace effdiff
