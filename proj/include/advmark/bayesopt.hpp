#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "json.hpp"

#include "advmark/errors.hpp"
#include "advmark/parallel.hpp"
#include "advmark/pattern.hpp"

namespace advmark::bayesopt {

inline constexpr double kPi = 3.14159265358979323846;

/// Matern 5/2 covariance at distance r, unit signal variance.
inline double matern52(double r, double ell) {
  if (!(ell > 0.0)) throw ConfigError("matern52: lengthscale must be positive");
  const double a = std::sqrt(5.0) * r / ell;
  return (1.0 + a + 5.0 * r * r / (3.0 * ell * ell)) * std::exp(-a);
}

inline double matern52(const Eigen::VectorXd& u, const Eigen::VectorXd& v, double ell) {
  if (u.size() != v.size()) throw ConfigError("matern52: dimension mismatch");
  return matern52((u - v).norm(), ell);
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Closed-form EI for a Gaussian belief N(mu, sigma^2) against incumbent
/// y_best. Degenerate sigma collapses to the deterministic improvement.
inline double expected_improvement(double mu, double sigma, double y_best) {
  if (sigma < 1e-12) return std::max(0.0, mu - y_best);
  const double z = (mu - y_best) / sigma;
  return std::max(0.0, (mu - y_best) * normal_cdf(z) + sigma * normal_pdf(z));
}

/// Fitting policy: lengthscale picked from a log-spaced grid by marginal
/// likelihood, signal variance pinned to 1 on standardized outputs, small
/// fixed noise floor with escalating jitter when the Cholesky fails.
struct HyperPolicy {
  double ell_min = 0.0625;  // 2^-4
  double ell_max = 4.0;     // 2^2
  int ell_grid = 7;
  double sigma_f2 = 1.0;
  double sigma_n2 = 1e-6;
  double max_jitter = 1e-4;

  std::vector<double> lengthscales() const {
    if (ell_grid < 1 || !(ell_min > 0.0) || !(ell_max >= ell_min))
      throw ConfigError("hyper policy: bad lengthscale grid");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(ell_grid));
    if (ell_grid == 1) {
      out.push_back(ell_min);
      return out;
    }
    const double step = (std::log(ell_max) - std::log(ell_min)) / (ell_grid - 1);
    for (int i = 0; i < ell_grid; ++i) out.push_back(std::exp(std::log(ell_min) + step * i));
    return out;
  }
};

/// Training data in normalized coordinates. Inputs that collide within
/// 1e-10 are nudged apart by 1e-8 steps so the Gram matrix stays invertible.
struct ObservationSet {
  static constexpr double kDuplicateTolerance = 1e-10;
  static constexpr double kDuplicateJitter = 1e-8;

  std::vector<Eigen::VectorXd> inputs;
  std::vector<double> outputs;

  std::size_t size() const { return inputs.size(); }

  bool has_duplicate(const Eigen::VectorXd& x) const {
    for (const Eigen::VectorXd& e : inputs)
      if ((x - e).lpNorm<Eigen::Infinity>() <= kDuplicateTolerance) return true;
    return false;
  }

  void add(Eigen::VectorXd x, double y) {
    if (!std::isfinite(y) || !x.allFinite())
      throw RuntimeFailure("observation set: non-finite observation");
    if (!inputs.empty() && x.size() != inputs.front().size())
      throw ConfigError("observation set: dimension mismatch");
    for (int attempt = 1; attempt <= 64 && has_duplicate(x); ++attempt) {
      const double delta = kDuplicateJitter * attempt;
      for (Eigen::Index d = 0; d < x.size(); ++d)
        x[d] = (x[d] + delta <= 1.0) ? x[d] + delta : x[d] - delta;
    }
    inputs.push_back(std::move(x));
    outputs.push_back(y);
  }
};

/// Fitted GP posterior over standardized scores. Queries are normalized
/// parameter vectors; posterior() reports in original score units while
/// expected_improvement() stays on the standardized scale (only the argmax
/// matters to the acquisition loop).
struct GpModel {
  double ell = 1.0;
  double sigma_f2 = 1.0;
  double sigma_n2 = 1e-6;  // effective value, includes any escalated jitter
  double y_mean = 0.0;
  double y_sd = 1.0;
  double y_max = 0.0;      // best raw score
  double y_max_std = 0.0;  // best standardized score
  double log_marginal = 0.0;
  Eigen::MatrixXd X;       // n x d normalized training inputs
  Eigen::VectorXd y;       // standardized training outputs
  Eigen::MatrixXd L;       // lower Cholesky factor of K + sigma_n2 I
  Eigen::VectorXd alpha;   // (K + sigma_n2 I)^{-1} y

  std::size_t size() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(X.cols()); }

  Eigen::VectorXd cross_covariance(const Eigen::VectorXd& x) const {
    Eigen::VectorXd k(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      k[i] = sigma_f2 * matern52((x - X.row(i).transpose()).norm(), ell);
    return k;
  }

  /// Standardized posterior (mean, sd); negative variances from round-off
  /// clamp to zero.
  std::pair<double, double> posterior_standardized(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd k = cross_covariance(x);
    const double mu = k.dot(alpha);
    const Eigen::VectorXd v = L.triangularView<Eigen::Lower>().solve(k);
    const double var = std::max(0.0, sigma_f2 - v.squaredNorm());
    return {mu, std::sqrt(var)};
  }

  /// Posterior in original score units.
  std::pair<double, double> posterior(const Eigen::VectorXd& x) const {
    auto [mu, sd] = posterior_standardized(x);
    return {y_mean + y_sd * mu, y_sd * sd};
  }

  double expected_improvement(const Eigen::VectorXd& x) const {
    auto [mu, sd] = posterior_standardized(x);
    return bayesopt::expected_improvement(mu, sd, y_max_std);
  }

  /// Normalized training input with the best observed score.
  Eigen::VectorXd incumbent() const {
    Eigen::Index best = 0;
    y.maxCoeff(&best);
    return X.row(best).transpose();
  }
};

namespace detail {

struct CholeskyFit {
  Eigen::MatrixXd L;
  Eigen::VectorXd alpha;
  double sigma_n2 = 0.0;
  double log_marginal = 0.0;
};

inline bool try_cholesky(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double sigma_n2,
                         double max_jitter, CholeskyFit& out) {
  const Eigen::Index n = K.rows();
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd Kn = K;
    Kn.diagonal().array() += sigma_n2 + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(Kn);
    if (llt.info() == Eigen::Success) {
      out.L = llt.matrixL();
      out.alpha = llt.solve(y);
      out.sigma_n2 = sigma_n2 + jitter;
      double log_det_half = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) log_det_half += std::log(out.L(i, i));
      out.log_marginal =
          -0.5 * y.dot(out.alpha) - log_det_half - 0.5 * n * std::log(2.0 * kPi);
      return true;
    }
    jitter = (jitter == 0.0) ? 1e-8 : jitter * 10.0;
    if (jitter > max_jitter * (1.0 + 1e-12)) return false;
  }
}

}  // namespace detail

inline GpModel fit(const ObservationSet& data, const HyperPolicy& policy = {}) {
  if (data.size() < 2) throw ConfigError("fit: need at least 2 observations");
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index d = data.inputs.front().size();

  GpModel model;
  model.sigma_f2 = policy.sigma_f2;
  model.X.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) model.X.row(i) = data.inputs[i].transpose();

  Eigen::VectorXd raw(n);
  for (Eigen::Index i = 0; i < n; ++i) raw[i] = data.outputs[i];
  model.y_mean = raw.mean();
  const double var = (raw.array() - model.y_mean).square().sum() / static_cast<double>(n);
  model.y_sd = std::sqrt(var);
  if (model.y_sd < 1e-12) model.y_sd = 1.0;  // constant outputs: all-zero targets
  model.y = (raw.array() - model.y_mean) / model.y_sd;
  model.y_max = raw.maxCoeff();
  model.y_max_std = model.y.maxCoeff();

  // Pairwise distances are lengthscale-independent; compute once.
  Eigen::MatrixXd dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = (model.X.row(i) - model.X.row(j)).norm();
      dist(i, j) = r;
      dist(j, i) = r;
    }
  }

  bool found = false;
  double best_lml = -std::numeric_limits<double>::infinity();
  for (double ell : policy.lengthscales()) {
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        K(i, j) = policy.sigma_f2 * matern52(dist(i, j), ell);
    detail::CholeskyFit chol;
    if (!detail::try_cholesky(K, model.y, policy.sigma_n2, policy.max_jitter, chol)) continue;
    if (!found || chol.log_marginal > best_lml) {
      found = true;
      best_lml = chol.log_marginal;
      model.ell = ell;
      model.sigma_n2 = chol.sigma_n2;
      model.L = std::move(chol.L);
      model.alpha = std::move(chol.alpha);
      model.log_marginal = chol.log_marginal;
    }
  }
  if (!found)
    throw SingularModelError("fit: Cholesky failed for every lengthscale at max jitter");
  return model;
}

struct AcquisitionResult {
  pattern::PatternParams params;    // denormalized, inside the search box
  std::vector<double> normalized;   // the same point in [0,1]^d
  double value = 0.0;               // EI at the returned point
};

namespace detail {

/// Monotone compass ascent on EI over [0,1]^d: probes +-h along each axis,
/// moves to the best strictly improving probe, otherwise halves h; stops
/// once h drops below 1e-4.
inline double compass_ascent(const GpModel& model, Eigen::VectorXd& x) {
  double u = model.expected_improvement(x);
  double h = 0.25;
  while (h >= 1e-4) {
    double best_u = u;
    Eigen::Index best_dim = -1;
    double best_val = 0.0;
    for (Eigen::Index dim = 0; dim < x.size(); ++dim) {
      for (double s : {h, -h}) {
        const double cand = std::clamp(x[dim] + s, 0.0, 1.0);
        if (cand == x[dim]) continue;
        const double old = x[dim];
        x[dim] = cand;
        const double uc = model.expected_improvement(x);
        x[dim] = old;
        if (uc > best_u) {
          best_u = uc;
          best_dim = dim;
          best_val = cand;
        }
      }
    }
    if (best_dim >= 0) {
      x[best_dim] = best_val;
      u = best_u;
    } else {
      h *= 0.5;
    }
  }
  return u;
}

}  // namespace detail

inline AcquisitionResult maximize_acquisition(const GpModel& model,
                                              const pattern::PatternFamily& family,
                                              const pattern::ParamSpace& space,
                                              std::size_t restarts, std::mt19937_64& rng) {
  if (restarts < 1) throw ConfigError("maximize_acquisition: restarts must be >= 1");
  const std::size_t d = space.dimension();
  if (model.dimension() != d)
    throw ConfigError("maximize_acquisition: model/space dimension mismatch");

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Eigen::VectorXd> starts;
  starts.reserve(restarts + 1);
  starts.push_back(model.incumbent());
  for (std::size_t r = 0; r < restarts; ++r) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) x[static_cast<Eigen::Index>(i)] = u01(rng);
    starts.push_back(std::move(x));
  }

  Eigen::VectorXd best_x = starts.front();
  double best_u = -std::numeric_limits<double>::infinity();
  for (Eigen::VectorXd& x : starts) {
    const double u = detail::compass_ascent(model, x);
    if (u > best_u) {
      best_u = u;
      best_x = x;
    }
  }

  AcquisitionResult out;
  out.value = best_u;
  out.normalized.resize(d);
  out.params.family = family;
  out.params.values.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double xn = std::clamp(best_x[static_cast<Eigen::Index>(i)], 0.0, 1.0);
    out.normalized[i] = xn;
    out.params.values[i] =
        std::clamp(space.denormalize(i, xn), space.dims[i].lower, space.dims[i].upper);
  }
  return out;
}

/// One evaluated iteration. `annotations` carries evaluator-defined extras
/// (infraction report, episode file) untouched by the search loop.
struct IterationRecord {
  std::size_t index = 0;
  std::string phase;  // warmup | bayes | random | grid
  std::vector<double> params;
  bool ok = true;
  double score = 0.0;
  std::string error;
  bool fallback = false;  // bayes iteration that degraded to a random draw
  nlohmann::json annotations = nlohmann::json::object();
  double wall_seconds = 0.0;
};

struct EvalOutcome {
  bool ok = true;
  double score = 0.0;
  std::string error;
  nlohmann::json annotations = nlohmann::json::object();
};

using Evaluator = std::function<EvalOutcome(const pattern::PatternParams&, std::size_t)>;
using RecordSink = std::function<void(const IterationRecord&)>;

struct SearchResult {
  std::vector<IterationRecord> records;
  bool found = false;
  std::size_t best_index = 0;
  pattern::PatternParams best;
  double best_score = -std::numeric_limits<double>::infinity();
};

struct SearchOptions {
  int workers = 1;
  RecordSink on_record;                  // called once per newly evaluated record, in order
  std::vector<IterationRecord> resume;   // trusted prefix from an interrupted run
  HyperPolicy hyper{};
  std::size_t restarts = 32;
  std::size_t grid_budget_cap = 200000;
};

namespace detail {

inline constexpr std::uint32_t kSaltSample = 1;
inline constexpr std::uint32_t kSaltAcquisition = 2;
inline constexpr std::uint32_t kSaltFallback = 3;

/// Independent stream per (seed, iteration): iterations can be evaluated in
/// any order, re-run, or resumed without disturbing the sequence.
inline std::mt19937_64 sub_rng(std::uint64_t seed, std::uint64_t index, std::uint32_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    salt};
  return std::mt19937_64(seq);
}

inline Eigen::VectorXd sample_normalized(std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Eigen::VectorXd x(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) x[static_cast<Eigen::Index>(i)] = u01(rng);
  return x;
}

inline pattern::PatternParams denormalized(const pattern::PatternFamily& family,
                                           const pattern::ParamSpace& space,
                                           const Eigen::VectorXd& xn) {
  pattern::PatternParams p;
  p.family = family;
  p.values.resize(space.dimension());
  for (std::size_t i = 0; i < space.dimension(); ++i)
    p.values[i] = space.denormalize(i, xn[static_cast<Eigen::Index>(i)]);
  return p;
}

inline IterationRecord evaluate_one(const Evaluator& evaluator,
                                    const pattern::PatternParams& params, std::size_t index,
                                    const std::string& phase, bool fallback) {
  IterationRecord rec;
  rec.index = index;
  rec.phase = phase;
  rec.params = params.values;
  rec.fallback = fallback;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    EvalOutcome out = evaluator(params, index);
    rec.ok = out.ok;
    rec.score = out.score;
    rec.error = out.error;
    rec.annotations = std::move(out.annotations);
    if (rec.ok && !std::isfinite(rec.score)) {
      rec.ok = false;
      rec.error = "non-finite score";
    }
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

struct RunningBest {
  bool found = false;
  std::size_t index = 0;
  double score = -std::numeric_limits<double>::infinity();
  std::vector<double> params;

  void offer(const IterationRecord& rec) {
    if (rec.ok && (!found || rec.score > score)) {
      found = true;
      index = rec.index;
      score = rec.score;
      params = rec.params;
    }
  }
};

inline SearchResult finalize(const pattern::PatternFamily& family,
                             std::vector<IterationRecord> records, const RunningBest& best) {
  SearchResult res;
  res.records = std::move(records);
  res.found = best.found;
  if (best.found) {
    res.best_index = best.index;
    res.best_score = best.score;
    res.best.family = family;
    res.best.values = best.params;
  }
  return res;
}

/// Evaluates a fixed list of candidate points with bounded parallelism,
/// emitting records in index order. `base` is the global index of the first
/// candidate (resume offset).
inline void run_candidates(const std::vector<pattern::PatternParams>& candidates,
                           std::size_t base, const std::string& phase,
                           const Evaluator& evaluator, const SearchOptions& options,
                           std::vector<IterationRecord>& records, RunningBest& best) {
  parallel_for_ordered<IterationRecord>(
      candidates.size(), options.workers,
      [&](std::size_t k) {
        return evaluate_one(evaluator, candidates[k], base + k, phase, false);
      },
      [&](std::size_t, IterationRecord&& rec) {
        best.offer(rec);
        if (options.on_record) options.on_record(rec);
        records.push_back(std::move(rec));
      });
}

inline void absorb_resume(const SearchOptions& options, std::vector<IterationRecord>& records,
                          RunningBest& best) {
  for (const IterationRecord& rec : options.resume) {
    if (rec.index != records.size())
      throw ConfigError("resume: record stream is not a contiguous prefix");
    best.offer(rec);
    records.push_back(rec);
  }
}

}  // namespace detail

inline SearchResult random_search(const pattern::PatternFamily& family,
                                  const pattern::ParamSpace& space, std::size_t budget,
                                  const Evaluator& evaluator, std::uint64_t seed,
                                  const SearchOptions& options = {}) {
  if (budget < 1) throw ConfigError("random_search: budget must be >= 1");
  space.check();
  std::vector<IterationRecord> records;
  records.reserve(budget);
  detail::RunningBest best;
  detail::absorb_resume(options, records, best);
  if (records.size() > budget) throw ConfigError("resume: more records than budget");

  std::vector<pattern::PatternParams> candidates;
  for (std::size_t i = records.size(); i < budget; ++i) {
    auto rng = detail::sub_rng(seed, i, detail::kSaltSample);
    candidates.push_back(
        detail::denormalized(family, space, detail::sample_normalized(space.dimension(), rng)));
  }
  detail::run_candidates(candidates, records.size(), "random", evaluator, options, records, best);
  return detail::finalize(family, std::move(records), best);
}

inline SearchResult grid_search(const pattern::PatternFamily& family,
                                const pattern::ParamSpace& space, const Evaluator& evaluator,
                                const SearchOptions& options = {}) {
  std::vector<pattern::PatternParams> points =
      pattern::grid_points(family, space, options.grid_budget_cap);
  std::vector<IterationRecord> records;
  records.reserve(points.size());
  detail::RunningBest best;
  detail::absorb_resume(options, records, best);
  if (records.size() > points.size()) throw ConfigError("resume: more records than grid points");

  std::vector<pattern::PatternParams> todo(points.begin() + static_cast<std::ptrdiff_t>(records.size()),
                                           points.end());
  detail::run_candidates(todo, records.size(), "grid", evaluator, options, records, best);
  return detail::finalize(family, std::move(records), best);
}

inline SearchResult bayes_search(const pattern::PatternFamily& family,
                                 const pattern::ParamSpace& space, std::size_t warmup,
                                 std::size_t budget, const Evaluator& evaluator,
                                 std::uint64_t seed, const SearchOptions& options = {}) {
  if (warmup < 2) throw ConfigError("bayes_search: warmup must be >= 2");
  if (budget < warmup) throw ConfigError("bayes_search: budget must be >= warmup");
  space.check();
  const std::size_t d = space.dimension();

  std::vector<IterationRecord> records;
  records.reserve(budget);
  detail::RunningBest best;
  detail::absorb_resume(options, records, best);
  if (records.size() > budget) throw ConfigError("resume: more records than budget");

  // Warm-up draws are identical to random_search's for the same seed.
  if (records.size() < warmup) {
    std::vector<pattern::PatternParams> candidates;
    for (std::size_t i = records.size(); i < warmup; ++i) {
      auto rng = detail::sub_rng(seed, i, detail::kSaltSample);
      candidates.push_back(
          detail::denormalized(family, space, detail::sample_normalized(d, rng)));
    }
    detail::run_candidates(candidates, records.size(), "warmup", evaluator, options, records,
                           best);
  }

  for (std::size_t i = records.size(); i < budget; ++i) {
    // D is rebuilt from the record stream so fresh and resumed runs walk the
    // same states. Failed iterations never enter the model.
    ObservationSet data;
    for (const IterationRecord& rec : records) {
      if (!rec.ok) continue;
      Eigen::VectorXd x(static_cast<Eigen::Index>(d));
      for (std::size_t k = 0; k < d; ++k)
        x[static_cast<Eigen::Index>(k)] = space.normalize(k, rec.params[k]);
      data.add(std::move(x), rec.score);
    }

    pattern::PatternParams next;
    bool fallback = false;
    if (data.size() < 2) {
      fallback = true;
    } else {
      try {
        GpModel model = fit(data, options.hyper);
        auto rng = detail::sub_rng(seed, i, detail::kSaltAcquisition);
        next = maximize_acquisition(model, family, space, options.restarts, rng).params;
      } catch (const SingularModelError&) {
        fallback = true;
      }
    }
    if (fallback) {
      auto rng = detail::sub_rng(seed, i, detail::kSaltFallback);
      next = detail::denormalized(family, space, detail::sample_normalized(d, rng));
    }

    IterationRecord rec = detail::evaluate_one(evaluator, next, i, "bayes", fallback);
    best.offer(rec);
    if (options.on_record) options.on_record(rec);
    records.push_back(std::move(rec));
  }
  return detail::finalize(family, std::move(records), best);
}

}  // namespace advmark::bayesopt
