#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "disteval/error.hpp"
#include "disteval/format.hpp"
#include "disteval/metrics.hpp"
#include "disteval/parallel.hpp"
#include "disteval/rng.hpp"
#include "disteval/special.hpp"

namespace disteval {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;
};

struct Estimate {
  double value = 0.0;
  Interval ci;
};

struct EcdfPoint {
  double x = 0.0;
  double cdf = 0.0;
};

struct KdePoint {
  double x = 0.0;
  double density = 0.0;
};

// Gaussian KDE evaluated on a regular grid. When every sample is equal the
// bandwidth is zero; the result is then flagged degenerate with the spike
// location and carries no grid.
struct KdeGrid {
  std::vector<KdePoint> points;
  double bandwidth = 0.0;
  bool degenerate = false;
  double spike_at = 0.0;
};

struct KdeConfig {
  std::size_t grid_size = 50;
  double lo = 0.0;
  double hi = 1.0;
};

struct BootstrapConfig {
  std::size_t resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;

  void validate() const {
    if (resamples < 100) throw ValidationError("bootstrap resamples must be >= 100");
    if (!(level > 0.0 && level < 1.0)) {
      throw ValidationError("confidence level must lie in (0, 1)");
    }
  }
};

enum class StatisticKind { mean, median, percentile };

struct Statistic {
  StatisticKind kind = StatisticKind::mean;
  double p = 0.5;

  static Statistic mean() { return {StatisticKind::mean, 0.0}; }
  static Statistic median() { return {StatisticKind::median, 0.5}; }
  static Statistic percentile(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("percentile must lie in [0, 1]");
    }
    return {StatisticKind::percentile, p};
  }

  std::string name() const {
    switch (kind) {
      case StatisticKind::mean:
        return "mean";
      case StatisticKind::median:
        return "median";
      case StatisticKind::percentile:
        break;
    }
    return percent_label(p);
  }
};

// Mean computed as x0 + sum(x - x0) / n, which is exact for constant data.
inline double mean(std::span<const double> x) {
  if (x.empty()) throw ValidationError("mean of empty sample");
  const double x0 = x[0];
  double acc = 0.0;
  for (double v : x) acc += v - x0;
  return x0 + acc / static_cast<double>(x.size());
}

// Sample standard deviation (n - 1 denominator).
inline double standard_deviation(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

// Linear interpolation between order statistics at h = (n - 1) p.
inline double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw ValidationError("percentile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("percentile must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double percentile(std::span<const double> x, double p) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  return percentile_sorted(sorted, p);
}

inline double median(std::span<const double> x) { return percentile(x, 0.5); }

namespace detail {

// A sample with optional per-observation weights, sorted by value on
// construction. Empty weights mean every observation counts once.
class SortedSample {
 public:
  SortedSample(std::span<const double> values, std::span<const double> weights) {
    if (values.empty()) throw ValidationError("empty sample");
    if (!weights.empty() && weights.size() != values.size()) {
      throw ValidationError("weights and values differ in length");
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw ValidationError("non-finite sample value");
    }
    const double x0 = values[0];
    double acc = 0.0;
    if (weights.empty()) {
      for (double v : values) acc += v - x0;
      total_weight_ = static_cast<double>(values.size());
      mean_ = x0 + acc / total_weight_;
      sorted_.assign(values.begin(), values.end());
      std::sort(sorted_.begin(), sorted_.end());
      return;
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    total_weight_ = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(weights[i] > 0.0)) throw ValidationError("weights must be positive");
      acc += weights[i] * (values[i] - x0);
      total_weight_ += weights[i];
    }
    mean_ = x0 + acc / total_weight_;
    sorted_.reserve(values.size());
    weights_.reserve(values.size());
    for (auto i : order) {
      sorted_.push_back(values[i]);
      weights_.push_back(weights[i]);
    }
  }

  bool weighted() const { return !weights_.empty(); }
  std::size_t size() const { return sorted_.size(); }
  double mean() const { return mean_; }
  double total_weight() const { return total_weight_; }
  const std::vector<double>& sorted() const { return sorted_; }
  const std::vector<double>& weights() const { return weights_; }

  // Weighted generalization of the (n - 1) p rule: observation i sits at
  // position (S_i - w_i) / (W - w_last), S_i the inclusive cumulative
  // weight. Equal weights reproduce the unweighted rule.
  double percentile(double p) const {
    if (!weighted()) return percentile_sorted(sorted_, p);
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("percentile must lie in [0, 1]");
    const std::size_t n = sorted_.size();
    const double span = total_weight_ - weights_.back();
    if (n == 1 || span <= 0.0) return sorted_.front();
    double before = 0.0;
    double prev_pos = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double pos = std::min(1.0, before / span);
      if (pos >= p) {
        if (i == 0 || pos == p) return sorted_[i];
        const double frac = (p - prev_pos) / (pos - prev_pos);
        return sorted_[i - 1] + frac * (sorted_[i] - sorted_[i - 1]);
      }
      prev_pos = pos;
      before += weights_[i];
    }
    return sorted_.back();
  }

  double statistic(const Statistic& s) const {
    switch (s.kind) {
      case StatisticKind::mean:
        return mean_;
      case StatisticKind::median:
        return percentile(0.5);
      case StatisticKind::percentile:
        return percentile(s.p);
    }
    return mean_;
  }

  double standard_deviation() const {
    if (sorted_.size() < 2) return 0.0;
    double ss = 0.0;
    double sw2 = 0.0;
    for (std::size_t i = 0; i < sorted_.size(); ++i) {
      const double w = weighted() ? weights_[i] : 1.0;
      ss += w * (sorted_[i] - mean_) * (sorted_[i] - mean_);
      sw2 += w * w;
    }
    const double denom = total_weight_ - sw2 / total_weight_;
    return denom > 0.0 ? std::sqrt(ss / denom) : 0.0;
  }

  // Kish effective sample size; n when unweighted.
  double effective_size() const {
    if (!weighted()) return static_cast<double>(sorted_.size());
    double sw2 = 0.0;
    for (double w : weights_) sw2 += w * w;
    return total_weight_ * total_weight_ / sw2;
  }

 private:
  std::vector<double> sorted_;
  std::vector<double> weights_;
  double mean_ = 0.0;
  double total_weight_ = 0.0;
};

inline std::vector<EcdfPoint> ecdf_of(const SortedSample& s) {
  std::vector<EcdfPoint> out;
  const auto& x = s.sorted();
  const std::size_t n = x.size();
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += s.weighted() ? s.weights()[i] : 1.0;
    if (i + 1 < n && x[i + 1] == x[i]) continue;
    const double f = s.weighted() ? cum / s.total_weight()
                                  : static_cast<double>(i + 1) / static_cast<double>(n);
    out.push_back({x[i], i + 1 == n ? 1.0 : f});
  }
  return out;
}

inline KdeGrid kde_of(const SortedSample& s, const KdeConfig& config) {
  if (s.size() < 2) throw ValidationError("kde needs at least 2 samples");
  if (!std::isfinite(config.lo) || !std::isfinite(config.hi) || !(config.lo < config.hi)) {
    throw ValidationError("kde bounds must be finite with lo < hi");
  }
  if (config.grid_size < 2) throw ValidationError("kde grid needs >= 2 points");
  KdeGrid out;
  const double sd = s.standard_deviation();
  if (sd == 0.0) {
    out.degenerate = true;
    out.spike_at = s.sorted().front();
    return out;
  }
  const double iqr = s.percentile(0.75) - s.percentile(0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double h = 0.9 * spread * std::pow(s.effective_size(), -0.2);
  out.bandwidth = h;
  const auto& x = s.sorted();
  const double norm = 1.0 / (s.total_weight() * h * std::sqrt(2.0 * std::numbers::pi));
  const double step = (config.hi - config.lo) / static_cast<double>(config.grid_size - 1);
  out.points.reserve(config.grid_size);
  for (std::size_t j = 0; j < config.grid_size; ++j) {
    const double gx = j + 1 == config.grid_size ? config.hi
                                                : config.lo + step * static_cast<double>(j);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double z = (gx - x[i]) / h;
      acc += (s.weighted() ? s.weights()[i] : 1.0) * std::exp(-0.5 * z * z);
    }
    out.points.push_back({gx, acc * norm});
  }
  return out;
}

// B replicate values of each statistic. Replicate seeds are drawn in order
// from the master seed before any replicate is evaluated; each replicate
// then expands its own index vector, so workers never share a stream.
inline std::vector<std::vector<double>> bootstrap_replicates(
    std::span<const double> values, std::span<const double> weights,
    std::span<const Statistic> stats, const BootstrapConfig& config,
    std::size_t threads) {
  config.validate();
  const std::size_t n = values.size();
  Rng master(config.seed);
  std::vector<std::uint64_t> seeds(config.resamples);
  for (auto& s : seeds) s = master.next();
  std::vector<std::vector<double>> out(stats.size(),
                                       std::vector<double>(config.resamples));
  parallel_for(config.resamples, threads, [&](std::size_t b) {
    Rng rng(seeds[b]);
    std::vector<double> rv(n);
    std::vector<double> rw(weights.empty() ? 0 : n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = rng.index(n);
      rv[i] = values[idx];
      if (!weights.empty()) rw[i] = weights[idx];
    }
    const SortedSample resample(rv, rw);
    for (std::size_t k = 0; k < stats.size(); ++k) {
      out[k][b] = resample.statistic(stats[k]);
    }
  });
  return out;
}

inline Interval percentile_interval(std::vector<double> replicates, double level) {
  std::sort(replicates.begin(), replicates.end());
  return {percentile_sorted(replicates, (1.0 - level) / 2.0),
          percentile_sorted(replicates, (1.0 + level) / 2.0), level};
}

}  // namespace detail

// Sorted (x, F(x)) pairs over distinct values, F(x) = #{samples <= x} / n.
inline std::vector<EcdfPoint> ecdf(std::span<const double> samples) {
  return detail::ecdf_of(detail::SortedSample(samples, {}));
}

inline std::vector<EcdfPoint> ecdf(std::span<const double> samples,
                                   std::span<const double> weights) {
  return detail::ecdf_of(detail::SortedSample(samples, weights));
}

// Step-function evaluation of an ECDF at x.
inline double ecdf_at(const std::vector<EcdfPoint>& points, double x) {
  auto it = std::upper_bound(points.begin(), points.end(), x,
                             [](double v, const EcdfPoint& p) { return v < p.x; });
  if (it == points.begin()) return 0.0;
  return std::prev(it)->cdf;
}

// Silverman bandwidth 0.9 * min(sd, IQR / 1.34) * n^(-1/5); falls back to sd
// when the IQR is zero.
inline KdeGrid kde_grid(std::span<const double> samples, std::size_t grid_size = 50,
                        double lo = 0.0, double hi = 1.0) {
  return detail::kde_of(detail::SortedSample(samples, {}), {grid_size, lo, hi});
}

inline KdeGrid kde_grid(std::span<const double> samples,
                        std::span<const double> weights, const KdeConfig& config) {
  return detail::kde_of(detail::SortedSample(samples, weights), config);
}

// Percentile bootstrap interval for one statistic.
inline Interval bootstrap_ci(std::span<const double> samples, const Statistic& statistic,
                             std::size_t resamples, double level, std::uint64_t seed,
                             std::size_t threads = 1) {
  if (samples.size() < 2) throw ValidationError("bootstrap needs at least 2 samples");
  const BootstrapConfig config{resamples, level, seed};
  const Statistic stats[] = {statistic};
  auto reps = detail::bootstrap_replicates(samples, {}, stats, config, threads);
  return detail::percentile_interval(std::move(reps[0]), level);
}

struct PercentileEstimate {
  double p = 0.0;
  Estimate estimate;
};

struct DistributionSummary {
  std::size_t n = 0;
  double weight = 0.0;  // equals n unless observations are weighted
  Estimate mean;
  Estimate median;
  std::vector<PercentileEstimate> percentiles;
  std::vector<EcdfPoint> ecdf;
  std::optional<KdeGrid> kde;
};

struct SummaryConfig {
  std::vector<double> percentiles{0.10, 0.50, 0.90};
  BootstrapConfig bootstrap;
  KdeConfig kde;
  std::size_t threads = 1;
};

namespace detail {

inline DistributionSummary summarize_sample(std::span<const double> values,
                                            std::span<const double> weights,
                                            const SummaryConfig& config) {
  config.bootstrap.validate();
  const SortedSample sample(values, weights);
  std::vector<Statistic> stats{Statistic::mean(), Statistic::median()};
  for (double p : config.percentiles) stats.push_back(Statistic::percentile(p));

  DistributionSummary out;
  out.n = sample.size();
  out.weight = sample.total_weight();
  std::vector<double> points;
  for (const auto& s : stats) points.push_back(sample.statistic(s));

  std::vector<Interval> cis(stats.size());
  const double level = config.bootstrap.level;
  if (sample.size() < 2) {
    for (std::size_t k = 0; k < stats.size(); ++k) cis[k] = {points[k], points[k], level};
  } else {
    auto reps = bootstrap_replicates(values, weights, stats, config.bootstrap,
                                     config.threads);
    for (std::size_t k = 0; k < stats.size(); ++k) {
      cis[k] = percentile_interval(std::move(reps[k]), level);
      // A percentile interval can miss its own point estimate on small or
      // lumpy samples; widen so lo <= estimate <= hi always holds.
      cis[k].lo = std::min(cis[k].lo, points[k]);
      cis[k].hi = std::max(cis[k].hi, points[k]);
    }
  }
  out.mean = {points[0], cis[0]};
  out.median = {points[1], cis[1]};
  for (std::size_t k = 2; k < stats.size(); ++k) {
    out.percentiles.push_back({stats[k].p, {points[k], cis[k]}});
  }
  out.ecdf = ecdf_of(sample);
  if (sample.size() >= 2) out.kde = kde_of(sample, config.kde);
  return out;
}

}  // namespace detail

// Mean, median and requested percentiles, each with a percentile-bootstrap
// CI sharing one set of resamples, plus the ECDF and a KDE grid.
inline DistributionSummary summarize(std::span<const double> samples,
                                     const SummaryConfig& config) {
  return detail::summarize_sample(samples, {}, config);
}

inline DistributionSummary summarize_weighted(std::span<const double> samples,
                                              std::span<const double> weights,
                                              const SummaryConfig& config) {
  return detail::summarize_sample(samples, weights, config);
}

enum class TestStatus { ok, zero_variance, insufficient_data };

inline std::string_view to_string(TestStatus s) {
  switch (s) {
    case TestStatus::ok:
      return "ok";
    case TestStatus::zero_variance:
      return "zero_variance";
    case TestStatus::insufficient_data:
      return "insufficient_data";
  }
  return "ok";
}

// Paired two-sided t test on differences. Only status == ok carries
// meaningful t and p; a zero-variance sample is an exact tie, not a p-value.
struct TTest {
  TestStatus status = TestStatus::insufficient_data;
  double t = 0.0;
  double df = 0.0;
  double p = 0.0;

  bool has_value() const { return status == TestStatus::ok; }
};

inline TTest paired_t_test(std::span<const double> diffs) {
  TTest out;
  if (diffs.size() < 2) return out;
  out.df = static_cast<double>(diffs.size() - 1);
  const double sd = standard_deviation(diffs);
  if (sd == 0.0) {
    out.status = TestStatus::zero_variance;
    return out;
  }
  out.status = TestStatus::ok;
  out.t = mean(diffs) / (sd / std::sqrt(static_cast<double>(diffs.size())));
  out.p = student_t_two_sided_p(out.t, out.df);
  return out;
}

struct PairedDiffSummary {
  std::string system_a;
  std::string system_b;
  std::string metric;
  std::vector<std::string> requests;
  std::vector<double> diffs;  // a - b per request
  double mean_diff = 0.0;
  double median_diff = 0.0;
  double fraction_hurt = 0.0;    // diff < 0
  double fraction_helped = 0.0;  // diff > 0
  double fraction_tied = 0.0;
  std::vector<EcdfPoint> ecdf;
  std::optional<KdeGrid> kde;
  TTest test;
};

namespace detail {

// Shared by paired_diff and per-group comparisons; small groups get a
// summary with TestStatus::insufficient_data instead of an error.
inline PairedDiffSummary describe_differences(std::vector<double> diffs,
                                              std::vector<std::string> requests,
                                              std::size_t kde_grid_size = 50) {
  if (diffs.empty()) throw ValidationError("no paired observations");
  PairedDiffSummary out;
  std::size_t hurt = 0;
  std::size_t helped = 0;
  double extent = 0.0;
  for (double d : diffs) {
    if (d < 0.0) ++hurt;
    if (d > 0.0) ++helped;
    extent = std::max(extent, std::fabs(d));
  }
  const double n = static_cast<double>(diffs.size());
  out.fraction_hurt = static_cast<double>(hurt) / n;
  out.fraction_helped = static_cast<double>(helped) / n;
  out.fraction_tied = static_cast<double>(diffs.size() - hurt - helped) / n;
  const SortedSample sample(diffs, {});
  out.mean_diff = sample.mean();
  out.median_diff = sample.percentile(0.5);
  out.ecdf = ecdf_of(sample);
  if (diffs.size() >= 2) {
    if (extent == 0.0) {
      out.kde = KdeGrid{{}, 0.0, true, 0.0};
    } else {
      out.kde = kde_of(sample, {kde_grid_size, -extent, extent});
    }
  }
  out.test = paired_t_test(diffs);
  out.diffs = std::move(diffs);
  out.requests = std::move(requests);
  return out;
}

}  // namespace detail

// Per-request differences a - b with helped/hurt fractions and a paired t
// test. Requires equal-length inputs and n >= 2.
inline PairedDiffSummary paired_diff(std::span<const double> a, std::span<const double> b,
                                     std::vector<std::string> requests = {}) {
  if (a.size() != b.size()) {
    throw ValidationError("paired samples differ in size (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  if (!requests.empty() && requests.size() != a.size()) {
    throw ValidationError("request ids do not match paired samples");
  }
  if (a.size() < 2) throw ValidationError("paired comparison needs n >= 2");
  std::vector<double> diffs(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diffs[i] = a[i] - b[i];
  return detail::describe_differences(std::move(diffs), std::move(requests));
}

inline PairedDiffSummary paired_diff(const MetricFrame& frame, std::string_view system_a,
                                     std::string_view system_b, std::string_view metric) {
  auto out = paired_diff(frame.column(system_a, metric), frame.column(system_b, metric),
                         frame.requests());
  out.system_a = system_a;
  out.system_b = system_b;
  out.metric = metric;
  return out;
}

}  // namespace disteval
