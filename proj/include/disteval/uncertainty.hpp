#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "disteval/error.hpp"
#include "disteval/metrics.hpp"
#include "disteval/model.hpp"
#include "disteval/rng.hpp"
#include "disteval/special.hpp"
#include "disteval/stats.hpp"
#include "disteval/subgroup.hpp"

namespace disteval {

struct BetaPrior {
  double a = 5.0;
  double b = 2.0;

  void validate() const {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
      throw ValidationError("beta prior shapes must be positive and finite");
    }
  }
  double mean() const { return a / (a + b); }
  std::optional<double> mode() const {
    if (a > 1.0 && b > 1.0) return (a - 1.0) / (a + b - 2.0);
    return std::nullopt;
  }
};

inline double beta_pdf(const BetaPrior& prior, double x) {
  prior.validate();
  if (!(x > 0.0 && x < 1.0)) throw ValidationError("beta_pdf: x must lie in (0, 1)");
  const double a1 = prior.a - 1.0;
  const double b1 = prior.b - 1.0;
  const double log_density = (a1 == 0.0 ? 0.0 : a1 * std::log(x)) +
                             (b1 == 0.0 ? 0.0 : b1 * std::log1p(-x)) -
                             log_beta(prior.a, prior.b);
  return std::exp(log_density);
}

// {step, 2 step, ...} strictly inside (0, 1).
inline std::vector<double> patience_grid(double step = 0.05) {
  if (!(step > 0.0 && step < 0.5)) throw ValidationError("grid step must lie in (0, 0.5)");
  std::vector<double> grid;
  for (int i = 1;; ++i) {
    // Rounded to 12 decimals so 0.05 * 3 prints as 0.15.
    const double g = std::round(step * i * 1e12) / 1e12;
    if (g >= 1.0 - 1e-12) break;
    grid.push_back(g);
  }
  return grid;
}

// Per-rank relevant-hit mass for one system, summed over requests with
// their weights. Mean RBP at any patience is then a polynomial in the
// patience evaluated by Horner's rule, without revisiting the lists.
class RankHitProfile {
 public:
  RankHitProfile() = default;

  static RankHitProfile build(const Run* run, const TruthSet& truth,
                              const std::vector<std::string>& requests,
                              std::span<const std::size_t> rows, std::span<const double> weights,
                              std::size_t depth) {
    RankHitProfile p;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double w = weights.empty() ? 1.0 : weights[k];
      p.weight_ += w;
      if (run == nullptr) continue;
      const auto& req = requests[rows[k]];
      auto it = run->requests.find(req);
      if (it == run->requests.end()) continue;
      const auto gains = detail::gains_at_ranks(it->second, truth.request(req), depth);
      if (p.hits_.size() < gains.size()) p.hits_.resize(gains.size(), 0.0);
      for (std::size_t i = 0; i < gains.size(); ++i) {
        if (gains[i] > 0.0) p.hits_[i] += w;
      }
    }
    while (!p.hits_.empty() && p.hits_.back() == 0.0) p.hits_.pop_back();
    return p;
  }

  double mean_rbp(double patience, RbpConvention convention) const {
    if (weight_ == 0.0) return 0.0;
    double s = 0.0;
    for (auto it = hits_.rbegin(); it != hits_.rend(); ++it) s = s * patience + *it;
    const double classic = (1.0 - patience) * s / weight_;
    return convention == RbpConvention::paper ? patience * classic : classic;
  }

  double weight() const { return weight_; }

 private:
  std::vector<double> hits_;
  double weight_ = 0.0;
};

struct SweepCurve {
  std::string system;
  std::string group;  // empty for the whole request set
  std::vector<double> means;
};

// Grid interval [lo, hi] over which mean(a) - mean(b) changes sign.
struct Crossover {
  std::string system_a;
  std::string system_b;
  std::string group;
  double lo = 0.0;
  double hi = 0.0;
};

struct SweepResult {
  std::vector<double> grid;
  RbpConvention convention = RbpConvention::paper;
  std::string attribute;
  std::vector<SweepCurve> curves;
  std::vector<Crossover> crossovers;

  const std::vector<double>& means(std::string_view system, std::string_view group = {}) const {
    for (const auto& c : curves) {
      if (c.system == system && c.group == group) return c.means;
    }
    throw ValidationError("no sweep curve for " + std::string(system));
  }
};

namespace detail {

struct ProfileSet {
  std::vector<std::string> systems;
  std::vector<std::string> groups;  // "" first, then attribute values
  // profiles[g][s]
  std::vector<std::vector<RankHitProfile>> profiles;
};

inline ProfileSet build_profiles(const RunSet& runs, const TruthSet& truth, std::size_t depth,
                                 const AttributeTable* attributes, std::string_view attribute) {
  if (runs.empty()) throw ValidationError("no runs");
  if (!truth.is_binary()) throw ValidationError("rbp requires binary gains");
  for (const auto& [id, run] : runs) validate_run(run);
  const auto requests = request_universe(runs, truth);
  ProfileSet ps;
  for (const auto& [id, run] : runs) ps.systems.push_back(id);

  std::vector<std::size_t> all(requests.size());
  std::iota(all.begin(), all.end(), 0);
  ps.groups.emplace_back();
  ps.profiles.emplace_back();
  for (const auto& [id, run] : runs) {
    ps.profiles.back().push_back(RankHitProfile::build(&run, truth, requests, all, {}, depth));
  }
  if (attributes != nullptr) {
    for (const auto& [label, members] : group_requests(requests, *attributes, attribute)) {
      ps.groups.push_back(label);
      ps.profiles.emplace_back();
      for (const auto& [id, run] : runs) {
        ps.profiles.back().push_back(RankHitProfile::build(&run, truth, requests, members.rows,
                                                           members.weights, depth));
      }
    }
  }
  return ps;
}

inline void find_crossovers(const std::vector<double>& grid, const SweepCurve& a,
                            const SweepCurve& b, std::vector<Crossover>& out) {
  int last_sign = 0;
  std::size_t last_index = 0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double d = a.means[j] - b.means[j];
    const int sign = (d > 0.0) - (d < 0.0);
    if (sign == 0) continue;
    if (last_sign != 0 && sign != last_sign) {
      out.push_back({a.system, b.system, a.group, grid[last_index], grid[j]});
    }
    last_sign = sign;
    last_index = j;
  }
}

}  // namespace detail

// Mean RBP per system (and per attribute group when given) over a patience
// grid, with every sign change of pairwise differences reported.
inline SweepResult sweep_patience(const RunSet& runs, const TruthSet& truth,
                                  const std::vector<double>& grid, RbpConvention convention,
                                  std::size_t depth = 1000,
                                  const AttributeTable* attributes = nullptr,
                                  std::string_view attribute = {}) {
  if (grid.empty()) throw ValidationError("empty patience grid");
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!(grid[j] > 0.0 && grid[j] < 1.0)) throw ValidationError("grid values must lie in (0, 1)");
    if (j > 0 && !(grid[j] > grid[j - 1])) throw ValidationError("grid must be strictly increasing");
  }
  if (depth < 1) throw ValidationError("truncation depth must be >= 1");
  const auto ps = detail::build_profiles(runs, truth, depth, attributes, attribute);
  SweepResult out;
  out.grid = grid;
  out.convention = convention;
  if (attributes != nullptr) out.attribute = attribute;
  for (std::size_t g = 0; g < ps.groups.size(); ++g) {
    const std::size_t first = out.curves.size();
    for (std::size_t s = 0; s < ps.systems.size(); ++s) {
      SweepCurve c{ps.systems[s], ps.groups[g], {}};
      for (double gamma : grid) c.means.push_back(ps.profiles[g][s].mean_rbp(gamma, convention));
      out.curves.push_back(std::move(c));
    }
    for (std::size_t i = first; i < out.curves.size(); ++i) {
      for (std::size_t j = i + 1; j < out.curves.size(); ++j) {
        detail::find_crossovers(grid, out.curves[i], out.curves[j], out.crossovers);
      }
    }
  }
  return out;
}

struct PosteriorSeries {
  std::string system;
  std::string group;
  std::vector<double> samples;  // mean RBP at each drawn patience
  DistributionSummary summary;
};

struct PosteriorResult {
  BetaPrior prior;
  std::vector<double> patience;  // the M prior draws, in draw order
  std::vector<PosteriorSeries> series;

  const PosteriorSeries& find(std::string_view system, std::string_view group = {}) const {
    for (const auto& s : series) {
      if (s.system == system && s.group == group) return s;
    }
    throw ValidationError("no posterior series for " + std::string(system));
  }
};

// Pushes a Beta prior on patience through each system's mean-RBP curve.
// The M patience values are drawn first, sequentially from `seed`.
inline PosteriorResult posterior_metric(const RunSet& runs, const TruthSet& truth,
                                        const BetaPrior& prior, std::size_t samples,
                                        std::uint64_t seed, RbpConvention convention,
                                        std::size_t depth, const SummaryConfig& config,
                                        const AttributeTable* attributes = nullptr,
                                        std::string_view attribute = {}) {
  prior.validate();
  if (samples < 100) throw ValidationError("posterior needs at least 100 samples");
  const auto ps = detail::build_profiles(runs, truth, depth, attributes, attribute);
  PosteriorResult out;
  out.prior = prior;
  Rng rng(seed);
  out.patience.resize(samples);
  for (auto& g : out.patience) {
    // Draws of exactly 0 or 1 are representable for extreme shapes; both
    // are outside the model, so redraw.
    do {
      g = rng.beta(prior.a, prior.b);
    } while (!(g > 0.0 && g < 1.0));
  }
  for (std::size_t g = 0; g < ps.groups.size(); ++g) {
    for (std::size_t s = 0; s < ps.systems.size(); ++s) {
      PosteriorSeries series{ps.systems[s], ps.groups[g], {}, {}};
      series.samples.reserve(samples);
      for (double gamma : out.patience) {
        series.samples.push_back(ps.profiles[g][s].mean_rbp(gamma, convention));
      }
      SummaryConfig c = config;
      c.bootstrap.seed = derive_seed(config.bootstrap.seed,
                                     "posterior:" + series.system + ":" + series.group);
      series.summary = summarize(series.samples, c);
      out.series.push_back(std::move(series));
    }
  }
  return out;
}

}  // namespace disteval
