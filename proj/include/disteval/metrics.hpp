#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "disteval/error.hpp"
#include "disteval/format.hpp"
#include "disteval/model.hpp"
#include "disteval/parallel.hpp"

namespace disteval {

// Exponent convention for rank weights. `paper` weights rank i by
// (1 - g) g^i; `classic` by (1 - g) g^(i-1). The two differ by exactly a
// factor g at every rank.
enum class RbpConvention { paper, classic };

inline std::string_view to_string(RbpConvention c) {
  return c == RbpConvention::paper ? "paper" : "classic";
}

inline RbpConvention parse_convention(std::string_view s) {
  if (s == "paper") return RbpConvention::paper;
  if (s == "classic") return RbpConvention::classic;
  throw ValidationError("unknown convention '" + std::string(s) +
                        "' (expected paper|classic)");
}

// Geometric browsing model shared by RBP and expected exposure.
struct BrowsingModel {
  double patience = 0.8;
  RbpConvention convention = RbpConvention::paper;
  std::size_t depth = 1000;

  void validate() const {
    if (!(patience > 0.0 && patience < 1.0)) {
      throw ValidationError("patience must lie in (0, 1), got " +
                            format_number(patience));
    }
    if (depth < 1) throw ValidationError("truncation depth must be >= 1");
  }
};

// Weights for ranks 1..count under the classic convention,
// (1 - g) g^(i-1), built by repeated multiplication.
inline std::vector<double> classic_rank_weights(double patience,
                                                std::size_t count) {
  std::vector<double> w(count);
  double power = 1.0;
  const double scale = 1.0 - patience;
  for (std::size_t i = 0; i < count; ++i) {
    w[i] = scale * power;
    power *= patience;
  }
  return w;
}

// Per-rank browsing weights for the first min(count, depth) ranks. Paper
// weights are the classic weights times g, computed as such.
inline std::vector<double> rank_weights(const BrowsingModel& model,
                                        std::size_t count) {
  model.validate();
  auto w = classic_rank_weights(model.patience, std::min(count, model.depth));
  if (model.convention == RbpConvention::paper) {
    for (auto& x : w) x *= model.patience;
  }
  return w;
}

namespace detail {

inline void require_binary(const RequestTruth& truth, std::string_view metric) {
  if (!is_binary(truth)) {
    throw ValidationError(std::string(metric) +
                          " requires binary gains (0 or 1)");
  }
}

// Gains at ranks 1..min(|list|, depth).
inline std::vector<double> gains_at_ranks(std::span<const std::string> list,
                                          const RequestTruth& truth,
                                          std::size_t depth) {
  const std::size_t k = std::min(list.size(), depth);
  std::vector<double> g(k, 0.0);
  if (truth.empty()) return g;
  for (std::size_t i = 0; i < k; ++i) {
    if (auto it = truth.find(list[i]); it != truth.end()) g[i] = it->second;
  }
  return g;
}

inline std::vector<double> ideal_gains(const RequestTruth& truth) {
  std::vector<double> g;
  g.reserve(truth.size());
  for (const auto& [item, gain] : truth) {
    if (gain > 0.0) g.push_back(gain);
  }
  std::sort(g.begin(), g.end(), std::greater<>());
  return g;
}

// Classic-convention RBP from binary gains; paper = patience * classic.
inline double rbp_from_gains(std::span<const double> gains, double patience,
                             RbpConvention convention) {
  double sum = 0.0;
  double power = 1.0;
  for (double g : gains) {
    if (g > 0.0) sum += power;
    power *= patience;
  }
  const double classic = (1.0 - patience) * sum;
  return convention == RbpConvention::paper ? patience * classic : classic;
}

inline double ndcg_from_gains(std::span<const double> gains,
                              std::span<const double> ideal,
                              std::size_t cutoff) {
  const std::size_t ki = std::min(ideal.size(), cutoff);
  double idcg = 0.0;
  for (std::size_t i = 0; i < ki; ++i) {
    idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
  }
  if (idcg == 0.0) return 0.0;
  const std::size_t k = std::min(gains.size(), cutoff);
  double dcg = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (gains[i] > 0.0) dcg += gains[i] / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / idcg;
}

inline double mrr_from_gains(std::span<const double> gains, std::size_t cutoff) {
  const std::size_t k = std::min(gains.size(), cutoff);
  for (std::size_t i = 0; i < k; ++i) {
    if (gains[i] > 0.0) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

inline double hit_from_gains(std::span<const double> gains, std::size_t cutoff) {
  const std::size_t k = std::min(gains.size(), cutoff);
  for (std::size_t i = 0; i < k; ++i) {
    if (gains[i] > 0.0) return 1.0;
  }
  return 0.0;
}

}  // namespace detail

// Rank-biased precision of one list, truncated at model.depth.
inline double rbp(std::span<const std::string> list, const RequestTruth& truth,
                  const BrowsingModel& model) {
  model.validate();
  detail::require_binary(truth, "rbp");
  const auto gains = detail::gains_at_ranks(list, truth, model.depth);
  return detail::rbp_from_gains(gains, model.patience, model.convention);
}

// nDCG with log2(i + 1) discount; 0 when the ideal DCG is 0.
inline double ndcg(std::span<const std::string> list, const RequestTruth& truth,
                   std::size_t depth) {
  const auto gains = detail::gains_at_ranks(list, truth, depth);
  const auto ideal = detail::ideal_gains(truth);
  return detail::ndcg_from_gains(gains, ideal, depth);
}

inline double mrr(std::span<const std::string> list, const RequestTruth& truth,
                  std::size_t depth) {
  detail::require_binary(truth, "mrr");
  return detail::mrr_from_gains(detail::gains_at_ranks(list, truth, depth),
                                depth);
}

inline double hit_rate(std::span<const std::string> list,
                       const RequestTruth& truth, std::size_t k) {
  if (k < 1) throw ValidationError("hit rate cutoff must be >= 1");
  detail::require_binary(truth, "hit rate");
  return detail::hit_from_gains(detail::gains_at_ranks(list, truth, k), k);
}

enum class MetricKind { rbp, ndcg, mrr, hit_rate };

// A metric column. Ids: "rbp(0.8)", "ndcg", "ndcg(10)", "mrr", "hr",
// "hr(10)". A cutoff of 0 means the model's truncation depth.
struct MetricSpec {
  MetricKind kind = MetricKind::rbp;
  double patience = 0.8;
  std::size_t cutoff = 0;

  static MetricSpec rbp(double patience) {
    return {MetricKind::rbp, patience, 0};
  }
  static MetricSpec ndcg(std::size_t cutoff = 0) {
    return {MetricKind::ndcg, 0.0, cutoff};
  }
  static MetricSpec mrr(std::size_t cutoff = 0) {
    return {MetricKind::mrr, 0.0, cutoff};
  }
  static MetricSpec hit_rate(std::size_t cutoff = 0) {
    return {MetricKind::hit_rate, 0.0, cutoff};
  }

  std::string id() const {
    std::string base;
    switch (kind) {
      case MetricKind::rbp:
        return "rbp(" + format_number(patience) + ")";
      case MetricKind::ndcg:
        base = "ndcg";
        break;
      case MetricKind::mrr:
        base = "mrr";
        break;
      case MetricKind::hit_rate:
        base = "hr";
        break;
    }
    return cutoff == 0 ? base : base + "(" + std::to_string(cutoff) + ")";
  }

  // Accepts the ids above; a bare "rbp" takes default_patience.
  static MetricSpec parse(std::string_view text, double default_patience) {
    text = trim(text);
    std::string_view name = text;
    std::string_view arg;
    if (const auto open = text.find('('); open != std::string_view::npos) {
      if (text.back() != ')') {
        throw ValidationError("bad metric id '" + std::string(text) + "'");
      }
      name = text.substr(0, open);
      arg = text.substr(open + 1, text.size() - open - 2);
    } else if (const auto at = text.find('@'); at != std::string_view::npos) {
      name = text.substr(0, at);
      arg = text.substr(at + 1);
    }
    auto cutoff = [&]() -> std::size_t {
      if (arg.empty()) return 0;
      const auto v = parse_integer(arg);
      if (!v || *v < 1) {
        throw ValidationError("bad cutoff in metric '" + std::string(text) + "'");
      }
      return static_cast<std::size_t>(*v);
    };
    if (name == "rbp") {
      double p = default_patience;
      if (!arg.empty()) {
        const auto v = parse_double(arg);
        if (!v) throw ValidationError("bad patience in '" + std::string(text) + "'");
        p = *v;
      }
      if (!(p > 0.0 && p < 1.0)) {
        throw ValidationError("rbp patience must lie in (0, 1)");
      }
      return rbp(p);
    }
    if (name == "ndcg") return ndcg(cutoff());
    if (name == "mrr" || name == "rr") return mrr(cutoff());
    if (name == "hr" || name == "hit_rate") return hit_rate(cutoff());
    throw ValidationError("unknown metric '" + std::string(text) + "'");
  }

  bool requires_binary() const { return kind != MetricKind::ndcg; }

  friend bool operator==(const MetricSpec&, const MetricSpec&) = default;
};

// Dense per-request metric values, laid out [system][metric][request] so
// that each (system, metric) column is contiguous. Requests are the sorted
// truth domain; requests a system did not answer score 0 and are listed in
// missing_requests().
class MetricFrame {
 public:
  MetricFrame() = default;
  MetricFrame(std::vector<std::string> systems, std::vector<MetricSpec> metrics,
              std::vector<std::string> requests)
      : systems_(std::move(systems)),
        metrics_(std::move(metrics)),
        requests_(std::move(requests)),
        values_(systems_.size() * metrics_.size() * requests_.size(), 0.0),
        missing_(systems_.size()) {}

  const std::vector<std::string>& systems() const { return systems_; }
  const std::vector<MetricSpec>& metrics() const { return metrics_; }
  const std::vector<std::string>& requests() const { return requests_; }

  std::vector<std::string> metric_ids() const {
    std::vector<std::string> ids;
    for (const auto& m : metrics_) ids.push_back(m.id());
    return ids;
  }

  std::size_t system_index(std::string_view system) const {
    auto it = std::find(systems_.begin(), systems_.end(), system);
    if (it == systems_.end()) {
      throw ValidationError("system not in frame: " + std::string(system));
    }
    return static_cast<std::size_t>(it - systems_.begin());
  }

  std::size_t metric_index(std::string_view metric) const {
    for (std::size_t m = 0; m < metrics_.size(); ++m) {
      if (metrics_[m].id() == metric) return m;
    }
    throw ValidationError("metric not in frame: " + std::string(metric));
  }

  std::size_t request_index(std::string_view request) const {
    auto it = std::lower_bound(requests_.begin(), requests_.end(), request);
    if (it == requests_.end() || *it != request) {
      throw ValidationError("request not in frame: " + std::string(request));
    }
    return static_cast<std::size_t>(it - requests_.begin());
  }

  double& at(std::size_t s, std::size_t m, std::size_t r) {
    return values_[(s * metrics_.size() + m) * requests_.size() + r];
  }
  double at(std::size_t s, std::size_t m, std::size_t r) const {
    return values_[(s * metrics_.size() + m) * requests_.size() + r];
  }

  double value(std::string_view system, std::string_view metric,
               std::string_view request) const {
    return at(system_index(system), metric_index(metric),
              request_index(request));
  }

  std::span<const double> column(std::size_t s, std::size_t m) const {
    return {values_.data() + (s * metrics_.size() + m) * requests_.size(),
            requests_.size()};
  }
  std::span<const double> column(std::string_view system,
                                 std::string_view metric) const {
    return column(system_index(system), metric_index(metric));
  }

  const std::vector<std::string>& missing_requests(std::size_t s) const {
    return missing_[s];
  }
  const std::vector<std::string>& missing_requests(std::string_view system) const {
    return missing_[system_index(system)];
  }
  std::vector<std::string>& mutable_missing(std::size_t s) { return missing_[s]; }

 private:
  std::vector<std::string> systems_;
  std::vector<MetricSpec> metrics_;
  std::vector<std::string> requests_;
  std::vector<double> values_;
  std::vector<std::vector<std::string>> missing_;
};

// Scores every (system, metric, request) cell. Each cell depends only on
// its own request, so the result is identical for any thread count.
inline MetricFrame evaluate(const RunSet& runs, const TruthSet& truth,
                            const std::vector<MetricSpec>& metrics,
                            const BrowsingModel& model, std::size_t threads = 1) {
  if (runs.empty()) throw ValidationError("evaluate: empty run set");
  if (metrics.empty()) throw ValidationError("evaluate: no metrics requested");
  model.validate();
  for (const auto& [system, run] : runs) validate_run(run);
  const bool needs_binary = std::any_of(
      metrics.begin(), metrics.end(), [](const auto& m) { return m.requires_binary(); });
  if (needs_binary && !truth.is_binary()) {
    throw ValidationError("truth has non-binary gains; rbp/mrr/hr need 0/1");
  }
  auto requests = request_universe(runs, truth);
  std::vector<std::string> systems;
  std::vector<const Run*> run_ptrs;
  for (const auto& [system, run] : runs) {
    systems.push_back(system);
    run_ptrs.push_back(&run);
  }
  MetricFrame frame(systems, metrics, requests);
  const std::size_t depth = model.depth;

  for (std::size_t s = 0; s < systems.size(); ++s) {
    for (const auto& r : requests) {
      if (!run_ptrs[s]->requests.contains(r)) frame.mutable_missing(s).push_back(r);
    }
  }

  parallel_for(requests.size(), threads, [&](std::size_t r) {
    const auto& row = truth.request(requests[r]);
    const auto ideal = detail::ideal_gains(row);
    for (std::size_t s = 0; s < systems.size(); ++s) {
      const auto& reqs = run_ptrs[s]->requests;
      auto it = reqs.find(requests[r]);
      if (it == reqs.end()) continue;
      const auto gains = detail::gains_at_ranks(it->second, row, depth);
      for (std::size_t m = 0; m < metrics.size(); ++m) {
        const auto& spec = metrics[m];
        const std::size_t cutoff =
            spec.cutoff == 0 ? depth : std::min(spec.cutoff, depth);
        double v = 0.0;
        switch (spec.kind) {
          case MetricKind::rbp:
            v = detail::rbp_from_gains(gains, spec.patience, model.convention);
            break;
          case MetricKind::ndcg:
            v = detail::ndcg_from_gains(gains, ideal, cutoff);
            break;
          case MetricKind::mrr:
            v = detail::mrr_from_gains(gains, cutoff);
            break;
          case MetricKind::hit_rate:
            v = detail::hit_from_gains(gains, cutoff);
            break;
        }
        frame.at(s, m, r) = v;
      }
    }
  });
  return frame;
}

// Long-form CSV: system_id,metric_id,request_id,value.
inline std::string serialize_frame_csv(const MetricFrame& frame) {
  std::string out = "system_id,metric_id,request_id,value\n";
  const auto ids = frame.metric_ids();
  for (std::size_t s = 0; s < frame.systems().size(); ++s) {
    for (std::size_t m = 0; m < ids.size(); ++m) {
      for (std::size_t r = 0; r < frame.requests().size(); ++r) {
        out += frame.systems()[s] + ',' + ids[m] + ',' + frame.requests()[r] +
               ',' + format_number(frame.at(s, m, r)) + '\n';
      }
    }
  }
  return out;
}

}  // namespace disteval
