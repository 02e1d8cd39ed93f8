#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "disteval/error.hpp"
#include "disteval/metrics.hpp"
#include "disteval/model.hpp"
#include "disteval/rng.hpp"
#include "disteval/stats.hpp"

namespace disteval {

struct GroupSummary {
  std::string label;
  std::size_t requests = 0;  // requests with any membership in the group
  double weight = 0.0;       // sum of fractional memberships
  DistributionSummary summary;
};

// mean(group_a) - mean(group_b), CI from independent per-group resampling.
struct GroupGap {
  std::string group_a;
  std::string group_b;
  Estimate difference;
};

struct GroupedSummary {
  std::string attribute;
  std::string system;
  std::string metric;
  std::vector<GroupSummary> groups;  // ordered by label
  std::vector<GroupGap> gaps;        // every pair a < b by label
};

namespace detail {

struct GroupMembers {
  std::vector<std::size_t> rows;
  std::vector<double> weights;
};

// Requests grouped by attribute value; a request with k values joins each
// group with weight 1/k, subjects absent from the table join "unknown".
inline std::map<std::string, GroupMembers> group_requests(
    const std::vector<std::string>& requests, const AttributeTable& attributes,
    std::string_view attribute) {
  attributes.require_attribute(attribute);
  std::map<std::string, GroupMembers> groups;
  for (std::size_t r = 0; r < requests.size(); ++r) {
    for (const auto& share : attributes.memberships(requests[r], attribute)) {
      auto& g = groups[share.group];
      g.rows.push_back(r);
      g.weights.push_back(share.weight);
    }
  }
  return groups;
}

inline bool all_unit(const std::vector<double>& w) {
  return std::all_of(w.begin(), w.end(), [](double x) { return x == 1.0; });
}

inline std::vector<double> resampled_means(std::span<const double> values,
                                           std::span<const double> weights,
                                           const BootstrapConfig& config,
                                           std::size_t threads) {
  const Statistic stats[] = {Statistic::mean()};
  if (values.size() < 2) {
    return std::vector<double>(config.resamples, SortedSample(values, weights).mean());
  }
  return bootstrap_replicates(values, weights, stats, config, threads)[0];
}

}  // namespace detail

// One weighted DistributionSummary per attribute value plus pairwise mean
// gaps. Group weights sum to the request count.
inline GroupedSummary disaggregate(const MetricFrame& frame, const AttributeTable& attributes,
                                   std::string_view attribute, std::string_view metric,
                                   std::string_view system, const SummaryConfig& config) {
  const auto column = frame.column(system, metric);
  const auto groups = detail::group_requests(frame.requests(), attributes, attribute);
  GroupedSummary out;
  out.attribute = attribute;
  out.system = system;
  out.metric = metric;

  struct Prepared {
    std::vector<double> values;
    std::vector<double> weights;  // empty when every membership is whole
  };
  std::vector<Prepared> prepared;
  for (const auto& [label, members] : groups) {
    Prepared p;
    for (auto r : members.rows) p.values.push_back(column[r]);
    if (!detail::all_unit(members.weights)) p.weights = members.weights;
    SummaryConfig group_config = config;
    group_config.bootstrap.seed = derive_seed(config.bootstrap.seed, "group:" + label);
    GroupSummary g;
    g.label = label;
    g.requests = members.rows.size();
    g.summary = p.weights.empty() ? summarize(p.values, group_config)
                                  : summarize_weighted(p.values, p.weights, group_config);
    g.weight = g.summary.weight;
    out.groups.push_back(std::move(g));
    prepared.push_back(std::move(p));
  }

  for (std::size_t i = 0; i < out.groups.size(); ++i) {
    for (std::size_t j = i + 1; j < out.groups.size(); ++j) {
      const auto& a = out.groups[i];
      const auto& b = out.groups[j];
      BootstrapConfig ca = config.bootstrap;
      BootstrapConfig cb = config.bootstrap;
      ca.seed = derive_seed(config.bootstrap.seed, "gap:" + a.label + "|" + b.label + ":a");
      cb.seed = derive_seed(config.bootstrap.seed, "gap:" + a.label + "|" + b.label + ":b");
      const auto ra = detail::resampled_means(prepared[i].values, prepared[i].weights, ca,
                                              config.threads);
      const auto rb = detail::resampled_means(prepared[j].values, prepared[j].weights, cb,
                                              config.threads);
      std::vector<double> diff(ra.size());
      for (std::size_t k = 0; k < ra.size(); ++k) diff[k] = ra[k] - rb[k];
      GroupGap gap;
      gap.group_a = a.label;
      gap.group_b = b.label;
      gap.difference.value = a.summary.mean.value - b.summary.mean.value;
      gap.difference.ci = detail::percentile_interval(std::move(diff), config.bootstrap.level);
      gap.difference.ci.lo = std::min(gap.difference.ci.lo, gap.difference.value);
      gap.difference.ci.hi = std::max(gap.difference.ci.hi, gap.difference.value);
      out.gaps.push_back(std::move(gap));
    }
  }
  return out;
}

struct GroupChange {
  std::string label;
  PairedDiffSummary change;
};

// Paired differences a - b within each group. Membership here is whole: a
// request with several values appears in each of its groups unweighted.
// Groups with fewer than two requests carry no test.
inline std::vector<GroupChange> group_change(const MetricFrame& frame,
                                             const AttributeTable& attributes,
                                             std::string_view attribute, std::string_view metric,
                                             std::string_view system_a,
                                             std::string_view system_b) {
  const auto a = frame.column(system_a, metric);
  const auto b = frame.column(system_b, metric);
  const auto groups = detail::group_requests(frame.requests(), attributes, attribute);
  std::vector<GroupChange> out;
  for (const auto& [label, members] : groups) {
    std::vector<double> diffs;
    std::vector<std::string> ids;
    for (auto r : members.rows) {
      diffs.push_back(a[r] - b[r]);
      ids.push_back(frame.requests()[r]);
    }
    GroupChange g;
    g.label = label;
    g.change = detail::describe_differences(std::move(diffs), std::move(ids));
    g.change.system_a = system_a;
    g.change.system_b = system_b;
    g.change.metric = metric;
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace disteval
