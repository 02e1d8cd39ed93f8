#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "disteval/error.hpp"
#include "disteval/metrics.hpp"
#include "disteval/model.hpp"
#include "disteval/parallel.hpp"
#include "disteval/stats.hpp"
#include "disteval/subgroup.hpp"

namespace disteval {

struct RepetitionRow {
  std::string repetition_id;
  std::string system_id;
  std::string metric_id;
  std::string group;  // empty for the whole request set
  double value = 0.0;
};

class RepetitionFrame {
 public:
  RepetitionFrame() = default;
  RepetitionFrame(Statistic statistic, std::vector<std::string> repetition_ids,
                  std::vector<RepetitionRow> rows)
      : statistic_(statistic), repetition_ids_(std::move(repetition_ids)), rows_(std::move(rows)) {}

  const Statistic& statistic() const { return statistic_; }
  const std::vector<std::string>& repetition_ids() const { return repetition_ids_; }
  const std::vector<RepetitionRow>& rows() const { return rows_; }

  double value(std::string_view repetition, std::string_view system, std::string_view metric,
               std::string_view group = {}) const {
    for (const auto& r : rows_) {
      if (r.repetition_id == repetition && r.system_id == system && r.metric_id == metric &&
          r.group == group) {
        return r.value;
      }
    }
    throw ValidationError("no repetition value for " + std::string(repetition) + "/" +
                          std::string(system) + "/" + std::string(metric));
  }

  // Values for one (system, metric, group) in repetition order.
  std::vector<double> series(std::string_view system, std::string_view metric,
                             std::string_view group = {}) const {
    std::vector<double> out;
    for (const auto& rep : repetition_ids_) out.push_back(value(rep, system, metric, group));
    return out;
  }

 private:
  Statistic statistic_ = Statistic::mean();
  std::vector<std::string> repetition_ids_;
  std::vector<RepetitionRow> rows_;
};

// One summary value per (repetition, system, metric[, group]). Group values
// use fractional membership weights. Repetitions evaluate independently;
// rows are emitted in repetition order.
inline RepetitionFrame evaluate_repetitions(const RepetitionSet& reps,
                                            const std::vector<MetricSpec>& metrics,
                                            const BrowsingModel& model,
                                            const AttributeTable* attributes = nullptr,
                                            std::string_view attribute = {},
                                            Statistic statistic = Statistic::mean(),
                                            std::size_t threads = 1) {
  if (reps.empty()) throw ValidationError("no repetitions");
  if (attributes != nullptr) attributes->require_attribute(attribute);
  const auto& list = reps.repetitions();
  const auto systems = reps.system_ids();
  for (const auto& rep : list) {
    for (const auto& s : systems) {
      if (!rep.runs.contains(s)) {
        throw ValidationError("repetition " + rep.id + " is missing system " + s);
      }
    }
  }
  std::vector<std::vector<RepetitionRow>> per_rep(list.size());
  parallel_for(list.size(), threads, [&](std::size_t k) {
    const auto& rep = list[k];
    const auto frame = evaluate(rep.runs, rep.truth, metrics, model, 1);
    std::map<std::string, detail::GroupMembers> groups;
    if (attributes != nullptr) {
      groups = detail::group_requests(frame.requests(), *attributes, attribute);
    }
    for (std::size_t s = 0; s < frame.systems().size(); ++s) {
      for (std::size_t m = 0; m < metrics.size(); ++m) {
        const auto column = frame.column(s, m);
        const std::string id = metrics[m].id();
        per_rep[k].push_back({rep.id, frame.systems()[s], id, "",
                              detail::SortedSample(column, {}).statistic(statistic)});
        for (const auto& [label, members] : groups) {
          std::vector<double> values;
          for (auto r : members.rows) values.push_back(column[r]);
          const std::vector<double> weights =
              detail::all_unit(members.weights) ? std::vector<double>{} : members.weights;
          per_rep[k].push_back({rep.id, frame.systems()[s], id, label,
                                detail::SortedSample(values, weights).statistic(statistic)});
        }
      }
    }
  });
  std::vector<std::string> ids;
  std::vector<RepetitionRow> rows;
  for (std::size_t k = 0; k < list.size(); ++k) {
    ids.push_back(list[k].id);
    rows.insert(rows.end(), per_rep[k].begin(), per_rep[k].end());
  }
  return RepetitionFrame(statistic, std::move(ids), std::move(rows));
}

struct StabilityReport {
  std::string system_a;
  std::string system_b;
  std::string metric;
  std::string group;
  std::vector<std::string> repetitions;
  std::vector<double> differences;  // per repetition, a - b
  DistributionSummary summary;      // ecdf included
  double sign_consistency = 0.0;    // share of repetitions with a > b
};

// Distribution of the per-repetition difference a - b of the frame's
// summary statistic.
inline StabilityReport stability_report(const RepetitionFrame& frame, std::string_view system_a,
                                        std::string_view system_b, std::string_view metric,
                                        const SummaryConfig& config,
                                        std::string_view group = {}) {
  if (frame.repetition_ids().size() < 2) {
    throw ValidationError("stability report needs at least 2 repetitions");
  }
  StabilityReport out;
  out.system_a = system_a;
  out.system_b = system_b;
  out.metric = metric;
  out.group = group;
  out.repetitions = frame.repetition_ids();
  const auto a = frame.series(system_a, metric, group);
  const auto b = frame.series(system_b, metric, group);
  std::size_t wins = 0;
  double extent = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    out.differences.push_back(a[k] - b[k]);
    if (a[k] > b[k]) ++wins;
    extent = std::max(extent, std::fabs(a[k] - b[k]));
  }
  out.sign_consistency = static_cast<double>(wins) / static_cast<double>(a.size());
  SummaryConfig c = config;
  c.kde = {config.kde.grid_size, -std::max(extent, 1e-12), std::max(extent, 1e-12)};
  out.summary = summarize(out.differences, c);
  return out;
}

// CSV: repetition_id,system_id,metric_id,group,value.
inline std::string serialize_repetition_csv(const RepetitionFrame& frame) {
  std::string out = "repetition_id,system_id,metric_id,group,value\n";
  for (const auto& r : frame.rows()) {
    out += r.repetition_id + ',' + r.system_id + ',' + r.metric_id + ',' + r.group + ',' +
           format_number(r.value) + '\n';
  }
  return out;
}

}  // namespace disteval
