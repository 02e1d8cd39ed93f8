#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "disteval/error.hpp"

namespace disteval {

inline constexpr std::string_view kUnknownGroup = "unknown";

using ItemList = std::vector<std::string>;

// One system's ranked output. Item lists are stored in rank order, so the
// item at index i has rank i + 1.
struct Run {
  std::string system_id;
  std::map<std::string, ItemList, std::less<>> requests;

  friend bool operator==(const Run&, const Run&) = default;
};

// Runs keyed by system id.
using RunSet = std::map<std::string, Run, std::less<>>;

inline void add_run(RunSet& runs, Run run) {
  if (run.system_id.empty()) throw ValidationError("run has no system id");
  const std::string id = run.system_id;
  if (!runs.emplace(id, std::move(run)).second) {
    throw ValidationError("duplicate system id: " + id);
  }
}

// Checks the Run invariants: nonempty, duplicate-free item lists.
inline void validate_run(const Run& run) {
  if (run.system_id.empty()) throw ValidationError("run has no system id");
  for (const auto& [request, items] : run.requests) {
    if (items.empty()) {
      throw ValidationError("request " + request + " has an empty list in " +
                            run.system_id);
    }
    std::set<std::string_view> seen;
    for (const auto& item : items) {
      if (!seen.insert(item).second) {
        throw ValidationError("duplicate item " + item + " for request " +
                              request + " in " + run.system_id);
      }
    }
  }
}

using RequestTruth = std::map<std::string, double, std::less<>>;

// Per-request relevance gains. A request may be present with no positive
// gains (written as gain-0 lines), which is distinct from being absent.
class TruthSet {
 public:
  void add(const std::string& request, const std::string& item, double gain) {
    if (!(gain >= 0.0)) {
      throw ValidationError("negative gain for (" + request + ", " + item +
                            ")");
    }
    auto& row = requests_[request];
    if (!row.emplace(item, gain).second) {
      throw ValidationError("duplicate truth pair (" + request + ", " + item +
                            ")");
    }
  }

  void add_request(const std::string& request) { requests_[request]; }

  bool contains(std::string_view request) const {
    return requests_.find(request) != requests_.end();
  }

  const RequestTruth& request(std::string_view request) const {
    static const RequestTruth kEmpty;
    auto it = requests_.find(request);
    return it == requests_.end() ? kEmpty : it->second;
  }

  double gain(std::string_view request, std::string_view item) const {
    const auto& row = this->request(request);
    auto it = row.find(item);
    return it == row.end() ? 0.0 : it->second;
  }

  const std::map<std::string, RequestTruth, std::less<>>& requests() const {
    return requests_;
  }

  std::size_t request_count() const { return requests_.size(); }

  bool is_binary() const {
    for (const auto& [request, row] : requests_) {
      for (const auto& [item, g] : row) {
        if (g != 0.0 && g != 1.0) return false;
      }
    }
    return true;
  }

  friend bool operator==(const TruthSet&, const TruthSet&) = default;

 private:
  std::map<std::string, RequestTruth, std::less<>> requests_;
};

inline bool is_binary(const RequestTruth& truth) {
  return std::all_of(truth.begin(), truth.end(), [](const auto& kv) {
    return kv.second == 0.0 || kv.second == 1.0;
  });
}

enum class SubjectKind { user, item };

struct GroupShare {
  std::string group;
  double weight = 0.0;
};

// Subject attributes from a CSV table. Every (subject, attribute) cell holds
// one or more string values; a subject with k values for an attribute is a
// member of each value's group with weight 1/k.
class AttributeTable {
 public:
  using Row = std::map<std::string, std::vector<std::string>, std::less<>>;

  AttributeTable() = default;
  AttributeTable(SubjectKind kind, std::vector<std::string> attributes)
      : kind_(kind), attributes_(std::move(attributes)) {
    std::set<std::string_view> seen;
    for (const auto& name : attributes_) {
      if (name.empty()) throw ValidationError("empty attribute name");
      if (!seen.insert(name).second) {
        throw ValidationError("duplicate attribute name: " + name);
      }
    }
  }

  SubjectKind kind() const { return kind_; }
  const std::vector<std::string>& attributes() const { return attributes_; }

  bool has_attribute(std::string_view name) const {
    return std::find(attributes_.begin(), attributes_.end(), name) !=
           attributes_.end();
  }

  void require_attribute(std::string_view name) const {
    if (!has_attribute(name)) {
      throw ValidationError("attribute not found: " + std::string(name));
    }
  }

  // Missing attributes and empty value lists become "unknown"; repeated
  // values within one cell collapse to one.
  void add(const std::string& subject, Row row) {
    if (subject.empty()) throw ValidationError("empty subject id");
    Row clean;
    for (const auto& name : attributes_) {
      std::vector<std::string> values;
      if (auto it = row.find(name); it != row.end()) {
        for (auto& v : it->second) {
          if (v.empty()) continue;
          if (std::find(values.begin(), values.end(), v) == values.end()) {
            values.push_back(std::move(v));
          }
        }
        row.erase(it);
      }
      if (values.empty()) values.emplace_back(kUnknownGroup);
      clean.emplace(name, std::move(values));
    }
    if (!row.empty()) {
      throw ValidationError("subject " + subject + " has undeclared attribute " +
                            row.begin()->first);
    }
    if (!rows_.emplace(subject, std::move(clean)).second) {
      throw ValidationError("duplicate subject id: " + subject);
    }
  }

  bool contains(std::string_view subject) const {
    return rows_.find(subject) != rows_.end();
  }

  const std::vector<std::string>& values(std::string_view subject,
                                         std::string_view attribute) const {
    static const std::vector<std::string> kUnknown{std::string(kUnknownGroup)};
    require_attribute(attribute);
    auto it = rows_.find(subject);
    if (it == rows_.end()) return kUnknown;
    return it->second.find(attribute)->second;
  }

  std::vector<GroupShare> memberships(std::string_view subject,
                                      std::string_view attribute) const {
    const auto& vals = values(subject, attribute);
    const double w = 1.0 / static_cast<double>(vals.size());
    std::vector<GroupShare> out;
    out.reserve(vals.size());
    for (const auto& v : vals) out.push_back({v, w});
    return out;
  }

  const std::map<std::string, Row, std::less<>>& rows() const { return rows_; }

  std::vector<std::string> subjects() const {
    std::vector<std::string> out;
    out.reserve(rows_.size());
    for (const auto& [id, row] : rows_) out.push_back(id);
    return out;
  }

  friend bool operator==(const AttributeTable&, const AttributeTable&) =
      default;

 private:
  SubjectKind kind_ = SubjectKind::user;
  std::vector<std::string> attributes_;
  std::map<std::string, Row, std::less<>> rows_;
};

// Sorted, duplicate-free item universe. Exposure vectors and Gini
// coefficients are always defined over an explicit catalog.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<std::string> items) : items_(std::move(items)) {
    std::sort(items_.begin(), items_.end());
    items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<std::string>& items() const { return items_; }

  std::optional<std::size_t> index_of(std::string_view item) const {
    auto it = std::lower_bound(items_.begin(), items_.end(), item);
    if (it == items_.end() || *it != item) return std::nullopt;
    return static_cast<std::size_t>(it - items_.begin());
  }

  bool contains(std::string_view item) const {
    return index_of(item).has_value();
  }

  friend bool operator==(const Catalog&, const Catalog&) = default;

 private:
  std::vector<std::string> items_;
};

// Item-attribute subjects when a table is given, otherwise every item seen
// in any run or in the truth set.
inline Catalog make_catalog(const RunSet& runs, const TruthSet& truth,
                            const AttributeTable* item_attributes = nullptr) {
  if (item_attributes != nullptr) return Catalog(item_attributes->subjects());
  std::vector<std::string> items;
  for (const auto& [system, run] : runs) {
    for (const auto& [request, list] : run.requests) {
      items.insert(items.end(), list.begin(), list.end());
    }
  }
  for (const auto& [request, row] : truth.requests()) {
    for (const auto& [item, gain] : row) items.push_back(item);
  }
  return Catalog(std::move(items));
}

// Requests evaluated for a run set: the truth domain. Run requests outside
// it are a contract violation rather than silently scored.
inline std::vector<std::string> request_universe(const RunSet& runs,
                                                 const TruthSet& truth) {
  for (const auto& [system, run] : runs) {
    for (const auto& [request, list] : run.requests) {
      if (!truth.contains(request)) {
        throw ValidationError("request " + request + " of system " + system +
                              " is not in the truth set");
      }
    }
  }
  std::vector<std::string> out;
  out.reserve(truth.request_count());
  for (const auto& [request, row] : truth.requests()) out.push_back(request);
  return out;
}

struct Repetition {
  std::string id;
  RunSet runs;
  TruthSet truth;
};

// Ordered repetitions; all cover the same systems and ids are unique.
class RepetitionSet {
 public:
  void add(Repetition rep) {
    if (rep.id.empty()) throw ValidationError("empty repetition id");
    if (rep.runs.empty()) {
      throw ValidationError("repetition " + rep.id + " has no runs");
    }
    for (const auto& existing : reps_) {
      if (existing.id == rep.id) {
        throw ValidationError("duplicate repetition id: " + rep.id);
      }
    }
    if (!reps_.empty()) {
      const auto& first = reps_.front().runs;
      bool same = first.size() == rep.runs.size();
      for (auto a = first.begin(), b = rep.runs.cbegin();
           same && a != first.end(); ++a, ++b) {
        same = a->first == b->first;
      }
      if (!same) {
        throw ValidationError("repetition " + rep.id +
                              " does not cover the same systems as " +
                              reps_.front().id);
      }
    }
    reps_.push_back(std::move(rep));
  }

  const std::vector<Repetition>& repetitions() const { return reps_; }
  std::size_t size() const { return reps_.size(); }
  bool empty() const { return reps_.empty(); }

  std::vector<std::string> system_ids() const {
    std::vector<std::string> out;
    if (reps_.empty()) return out;
    for (const auto& [id, run] : reps_.front().runs) out.push_back(id);
    return out;
  }

 private:
  std::vector<Repetition> reps_;
};

}  // namespace disteval
