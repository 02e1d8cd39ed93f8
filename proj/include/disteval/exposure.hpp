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

namespace disteval {

// Exposure mass per label (catalog item or group), labels sorted.
struct ExposureVector {
  std::vector<std::string> labels;
  std::vector<double> mass;
  bool normalized = false;

  double total() const {
    double t = 0.0;
    for (double m : mass) t += m;
    return t;
  }

  double at(std::string_view label) const {
    auto it = std::lower_bound(labels.begin(), labels.end(), label);
    if (it == labels.end() || *it != label) {
      throw ValidationError("label not in exposure vector: " + std::string(label));
    }
    return mass[static_cast<std::size_t>(it - labels.begin())];
  }

  ExposureVector normalize() const {
    const double t = total();
    if (!(t > 0.0)) throw ValidationError("cannot normalize an all-zero exposure vector");
    ExposureVector out{labels, mass, true};
    for (auto& m : out.mass) m /= t;
    return out;
  }
};

// Raw expected exposure of one system: each item accrues the browsing
// weight of every rank it occupies. Accumulation runs in request order.
inline ExposureVector system_exposure(const Run& run, const BrowsingModel& model,
                                      const Catalog& catalog) {
  model.validate();
  ExposureVector out{catalog.items(), std::vector<double>(catalog.size(), 0.0), false};
  std::size_t longest = 0;
  for (const auto& [request, list] : run.requests) longest = std::max(longest, list.size());
  const auto weights = rank_weights(model, longest);
  for (const auto& [request, list] : run.requests) {
    const std::size_t k = std::min(list.size(), weights.size());
    for (std::size_t i = 0; i < k; ++i) {
      const auto idx = catalog.index_of(list[i]);
      if (!idx) {
        throw ValidationError("item " + list[i] + " of system " + run.system_id +
                              " is outside the catalog");
      }
      out.mass[*idx] += weights[i];
    }
  }
  return out;
}

inline std::map<std::string, ExposureVector> system_exposure(const RunSet& runs,
                                                             const BrowsingModel& model,
                                                             const Catalog& catalog) {
  std::map<std::string, ExposureVector> out;
  for (const auto& [system, run] : runs) out.emplace(system, system_exposure(run, model, catalog));
  return out;
}

struct IdealExposure {
  ExposureVector exposure;
  std::vector<std::string> empty_requests;  // no relevant items; contribute nothing
};

// Target policy that spreads each request's exposure over its first |R|
// ranks equally among its |R| relevant items. Non-relevant items get 0,
// including the tail mass beyond rank |R|.
inline IdealExposure ideal_exposure(const TruthSet& truth, const BrowsingModel& model,
                                    const Catalog& catalog) {
  model.validate();
  if (!truth.is_binary()) throw ValidationError("ideal exposure requires binary gains");
  IdealExposure out;
  out.exposure = {catalog.items(), std::vector<double>(catalog.size(), 0.0), false};
  std::size_t largest = 0;
  for (const auto& [request, row] : truth.requests()) largest = std::max(largest, row.size());
  const auto weights = rank_weights(model, largest);
  for (const auto& [request, row] : truth.requests()) {
    std::vector<std::size_t> relevant;
    for (const auto& [item, gain] : row) {
      if (gain <= 0.0) continue;
      const auto idx = catalog.index_of(item);
      if (!idx) throw ValidationError("relevant item " + item + " is outside the catalog");
      relevant.push_back(*idx);
    }
    if (relevant.empty()) {
      out.empty_requests.push_back(request);
      continue;
    }
    const std::size_t slots = std::min(relevant.size(), weights.size());
    double pooled = 0.0;
    for (std::size_t i = 0; i < slots; ++i) pooled += weights[i];
    const double share = pooled / static_cast<double>(relevant.size());
    for (auto idx : relevant) out.exposure.mass[idx] += share;
  }
  return out;
}

enum class DivergenceKind { l2, kl };

inline std::string_view to_string(DivergenceKind k) { return k == DivergenceKind::l2 ? "l2" : "kl"; }

inline constexpr double kKlSmoothing = 1e-10;

// Both vectors are normalized first. L2 is the squared Euclidean distance.
// KL is KL(system || target) in nats; when the target has zero mass where
// the system has positive mass, the target is smoothed by adding 1e-10 to
// every entry and renormalizing.
inline double divergence(const ExposureVector& system, const ExposureVector& target,
                         DivergenceKind kind) {
  if (system.labels != target.labels) {
    throw ValidationError("divergence: exposure vectors cover different labels");
  }
  const auto p = system.normalize();
  auto q = target.normalize();
  double out = 0.0;
  if (kind == DivergenceKind::l2) {
    for (std::size_t i = 0; i < p.mass.size(); ++i) {
      const double d = p.mass[i] - q.mass[i];
      out += d * d;
    }
    return out;
  }
  bool mismatch = false;
  for (std::size_t i = 0; i < p.mass.size(); ++i) {
    if (p.mass[i] > 0.0 && q.mass[i] == 0.0) mismatch = true;
  }
  if (mismatch) {
    double t = 0.0;
    for (auto& m : q.mass) {
      m += kKlSmoothing;
      t += m;
    }
    for (auto& m : q.mass) m /= t;
  }
  for (std::size_t i = 0; i < p.mass.size(); ++i) {
    if (p.mass[i] > 0.0) out += p.mass[i] * std::log(p.mass[i] / q.mass[i]);
  }
  return out;
}

struct LorenzPoint {
  double population_share = 0.0;
  double mass_share = 0.0;
};

struct LorenzGini {
  std::vector<LorenzPoint> curve;  // starts at (0, 0), ends at (1, 1)
  double gini = 0.0;
};

// Lorenz curve over every label (zero-mass labels included) and the Gini
// coefficient sum_i (2i - n - 1) x_(i) / (n sum x). The numerator is summed
// as mirrored pairs (n + 1 - 2i)(x_(n+1-i) - x_(i)) so equal masses give 0.
inline LorenzGini lorenz_gini(const ExposureVector& exposure) {
  std::vector<double> x = exposure.mass;
  if (x.empty()) throw ValidationError("Gini of an empty exposure vector");
  for (double v : x) {
    if (!(v >= 0.0)) throw ValidationError("exposure masses must be nonnegative");
  }
  std::sort(x.begin(), x.end());
  const double total = exposure.total();
  if (!(total > 0.0)) throw ValidationError("Gini of an all-zero exposure vector");
  const std::size_t n = x.size();
  LorenzGini out;
  out.curve.reserve(n + 1);
  out.curve.push_back({0.0, 0.0});
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += x[i];
    out.curve.push_back({static_cast<double>(i + 1) / static_cast<double>(n),
                         i + 1 == n ? 1.0 : cum / total});
  }
  double numerator = 0.0;
  for (std::size_t i = 0; i < n / 2; ++i) {
    const double coef = static_cast<double>(n - 1 - 2 * i);
    numerator += coef * (x[n - 1 - i] - x[i]);
  }
  const double g = numerator / (static_cast<double>(n) * total);
  out.gini = std::clamp(g, 0.0, 1.0);
  return out;
}

namespace detail {

inline std::map<std::string, double> group_masses(const std::vector<std::string>& items,
                                                  const std::vector<double>& mass,
                                                  const AttributeTable& attributes,
                                                  std::string_view attribute) {
  attributes.require_attribute(attribute);
  std::map<std::string, double> groups;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (const auto& share : attributes.memberships(items[i], attribute)) {
      groups[share.group] += mass[i] * share.weight;
    }
  }
  return groups;
}

inline ExposureVector from_map(const std::map<std::string, double>& m, bool normalized) {
  ExposureVector out;
  out.normalized = normalized;
  for (const auto& [label, v] : m) {
    out.labels.push_back(label);
    out.mass.push_back(v);
  }
  return out;
}

}  // namespace detail

// Item exposure aggregated to attribute groups with fractional membership.
// Groups are every value held by some catalog item, zero mass included.
inline ExposureVector group_exposure(const ExposureVector& exposure,
                                     const AttributeTable& attributes,
                                     std::string_view attribute) {
  return detail::from_map(
      detail::group_masses(exposure.labels, exposure.mass, attributes, attribute), false);
}

// Share of catalog items in each group, counting an item with k values as
// 1/k in each. Normalized.
inline ExposureVector prevalence_target(const AttributeTable& attributes,
                                        std::string_view attribute, const Catalog& catalog) {
  if (catalog.empty()) throw ValidationError("prevalence of an empty catalog");
  const std::vector<double> ones(catalog.size(), 1.0);
  return detail::from_map(detail::group_masses(catalog.items(), ones, attributes, attribute),
                          false)
      .normalize();
}

}  // namespace disteval
