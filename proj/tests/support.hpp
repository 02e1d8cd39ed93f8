#pragma once

// Test-only helpers: random fixtures and brute-force reference
// implementations written independently of the library code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "disteval.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::path(DISTEVAL_TEST_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline std::string item_name(int i) { return "i" + std::to_string(i); }

struct ListCase {
  std::vector<std::string> list;
  disteval::RequestTruth truth;
};

// Ranked list of 1..max_len distinct items from a catalog of `catalog`
// items, with 0..max_rel relevant items drawn from the same catalog.
inline ListCase random_case(std::mt19937_64& gen, int catalog = 200, int max_len = 50,
                            int max_rel = 10) {
  std::vector<int> ids(catalog);
  for (int i = 0; i < catalog; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), gen);
  const int len = std::uniform_int_distribution<int>(1, max_len)(gen);
  ListCase c;
  for (int i = 0; i < len; ++i) c.list.push_back(item_name(ids[i]));
  // Relevant items mostly come from the list so metrics are non-trivial.
  const int n_rel = std::uniform_int_distribution<int>(0, max_rel)(gen);
  std::uniform_int_distribution<int> pick(0, std::min(catalog - 1, len + 20));
  for (int k = 0; k < n_rel; ++k) c.truth[item_name(ids[pick(gen)])] = 1.0;
  return c;
}

inline bool relevant(const ListCase& c, std::size_t pos) {
  auto it = c.truth.find(c.list[pos]);
  return it != c.truth.end() && it->second > 0.0;
}

// RBP written straight from the summation, with std::pow per rank.
inline double oracle_rbp(const ListCase& c, double g, bool paper, std::size_t depth = 1000) {
  double s = 0.0;
  for (std::size_t pos = 0; pos < c.list.size() && pos < depth; ++pos) {
    const double rank = static_cast<double>(pos + 1);
    if (relevant(c, pos)) s += std::pow(g, paper ? rank : rank - 1.0);
  }
  return (1.0 - g) * s;
}

inline double oracle_ndcg(const ListCase& c, std::size_t depth = 1000) {
  double dcg = 0.0;
  for (std::size_t pos = 0; pos < c.list.size() && pos < depth; ++pos) {
    auto it = c.truth.find(c.list[pos]);
    if (it != c.truth.end()) dcg += it->second / std::log2(static_cast<double>(pos) + 2.0);
  }
  std::vector<double> gains;
  for (const auto& [item, gain] : c.truth) gains.push_back(gain);
  std::sort(gains.rbegin(), gains.rend());
  double idcg = 0.0;
  for (std::size_t pos = 0; pos < gains.size() && pos < depth; ++pos) {
    idcg += gains[pos] / std::log2(static_cast<double>(pos) + 2.0);
  }
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

inline double oracle_mrr(const ListCase& c, std::size_t depth = 1000) {
  for (std::size_t pos = 0; pos < c.list.size() && pos < depth; ++pos) {
    if (relevant(c, pos)) return 1.0 / static_cast<double>(pos + 1);
  }
  return 0.0;
}

inline double oracle_hit(const ListCase& c, std::size_t k) {
  for (std::size_t pos = 0; pos < c.list.size() && pos < k; ++pos) {
    if (relevant(c, pos)) return 1.0;
  }
  return 0.0;
}

// Type-7 quantile through std::nth_element.
inline double oracle_quantile(std::vector<double> x, double p) {
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  std::nth_element(x.begin(), x.begin() + static_cast<long>(lo), x.end());
  const double xlo = x[lo];
  std::nth_element(x.begin(), x.begin() + static_cast<long>(hi), x.end());
  const double xhi = x[hi];
  return xlo + (h - static_cast<double>(lo)) * (xhi - xlo);
}

inline double oracle_ecdf(const std::vector<double>& x, double v) {
  const auto n = std::count_if(x.begin(), x.end(), [v](double s) { return s <= v; });
  return static_cast<double>(n) / static_cast<double>(x.size());
}

inline double oracle_mean(const std::vector<double>& x) {
  long double s = 0.0L;
  for (double v : x) s += v;
  return static_cast<double>(s / static_cast<long double>(x.size()));
}

inline double bisect(double lo, double hi, const auto& f) {
  double flo = f(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Builds a Run from request -> list.
inline disteval::Run make_run(const std::string& system,
                              const std::map<std::string, std::vector<std::string>>& lists) {
  disteval::Run run;
  run.system_id = system;
  for (const auto& [req, items] : lists) run.requests[req] = items;
  return run;
}

inline disteval::TruthSet make_truth(
    const std::map<std::string, std::vector<std::string>>& relevant_items,
    const std::vector<std::string>& empty_requests = {}) {
  disteval::TruthSet t;
  for (const auto& [req, items] : relevant_items) {
    for (const auto& item : items) t.add(req, item, 1.0);
  }
  for (const auto& req : empty_requests) t.add_request(req);
  return t;
}

}  // namespace testing_support
