#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "disteval/error.hpp"
#include "disteval/model.hpp"
#include "disteval/rng.hpp"

namespace disteval {

struct SynthFixture {
  RunSet runs;
  TruthSet truth;
  AttributeTable users;  // "gender": F | M, a few left blank
  AttributeTable items;  // "genre": one to three genres per item
};

namespace detail {

inline std::string padded_id(char prefix, std::size_t i, std::size_t count) {
  const std::size_t width = std::to_string(count).size();
  std::string digits = std::to_string(i + 1);
  return std::string(1, prefix) + std::string(width - digits.size(), '0') +
         digits;
}

// Weighted sampling without replacement (Efraimidis-Spirakis keys): the
// `count` items with largest u^(1/w) among those not excluded.
inline std::vector<std::size_t> weighted_sample(
    Rng& rng, const std::vector<double>& weights, std::size_t count,
    const std::vector<char>& excluded) {
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double u = rng.uniform();
    if (excluded[i]) continue;
    keys.emplace_back(std::log(u) / weights[i], i);
  }
  count = std::min(count, keys.size());
  std::partial_sort(keys.begin(), keys.begin() + static_cast<long>(count),
                    keys.end(), [](const auto& a, const auto& b) {
                      return a.first > b.first ||
                             (a.first == b.first && a.second < b.second);
                    });
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(keys[i].second);
  return out;
}

}  // namespace detail

// Deterministic test data. Items have Zipf-like popularity; each request
// gets exactly n_relevant truth items. System s finds each relevant item
// with probability 0.7 * 0.8^s, places found items near the top, and fills
// the rest of its list by popularity with a bias that grows with s, so
// later systems are both weaker and more concentrated.
inline SynthFixture synth_fixture(std::uint64_t seed, std::size_t n_requests,
                                  std::size_t catalog_size,
                                  std::size_t n_relevant,
                                  std::size_t list_length,
                                  std::size_t n_systems) {
  if (n_requests < 1 || catalog_size < 1 || n_relevant < 1 ||
      list_length < 1 || n_systems < 1) {
    throw ValidationError("synth: all counts must be >= 1");
  }
  if (n_relevant > catalog_size) {
    throw ValidationError("synth: n_relevant exceeds catalog size");
  }
  if (list_length > catalog_size) {
    throw ValidationError("synth: list length exceeds catalog size");
  }
  if (n_systems > 26) throw ValidationError("synth: at most 26 systems");

  Rng rng(derive_seed(seed, "synth"));
  SynthFixture fx;

  std::vector<std::string> items(catalog_size);
  std::vector<double> popularity(catalog_size);
  for (std::size_t i = 0; i < catalog_size; ++i) {
    items[i] = detail::padded_id('i', i, catalog_size);
    popularity[i] = 1.0 / std::pow(static_cast<double>(i + 1), 0.8);
  }

  static constexpr const char* kGenres[] = {"Action", "Comedy", "Drama",
                                            "Horror", "Romance", "SciFi"};
  fx.items = AttributeTable(SubjectKind::item, {"genre"});
  for (std::size_t i = 0; i < catalog_size; ++i) {
    const std::size_t k = 1 + rng.index(3);
    std::vector<std::string> genres;
    for (std::size_t g = 0; g < k; ++g) {
      // Skewed toward the first genres.
      const double u = rng.uniform();
      genres.emplace_back(kGenres[static_cast<std::size_t>(u * u * 6.0)]);
    }
    fx.items.add(items[i], {{"genre", std::move(genres)}});
  }

  fx.users = AttributeTable(SubjectKind::user, {"gender"});
  std::vector<std::string> requests(n_requests);
  for (std::size_t r = 0; r < n_requests; ++r) {
    requests[r] = detail::padded_id('u', r, n_requests);
    const double u = rng.uniform();
    std::vector<std::string> gender;
    if (u < 0.35) {
      gender.emplace_back("F");
    } else if (u < 0.95) {
      gender.emplace_back("M");
    }
    fx.users.add(requests[r], {{"gender", std::move(gender)}});
  }

  const std::vector<char> none(catalog_size, 0);
  std::vector<std::vector<std::size_t>> relevant(n_requests);
  for (std::size_t r = 0; r < n_requests; ++r) {
    relevant[r] = detail::weighted_sample(rng, popularity, n_relevant, none);
    std::sort(relevant[r].begin(), relevant[r].end());
    for (auto i : relevant[r]) fx.truth.add(requests[r], items[i], 1.0);
  }

  for (std::size_t s = 0; s < n_systems; ++s) {
    Run run;
    run.system_id = std::string("sys") + static_cast<char>('A' + s);
    const double skill = 0.7 * std::pow(0.8, static_cast<double>(s));
    const double bias = 0.5 + 0.5 * static_cast<double>(s);
    std::vector<double> weights(catalog_size);
    for (std::size_t i = 0; i < catalog_size; ++i) {
      weights[i] = std::pow(popularity[i], bias);
    }
    for (std::size_t r = 0; r < n_requests; ++r) {
      std::vector<char> placed(catalog_size, 0);
      std::vector<std::size_t> found;
      for (auto i : relevant[r]) {
        if (rng.uniform() < skill) {
          found.push_back(i);
          placed[i] = 1;
        }
      }
      auto list = detail::weighted_sample(rng, weights,
                                          list_length - std::min(list_length, found.size()),
                                          placed);
      for (auto i : found) {
        const double u = rng.uniform();
        const auto pos = std::min(list.size(),
                                  static_cast<std::size_t>(u * u * list_length));
        list.insert(list.begin() + static_cast<long>(pos), i);
      }
      list.resize(std::min(list.size(), list_length));
      ItemList names;
      names.reserve(list.size());
      for (auto i : list) names.push_back(items[i]);
      run.requests.emplace(requests[r], std::move(names));
    }
    add_run(fx.runs, std::move(run));
  }
  return fx;
}

}  // namespace disteval
