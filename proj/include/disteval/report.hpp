#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "disteval/error.hpp"
#include "disteval/exposure.hpp"
#include "disteval/format.hpp"
#include "disteval/io.hpp"
#include "disteval/metrics.hpp"
#include "disteval/repetition.hpp"
#include "disteval/stats.hpp"
#include "disteval/subgroup.hpp"
#include "disteval/uncertainty.hpp"

namespace disteval {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

using Json = nlohmann::json;

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

inline std::string file_digest(const std::filesystem::path& path) {
  return sha256_hex(read_file(path));
}

// Plot data written next to the report as <out>/<section>/<name>.csv.
struct Sidecar {
  std::string section;
  std::string name;
  std::string content;

  std::string relative_path() const { return section + "/" + name + ".csv"; }
};

struct Report {
  Json document;
  std::vector<Sidecar> sidecars;

  // Two-space indented JSON with sorted keys and a trailing newline.
  std::string json_text() const { return document.dump(2) + "\n"; }
};

struct Provenance {
  std::string command;
  std::uint64_t seed = 0;
  std::optional<BrowsingModel> model;
  std::optional<BootstrapConfig> bootstrap;
  std::map<std::string, std::string> inputs;  // label -> sha256
  Json parameters = Json::object();
};

// ---- JSON encoders -------------------------------------------------------

inline Json to_json(const Interval& ci) { return Json{{"lo", ci.lo}, {"hi", ci.hi}}; }

inline Json to_json(const Estimate& e) { return Json{{"value", e.value}, {"ci", to_json(e.ci)}}; }

inline Json kde_json(const std::optional<KdeGrid>& kde) {
  if (!kde) return nullptr;
  Json j{{"degenerate", kde->degenerate}, {"bandwidth", kde->bandwidth}};
  if (kde->degenerate) {
    j["spike_at"] = kde->spike_at;
  } else {
    j["grid_points"] = kde->points.size();
    j["lo"] = kde->points.front().x;
    j["hi"] = kde->points.back().x;
  }
  return j;
}

inline Json to_json(const DistributionSummary& s) {
  Json j;
  j["n"] = s.n;
  j["weight"] = s.weight;
  j["mean"] = to_json(s.mean);
  j["median"] = to_json(s.median);
  j["ci_level"] = s.mean.ci.level;
  Json pct = Json::object();
  for (const auto& p : s.percentiles) pct[percent_label(p.p)] = to_json(p.estimate);
  j["percentiles"] = pct;
  j["kde"] = kde_json(s.kde);
  return j;
}

inline Json to_json(const TTest& t) {
  Json j{{"status", std::string(to_string(t.status))}, {"df", t.df}};
  if (t.has_value()) {
    j["t"] = t.t;
    j["p"] = t.p;
  } else {
    j["t"] = nullptr;
    j["p"] = nullptr;
  }
  return j;
}

inline Json to_json(const PairedDiffSummary& d) {
  return Json{{"system_a", d.system_a},
              {"system_b", d.system_b},
              {"metric", d.metric},
              {"n", d.diffs.size()},
              {"mean_diff", d.mean_diff},
              {"median_diff", d.median_diff},
              {"fraction_hurt", d.fraction_hurt},
              {"fraction_helped", d.fraction_helped},
              {"fraction_tied", d.fraction_tied},
              {"test", to_json(d.test)},
              {"kde", kde_json(d.kde)}};
}

// ---- CSV encoders ----------------------------------------------------------

inline std::string ecdf_csv(const std::vector<EcdfPoint>& points) {
  std::string out = "x,cdf\n";
  for (const auto& p : points) out += format_number(p.x) + ',' + format_number(p.cdf) + '\n';
  return out;
}

inline std::string kde_csv(const KdeGrid& kde) {
  std::string out = "x,density\n";
  for (const auto& p : kde.points) {
    out += format_number(p.x) + ',' + format_number(p.density) + '\n';
  }
  return out;
}

inline std::string lorenz_csv(const LorenzGini& lg) {
  std::string out = "population_share,mass_share\n";
  for (const auto& p : lg.curve) {
    out += format_number(p.population_share) + ',' + format_number(p.mass_share) + '\n';
  }
  return out;
}

// Assembles analysis results into one report. Each add_* call owns one
// section; sections left out are simply absent from the document.
class ReportBuilder {
 public:
  explicit ReportBuilder(Provenance provenance) : provenance_(std::move(provenance)) {}

  void add_pointwise(const MetricFrame& frame) {
    Json systems = Json::object();
    for (std::size_t s = 0; s < frame.systems().size(); ++s) {
      Json metrics = Json::object();
      for (std::size_t m = 0; m < frame.metrics().size(); ++m) {
        metrics[frame.metrics()[m].id()] = Json{{"mean", mean(frame.column(s, m))}};
      }
      systems[frame.systems()[s]] = Json{{"metrics", metrics},
                                         {"missing_requests", frame.missing_requests(s)}};
    }
    Json tests = Json::array();
    if (frame.requests().size() >= 2) {
      for (std::size_t m = 0; m < frame.metrics().size(); ++m) {
        const auto id = frame.metrics()[m].id();
        for (std::size_t a = 0; a < frame.systems().size(); ++a) {
          for (std::size_t b = a + 1; b < frame.systems().size(); ++b) {
            const auto d = paired_diff(frame, frame.systems()[a], frame.systems()[b], id);
            tests.push_back(Json{{"metric", id},
                                 {"system_a", d.system_a},
                                 {"system_b", d.system_b},
                                 {"mean_diff", d.mean_diff},
                                 {"test", to_json(d.test)}});
          }
        }
      }
    }
    analysis_["pointwise"] = Json{{"requests", frame.requests().size()},
                                  {"metrics", frame.metric_ids()},
                                  {"systems", systems},
                                  {"paired_tests", tests}};
    sidecars_.push_back({"pointwise", "metric_frame", serialize_frame_csv(frame)});
  }

  // summaries[system][metric]
  void add_distributions(
      const std::map<std::string, std::map<std::string, DistributionSummary>>& summaries) {
    Json j = Json::object();
    for (const auto& [system, by_metric] : summaries) {
      for (const auto& [metric, s] : by_metric) {
        Json e = to_json(s);
        const std::string stem = sanitize_name(system) + "__" + sanitize_name(metric);
        Json plots{{"ecdf", add_sidecar("distributions", "ecdf__" + stem, ecdf_csv(s.ecdf))}};
        if (s.kde && !s.kde->degenerate) {
          plots["kde"] = add_sidecar("distributions", "kde__" + stem, kde_csv(*s.kde));
        }
        e["plot_data"] = plots;
        j[system][metric] = e;
      }
    }
    analysis_["distributions"] = j;
  }

  void add_differences(const std::vector<PairedDiffSummary>& diffs) {
    Json arr = Json::array();
    for (const auto& d : diffs) arr.push_back(diff_entry("differences", d, ""));
    analysis_["differences"] = arr;
  }

  void add_subgroups(const std::string& attribute, const std::vector<GroupedSummary>& summaries,
                     const std::vector<std::pair<PairedDiffSummary, std::vector<GroupChange>>>&
                         changes = {}) {
    Json section = Json::object();
    Json arr = Json::array();
    for (const auto& g : summaries) {
      Json groups = Json::object();
      for (const auto& gs : g.groups) {
        Json e{{"requests", gs.requests}, {"weight", gs.weight}, {"summary", to_json(gs.summary)}};
        const std::string stem = sanitize_name(attribute) + "__" + sanitize_name(g.system) +
                                 "__" + sanitize_name(g.metric) + "__" + sanitize_name(gs.label);
        e["plot_data"] = Json{
            {"ecdf", add_sidecar("subgroups", "ecdf__" + stem, ecdf_csv(gs.summary.ecdf))}};
        groups[gs.label] = e;
      }
      Json gaps = Json::array();
      for (const auto& gap : g.gaps) {
        gaps.push_back(Json{{"group_a", gap.group_a},
                            {"group_b", gap.group_b},
                            {"difference", to_json(gap.difference)}});
      }
      arr.push_back(Json{{"system", g.system}, {"metric", g.metric}, {"groups", groups},
                         {"gaps", gaps}});
    }
    section["summaries"] = arr;
    Json changes_json = Json::array();
    for (const auto& [overall, per_group] : changes) {
      Json groups = Json::object();
      for (const auto& gc : per_group) {
        groups[gc.label] = diff_entry("subgroups", gc.change, attribute + "__" + gc.label);
      }
      changes_json.push_back(Json{{"system_a", overall.system_a},
                                  {"system_b", overall.system_b},
                                  {"metric", overall.metric},
                                  {"groups", groups}});
    }
    section["changes"] = changes_json;
    analysis_["subgroups"][attribute] = section;
  }

  struct ExposureSystem {
    std::string system;
    ExposureVector exposure;
  };

  struct ExposureGroups {
    std::string attribute;
    ExposureVector prevalence;  // normalized
    ExposureVector ideal;       // raw group mass of the ideal policy
    std::map<std::string, ExposureVector> systems;
  };

  void add_exposure(const Catalog& catalog, const BrowsingModel& model,
                    const std::map<std::string, ExposureVector>& systems,
                    const IdealExposure& ideal, const std::vector<ExposureGroups>& groups = {}) {
    Json j;
    j["catalog_size"] = catalog.size();
    j["patience"] = model.patience;
    j["convention"] = std::string(to_string(model.convention));
    j["depth"] = model.depth;
    j["conventions"] = Json{
        {"l2", "squared Euclidean distance between normalized exposure vectors"},
        {"kl", "KL(system || target) in nats; target smoothed by 1e-10 and renormalized only "
               "when it has zero mass where the system has positive mass"},
        {"gini_population", "full catalog, zero-exposure items included"},
        {"ideal_policy",
         "each request's first |R| rank weights shared equally by its |R| relevant items; "
         "non-relevant items receive 0"}};
    const auto ideal_lg = lorenz_gini(ideal.exposure);
    j["ideal"] = Json{{"gini", ideal_lg.gini},
                      {"total_mass", ideal.exposure.total()},
                      {"empty_requests", ideal.empty_requests.size()}};
    Json sys = Json::object();
    std::string items = "item_id";
    for (const auto& [id, e] : systems) items += ',' + id;
    items += ",ideal\n";
    std::string divergence_rows = "system,target,kind,value\n";
    for (const auto& [id, e] : systems) {
      const auto lg = lorenz_gini(e);
      const double l2 = divergence(e, ideal.exposure, DivergenceKind::l2);
      const double kl = divergence(e, ideal.exposure, DivergenceKind::kl);
      sys[id] = Json{{"gini", lg.gini},
                     {"total_mass", e.total()},
                     {"l2_vs_ideal", l2},
                     {"kl_vs_ideal", kl},
                     {"plot_data",
                      Json{{"lorenz", add_sidecar("exposure", "lorenz__" + sanitize_name(id),
                                                  lorenz_csv(lg))}}}};
      divergence_rows += id + ",ideal,l2," + format_number(l2) + '\n';
      divergence_rows += id + ",ideal,kl," + format_number(kl) + '\n';
    }
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      items += catalog.items()[i];
      for (const auto& [id, e] : systems) items += ',' + format_number(e.mass[i]);
      items += ',' + format_number(ideal.exposure.mass[i]) + '\n';
    }
    j["systems"] = sys;
    Json plots{{"items", add_sidecar("exposure", "items", items)}};

    Json group_json = Json::object();
    for (const auto& g : groups) {
      const auto ideal_share = g.ideal.normalize();
      Json gj;
      gj["prevalence"] = shares_json(g.prevalence);
      gj["ideal"] = shares_json(ideal_share);
      Json gs = Json::object();
      std::string csv = "group,prevalence,ideal";
      for (const auto& [id, e] : g.systems) csv += ',' + id;
      csv += '\n';
      for (const auto& [id, e] : g.systems) {
        const double l2p = divergence(e, g.prevalence, DivergenceKind::l2);
        const double klp = divergence(e, g.prevalence, DivergenceKind::kl);
        const double l2i = divergence(e, g.ideal, DivergenceKind::l2);
        const double kli = divergence(e, g.ideal, DivergenceKind::kl);
        gs[id] = Json{{"shares", shares_json(e.normalize())},
                      {"l2_vs_prevalence", l2p},
                      {"kl_vs_prevalence", klp},
                      {"l2_vs_ideal", l2i},
                      {"kl_vs_ideal", kli}};
        const std::string where = g.attribute + ":" + id;
        divergence_rows += where + ",prevalence,l2," + format_number(l2p) + '\n';
        divergence_rows += where + ",prevalence,kl," + format_number(klp) + '\n';
        divergence_rows += where + ",ideal,l2," + format_number(l2i) + '\n';
        divergence_rows += where + ",ideal,kl," + format_number(kli) + '\n';
      }
      for (std::size_t i = 0; i < g.prevalence.labels.size(); ++i) {
        csv += g.prevalence.labels[i] + ',' + format_number(g.prevalence.mass[i]) + ',' +
               format_number(ideal_share.mass[i]);
        for (const auto& [id, e] : g.systems) csv += ',' + format_number(e.normalize().mass[i]);
        csv += '\n';
      }
      gj["systems"] = gs;
      gj["plot_data"] =
          Json{{"shares", add_sidecar("exposure", "groups__" + sanitize_name(g.attribute), csv)}};
      group_json[g.attribute] = gj;
    }
    j["groups"] = group_json;
    plots["divergence"] = add_sidecar("exposure", "divergence", divergence_rows);
    j["plot_data"] = plots;
    analysis_["exposure"] = j;
  }

  void add_sweep(const SweepResult& sweep) {
    Json curves = Json::array();
    std::string csv = "group,system,patience,mean\n";
    for (const auto& c : sweep.curves) {
      curves.push_back(Json{{"system", c.system}, {"group", c.group}, {"means", c.means}});
      for (std::size_t j = 0; j < sweep.grid.size(); ++j) {
        csv += c.group + ',' + c.system + ',' + format_number(sweep.grid[j]) + ',' +
               format_number(c.means[j]) + '\n';
      }
    }
    Json crossings = Json::array();
    for (const auto& x : sweep.crossovers) {
      crossings.push_back(Json{{"system_a", x.system_a},
                               {"system_b", x.system_b},
                               {"group", x.group},
                               {"lo", x.lo},
                               {"hi", x.hi}});
    }
    analysis_["uncertainty"]["sweep"] =
        Json{{"grid", sweep.grid},
             {"convention", std::string(to_string(sweep.convention))},
             {"attribute", sweep.attribute},
             {"curves", curves},
             {"crossovers", crossings},
             {"plot_data", Json{{"curves", add_sidecar("uncertainty", "sweep", csv)}}}};
  }

  void add_posterior(const PosteriorResult& posterior) {
    Json series = Json::array();
    std::string csv = "draw,patience";
    for (const auto& s : posterior.series) {
      csv += ',' + s.system + (s.group.empty() ? "" : ":" + s.group);
    }
    csv += '\n';
    for (std::size_t m = 0; m < posterior.patience.size(); ++m) {
      csv += std::to_string(m) + ',' + format_number(posterior.patience[m]);
      for (const auto& s : posterior.series) csv += ',' + format_number(s.samples[m]);
      csv += '\n';
    }
    for (const auto& s : posterior.series) {
      const std::string stem =
          sanitize_name(s.system) + (s.group.empty() ? "" : "__" + sanitize_name(s.group));
      Json e{{"system", s.system}, {"group", s.group}, {"summary", to_json(s.summary)}};
      e["plot_data"] = Json{
          {"ecdf", add_sidecar("uncertainty", "posterior_ecdf__" + stem, ecdf_csv(s.summary.ecdf))}};
      series.push_back(e);
    }
    Json prior{{"a", posterior.prior.a}, {"b", posterior.prior.b}, {"mean", posterior.prior.mean()}};
    if (auto mode = posterior.prior.mode()) prior["mode"] = *mode;
    analysis_["uncertainty"]["posterior"] =
        Json{{"prior", prior},
             {"samples", posterior.patience.size()},
             {"series", series},
             {"plot_data",
              Json{{"samples", add_sidecar("uncertainty", "posterior_samples", csv)}}}};
  }

  void add_repetitions(const RepetitionFrame& frame,
                       const std::map<std::string, DistributionSummary>& per_system,
                       const std::vector<StabilityReport>& stability) {
    Json systems = Json::object();
    for (const auto& [key, s] : per_system) systems[key] = to_json(s);
    Json stab = Json::array();
    for (const auto& r : stability) {
      const std::string stem = sanitize_name(r.system_a) + "__vs__" + sanitize_name(r.system_b) +
                               "__" + sanitize_name(r.metric) +
                               (r.group.empty() ? "" : "__" + sanitize_name(r.group));
      stab.push_back(Json{
          {"system_a", r.system_a},
          {"system_b", r.system_b},
          {"metric", r.metric},
          {"group", r.group},
          {"differences", r.differences},
          {"sign_consistency", r.sign_consistency},
          {"summary", to_json(r.summary)},
          {"plot_data", Json{{"ecdf", add_sidecar("repetitions", "stability_ecdf__" + stem,
                                                  ecdf_csv(r.summary.ecdf))}}}});
    }
    analysis_["repetitions"] =
        Json{{"statistic", frame.statistic().name()},
             {"repetitions", frame.repetition_ids()},
             {"summaries", systems},
             {"stability", stab},
             {"plot_data",
              Json{{"frame", add_sidecar("repetitions", "frame", serialize_repetition_csv(frame))}}}};
  }

  // Throws when no section was added.
  Report build() const {
    if (analysis_.empty()) throw ValidationError("report has no analysis sections");
    Json prov;
    prov["tool"] = "disteval";
    prov["tool_version"] = std::string(kToolVersion);
    prov["command"] = provenance_.command;
    prov["seed"] = provenance_.seed;
    prov["inputs"] = provenance_.inputs;
    prov["parameters"] = provenance_.parameters;
    if (provenance_.model) {
      prov["model"] = Json{{"patience", provenance_.model->patience},
                           {"convention", std::string(to_string(provenance_.model->convention))},
                           {"depth", provenance_.model->depth}};
    }
    if (provenance_.bootstrap) {
      prov["bootstrap"] = Json{{"resamples", provenance_.bootstrap->resamples},
                               {"level", provenance_.bootstrap->level},
                               {"method", "percentile"}};
    }
    Report r;
    r.document = Json{{"schema_version", kReportSchemaVersion},
                      {"provenance", prov},
                      {"analysis", analysis_}};
    r.sidecars = sidecars_;
    return r;
  }

 private:
  std::string add_sidecar(std::string section, std::string name, std::string content) {
    Sidecar s{std::move(section), std::move(name), std::move(content)};
    std::string path = s.relative_path();
    sidecars_.push_back(std::move(s));
    return path;
  }

  Json diff_entry(const std::string& section, const PairedDiffSummary& d,
                  const std::string& qualifier) {
    Json e = to_json(d);
    std::string stem = sanitize_name(d.system_a) + "__vs__" + sanitize_name(d.system_b) + "__" +
                       sanitize_name(d.metric);
    if (!qualifier.empty()) stem += "__" + sanitize_name(qualifier);
    std::string per_request = "request_id,diff\n";
    for (std::size_t i = 0; i < d.diffs.size(); ++i) {
      per_request += (i < d.requests.size() ? d.requests[i] : std::to_string(i)) + ',' +
                     format_number(d.diffs[i]) + '\n';
    }
    Json plots{{"ecdf", add_sidecar(section, "diff_ecdf__" + stem, ecdf_csv(d.ecdf))},
               {"diffs", add_sidecar(section, "diffs__" + stem, per_request)}};
    if (d.kde && !d.kde->degenerate) {
      plots["kde"] = add_sidecar(section, "diff_kde__" + stem, kde_csv(*d.kde));
    }
    e["plot_data"] = plots;
    return e;
  }

  static Json shares_json(const ExposureVector& v) {
    Json j = Json::object();
    for (std::size_t i = 0; i < v.labels.size(); ++i) j[v.labels[i]] = v.mass[i];
    return j;
  }

  Provenance provenance_;
  Json analysis_ = Json::object();
  std::vector<Sidecar> sidecars_;
};

// Writes <out>/report.json and every sidecar. Sidecars go first so that
// report.json exists only once all of its referenced files do.
inline void write_report(const Report& report, const std::filesystem::path& out_dir) {
  for (const auto& s : report.sidecars) write_file(out_dir / s.relative_path(), s.content);
  write_file(out_dir / "report.json", report.json_text());
}

namespace detail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace detail

// Fixed-width table of mean / percentiles / median per system with CI
// sub-lines, one block per metric, systems in id order.
inline std::string render_summary_table(const Json& report) {
  const auto analysis = report.find("analysis");
  if (analysis == report.end() || !analysis->contains("distributions")) {
    throw ValidationError("report has no distributions section");
  }
  const Json& dist = (*analysis)["distributions"];
  std::map<std::string, std::vector<std::string>> systems_by_metric;
  for (const auto& [system, by_metric] : dist.items()) {
    for (const auto& [metric, s] : by_metric.items()) systems_by_metric[metric].push_back(system);
  }
  std::string out;
  constexpr std::size_t kSystemWidth = 14;
  constexpr std::size_t kCellWidth = 20;
  for (auto& [metric, systems] : systems_by_metric) {
    std::sort(systems.begin(), systems.end());
    // Column order: mean, then percentiles ascending with p50 shown as median.
    const Json& first = dist[systems.front()][metric];
    std::vector<std::pair<double, std::string>> columns;
    bool has_median_column = false;
    for (const auto& [label, e] : first["percentiles"].items()) {
      const double p = std::stod(label.substr(1));
      if (p == 50.0) has_median_column = true;
      columns.emplace_back(p, label);
    }
    if (!has_median_column) columns.emplace_back(50.0, "median");
    std::sort(columns.begin(), columns.end());

    out += metric + '\n';
    std::string header = detail::pad("system", kSystemWidth) + detail::pad("mean", kCellWidth);
    for (const auto& [p, label] : columns) {
      header += detail::pad(p == 50.0 ? "median" : label, kCellWidth);
    }
    while (!header.empty() && header.back() == ' ') header.pop_back();
    out += header + '\n';
    for (const auto& system : systems) {
      const Json& s = dist[system][metric];
      std::vector<const Json*> cells{&s["mean"]};
      for (const auto& [p, label] : columns) {
        cells.push_back(p == 50.0 ? &s["median"] : &s["percentiles"][label]);
      }
      std::string values = detail::pad(system, kSystemWidth);
      std::string cis = std::string(kSystemWidth, ' ');
      for (const Json* c : cells) {
        values += detail::pad(detail::fixed4((*c)["value"].get<double>()), kCellWidth);
        cis += detail::pad("(" + detail::fixed4((*c)["ci"]["lo"].get<double>()) + ", " +
                               detail::fixed4((*c)["ci"]["hi"].get<double>()) + ")",
                           kCellWidth);
      }
      while (!values.empty() && values.back() == ' ') values.pop_back();
      while (!cis.empty() && cis.back() == ' ') cis.pop_back();
      out += values + '\n' + cis + '\n';
    }
    out += '\n';
  }
  return out;
}

}  // namespace disteval
