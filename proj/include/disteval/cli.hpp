#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "disteval/error.hpp"
#include "disteval/exposure.hpp"
#include "disteval/io.hpp"
#include "disteval/metrics.hpp"
#include "disteval/model.hpp"
#include "disteval/parallel.hpp"
#include "disteval/repetition.hpp"
#include "disteval/report.hpp"
#include "disteval/rng.hpp"
#include "disteval/stats.hpp"
#include "disteval/subgroup.hpp"
#include "disteval/synth.hpp"
#include "disteval/uncertainty.hpp"

namespace disteval {

struct CliConfig {
  std::string subcommand;
  std::vector<std::string> runs;
  std::string truth;
  std::string user_attrs;
  std::string item_attrs;
  std::string reps;
  double gamma = 0.8;
  std::string convention = "paper";
  std::size_t depth = 1000;
  std::vector<std::string> metrics{"rbp", "ndcg", "mrr", "hr"};
  std::vector<std::size_t> k{10, 20};
  std::size_t bootstrap = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  bool has_seed = false;
  double grid_step = 0.05;
  double prior_a = 5.0;
  double prior_b = 2.0;
  std::size_t samples = 1000;
  std::vector<double> percentiles{10, 50, 90};
  std::string attribute;
  std::string item_attribute;
  std::string system_a;
  std::string system_b;
  std::string statistic = "mean";
  std::string out;
  std::size_t threads = 0;
  bool quiet = false;
  // synth
  std::size_t n_requests = 500;
  std::size_t catalog = 1000;
  std::size_t relevant = 10;
  std::size_t length = 100;
  std::size_t systems = 3;
};

namespace cli_detail {

struct Inputs {
  RunSet runs;
  TruthSet truth;
  std::optional<AttributeTable> users;
  std::optional<AttributeTable> items;
  std::optional<RepetitionSet> reps;
  std::map<std::string, std::string> digests;
};

inline bool randomized(std::string_view sub) {
  return sub == "eval" || sub == "subgroup" || sub == "posterior" || sub == "reps" ||
         sub == "synth" || sub == "report";
}

inline BrowsingModel model_of(const CliConfig& c) {
  BrowsingModel m{c.gamma, parse_convention(c.convention), c.depth};
  m.validate();
  return m;
}

inline std::vector<MetricSpec> metrics_of(const CliConfig& c) {
  std::vector<MetricSpec> out;
  auto push = [&out](MetricSpec s) {
    for (const auto& e : out) {
      if (e.id() == s.id()) return;
    }
    out.push_back(s);
  };
  for (const auto& text : c.metrics) {
    if (text == "hr") {
      for (auto k : c.k) {
        if (k < 1) throw ValidationError("--k values must be >= 1");
        push(MetricSpec::hit_rate(k));
      }
    } else {
      push(MetricSpec::parse(text, c.gamma));
    }
  }
  if (out.empty()) throw ValidationError("no metrics selected");
  return out;
}

inline SummaryConfig summary_config(const CliConfig& c, std::size_t threads) {
  SummaryConfig s;
  s.percentiles.clear();
  for (double p : c.percentiles) {
    if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("--percentiles must lie in [0, 100]");
    s.percentiles.push_back(p / 100.0);
  }
  s.bootstrap = {c.bootstrap, c.level, derive_seed(c.seed, "bootstrap")};
  s.bootstrap.validate();
  s.threads = threads;
  return s;
}

inline SummaryConfig with_seed(SummaryConfig c, std::uint64_t seed, const std::string& label) {
  c.bootstrap.seed = derive_seed(seed, label);
  return c;
}

inline Statistic statistic_of(const std::string& text) {
  if (text == "mean") return Statistic::mean();
  if (text == "median") return Statistic::median();
  if (text.size() > 1 && text.front() == 'p') {
    if (auto v = parse_double(std::string_view(text).substr(1))) {
      return Statistic::percentile(*v / 100.0);
    }
  }
  throw ValidationError("unknown statistic: " + text);
}

// Digest keys carry the role and the path as given on the command line.
inline void digest(Inputs& in, const std::string& role, const std::filesystem::path& path) {
  in.digests[role + ":" + path.generic_string()] = file_digest(path);
}

inline void digest_tree(Inputs& in, const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    in.digests["reps:" + std::filesystem::relative(f, dir).generic_string()] = file_digest(f);
  }
}

inline void require(bool present, const std::string& flag, const std::string& sub) {
  if (!present) throw UsageError(sub + " requires " + flag);
}

inline Inputs load_inputs(const CliConfig& c, bool need_runs, bool need_users,
                          bool need_items, bool need_reps) {
  Inputs in;
  if (need_runs) {
    require(!c.runs.empty(), "--runs", c.subcommand);
    require(!c.truth.empty(), "--truth", c.subcommand);
    for (const auto& p : c.runs) {
      Run run = load_run(p);
      // The same system id in two files (for example one file given twice)
      // is kept apart by a positional suffix.
      if (in.runs.contains(run.system_id)) {
        std::string id;
        for (int n = 2;; ++n) {
          id = run.system_id + "@" + std::to_string(n);
          if (!in.runs.contains(id)) break;
        }
        std::cerr << "note: system id " << run.system_id << " repeated in " << p
                  << "; renamed to " << id << "\n";
        run.system_id = id;
      }
      add_run(in.runs, std::move(run));
      digest(in, "runs", p);
    }
    in.truth = load_truth(c.truth);
    digest(in, "truth", c.truth);
  }
  if (need_users || !c.user_attrs.empty()) {
    require(!c.user_attrs.empty(), "--user-attrs", c.subcommand);
    in.users = load_attributes(c.user_attrs, SubjectKind::user);
    digest(in, "user_attrs", c.user_attrs);
  }
  if (need_items || !c.item_attrs.empty()) {
    require(!c.item_attrs.empty(), "--item-attrs", c.subcommand);
    in.items = load_attributes(c.item_attrs, SubjectKind::item);
    digest(in, "item_attrs", c.item_attrs);
  }
  if (need_reps) {
    require(!c.reps.empty(), "--reps", c.subcommand);
    in.reps = load_repetitions(c.reps);
    digest_tree(in, c.reps);
  }
  return in;
}

// Explicit flag, else the table's only attribute.
inline std::string pick_attribute(const std::string& flag, const AttributeTable& table,
                                  const std::string& flag_name) {
  if (!flag.empty()) {
    table.require_attribute(flag);
    return flag;
  }
  if (table.attributes().size() == 1) return table.attributes().front();
  throw UsageError(flag_name + " is required when the attribute table has several columns");
}

// (a, b) pairs to compare: the named pair, else every pair in id order.
inline std::vector<std::pair<std::string, std::string>> system_pairs(
    const CliConfig& c, const std::vector<std::string>& systems) {
  if (!c.system_a.empty() || !c.system_b.empty()) {
    if (c.system_a.empty() || c.system_b.empty()) {
      throw UsageError("--system-a and --system-b go together");
    }
    for (const auto* s : {&c.system_a, &c.system_b}) {
      if (std::find(systems.begin(), systems.end(), *s) == systems.end()) {
        throw ValidationError("unknown system: " + *s);
      }
    }
    return {{c.system_a, c.system_b}};
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < systems.size(); ++i) {
    for (std::size_t j = i + 1; j < systems.size(); ++j) out.emplace_back(systems[i], systems[j]);
  }
  return out;
}

inline Provenance provenance_of(const CliConfig& c, const Inputs& in, bool uses_bootstrap) {
  Provenance p;
  p.command = c.subcommand;
  p.seed = c.seed;
  p.inputs = in.digests;
  if (c.subcommand != "synth") p.model = BrowsingModel{c.gamma, parse_convention(c.convention), c.depth};
  if (uses_bootstrap) p.bootstrap = BootstrapConfig{c.bootstrap, c.level, c.seed};
  Json params;
  params["metrics"] = c.metrics;
  params["k"] = c.k;
  params["percentiles"] = c.percentiles;
  if (!c.attribute.empty()) params["attribute"] = c.attribute;
  if (!c.item_attribute.empty()) params["item_attribute"] = c.item_attribute;
  if (!c.system_a.empty()) params["system_a"] = c.system_a;
  if (!c.system_b.empty()) params["system_b"] = c.system_b;
  if (c.subcommand == "sweep" || c.subcommand == "report") params["grid_step"] = c.grid_step;
  if (c.subcommand == "posterior" || c.subcommand == "report") {
    params["prior"] = {{"a", c.prior_a}, {"b", c.prior_b}};
    params["samples"] = c.samples;
  }
  if (c.subcommand == "reps" || c.subcommand == "report") params["statistic"] = c.statistic;
  p.parameters = params;
  return p;
}

inline std::map<std::string, std::map<std::string, DistributionSummary>> distributions(
    const MetricFrame& frame, const SummaryConfig& config, std::uint64_t seed) {
  std::map<std::string, std::map<std::string, DistributionSummary>> out;
  for (std::size_t s = 0; s < frame.systems().size(); ++s) {
    for (std::size_t m = 0; m < frame.metrics().size(); ++m) {
      const auto& sys = frame.systems()[s];
      const auto id = frame.metrics()[m].id();
      out[sys][id] = summarize(frame.column(s, m),
                               with_seed(config, seed, "distribution:" + sys + ":" + id));
    }
  }
  return out;
}

inline std::vector<PairedDiffSummary> differences(const CliConfig& c, const MetricFrame& frame) {
  std::vector<PairedDiffSummary> out;
  if (frame.systems().size() < 2) return out;
  for (const auto& id : frame.metric_ids()) {
    for (const auto& [a, b] : system_pairs(c, frame.systems())) {
      out.push_back(paired_diff(frame, a, b, id));
    }
  }
  return out;
}

inline void add_subgroups(ReportBuilder& builder, const CliConfig& c, const MetricFrame& frame,
                          const AttributeTable& users, const std::string& attribute,
                          const SummaryConfig& config) {
  std::vector<GroupedSummary> summaries;
  for (const auto& sys : frame.systems()) {
    for (const auto& id : frame.metric_ids()) {
      summaries.push_back(disaggregate(frame, users, attribute, id, sys,
                                       with_seed(config, c.seed, "subgroup:" + sys + ":" + id)));
    }
  }
  std::vector<std::pair<PairedDiffSummary, std::vector<GroupChange>>> changes;
  if (frame.systems().size() >= 2) {
    for (const auto& id : frame.metric_ids()) {
      for (const auto& [a, b] : system_pairs(c, frame.systems())) {
        changes.emplace_back(paired_diff(frame, a, b, id),
                             group_change(frame, users, attribute, id, a, b));
      }
    }
  }
  builder.add_subgroups(attribute, summaries, changes);
}

inline void add_exposure(ReportBuilder& builder, const CliConfig& c, const Inputs& in,
                         const BrowsingModel& model) {
  const AttributeTable* items = in.items ? &*in.items : nullptr;
  const Catalog catalog = make_catalog(in.runs, in.truth, items);
  const auto systems = system_exposure(in.runs, model, catalog);
  const auto ideal = ideal_exposure(in.truth, model, catalog);
  std::vector<ReportBuilder::ExposureGroups> groups;
  if (items != nullptr) {
    const auto attribute = pick_attribute(c.item_attribute, *items, "--item-attribute");
    ReportBuilder::ExposureGroups g;
    g.attribute = attribute;
    g.prevalence = prevalence_target(*items, attribute, catalog);
    g.ideal = group_exposure(ideal.exposure, *items, attribute);
    for (const auto& [id, e] : systems) g.systems[id] = group_exposure(e, *items, attribute);
    groups.push_back(std::move(g));
  }
  builder.add_exposure(catalog, model, systems, ideal, groups);
}

inline SweepResult run_sweep(const CliConfig& c, const Inputs& in) {
  const AttributeTable* users = in.users ? &*in.users : nullptr;
  const std::string attribute =
      users ? pick_attribute(c.attribute, *users, "--attribute") : std::string();
  return sweep_patience(in.runs, in.truth, patience_grid(c.grid_step),
                        parse_convention(c.convention), c.depth, users, attribute);
}

inline PosteriorResult run_posterior(const CliConfig& c, const Inputs& in,
                                     const SummaryConfig& config) {
  const AttributeTable* users = in.users ? &*in.users : nullptr;
  const std::string attribute =
      users ? pick_attribute(c.attribute, *users, "--attribute") : std::string();
  return posterior_metric(in.runs, in.truth, BetaPrior{c.prior_a, c.prior_b}, c.samples,
                          derive_seed(c.seed, "posterior"), parse_convention(c.convention),
                          c.depth, with_seed(config, c.seed, "posterior-summary"), users,
                          attribute);
}

inline void add_repetitions(ReportBuilder& builder, const CliConfig& c, const Inputs& in,
                            const BrowsingModel& model, const std::vector<MetricSpec>& metrics,
                            const SummaryConfig& config, std::size_t threads) {
  const AttributeTable* users = in.users ? &*in.users : nullptr;
  const std::string attribute =
      users ? pick_attribute(c.attribute, *users, "--attribute") : std::string();
  const auto frame = evaluate_repetitions(*in.reps, metrics, model, users, attribute,
                                          statistic_of(c.statistic), threads);
  std::vector<std::string> groups{""};
  for (const auto& r : frame.rows()) {
    if (std::find(groups.begin(), groups.end(), r.group) == groups.end()) groups.push_back(r.group);
  }
  std::map<std::string, DistributionSummary> per_system;
  std::vector<StabilityReport> stability;
  const auto systems = in.reps->system_ids();
  for (const auto& g : groups) {
    for (const auto& m : metrics) {
      const auto id = m.id();
      for (const auto& s : systems) {
        const std::string key = s + "/" + id + (g.empty() ? "" : "/" + g);
        per_system[key] = summarize(frame.series(s, id, g),
                                    with_seed(config, c.seed, "repetitions:" + key));
      }
      if (frame.repetition_ids().size() < 2) continue;
      for (const auto& [a, b] : system_pairs(c, systems)) {
        stability.push_back(stability_report(
            frame, a, b, id, with_seed(config, c.seed, "stability:" + a + ":" + b + ":" + id + ":" + g),
            g));
      }
    }
  }
  builder.add_repetitions(frame, per_system, stability);
}

inline void finish(const CliConfig& c, const Report& report) {
  write_report(report, c.out);
  if (c.quiet) return;
  const auto& analysis = report.document["analysis"];
  if (analysis.contains("distributions")) std::cout << render_summary_table(report.document);
  std::cout << "report written to " << (std::filesystem::path(c.out) / "report.json").string()
            << "\n";
}

inline int execute(const CliConfig& c) {
  const std::string& sub = c.subcommand;
  require(!c.out.empty(), "--out", sub);
  if (randomized(sub) && !c.has_seed) throw UsageError(sub + " requires --seed");
  const std::size_t threads = resolve_threads(c.threads);

  if (sub == "synth") {
    const auto fx = synth_fixture(c.seed, c.n_requests, c.catalog, c.relevant, c.length,
                                  c.systems);
    const std::filesystem::path out(c.out);
    Inputs written;
    for (const auto& [id, run] : fx.runs) {
      const auto path = out / "runs" / (id + ".run");
      write_file(path, serialize_run(run));
      written.digests["runs:" + path.filename().string()] = file_digest(path);
    }
    write_file(out / "truth.qrels", serialize_truth(fx.truth));
    write_file(out / "users.csv", serialize_attributes(fx.users));
    write_file(out / "items.csv", serialize_attributes(fx.items));
    for (const char* name : {"truth.qrels", "users.csv", "items.csv"}) {
      written.digests[std::string("output:") + name] = file_digest(out / name);
    }
    Json manifest{{"schema_version", kReportSchemaVersion},
                  {"tool", "disteval"},
                  {"tool_version", std::string(kToolVersion)},
                  {"command", "synth"},
                  {"seed", c.seed},
                  {"parameters",
                   {{"requests", c.n_requests},
                    {"catalog", c.catalog},
                    {"relevant", c.relevant},
                    {"length", c.length},
                    {"systems", c.systems}}},
                  {"outputs", written.digests}};
    write_file(out / "manifest.json", manifest.dump(2) + "\n");
    if (!c.quiet) std::cout << "fixture written to " << out.string() << "\n";
    return 0;
  }

  const BrowsingModel model = model_of(c);
  const bool need_runs = sub != "reps";
  const bool need_users = sub == "subgroup";
  const bool need_reps = sub == "reps" || (sub == "report" && !c.reps.empty());
  Inputs in = load_inputs(c, need_runs, need_users, false, need_reps);
  const bool uses_bootstrap = randomized(sub);
  const SummaryConfig config = summary_config(c, threads);
  ReportBuilder builder(provenance_of(c, in, uses_bootstrap));

  if (sub == "reps") {
    add_repetitions(builder, c, in, model, metrics_of(c), config, threads);
    finish(c, builder.build());
    return 0;
  }

  const bool metric_subcommand =
      sub == "eval" || sub == "compare" || sub == "subgroup" || sub == "report";
  std::optional<MetricFrame> frame;
  if (metric_subcommand) {
    frame = evaluate(in.runs, in.truth, metrics_of(c), model, threads);
    builder.add_pointwise(*frame);
  }
  if (sub == "eval" || sub == "report") {
    builder.add_distributions(distributions(*frame, config, c.seed));
  }
  if (sub == "compare" || sub == "report") {
    if (frame->systems().size() < 2 && sub == "compare") {
      throw ValidationError("compare needs at least two systems");
    }
    builder.add_differences(differences(c, *frame));
  }
  if (sub == "subgroup" || (sub == "report" && in.users)) {
    add_subgroups(builder, c, *frame, *in.users, pick_attribute(c.attribute, *in.users, "--attribute"),
                  config);
  }
  if (sub == "exposure" || sub == "report") add_exposure(builder, c, in, model);
  if (sub == "sweep" || sub == "report") builder.add_sweep(run_sweep(c, in));
  if (sub == "posterior" || sub == "report") builder.add_posterior(run_posterior(c, in, config));
  if (sub == "report" && in.reps) {
    add_repetitions(builder, c, in, model, metrics_of(c), config, threads);
  }
  finish(c, builder.build());
  return 0;
}

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

inline void report_error(std::string_view code, const std::string& message) {
  std::cerr << Json{{"error", {{"code", code}, {"message", one_line(message)}}}}.dump() << "\n";
}

inline void add_common(CLI::App* app, CliConfig& c, const std::string& name) {
  const bool runs = name != "reps" && name != "synth";
  if (runs) {
    app->add_option("--runs", c.runs, "Run files (one system each)")->check(CLI::ExistingFile);
    app->add_option("--truth", c.truth, "Relevance judgments file")->check(CLI::ExistingFile);
  }
  if (name != "synth") {
    app->add_option("--user-attrs", c.user_attrs, "User attribute CSV")->check(CLI::ExistingFile);
    app->add_option("--attribute", c.attribute, "User attribute to disaggregate by");
    app->add_option("--gamma", c.gamma, "RBP patience")->check(CLI::Range(0.0, 1.0));
    app->add_option("--convention", c.convention, "RBP weight convention")
        ->check(CLI::IsMember({"paper", "classic"}));
    app->add_option("--depth", c.depth, "Truncation depth N")->check(CLI::PositiveNumber);
    app->add_option("--metrics", c.metrics, "Metrics: rbp, rbp(g), ndcg, ndcg@k, mrr, hr, hr@k")
        ->delimiter(',');
    app->add_option("--k", c.k, "Cutoffs for hr")->delimiter(',');
    app->add_option("--bootstrap", c.bootstrap, "Bootstrap resamples")->check(CLI::Range(100, 1000000));
    app->add_option("--level", c.level, "Confidence level")->check(CLI::Range(0.0, 1.0));
    app->add_option("--percentiles", c.percentiles, "Percentiles in [0, 100]")->delimiter(',');
    app->add_option("--system-a", c.system_a, "First system of the compared pair");
    app->add_option("--system-b", c.system_b, "Second system of the compared pair");
  }
  if (name == "exposure" || name == "report") {
    app->add_option("--item-attrs", c.item_attrs, "Item attribute CSV")->check(CLI::ExistingFile);
    app->add_option("--item-attribute", c.item_attribute, "Item attribute to group exposure by");
  }
  if (name == "reps" || name == "report") {
    app->add_option("--reps", c.reps, "Repetition directory")->check(CLI::ExistingDirectory);
    app->add_option("--statistic", c.statistic, "Per-repetition statistic: mean, median, pN");
  }
  if (name == "sweep" || name == "report") {
    app->add_option("--grid-step", c.grid_step, "Patience grid step")->check(CLI::Range(0.0, 0.5));
  }
  if (name == "posterior" || name == "report") {
    app->add_option("--prior-a", c.prior_a, "Beta prior shape a")->check(CLI::PositiveNumber);
    app->add_option("--prior-b", c.prior_b, "Beta prior shape b")->check(CLI::PositiveNumber);
    app->add_option("--samples", c.samples, "Prior draws M")->check(CLI::Range(100, 10000000));
  }
  if (name == "synth") {
    app->add_option("--requests", c.n_requests, "Number of requests")->check(CLI::PositiveNumber);
    app->add_option("--catalog", c.catalog, "Catalog size")->check(CLI::PositiveNumber);
    app->add_option("--relevant", c.relevant, "Relevant items per request")->check(CLI::PositiveNumber);
    app->add_option("--length", c.length, "List length")->check(CLI::PositiveNumber);
    app->add_option("--systems", c.systems, "Number of systems")->check(CLI::Range(1, 26));
  }
  app->add_option("--seed", c.seed, "Seed for every stochastic step");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--threads", c.threads, "Worker cap (default: DISTEVAL_THREADS, then all cores)");
  app->add_flag("--quiet", c.quiet, "Do not print the summary table");
}

}  // namespace cli_detail

// Exit codes: 0 success, 1 input or validation failure, 2 usage error.
inline int run_cli(int argc, const char* const* argv) {
  CliConfig c;
  CLI::App app{"Distributional evaluation of ranked-output systems", "disteval"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(kToolVersion));
  const std::vector<std::pair<std::string, std::string>> subcommands{
      {"eval", "Per-request metrics and their distributions"},
      {"compare", "Paired per-request differences between systems"},
      {"subgroup", "Metric distributions disaggregated by a user attribute"},
      {"exposure", "Item exposure, Lorenz curve, Gini and divergence from targets"},
      {"sweep", "Mean RBP across a patience grid with crossovers"},
      {"posterior", "Distribution of mean RBP under a Beta prior on patience"},
      {"reps", "Distributions across experiment repetitions"},
      {"synth", "Write a synthetic fixture"},
      {"report", "Every analysis the inputs allow"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : subcommands) {
    auto* sub = app.add_subcommand(name, help);
    cli_detail::add_common(sub, c, name);
    subs[name] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    cli_detail::report_error("usage_error", e.what());
    return 2;
  }
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) {
      c.subcommand = name;
      c.has_seed = sub->count("--seed") > 0;
    }
  }
  try {
    return cli_detail::execute(c);
  } catch (const UsageError& e) {
    cli_detail::report_error(e.code(), e.what());
    return 2;
  } catch (const Error& e) {
    cli_detail::report_error(e.code(), e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    cli_detail::report_error("io_error", e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    cli_detail::report_error("internal_error", e.what());
    return 1;
  }
}

}  // namespace disteval
