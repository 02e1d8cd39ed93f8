// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "disteval/cli.hpp"
#include "support.hpp"

using namespace disteval;
namespace fs = std::filesystem;
namespace ts = testing_support;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail = what;
      pass = false;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<ts::ListCase> random_pairs() {
  std::mt19937_64 gen(2024);
  std::vector<ts::ListCase> cases;
  for (int i = 0; i < 1000; ++i) cases.push_back(ts::random_case(gen, 200, 50, 10));
  return cases;
}

Verdict metric_oracles() {
  Verdict v;
  const auto t0 = Clock::now();
  const auto cases = random_pairs();
  double worst = 0.0;
  for (const auto& c : cases) {
    const BrowsingModel m{0.8, RbpConvention::paper, 1000};
    worst = std::max(worst, std::fabs(rbp(c.list, c.truth, m) - ts::oracle_rbp(c, 0.8, true)));
    worst = std::max(worst, std::fabs(ndcg(c.list, c.truth, 1000) - ts::oracle_ndcg(c)));
    worst = std::max(worst, std::fabs(mrr(c.list, c.truth, 1000) - ts::oracle_mrr(c)));
    for (std::size_t k : {10, 20}) {
      worst = std::max(worst, std::fabs(hit_rate(c.list, c.truth, k) - ts::oracle_hit(c, k)));
    }
  }
  const double secs = seconds_since(t0);
  v.require(worst <= 1e-12, "max error " + fmt("%.3g", worst));
  v.require(secs < 5.0, "runtime " + fmt("%.2f", secs) + " s");
  if (v.pass) v.detail = "max error " + fmt("%.3g", worst) + ", " + fmt("%.3f", secs) + " s";
  return v;
}

Verdict convention_identity() {
  Verdict v;
  std::size_t mismatches = 0;
  for (const auto& c : random_pairs()) {
    for (double g : {0.5, 0.8, 0.95}) {
      const double paper = rbp(c.list, c.truth, {g, RbpConvention::paper, 1000});
      const double classic = rbp(c.list, c.truth, {g, RbpConvention::classic, 1000});
      if (paper != g * classic) ++mismatches;
    }
  }
  v.require(mismatches == 0, std::to_string(mismatches) + " inexact pairs");
  if (v.pass) v.detail = "3000 comparisons exact";
  return v;
}

Verdict saturation() {
  Verdict v;
  ts::ListCase c;
  for (int i = 0; i < 1000; ++i) {
    c.list.push_back(ts::item_name(i));
    c.truth[c.list.back()] = 1.0;
  }
  const double paper = rbp(c.list, c.truth, {0.8, RbpConvention::paper, 1000});
  const double classic = rbp(c.list, c.truth, {0.8, RbpConvention::classic, 1000});
  v.require(std::fabs(paper - 0.8) <= 1e-12, "paper " + fmt("%.17g", paper));
  v.require(std::fabs(classic - (1.0 - std::pow(0.8, 1000.0))) <= 1e-12,
            "classic " + fmt("%.17g", classic));
  if (v.pass) v.detail = "paper " + fmt("%.15f", paper) + ", classic " + fmt("%.15f", classic);
  return v;
}

Verdict quantile_ecdf() {
  Verdict v;
  std::mt19937_64 gen(99);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(500);
  for (auto& s : x) s = std::round(normal(gen) * 20.0) / 20.0;  // ties included
  SummaryConfig config;
  config.percentiles = {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99};
  config.bootstrap = {100, 0.95, 1};
  const auto s = summarize(x, config);
  double worst = 0.0;
  for (const auto& p : s.percentiles) {
    worst = std::max(worst, std::fabs(p.estimate.value - ts::oracle_quantile(x, p.p)));
  }
  worst = std::max(worst, std::fabs(s.median.value - ts::oracle_quantile(x, 0.5)));
  worst = std::max(worst, std::fabs(s.mean.value - ts::oracle_mean(x)));
  const auto points = ecdf(x);
  for (const auto& p : points) worst = std::max(worst, std::fabs(p.cdf - ts::oracle_ecdf(x, p.x)));
  for (double probe = -4.0; probe <= 4.0; probe += 0.013) {
    worst = std::max(worst, std::fabs(ecdf_at(points, probe) - ts::oracle_ecdf(x, probe)));
  }
  v.require(worst <= 1e-12, "max error " + fmt("%.3g", worst));
  if (v.pass) v.detail = "max error " + fmt("%.3g", worst);
  return v;
}

Verdict bootstrap() {
  Verdict v;
  const auto t0 = Clock::now();
  const std::vector<double> constant(50, 0.42);
  for (const auto& stat : {Statistic::mean(), Statistic::median(), Statistic::percentile(0.9)}) {
    const auto ci = bootstrap_ci(constant, stat, 1000, 0.95, 7);
    v.require(ci.lo == 0.42 && ci.hi == 0.42, "constant CI not degenerate for " + stat.name());
  }
  int covered = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::mt19937_64 gen(static_cast<std::uint64_t>(trial));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> x(100);
    for (auto& s : x) s = normal(gen);
    const auto ci = bootstrap_ci(x, Statistic::mean(), 1000, 0.95,
                                 derive_seed(static_cast<std::uint64_t>(trial), "coverage"));
    if (ci.lo <= 0.0 && 0.0 <= ci.hi) ++covered;
  }
  const double coverage = covered / 200.0;
  const double secs = seconds_since(t0);
  v.require(coverage >= 0.91 && coverage <= 0.99, "coverage " + fmt("%.3f", coverage));
  v.require(secs < 30.0, "runtime " + fmt("%.2f", secs) + " s");
  if (v.pass) v.detail = "coverage " + fmt("%.3f", coverage) + ", " + fmt("%.2f", secs) + " s";
  return v;
}

Verdict t_test() {
  Verdict v;
  const std::vector<double> diffs{1.0, 2.0, 3.0};
  const auto t = paired_t_test(diffs);
  const double sd = 1.0;
  const double t_ref = 2.0 / (sd / std::sqrt(3.0));
  const boost::math::students_t dist(2.0);
  const double p_ref = 2.0 * boost::math::cdf(boost::math::complement(dist, t_ref));
  v.require(t.status == TestStatus::ok, "status " + std::string(to_string(t.status)));
  v.require(std::fabs(t.t - 3.4641) <= 1e-4 && std::fabs(t.t - t_ref) <= 1e-12,
            "t " + fmt("%.6f", t.t));
  v.require(std::fabs(t.p - 0.0742) <= 1e-4 && std::fabs(t.p - p_ref) <= 1e-10,
            "p " + fmt("%.6f", t.p));
  const std::vector<double> same{0.3, 0.5, 0.9};
  const auto tie = paired_diff(same, same);
  v.require(tie.test.status == TestStatus::zero_variance && !tie.test.has_value(),
            "A=B did not signal a degenerate tie");
  const Json j = to_json(tie.test);
  v.require(j["p"].is_null(), "A=B report carries a numeric p");
  if (v.pass) v.detail = "t " + fmt("%.4f", t.t) + ", p " + fmt("%.4f", t.p) + ", A=B zero_variance";
  return v;
}

Verdict subgroup_reconstruction() {
  Verdict v;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 gen(seed);
    const int n = 60 + static_cast<int>(seed) * 7;
    std::map<std::string, std::vector<std::string>> lists;
    std::map<std::string, std::vector<std::string>> rel;
    AttributeTable users(SubjectKind::user, {"group"});
    const std::vector<std::string> labels{"g1", "g2", "g3"};
    for (int r = 0; r < n; ++r) {
      const auto c = ts::random_case(gen, 100, 30, 6);
      const std::string req = "u" + std::to_string(r);
      lists[req] = c.list;
      for (const auto& [item, g] : c.truth) rel[req].push_back(item);
      users.add(req, {{"group", {labels[gen() % 3]}}});
    }
    std::vector<std::string> no_rel;
    for (const auto& [req, l] : lists) {
      if (!rel.contains(req)) no_rel.push_back(req);
    }
    RunSet runs;
    add_run(runs, ts::make_run("S", lists));
    const auto frame = evaluate(runs, ts::make_truth(rel, no_rel),
                                {MetricSpec::rbp(0.8), MetricSpec::ndcg()},
                                {0.8, RbpConvention::paper, 1000});
    SummaryConfig config;
    config.bootstrap = {100, 0.95, seed};
    for (const char* metric : {"rbp(0.8)", "ndcg"}) {
      const auto col = frame.column("S", metric);
      const double overall = ts::oracle_mean(std::vector<double>(col.begin(), col.end()));
      const auto g = disaggregate(frame, users, "group", metric, "S", config);
      double sum = 0.0;
      double weight = 0.0;
      for (const auto& gs : g.groups) {
        sum += gs.weight * gs.summary.mean.value;
        weight += gs.weight;
      }
      worst = std::max(worst, std::fabs(sum / weight - overall));
    }
  }
  v.require(worst <= 1e-12, "max error " + fmt("%.3g", worst));
  if (v.pass) v.detail = "max error " + fmt("%.3g", worst) + " over 20 fixtures";
  return v;
}

ExposureVector masses(std::vector<double> m) {
  ExposureVector e;
  for (std::size_t i = 0; i < m.size(); ++i) e.labels.push_back("x" + std::to_string(i));
  e.mass = std::move(m);
  return e;
}

Verdict exposure() {
  Verdict v;
  v.require(lorenz_gini(masses({3, 3, 3, 3})).gini == 0.0, "equal masses");
  for (int n : {2, 4, 10}) {
    std::vector<double> m(static_cast<std::size_t>(n), 0.0);
    m[0] = 1.0;
    const double g = lorenz_gini(masses(m)).gini;
    v.require(g == static_cast<double>(n - 1) / n, "single holder n=" + std::to_string(n) +
                                                       " gives " + fmt("%.17g", g));
  }
  v.require(std::fabs(lorenz_gini(masses({1, 2, 3, 4})).gini - 0.25) <= 1e-12, "[1,2,3,4]");

  std::mt19937_64 gen(4);
  std::map<std::string, std::vector<std::string>> lists;
  for (int r = 0; r < 50; ++r) lists["u" + std::to_string(r)] = ts::random_case(gen).list;
  const Run run = ts::make_run("s", lists);
  std::vector<std::string> items;
  for (int i = 0; i < 200; ++i) items.push_back(ts::item_name(i));
  const Catalog catalog(items);
  const auto paper = system_exposure(run, {0.8, RbpConvention::paper, 1000}, catalog).normalize();
  const auto classic =
      system_exposure(run, {0.8, RbpConvention::classic, 1000}, catalog).normalize();
  double worst = 0.0;
  for (std::size_t i = 0; i < paper.mass.size(); ++i) {
    worst = std::max(worst, std::fabs(paper.mass[i] - classic.mass[i]));
  }
  v.require(worst <= 1e-12, "convention gap " + fmt("%.3g", worst));
  for (auto kind : {DivergenceKind::l2, DivergenceKind::kl}) {
    v.require(divergence(paper, paper, kind) == 0.0, "self divergence");
  }
  const auto p = masses({0.5, 0.5});
  const auto q = masses({0.25, 0.75});
  const double l2 = divergence(p, q, DivergenceKind::l2);
  const double kl = divergence(p, q, DivergenceKind::kl);
  const double kl_ref = 0.5 * std::log(0.5 / 0.25) + 0.5 * std::log(0.5 / 0.75);
  v.require(std::fabs(l2 - 0.125) <= 1e-12, "L2 " + fmt("%.17g", l2));
  v.require(std::fabs(kl - 0.14384) <= 1e-4 && std::fabs(kl - kl_ref) <= 1e-15,
            "KL " + fmt("%.6f", kl));
  if (v.pass) v.detail = "L2 " + fmt("%.6f", l2) + ", KL " + fmt("%.5f", kl) + " nats";
  return v;
}

Verdict ideal_policy() {
  Verdict v;
  const Catalog catalog({"a", "b", "c"});
  const auto truth = ts::make_truth({{"u1", {"a", "b"}}});
  const auto e = ideal_exposure(truth, {0.5, RbpConvention::classic, 1000}, catalog);
  v.require(std::fabs(e.exposure.at("a") - 0.375) <= 1e-12, "a " + fmt("%.17g", e.exposure.at("a")));
  v.require(std::fabs(e.exposure.at("b") - 0.375) <= 1e-12, "b " + fmt("%.17g", e.exposure.at("b")));
  v.require(e.exposure.at("c") == 0.0, "non-relevant item received exposure");
  if (v.pass) v.detail = "0.375 per relevant item";
  return v;
}

// A has its single relevant item at rank 1; B has relevant items at `ranks`.
std::pair<RunSet, TruthSet> crossing_fixture(const std::vector<int>& ranks) {
  std::vector<std::string> a{"ra", "fa1", "fa2", "fa3", "fa4"};
  std::vector<std::string> b;
  std::vector<std::string> rel{"ra"};
  for (int i = 1; i <= 5; ++i) {
    const bool hit = std::find(ranks.begin(), ranks.end(), i) != ranks.end();
    b.push_back((hit ? "rb" : "fb") + std::to_string(i));
    if (hit) rel.push_back(b.back());
  }
  RunSet runs;
  add_run(runs, ts::make_run("A", {{"u1", a}}));
  add_run(runs, ts::make_run("B", {{"u1", b}}));
  return {runs, ts::make_truth({{"u1", rel}})};
}

std::optional<Crossover> single_crossover(const std::vector<int>& ranks) {
  const auto [runs, truth] = crossing_fixture(ranks);
  const auto sweep = sweep_patience(runs, truth, patience_grid(0.01), RbpConvention::paper);
  if (sweep.crossovers.size() != 1) return std::nullopt;
  return sweep.crossovers[0];
}

// The stated fixture (relevant@1 vs relevant@{2,3}) balances where
// g = g^2 + g^3, i.e. at (sqrt(5) - 1) / 2 ~ 0.618. The quoted 0.7549 is the
// balance point of relevant@1 vs relevant@{3,4} (g = g^3 + g^4). Both
// fixtures are checked against their own bisection roots.
Verdict sweep_crossover() {
  Verdict v;
  const double root23 = ts::bisect(0.3, 0.95, [](double g) { return g - g * g - g * g * g; });
  const double root34 =
      ts::bisect(0.3, 0.95, [](double g) { return g - g * g * g - g * g * g * g; });
  const auto x23 = single_crossover({2, 3});
  const auto x34 = single_crossover({3, 4});
  v.require(x23.has_value(), "no single crossover for relevant@{2,3}");
  v.require(x34.has_value(), "no single crossover for relevant@{3,4}");
  if (!v.pass) return v;
  v.require(x23->lo <= root23 && root23 <= x23->hi, "relevant@{2,3} interval misses its root");
  v.require(std::fabs(root34 - 0.7549) <= 1e-4, "bisection root " + fmt("%.6f", root34));
  v.require(x34->lo <= root34 && root34 <= x34->hi, "relevant@{3,4} interval misses 0.7549");
  if (v.pass) {
    v.detail = "@{2,3}: [" + fmt("%.2f", x23->lo) + ", " + fmt("%.2f", x23->hi) + "] holds root " +
               fmt("%.4f", root23) + "; @{3,4}: [" + fmt("%.2f", x34->lo) + ", " +
               fmt("%.2f", x34->hi) + "] holds root " + fmt("%.4f", root34) +
               " (0.7549 belongs to the @{3,4} fixture)";
  }
  return v;
}

Verdict posterior() {
  Verdict v;
  const BetaPrior prior{5, 2};
  v.require(prior.mode().has_value() && std::fabs(*prior.mode() - 0.8) <= 1e-15, "mode");
  Rng rng(derive_seed(11, "prior"));
  const int m = 10000;
  double s = 0.0;
  for (int i = 0; i < m; ++i) s += rng.beta(5.0, 2.0);
  const double mean = s / m;
  const double sigma = std::sqrt(5.0 * 2.0 / (49.0 * 8.0) / m);
  v.require(std::fabs(mean - 5.0 / 7.0) <= 3.0 * sigma, "sample mean " + fmt("%.5f", mean));

  SummaryConfig config;
  config.bootstrap = {200, 0.95, 1};
  RunSet runs;
  add_run(runs, ts::make_run("Z", {{"u1", {"a", "b"}}, {"u2", {"c"}}}));
  const auto none = ts::make_truth({{"u1", {"x"}}, {"u2", {"y"}}});
  const auto flat =
      posterior_metric(runs, none, prior, 1000, 3, RbpConvention::paper, 1000, config);
  const auto& fs0 = flat.series[0];
  const bool degenerate =
      std::all_of(fs0.samples.begin(), fs0.samples.end(), [](double x) { return x == 0.0; }) &&
      fs0.summary.mean.ci.lo == fs0.summary.mean.ci.hi &&
      fs0.summary.percentiles.front().estimate.value == fs0.summary.percentiles.back().estimate.value;
  v.require(degenerate, "constant metric posterior not degenerate");

  const auto fx = synth_fixture(6, 30, 100, 4, 30, 2);
  const std::size_t draws = 10000;
  const auto post =
      posterior_metric(fx.runs, fx.truth, prior, draws, 77, RbpConvention::paper, 1000, config);
  double worst_z = 0.0;
  for (const auto& series : post.series) {
    auto curve = [&](double g) {
      const auto frame =
          evaluate(fx.runs, fx.truth, {MetricSpec::rbp(g)}, {g, RbpConvention::paper, 1000});
      const auto col = frame.column(series.system, MetricSpec::rbp(g).id());
      return ts::oracle_mean(std::vector<double>(col.begin(), col.end()));
    };
    using boost::math::quadrature::gauss_kronrod;
    const double e1 = gauss_kronrod<double, 31>::integrate(
        [&](double g) { return curve(g) * beta_pdf(prior, g); }, 0.0, 1.0);
    const double e2 = gauss_kronrod<double, 31>::integrate(
        [&](double g) { return curve(g) * curve(g) * beta_pdf(prior, g); }, 0.0, 1.0);
    const double sd = std::sqrt((e2 - e1 * e1) / static_cast<double>(draws));
    const double z = std::fabs(ts::oracle_mean(series.samples) - e1) / sd;
    worst_z = std::max(worst_z, z);
  }
  v.require(worst_z <= 3.0, "posterior mean off by " + fmt("%.2f", worst_z) + " sigma");
  if (v.pass) {
    v.detail = "prior mean " + fmt("%.4f", mean) + ", quadrature gap " + fmt("%.2f", worst_z) +
               " sigma";
  }
  return v;
}

struct CliOutcome {
  int code = 0;
  std::string err;
};

CliOutcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "disteval");
  args.push_back("--quiet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, err.str()};
}

std::vector<EcdfPoint> read_ecdf(const fs::path& csv) {
  std::istringstream in(read_file(csv));
  std::string line;
  std::getline(in, line);
  std::vector<EcdfPoint> points;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    points.push_back(EcdfPoint{parse_double(line.substr(0, comma)).value(),
                               parse_double(line.substr(comma + 1)).value()});
  }
  return points;
}

std::map<std::string, std::string> tree_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  }
  return out;
}

// The synthetic truth is shared by both systems. A ranks each request's
// relevant items first and fills the rest with items that rotate through
// the catalog; B opens with a fixed popular block, so every relevant item
// lands later for B and B's exposure piles onto a few items.
Verdict end_to_end() {
  Verdict v;
  const auto t0 = Clock::now();
  const auto root = ts::scratch_dir("acceptance_e2e");
  const auto synth_dir = root / "synth";
  auto r = cli({"synth", "--seed", "12", "--requests", "300", "--catalog", "600", "--relevant",
                "5", "--length", "50", "--systems", "1", "--out", synth_dir.string()});
  v.require(r.code == 0, "synth failed: " + r.err);
  if (!v.pass) return v;
  const auto truth = parse_truth(read_file(synth_dir / "truth.qrels"));
  const auto items = parse_attributes(read_file(synth_dir / "items.csv"), SubjectKind::item);
  const auto catalog = items.subjects();
  const std::size_t length = 50;
  const std::size_t popular = 5;
  Run a{"A", {}};
  Run b{"B", {}};
  std::size_t cursor = 0;
  for (const auto& [req, row] : truth.requests()) {
    std::vector<std::string> rel;
    for (const auto& [item, g] : row) {
      if (g > 0.0) rel.push_back(item);
    }
    auto fill = [&](std::vector<std::string>& list, const std::vector<std::string>& pool,
                    std::size_t& pos) {
      while (list.size() < length) {
        const auto& item = pool[pos++ % pool.size()];
        if (std::find(list.begin(), list.end(), item) == list.end() &&
            std::find(rel.begin(), rel.end(), item) == rel.end()) {
          list.push_back(item);
        }
      }
    };
    std::vector<std::string> la = rel;
    fill(la, catalog, cursor);
    std::vector<std::string> lb;
    std::size_t head = 0;
    for (std::size_t i = 0; lb.size() < popular; ++i) {
      const auto& item = catalog[i];
      if (std::find(rel.begin(), rel.end(), item) == rel.end()) lb.push_back(item);
    }
    lb.insert(lb.end(), rel.begin(), rel.end());
    std::vector<std::string> head_pool(catalog.begin(), catalog.begin() + 2 * length);
    fill(lb, head_pool, head);
    a.requests[req] = la;
    b.requests[req] = lb;
  }
  const auto run_a = root / "A.run";
  const auto run_b = root / "B.run";
  write_file(run_a, serialize_run(a));
  write_file(run_b, serialize_run(b));
  const std::vector<std::string> inputs{"--runs", run_a.string(), run_b.string(), "--truth",
                                        (synth_dir / "truth.qrels").string()};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
    head.insert(head.end(), inputs.begin(), inputs.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };

  const auto eval_dir = root / "eval";
  r = cli(with({"eval"}, {"--seed", "12", "--out", eval_dir.string()}));
  v.require(r.code == 0, "eval failed: " + r.err);
  const auto compare_dir = root / "compare";
  r = cli(with({"compare"}, {"--out", compare_dir.string()}));
  v.require(r.code == 0, "compare failed: " + r.err);
  const auto exposure_dir = root / "exposure";
  r = cli(with({"exposure"}, {"--item-attrs", (synth_dir / "items.csv").string(), "--out",
                              exposure_dir.string()}));
  v.require(r.code == 0, "exposure failed: " + r.err);
  std::vector<fs::path> report_dirs{root / "report1", root / "report2"};
  for (const auto& dir : report_dirs) {
    r = cli(with({"report"}, {"--user-attrs", (synth_dir / "users.csv").string(), "--item-attrs",
                              (synth_dir / "items.csv").string(), "--seed", "12", "--out",
                              dir.string()}));
    v.require(r.code == 0, "report failed: " + r.err);
  }
  const double secs = seconds_since(t0);
  if (!v.pass) return v;

  const auto diffs = Json::parse(read_file(compare_dir / "report.json"))["analysis"]["differences"];
  double rbp_median = 0.0;
  for (const auto& d : diffs) {
    v.require(d["system_a"] == "A" && d["system_b"] == "B", "unexpected pair order");
    v.require(d["fraction_hurt"].get<double>() == 0.0,
              "fraction hurt " + d["metric"].get<std::string>());
    if (d["metric"] == "rbp(0.8)") rbp_median = d["median_diff"].get<double>();
  }
  v.require(rbp_median > 0.0, "median rbp difference " + fmt("%.4g", rbp_median));

  const auto dist = Json::parse(read_file(eval_dir / "report.json"))["analysis"]["distributions"];
  for (const auto& [metric, e] : dist["A"].items()) {
    const auto fa = read_ecdf(eval_dir / e["plot_data"]["ecdf"].get<std::string>());
    const auto fb = read_ecdf(eval_dir / dist["B"][metric]["plot_data"]["ecdf"].get<std::string>());
    for (const auto* pts : {&fa, &fb}) {
      for (const auto& p : *pts) {
        v.require(ecdf_at(fa, p.x) <= ecdf_at(fb, p.x), "ECDF of A crosses B for " + metric);
      }
    }
  }

  const auto sys = Json::parse(read_file(exposure_dir / "report.json"))["analysis"]["exposure"]
                       ["systems"];
  const double ga = sys["A"]["gini"];
  const double gb = sys["B"]["gini"];
  v.require(ga < gb, "Gini A " + fmt("%.4f", ga) + " vs B " + fmt("%.4f", gb));
  v.require(tree_contents(report_dirs[0]) == tree_contents(report_dirs[1]),
            "report output differs between identical runs");
  v.require(secs < 60.0, "runtime " + fmt("%.2f", secs) + " s");
  if (v.pass) {
    v.detail = "median rbp diff " + fmt("%.4f", rbp_median) + ", Gini A " + fmt("%.3f", ga) +
               " < B " + fmt("%.3f", gb) + ", byte-stable, " + fmt("%.2f", secs) + " s";
  }
  return v;
}

Repetition one_request(const std::string& id, bool a_wins) {
  Repetition rep;
  rep.id = id;
  const std::vector<std::string> first{"hit", "f1", "f2"};
  const std::vector<std::string> second{"f1", "hit", "f2"};
  add_run(rep.runs, ts::make_run("A", {{"u1", a_wins ? first : second}}));
  add_run(rep.runs, ts::make_run("B", {{"u1", a_wins ? second : first}}));
  rep.truth = ts::make_truth({{"u1", {"hit"}}});
  return rep;
}

Verdict repetitions() {
  Verdict v;
  RepetitionSet reps;
  for (int i = 0; i < 10; ++i) {
    reps.add(one_request("rep" + std::to_string(i), i < 7));
  }
  const auto frame =
      evaluate_repetitions(reps, {MetricSpec::rbp(0.8)}, {0.8, RbpConvention::paper, 1000});
  SummaryConfig config;
  config.bootstrap = {200, 0.95, 13};
  const auto s = stability_report(frame, "A", "B", "rbp(0.8)", config);
  v.require(s.sign_consistency == 0.7, "sign consistency " + fmt("%.17g", s.sign_consistency));
  if (v.pass) v.detail = "sign consistency " + fmt("%.1f", s.sign_consistency);
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"metric oracle equivalence", metric_oracles},
      {"rbp convention identity", convention_identity},
      {"rbp saturation", saturation},
      {"quantile and ecdf oracles", quantile_ecdf},
      {"bootstrap degeneracy and coverage", bootstrap},
      {"paired t-test", t_test},
      {"subgroup reconstruction", subgroup_reconstruction},
      {"exposure, gini and divergence", exposure},
      {"ideal policy hand case", ideal_policy},
      {"sweep crossover", sweep_crossover},
      {"posterior", posterior},
      {"end-to-end dominance scenario", end_to_end},
      {"repetition sign consistency", repetitions}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first
              << ": " << v.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
