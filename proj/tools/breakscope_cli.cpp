// breakscope command-line driver.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "breakscope/breakscope.hpp"

namespace fs = std::filesystem;
using namespace breakscope;

namespace {

struct Global {
  std::string input;
  std::vector<std::string> columns;
  bool drop_negative = false;
  std::string transform = "raw";
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string format = "json";
};

Panel load_input(const Global& g) {
  if (g.input.empty()) throw Error(ErrorCode::InvalidArgument, "--input is required for this subcommand");
  Panel p = load_csv(g.input, CsvSchema{g.columns});
  const Transform t = parse_transform(g.transform);
  std::vector<TimeSeries> out;
  for (const auto& s : p.series()) {
    TimeSeries cur = s;
    if (g.drop_negative) {
      auto d = drop_negative_prices(cur);
      if (d.dropped > 0) std::cerr << "note: dropped " << d.dropped << " non-positive values from " << s.id() << "\n";
      cur = std::move(d.series);
    }
    out.push_back(apply_transform(cur, t));
  }
  return Panel::align(std::move(out));
}

void emit(const Global& g, const std::string& stem, const SectionOutput& s) {
  fs::create_directories(g.out_dir);
  if (g.format == "json") {
    write_text_file(fs::path(g.out_dir) / (stem + ".json"), s.json.dump(2) + "\n");
  } else {
    for (const auto& f : s.files) write_text_file(fs::path(g.out_dir) / f.file, f.content);
  }
}

int run_synth(const Global& g, const std::string& kind_s, std::size_t n, double h, double sd, double coupling,
              const std::string& preset, const std::string& out) {
  const auto kind = parse_generator_kind(kind_s);
  Panel p;
  std::vector<std::size_t> truth;
  switch (kind) {
    case GeneratorKind::fgn:
      p = Panel::align({TimeSeries::from_values("fgn", gen_fgn(h, n, g.seed))});
      break;
    case GeneratorKind::fbm:
      p = Panel::align({TimeSeries::from_values("fbm", gen_fbm(h, n, g.seed))});
      break;
    case GeneratorKind::white_noise:
      p = Panel::align({TimeSeries::from_values("noise", gen_white_noise(n, g.seed, sd))});
      break;
    case GeneratorKind::var_coupled: {
      Eigen::MatrixXd a;
      if (preset == "chain") {
        a = Eigen::MatrixXd::Zero(3, 3);
        a(1, 0) = coupling;
        a(2, 1) = coupling;
      } else if (preset == "pair") {
        a = Eigen::MatrixXd::Zero(2, 2);
        a(1, 0) = coupling;
      } else {
        throw Error(ErrorCode::InvalidArgument, "unknown VAR preset '" + preset + "' (pair, chain)");
      }
      p = gen_var_coupled(a, sd, n, g.seed).panel;
      break;
    }
    case GeneratorKind::piecewise_trend_seasonal: {
      PiecewiseSpec ps;
      ps.n = n;
      ps.knots = {n * 2 / 5, n * 7 / 10};
      const double seg2 = static_cast<double>(ps.knots[1] - ps.knots[0]);
      ps.levels = {0.0, 0.0, 0.2 * seg2 + 3.0};
      ps.slopes = {0.0, 0.2, 0.2};
      ps.amplitude = 1.0;
      ps.period = 7.0;
      ps.noise_sd = sd == 1.0 ? 0.5 : sd;
      ps.seed = g.seed;
      auto r = gen_piecewise(ps);
      truth = r.changepoints;
      p = Panel::align({r.series});
      break;
    }
  }
  std::ostringstream os;
  write_panel_csv(os, p);
  const fs::path target = out.empty() ? fs::path(g.out_dir) / "synth.csv" : fs::path(out);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  write_text_file(target, os.str());
  if (!truth.empty()) {
    std::ostringstream t;
    t << "index,date\n";
    for (auto k : truth) t << k << ',' << p.date_axis()[k].to_string() << '\n';
    fs::path tp = target;
    tp.replace_extension(".truth.csv");
    write_text_file(tp, t.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hurst, information-flow and Bayesian changepoint analysis of price panels"};
  app.require_subcommand(1);
  app.fallthrough();
  Global g;
  app.add_option("--input", g.input, "CSV with a date column and one column per series");
  app.add_option("--columns", g.columns, "series columns to load (default: all)")->delimiter(',');
  app.add_flag("--drop-negative", g.drop_negative, "remove non-positive prices before transforming");
  app.add_option("--transform", g.transform, "raw | log | log_return | signed_log_return")->capture_default_str();
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--format", g.format, "json | csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic fixture");
  std::string kind = "fgn", preset = "pair", synth_out;
  std::size_t synth_n = 8192;
  double synth_h = 0.5, synth_sd = 1.0, coupling = 0.9;
  synth->add_option("--kind", kind, "fgn | fbm | white_noise | var_coupled | piecewise")->capture_default_str();
  synth->add_option("--n", synth_n, "length")->capture_default_str();
  synth->add_option("--hurst", synth_h, "Hurst exponent for fgn/fbm")->capture_default_str();
  synth->add_option("--sd", synth_sd, "noise standard deviation")->capture_default_str();
  synth->add_option("--coupling", coupling, "VAR coupling strength")->capture_default_str();
  synth->add_option("--preset", preset, "VAR layout: pair (X1->X2) or chain (X1->X2->X3)")->capture_default_str();
  synth->add_option("--out", synth_out, "output CSV (default <out-dir>/synth.csv)");

  // hurst
  auto* hurst = app.add_subcommand("hurst", "GHE and R/S Hurst exponents, rolling curves, annual means");
  HurstConfig hc;
  std::string hmethod = "ghe";
  hurst->add_option("--window", hc.window, "rolling window length")->capture_default_str();
  hurst->add_option("--q", hc.q, "GHE moment order")->capture_default_str();
  hurst->add_option("--method", hmethod, "rolling estimator: ghe | rs")->capture_default_str();

  // mi
  auto* mi = app.add_subcommand("mi", "rolling mutual information and decoupling events");
  MiConfig mc;
  std::string est = "knn";
  mi->add_option("--window", mc.window, "rolling window length")->capture_default_str();
  mi->add_option("--estimator", est, "knn | binned")->capture_default_str();
  mi->add_option("--k", mc.k, "neighbours for the k-NN estimator")->capture_default_str();
  mi->add_option("--reference", mc.reference, "reference series id (default: first)");
  mi->add_option("--gap-threshold", mc.gap_threshold, "decoupling gap in nats")->capture_default_str();
  mi->add_option("--run-len", mc.run_len, "decoupling run length")->capture_default_str();

  // pmime
  auto* pm = app.add_subcommand("pmime", "PMIME direct-causality matrix and network");
  PmimeOptions po;
  std::string stop = "surrogate";
  double edge_threshold = 0.0;
  pm->add_option("--lmax", po.lmax, "maximum lag")->capture_default_str();
  pm->add_option("--k", po.k, "neighbours")->capture_default_str();
  pm->add_option("--stop", stop, "surrogate | ratio")->capture_default_str();
  pm->add_option("--alpha", po.alpha, "surrogate significance level")->capture_default_str();
  pm->add_option("--ratio", po.ratio, "ratio-rule threshold")->capture_default_str();
  pm->add_option("--surrogates", po.surrogates, "surrogates per step")->capture_default_str();
  pm->add_option("--threshold", edge_threshold, "network edge threshold")->capture_default_str();

  // beast
  auto* be = app.add_subcommand("beast", "Bayesian trend/seasonal changepoint decomposition");
  BeastOptions bo;
  double fixed_nu = 0.0;
  std::string season = "harmonic";
  auto add_beast = [&](CLI::App* c) {
    c->add_option("--cp-max", bo.cp_max, "maximum knots per component")->capture_default_str();
    c->add_option("--min-seg", bo.min_seg, "minimum segment length (0: max(10, n/20))")->capture_default_str();
    c->add_option("--order-max", bo.order_max, "maximum harmonic order")->capture_default_str();
    c->add_option("--period", bo.period, "seasonal period")->capture_default_str();
    c->add_option("--season", season, "harmonic | none")->capture_default_str();
    c->add_option("--chains", bo.chains, "MCMC chains")->capture_default_str();
    c->add_option("--samples", bo.samples, "sweeps per chain including burn-in")->capture_default_str();
    c->add_option("--burn-in", bo.burn_in, "burn-in sweeps")->capture_default_str();
    c->add_option("--thin", bo.thin, "thinning")->capture_default_str();
    c->add_option("--cp-prob-min", bo.cp_prob_min, "minimum peak probability to report")->capture_default_str();
    c->add_option("--fixed-nu", fixed_nu, "hold the coefficient precision fixed (0: sample it)");
  };
  add_beast(be);

  // report
  auto* rp = app.add_subcommand("report", "run every analysis and assemble report.json with CSV exports");
  std::string catalog_path;
  std::vector<std::string> sections = report_section_names();
  int tol_days = 3, max_match = 30;
  rp->add_option("--catalog", catalog_path, "event catalog JSON (default: built-in)");
  rp->add_option("--sections", sections, "subset of hurst,mi,pmime,beast,events")->delimiter(',');
  rp->add_option("--tol-days", tol_days, "concurrency tolerance in days")->capture_default_str();
  rp->add_option("--max-match-days", max_match, "largest event distance that still matches")->capture_default_str();
  rp->add_option("--hurst-window", hc.window, "rolling Hurst window")->capture_default_str();
  rp->add_option("--mi-window", mc.window, "rolling MI window")->capture_default_str();
  rp->add_option("--lmax", po.lmax, "PMIME maximum lag")->capture_default_str();
  rp->add_option("--surrogates", po.surrogates, "PMIME surrogates per step")->capture_default_str();
  add_beast(rp);

  CLI11_PARSE(app, argc, argv);

  try {
    hc.rolling_method = hmethod == "rs" ? HurstMethod::rs : HurstMethod::ghe;
    if (hmethod != "rs" && hmethod != "ghe") throw Error(ErrorCode::InvalidArgument, "unknown method '" + hmethod + "'");
    mc.estimator = parse_mi_estimator(est);
    mc.seed = g.seed;
    po.stop = parse_stop_rule(stop);
    po.seed = g.seed;
    bo.season_mode = parse_season_mode(season);
    bo.seed = g.seed;
    if (fixed_nu > 0.0) bo.fixed_nu = fixed_nu;

    if (*synth) return run_synth(g, kind, synth_n, synth_h, synth_sd, coupling, preset, synth_out);
    if (*hurst) {
      emit(g, "hurst", run_hurst_section(load_input(g), hc));
      return 0;
    }
    if (*mi) {
      emit(g, "mi", run_mi_section(load_input(g), mc));
      return 0;
    }
    if (*pm) {
      emit(g, "pmime", run_pmime_section(load_input(g), po, edge_threshold));
      return 0;
    }
    if (*be) {
      auto r = run_beast_section(load_input(g), bo);
      if (g.format == "json") {
        auto j = nlohmann::json::array();
        for (const auto& s : r.summaries) j.push_back(to_json(s, true));
        r.section.json = {{"series", std::move(j)}, {"trend_correlation", r.section.json.value("trend_correlation", nlohmann::json())}};
      }
      emit(g, "beast", r.section);
      return 0;
    }
    if (*rp) {
      for (const auto& s : sections)
        if (std::find(report_section_names().begin(), report_section_names().end(), s) == report_section_names().end())
          throw Error(ErrorCode::InvalidArgument, "unknown section '" + s + "'");
      auto wants = [&](const char* s) { return std::find(sections.begin(), sections.end(), s) != sections.end(); };
      std::vector<SectionOutput> outs;
      std::map<std::string, std::string> failures;
      Panel panel;
      try {
        panel = load_input(g);
        if (panel.size() == 0 || panel.length() == 0) throw Error(ErrorCode::InvalidArgument, "input has no data");
      } catch (const Error& e) {
        failures["input"] = e.what();
      }
      auto attempt = [&](const char* name, auto&& f) {
        if (!wants(name) || failures.count("input")) return;
        try {
          f();
        } catch (const Error& e) {
          failures[name] = e.what();
        }
      };
      attempt("hurst", [&] { outs.push_back(run_hurst_section(panel, hc)); });
      attempt("mi", [&] { outs.push_back(run_mi_section(panel, mc)); });
      attempt("pmime", [&] { outs.push_back(run_pmime_section(panel, po, edge_threshold)); });
      std::vector<PosteriorSummary> beast_runs;
      if (wants("beast") || wants("events")) {
        attempt(wants("beast") ? "beast" : "events", [&] {
          auto r = run_beast_section(panel, bo);
          beast_runs = std::move(r.summaries);
          if (wants("beast")) outs.push_back(std::move(r.section));
        });
      }
      attempt("events", [&] {
        if (beast_runs.empty()) throw Error(ErrorCode::PartialFailure, "events need changepoints from the beast step");
        const auto cat = catalog_path.empty() ? default_event_catalog() : load_catalog(catalog_path);
        outs.push_back(run_events_section(beast_runs, cat, tol_days, max_match));
      });
      AssembledReport rep;
      try {
        rep = assemble_report(outs, sections, failures);
      } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      }
      fs::create_directories(g.out_dir);
      write_text_file(fs::path(g.out_dir) / "report.json", rep.document.dump(2) + "\n");
      for (const auto& f : rep.files) write_text_file(fs::path(g.out_dir) / f.file, f.content);
      if (rep.exit_code != 0) {
        std::cerr << "partial report, missing:";
        for (const auto& m : rep.missing) std::cerr << ' ' << m;
        std::cerr << "\n";
      }
      return rep.exit_code;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::PartialFailure ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
