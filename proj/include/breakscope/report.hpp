#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "breakscope/beast.hpp"
#include "breakscope/error.hpp"
#include "breakscope/events.hpp"
#include "breakscope/hurst.hpp"
#include "breakscope/infotheory.hpp"
#include "breakscope/io.hpp"
#include "breakscope/pmime.hpp"
#include "breakscope/series.hpp"

namespace breakscope {

inline constexpr int kReportSchemaVersion = 1;

inline const std::vector<std::string>& report_section_names() {
  static const std::vector<std::string> names{"hurst", "mi", "pmime", "beast", "events"};
  return names;
}

// ---- BEAST serialisation ----

inline nlohmann::json cps_to_json(const std::vector<ExtractedCp>& cps) {
  auto a = nlohmann::json::array();
  for (const auto& c : cps)
    a.push_back({{"index", c.index},
                 {"date", c.date.to_string()},
                 {"probability", num9(c.probability)},
                 {"jump", num9(c.jump)}});
  return a;
}

inline nlohmann::json to_json(const PosteriorSummary& s, bool with_curves = true) {
  nlohmann::json j;
  j["source_id"] = s.source_id;
  j["cp_max"] = s.cp_max;
  j["min_seg"] = s.min_seg;
  j["retained_samples"] = s.retained;
  j["season_mode"] = std::string(to_string(s.season_mode));
  j["ncp_trend_dist"] = num9(s.ncp_trend_dist);
  j["ncp_seasonal_dist"] = num9(s.ncp_seasonal_dist);
  j["cumulative_ncp_dist"] = num9(s.cumulative_ncp_dist);
  j["ncp_trend_mode"] = s.ncp_trend_mode();
  j["trend_cps"] = cps_to_json(s.trend_cps);
  j["seasonal_cps"] = cps_to_json(s.seasonal_cps);
  j["rhat"] = num9(s.rhat);
  j["not_converged"] = s.not_converged;
  if (!s.beta_mean.empty()) {
    j["beta_mean"] = num9(s.beta_mean);
    j["beta_sd"] = num9(s.beta_sd);
  }
  if (with_curves) {
    std::vector<std::string> dates;
    for (auto d : s.dates) dates.push_back(d.to_string());
    j["dates"] = dates;
    j["trend_cp_prob"] = num9(s.trend_cp_prob);
    j["seasonal_cp_prob"] = num9(s.seasonal_cp_prob);
    j["trend"] = num9(s.trend);
    j["trend_lo"] = num9(s.trend_lo);
    j["trend_hi"] = num9(s.trend_hi);
    j["seasonal"] = num9(s.seasonal);
    j["seasonal_lo"] = num9(s.seasonal_lo);
    j["seasonal_hi"] = num9(s.seasonal_hi);
    std::vector<double> p, z, n;
    for (const auto& ss : s.slope_sign) {
      p.push_back(ss.pos);
      z.push_back(ss.zero);
      n.push_back(ss.neg);
    }
    j["slope_pos"] = num9(p);
    j["slope_zero"] = num9(z);
    j["slope_neg"] = num9(n);
  }
  return j;
}

/// Per-date curves of one or more summaries, long format by source.
inline void write_beast_curves_csv(std::ostream& os, const std::vector<PosteriorSummary>& all) {
  os << "source,date,value,trend,trend_lo,trend_hi,seasonal,seasonal_lo,seasonal_hi,trend_cp_prob,"
        "seasonal_cp_prob,slope_pos,slope_zero,slope_neg,seasonal_order\n";
  for (const auto& s : all)
    for (std::size_t t = 0; t < s.dates.size(); ++t)
      os << s.source_id << ',' << s.dates[t].to_string() << ',' << fmt9(s.raw[t]) << ',' << fmt9(s.trend[t]) << ','
         << fmt9(s.trend_lo[t]) << ',' << fmt9(s.trend_hi[t]) << ',' << fmt9(s.seasonal[t]) << ','
         << fmt9(s.seasonal_lo[t]) << ',' << fmt9(s.seasonal_hi[t]) << ',' << fmt9(s.trend_cp_prob[t]) << ','
         << fmt9(s.seasonal_cp_prob[t]) << ',' << fmt9(s.slope_sign[t].pos) << ',' << fmt9(s.slope_sign[t].zero)
         << ',' << fmt9(s.slope_sign[t].neg) << ',' << fmt9(s.seasonal_order[t]) << '\n';
}

inline void write_ncp_csv(std::ostream& os, const std::vector<PosteriorSummary>& all) {
  os << "source,k,p_trend,p_seasonal,p_total_at_least\n";
  for (const auto& s : all) {
    const std::size_t len = std::max(s.ncp_trend_dist.size(), s.cumulative_ncp_dist.size());
    for (std::size_t k = 0; k < len; ++k) {
      auto at = [&](const std::vector<double>& v) { return k < v.size() ? fmt9(v[k]) : std::string("0"); };
      os << s.source_id << ',' << k << ',' << at(s.ncp_trend_dist) << ',' << at(s.ncp_seasonal_dist) << ','
         << at(s.cumulative_ncp_dist) << '\n';
    }
  }
}

inline void write_cps_csv(std::ostream& os, const std::vector<PosteriorSummary>& all) {
  os << "source,component,index,date,probability,jump\n";
  for (const auto& s : all) {
    for (const auto& c : s.trend_cps)
      os << s.source_id << ",trend," << c.index << ',' << c.date.to_string() << ',' << fmt9(c.probability) << ','
         << fmt9(c.jump) << '\n';
    for (const auto& c : s.seasonal_cps)
      os << s.source_id << ",seasonal," << c.index << ',' << c.date.to_string() << ',' << fmt9(c.probability) << ','
         << fmt9(c.jump) << '\n';
  }
}

// ---- sections ----

struct Artifact {
  std::string file;
  std::string description;
  std::string content;
};

struct SectionOutput {
  std::string name;
  nlohmann::json json;
  std::vector<Artifact> files;
};

template <class F>
inline std::string render(F&& f) {
  std::ostringstream os;
  f(os);
  return os.str();
}

struct HurstConfig {
  std::size_t window = 75;
  double q = 1.0;
  HurstMethod rolling_method = HurstMethod::ghe;
};

inline SectionOutput run_hurst_section(const Panel& panel, const HurstConfig& cfg = {}) {
  SectionOutput out{"hurst", nlohmann::json::object(), {}};
  std::vector<RollingSeries> curves;
  auto per_series = nlohmann::json::array();
  for (const auto& s : panel.series()) {
    nlohmann::json js{{"id", s.id()}};
    try {
      const auto g = ghe(s.values(), cfg.q);
      js["ghe"] = num9(g.h);
      js["ghe_fit_r2"] = num9(g.fit_r2);
      js["efficiency"] = std::string(to_string(classify_efficiency(g.h)));
      js["fractal_dimension"] = num9(fractal_dimension(g.h));
    } catch (const Error& e) {
      js["ghe_error"] = e.what();
    }
    try {
      js["rs_corrected"] = num9(hurst_rs(s.values(), true).h);
    } catch (const Error& e) {
      js["rs_error"] = e.what();
    }
    const RollingWindowSpec spec{cfg.window, 1};
    auto r = cfg.rolling_method == HurstMethod::ghe ? rolling_ghe(s, spec, cfg.q) : rolling_hurst_rs(s, spec);
    auto ann = nlohmann::json::object();
    for (const auto& [y, m] : annual_means(r)) ann[std::to_string(y)] = num9(m);
    js["annual_mean"] = std::move(ann);
    js["rolling_points"] = r.points.size();
    js["rolling_gaps"] = r.gaps.size();
    if (!r.warnings.empty()) js["warnings"] = r.warnings;
    per_series.push_back(std::move(js));
    curves.push_back(std::move(r));
  }
  out.json["window"] = cfg.window;
  out.json["q"] = num9(cfg.q);
  out.json["rolling_method"] = std::string(to_string(cfg.rolling_method));
  out.json["series"] = std::move(per_series);
  out.files.push_back({"hurst_rolling.csv", "rolling Hurst exponent per series (long format)",
                       render([&](std::ostream& os) { write_rolling_csv(os, curves); })});
  out.files.push_back({"hurst_annual.csv", "calendar-year mean of the rolling Hurst exponent", render([&](std::ostream& os) {
                         os << "id,year,mean\n";
                         for (const auto& c : curves)
                           for (const auto& [y, m] : annual_means(c)) os << c.source_id << ',' << y << ',' << fmt9(m) << '\n';
                       })});
  if (curves.size() >= 2) {
    try {
      const auto corr = rolling_correlation_matrix(curves);
      out.json["correlation"] = matrix_to_json(corr, panel.ids());
      out.files.push_back({"hurst_correlation.csv", "correlation matrix of the rolling Hurst curves",
                           render([&](std::ostream& os) { write_matrix_csv(os, corr, panel.ids()); })});
    } catch (const Error& e) {
      out.json["correlation_error"] = e.what();
    }
  }
  return out;
}

struct MiConfig {
  std::size_t window = 60;
  MiEstimator estimator = MiEstimator::knn;
  std::size_t k = 4;
  std::string reference;  // empty: first series
  double gap_threshold = 0.1;
  std::size_t run_len = 5;
  std::uint64_t seed = 0;
};

/// Rolling MI of the reference series against every other one; decoupling events are
/// searched between each curve and the first curve.
inline SectionOutput run_mi_section(const Panel& panel, const MiConfig& cfg = {}) {
  if (panel.size() < 2) throw Error(ErrorCode::InvalidArgument, "MI needs at least two series");
  SectionOutput out{"mi", nlohmann::json::object(), {}};
  const std::size_t ref = cfg.reference.empty() ? 0 : panel.index_of(cfg.reference);
  std::vector<RollingSeries> curves;
  auto full = nlohmann::json::array();
  for (std::size_t i = 0; i < panel.size(); ++i) {
    if (i == ref) continue;
    curves.push_back(rolling_mi(panel[ref], panel[i], {cfg.window, 1}, cfg.estimator, cfg.k, cfg.seed));
    nlohmann::json f{{"pair", curves.back().source_id}};
    try {
      const auto e = cfg.estimator == MiEstimator::knn ? mi_knn(panel[ref].values(), panel[i].values(), cfg.k, cfg.seed)
                                                       : mi_binned(panel[ref].values(), panel[i].values());
      f["mi_nats"] = num9(e.value);
      f["negative"] = e.negative;
      f["near_degenerate"] = e.near_degenerate;
    } catch (const Error& e) {
      f["error"] = e.what();
    }
    full.push_back(std::move(f));
  }
  auto events = nlohmann::json::array();
  std::ostringstream ev;
  ev << "curve_a,curve_b,onset,peak,peak_gap\n";
  for (std::size_t c = 1; c < curves.size(); ++c) {
    for (const auto& e : mi_decoupling(curves[0], curves[c], cfg.gap_threshold, cfg.run_len)) {
      events.push_back({{"curve_a", curves[0].source_id},
                        {"curve_b", curves[c].source_id},
                        {"onset", e.onset.to_string()},
                        {"peak", e.peak.to_string()},
                        {"peak_gap", num9(e.peak_gap)}});
      ev << curves[0].source_id << ',' << curves[c].source_id << ',' << e.onset.to_string() << ','
         << e.peak.to_string() << ',' << fmt9(e.peak_gap) << '\n';
    }
  }
  out.json["window"] = cfg.window;
  out.json["estimator"] = std::string(to_string(cfg.estimator));
  out.json["reference"] = panel[ref].id();
  out.json["full_sample"] = std::move(full);
  out.json["decoupling_events"] = std::move(events);
  auto summary = nlohmann::json::array();
  for (const auto& c : curves)
    summary.push_back({{"pair", c.source_id}, {"points", c.points.size()}, {"gaps", c.gaps.size()}});
  out.json["curves"] = std::move(summary);
  out.files.push_back({"mi_rolling.csv", "rolling mutual information curves (nats, long format)",
                       render([&](std::ostream& os) { write_rolling_csv(os, curves); })});
  out.files.push_back({"mi_decoupling.csv", "dates where MI curves separate", ev.str()});
  return out;
}

inline SectionOutput run_pmime_section(const Panel& panel, const PmimeOptions& opt = {}, double threshold = 0.0) {
  SectionOutput out{"pmime", nlohmann::json::object(), {}};
  const auto r = pmime(panel, opt);
  const auto net = causality_network(r, threshold);
  out.json = to_json(r);
  out.json["network"] = to_json(net);
  out.files.push_back({"pmime_matrix.csv", "PMIME matrix, rows drive columns",
                       render([&](std::ostream& os) { write_matrix_csv(os, r.matrix, r.ids); })});
  out.files.push_back({"pmime_edges.csv", "directed causality edges with weight",
                       render([&](std::ostream& os) { write_edge_list_csv(os, net); })});
  return out;
}

struct BeastSectionResult {
  SectionOutput section;
  std::vector<PosteriorSummary> summaries;
};

inline BeastSectionResult run_beast_section(const Panel& panel, const BeastOptions& opt = {}) {
  BeastSectionResult res{{"beast", nlohmann::json::object(), {}}, {}};
  auto per = nlohmann::json::array();
  for (std::size_t i = 0; i < panel.size(); ++i) {
    BeastOptions o = opt;
    o.seed = opt.seed + 1000003ULL * i;
    res.summaries.push_back(run_sampler(panel[i], o));
    per.push_back(to_json(res.summaries.back(), false));
  }
  res.section.json["series"] = std::move(per);
  res.section.files.push_back({"beast_curves.csv", "trend, seasonal, changepoint and slope-sign curves per date",
                               render([&](std::ostream& os) { write_beast_curves_csv(os, res.summaries); })});
  res.section.files.push_back({"beast_ncp.csv", "changepoint count distributions and Pr(total >= k)",
                               render([&](std::ostream& os) { write_ncp_csv(os, res.summaries); })});
  res.section.files.push_back({"beast_changepoints.csv", "extracted changepoints with probability and jump",
                               render([&](std::ostream& os) { write_cps_csv(os, res.summaries); })});
  if (res.summaries.size() >= 2) {
    const auto corr = trend_correlation_matrix(res.summaries);
    res.section.json["trend_correlation"] = matrix_to_json(corr, panel.ids());
    res.section.files.push_back({"beast_trend_correlation.csv", "correlation matrix of posterior-mean trends",
                                 render([&](std::ostream& os) { write_matrix_csv(os, corr, panel.ids()); })});
  }
  return res;
}

inline SectionOutput run_events_section(const std::vector<PosteriorSummary>& summaries, const EventCatalog& catalog,
                                        int tol_days = 3, int max_match_days = 30) {
  BreakpointReport rep;
  rep.tol_days = tol_days;
  rep.max_match_days = max_match_days;
  for (const auto& s : summaries)
    rep.markets.push_back(classify_breakpoints(s.source_id, s.trend_cps, catalog, tol_days, max_match_days));
  SectionOutput out{"events", to_json(rep), {}};
  out.json["catalog"] = to_json(catalog);
  out.files.push_back({"event_breakpoints.csv", "trend changepoints classified against the event catalog",
                       render([&](std::ostream& os) { write_breakpoints_csv(os, rep); })});
  return out;
}

// ---- assembly ----

struct AssembledReport {
  nlohmann::json document;
  std::vector<Artifact> files;
  std::vector<std::string> missing;
  int exit_code = 0;  // 0 complete, 2 partial
};

/// Combines section outputs. `requested` lists what the run asked for; any requested
/// section without output is listed under "missing" and sets exit code 2. Throws
/// PartialFailure if there is no output at all.
inline AssembledReport assemble_report(const std::vector<SectionOutput>& sections,
                                       const std::vector<std::string>& requested,
                                       const std::map<std::string, std::string>& failures = {}) {
  if (sections.empty()) {
    std::string msg = "no analysis produced output";
    for (const auto& [k, v] : failures) msg += "; " + k + ": " + v;
    throw Error(ErrorCode::PartialFailure, msg);
  }
  AssembledReport rep;
  nlohmann::json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["sections"] = nlohmann::json::object();
  auto manifest = nlohmann::json::array();
  std::set<std::string> present;
  for (const auto& s : sections) {
    doc["sections"][s.name] = s.json;
    present.insert(s.name);
    for (const auto& f : s.files) {
      manifest.push_back({{"file", f.file}, {"section", s.name}, {"content", f.description}});
      rep.files.push_back(f);
    }
  }
  for (const auto& r : requested)
    if (!present.count(r)) rep.missing.push_back(r);
  doc["manifest"] = std::move(manifest);
  doc["missing"] = rep.missing;
  if (!failures.empty()) {
    auto f = nlohmann::json::object();
    for (const auto& [k, v] : failures) f[k] = v;
    doc["failures"] = std::move(f);
  }
  rep.exit_code = rep.missing.empty() ? 0 : 2;
  doc["status"] = rep.exit_code == 0 ? "complete" : "partial";
  rep.document = std::move(doc);
  return rep;
}

inline void write_text_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorCode::MissingFile, "cannot write '" + p.string() + "'");
  f << content;
}

}  // namespace breakscope
