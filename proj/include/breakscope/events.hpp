#pragma once

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "breakscope/beast.hpp"
#include "breakscope/date.hpp"
#include "breakscope/error.hpp"
#include "breakscope/io.hpp"

namespace breakscope {

struct Event {
  std::string symbol;
  Date date;
  std::string description;
  bool approximate = false;  // source gives only a month or "mid-month"
};

class EventCatalog {
 public:
  EventCatalog() = default;

  /// Throws InvalidArgument on duplicate symbols or decreasing dates.
  explicit EventCatalog(std::vector<Event> events) : events_(std::move(events)) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < events_.size(); ++i) {
      if (!seen.insert(events_[i].symbol).second)
        throw Error(ErrorCode::InvalidArgument, "duplicate event symbol '" + events_[i].symbol + "'");
      if (i > 0 && events_[i].date < events_[i - 1].date)
        throw Error(ErrorCode::InvalidArgument, "event dates must be nondecreasing");
    }
  }

  const std::vector<Event>& events() const { return events_; }
  bool empty() const { return events_.empty(); }
  std::size_t size() const { return events_.size(); }

  const Event& at(std::string_view symbol) const {
    for (const auto& e : events_)
      if (e.symbol == symbol) return e;
    throw Error(ErrorCode::InvalidArgument, "no event '" + std::string(symbol) + "'");
  }

 private:
  std::vector<Event> events_;
};

/// Energy-crisis events of autumn 2021 through autumn 2022.
inline EventCatalog default_event_catalog() {
  auto d = [](int y, unsigned m, unsigned dd) { return Date::from_ymd(y, m, dd); };
  return EventCatalog({
      {"E1", d(2021, 10, 13), "European Commission energy-price toolbox communication", false},
      {"E2", d(2021, 10, 15), "Gazprom stops selling volumes at EU gas hubs (mid-October)", true},
      {"E3", d(2021, 11, 10), "US reports unusual Russian troop movement near Ukraine", false},
      {"E4", d(2021, 12, 17), "Proposal to bar Ukraine from joining NATO", false},
      {"E5", d(2022, 1, 17), "Russian troops arrive in Belarus for exercises", false},
      {"E6", d(2022, 2, 24), "Invasion of Ukraine; first sanctions", false},
      {"E7", d(2022, 4, 27), "Gas supply to Bulgaria and Poland cut off", false},
      {"E8", d(2022, 5, 18), "REPowerEU plan presented", true},
      {"E9", d(2022, 6, 23), "Germany raises gas alert level to stage 2", false},
      {"E10", d(2022, 7, 21), "New EU package of measures", false},
      {"E11", d(2022, 8, 30), "Nord Stream out of operation", false},
      {"E12", d(2022, 9, 14), "EU announces windfall tax on energy companies", false},
      {"E13", d(2022, 11, 1), "Gas storage 80% minimum filling deadline", false},
  });
}

inline nlohmann::json to_json(const EventCatalog& c) {
  auto arr = nlohmann::json::array();
  for (const auto& e : c.events())
    arr.push_back({{"symbol", e.symbol},
                   {"date", e.date.to_string()},
                   {"description", e.description},
                   {"approximate", e.approximate}});
  return arr;
}

/// JSON list of {symbol, date, description, approximate?}.
inline EventCatalog catalog_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "event catalog must be a JSON array");
  std::vector<Event> ev;
  for (const auto& item : j) {
    if (!item.contains("symbol") || !item.contains("date"))
      throw Error(ErrorCode::InvalidArgument, "event entries need symbol and date");
    Event e;
    e.symbol = item.at("symbol").get<std::string>();
    e.date = Date::parse(item.at("date").get<std::string>());
    e.description = item.value("description", std::string{});
    e.approximate = item.value("approximate", false);
    ev.push_back(std::move(e));
  }
  return EventCatalog(std::move(ev));
}

inline EventCatalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open catalog '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("catalog is not valid JSON: ") + e.what());
  }
  return catalog_from_json(j);
}

enum class Relation { lead, lag, concurrent, unmatched };

inline std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::lead: return "lead";
    case Relation::lag: return "lag";
    case Relation::concurrent: return "concurrent";
    case Relation::unmatched: return "unmatched";
  }
  return "unmatched";
}

inline Relation parse_relation(std::string_view s) {
  if (s == "lead") return Relation::lead;
  if (s == "lag") return Relation::lag;
  if (s == "concurrent") return Relation::concurrent;
  if (s == "unmatched") return Relation::unmatched;
  throw Error(ErrorCode::InvalidArgument, "unknown relation '" + std::string(s) + "'");
}

/// Relation of a detected date to one event date; offset = detected - event in days.
inline Relation relation_for_offset(int offset, int tol_days) {
  if (std::abs(offset) <= tol_days) return Relation::concurrent;
  return offset < 0 ? Relation::lead : Relation::lag;
}

struct ClassifiedBreakpoint {
  Date detected;
  double probability = 0.0;
  std::optional<std::string> event;  // empty: hidden
  Relation relation = Relation::unmatched;
  int offset_days = 0;
};

struct MarketBreakpoints {
  std::string market;
  std::vector<ClassifiedBreakpoint> rows;
};

struct BreakpointReport {
  int tol_days = 3;
  int max_match_days = 30;
  std::vector<MarketBreakpoints> markets;
};

inline MarketBreakpoints classify_breakpoints(const std::string& market, const std::vector<ExtractedCp>& cps,
                                              const EventCatalog& catalog, int tol_days = 3,
                                              int max_match_days = 30) {
  if (catalog.empty()) throw Error(ErrorCode::EmptyCatalog, "event catalog has no entries");
  if (tol_days < 0 || max_match_days < tol_days)
    throw Error(ErrorCode::InvalidArgument, "need 0 <= tol_days <= max_match_days");
  MarketBreakpoints out{market, {}};
  for (const auto& cp : cps) {
    ClassifiedBreakpoint row;
    row.detected = cp.date;
    row.probability = cp.probability;
    const Event* best = nullptr;
    int best_off = 0;
    // catalog is date-ordered, so strict < keeps the earlier event on ties
    for (const auto& e : catalog.events()) {
      const int off = cp.date - e.date;
      if (std::abs(off) > max_match_days) continue;
      if (best == nullptr || std::abs(off) < std::abs(best_off)) {
        best = &e;
        best_off = off;
      }
    }
    if (best != nullptr) {
      row.event = best->symbol;
      row.offset_days = best_off;
      row.relation = relation_for_offset(best_off, tol_days);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline nlohmann::json to_json(const BreakpointReport& r) {
  nlohmann::json j;
  j["tol_days"] = r.tol_days;
  j["max_match_days"] = r.max_match_days;
  j["markets"] = nlohmann::json::array();
  for (const auto& m : r.markets) {
    auto rows = nlohmann::json::array();
    for (const auto& b : m.rows) {
      nlohmann::json row{{"detected", b.detected.to_string()},
                         {"probability", num9(b.probability)},
                         {"relation", to_string(b.relation)},
                         {"offset_days", b.offset_days}};
      row["event"] = b.event ? nlohmann::json(*b.event) : nlohmann::json("hidden");
      rows.push_back(std::move(row));
    }
    j["markets"].push_back({{"market", m.market}, {"breakpoints", std::move(rows)}});
  }
  return j;
}

inline void write_breakpoints_csv(std::ostream& os, const BreakpointReport& r) {
  os << "market,detected,probability,event,relation,offset_days\n";
  for (const auto& m : r.markets)
    for (const auto& b : m.rows)
      os << m.market << ',' << b.detected.to_string() << ',' << fmt9(b.probability) << ','
         << (b.event ? *b.event : std::string("hidden")) << ',' << to_string(b.relation) << ',' << b.offset_days
         << '\n';
}

}  // namespace breakscope
