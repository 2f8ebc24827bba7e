#pragma once

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ciail/errors.hpp"
#include "ciail/harness/format.hpp"

namespace ciail::harness {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // source line of each row

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw ParseError(1, "missing column '" + name + "'");
  }
};

inline CsvTable parse_csv(const std::string& text, const std::vector<std::string>& required = {}) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  CsvTable t;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;
    auto fields = split(raw, ',');
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ParseError(line, "expected " + std::to_string(t.header.size()) + " fields, found " +
                                 std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.lines.push_back(line);
  }
  if (t.header.empty()) throw ParseError(line, "empty file");
  for (const auto& r : required) t.column(r);
  return t;
}

inline double parse_real(const std::string& s, std::size_t line, const std::string& col) {
  double v = 0.0;
  if (!parse_number(s, v)) throw ParseError(line, "column '" + col + "': not a number: '" + s + "'");
  return v;
}

struct CurvePoint {
  int round = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct RunSummary {
  std::string name;
  std::vector<CurvePoint> curve;  // evaluated rounds only
  std::optional<CurvePoint> final_eval;
};

inline RunSummary read_metrics(const std::string& text, const std::string& name) {
  const CsvTable t = parse_csv(text, {"round", "eval_return_mean", "eval_return_std"});
  const auto ir = t.column("round"), im = t.column("eval_return_mean"), is = t.column("eval_return_std");
  RunSummary r;
  r.name = name;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& row = t.rows[k];
    const std::size_t line = t.lines[k];
    const int round = static_cast<int>(parse_real(row[ir], line, "round"));
    if (row[im].empty()) continue;
    r.curve.push_back({round, parse_real(row[im], line, "eval_return_mean"),
                       row[is].empty() ? 0.0 : parse_real(row[is], line, "eval_return_std")});
  }
  if (!r.curve.empty()) r.final_eval = r.curve.back();
  return r;
}

inline std::string curve_csv(const RunSummary& r) {
  std::string out = "round,eval_return_mean,eval_return_std\n";
  for (const auto& p : r.curve) out += std::to_string(p.round) + "," + fmt(p.mean) + "," + fmt(p.std) + "\n";
  return out;
}

struct SummaryCell {
  std::optional<double> mean;  // unset: failed
  double std = 0.0;
};

struct SummaryTable {
  std::string row_key;
  std::vector<std::string> row_labels;
  std::vector<std::string> columns;
  std::vector<std::vector<SummaryCell>> cells;
};

inline SummaryCell parse_cell(const std::string& s, std::size_t line, const std::string& col) {
  if (s == "failed") return {};
  const auto pm = s.find("±");
  if (pm == std::string::npos) return {parse_real(s, line, col), 0.0};
  return {parse_real(s.substr(0, pm), line, col), parse_real(s.substr(pm + std::string("±").size()), line, col)};
}

inline SummaryTable read_summary(const std::string& text) {
  const CsvTable t = parse_csv(text, {"n_updates"});
  SummaryTable s;
  s.row_key = t.header[0];
  if (s.row_key != "n_updates") throw ParseError(1, "first column must be 'n_updates'");
  s.columns.assign(t.header.begin() + 1, t.header.end());
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    s.row_labels.push_back(t.rows[k][0]);
    std::vector<SummaryCell> row;
    for (std::size_t j = 1; j < t.header.size(); ++j) row.push_back(parse_cell(t.rows[k][j], t.lines[k], t.header[j]));
    s.cells.push_back(std::move(row));
  }
  return s;
}

// True when the header looks like a sweep summary rather than a run's metrics.
inline bool is_summary(const std::string& text) { return text.rfind("n_updates", 0) == 0; }

struct ReportRefs {
  std::optional<double> expert;
  std::optional<double> random;
};

namespace detail {

inline std::string show_cell(const SummaryCell& c) {
  return c.mean ? fixed(*c.mean) + "±" + fixed(c.std) : "failed";
}

inline std::string ref_lines(const ReportRefs& refs) {
  std::string out = "expert reference: " + (refs.expert ? fixed(*refs.expert) : std::string("unavailable")) + "\n";
  if (refs.random) out += "random-policy reference: " + fixed(*refs.random) + "\n";
  if (refs.expert && refs.random) out += "normalized return = (R - random) / (expert - random)\n";
  return out;
}

inline std::string normalized_suffix(double r, const ReportRefs& refs) {
  if (!refs.expert || !refs.random || *refs.expert == *refs.random) return "";
  return " (" + fixed((r - *refs.random) / (*refs.expert - *refs.random), 3) + ")";
}

}  // namespace detail

// Markdown-style table of final eval returns, best cell of each row marked.
inline std::string render_summary(const SummaryTable& s, const ReportRefs& refs) {
  std::string out = "Final ground-truth eval return, mean±std over seeds.\n";
  out += "* marks the best cell in each row (highest mean).\n\n";
  out += "| " + s.row_key;
  for (const auto& c : s.columns) out += " | " + c;
  out += " |\n|";
  for (std::size_t j = 0; j <= s.columns.size(); ++j) out += "---|";
  out += "\n";
  for (std::size_t i = 0; i < s.row_labels.size(); ++i) {
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < s.cells[i].size(); ++j) {
      const auto& c = s.cells[i][j];
      if (c.mean && (!best || *c.mean > *s.cells[i][*best].mean)) best = j;
    }
    out += "| " + s.row_labels[i];
    for (std::size_t j = 0; j < s.cells[i].size(); ++j) {
      const auto& c = s.cells[i][j];
      out += " | " + detail::show_cell(c);
      if (c.mean) out += detail::normalized_suffix(*c.mean, refs);
      if (best && *best == j) out += " *";
    }
    out += " |\n";
  }
  return out + "\n" + detail::ref_lines(refs);
}

inline std::string render_runs(const std::vector<RunSummary>& runs, const ReportRefs& refs) {
  std::string out = "Final ground-truth eval return per run (mean±std over eval episodes).\n";
  out += "* marks the best run.\n\n| run | final eval return |\n|---|---|\n";
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    if (runs[k].final_eval && (!best || runs[k].final_eval->mean > runs[*best].final_eval->mean)) best = k;
  }
  for (std::size_t k = 0; k < runs.size(); ++k) {
    out += "| " + runs[k].name + " | ";
    if (runs[k].final_eval) {
      out += fixed(runs[k].final_eval->mean) + "±" + fixed(runs[k].final_eval->std) +
             detail::normalized_suffix(runs[k].final_eval->mean, refs);
    } else {
      out += "no evaluation";
    }
    if (best && *best == k) out += " *";
    out += " |\n";
  }
  return out + "\n" + detail::ref_lines(refs);
}

}  // namespace ciail::harness
