#pragma once

// Ingestion of evaluation runs and model metadata, plus the calendar <-> real encoding
// used by every downstream fit.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "capcurve/error.hpp"

namespace capcurve {

using Date = std::chrono::year_month_day;

enum class TaskFamily { HCAST, RE_BENCH, SWAA, OTHER };
enum class InputFormat { CSV, JSONL };

struct RunRecord {
  std::string model_id;
  std::string task_id;
  TaskFamily task_family = TaskFamily::OTHER;
  double human_minutes = 0.0;
  int success = 0;
  int attempt = 0;
  double weight = 1.0;
};

struct ModelRecord {
  std::string model_id;
  Date release_date;
  bool is_sota = false;
  bool k_thinking = false;
};

enum class RowErrorKind { NonPositiveDifficulty, NonBinarySuccess, DuplicateRun, MalformedRow };

inline std::string_view to_string(RowErrorKind kind) {
  switch (kind) {
    case RowErrorKind::NonPositiveDifficulty: return "NonPositiveDifficulty";
    case RowErrorKind::NonBinarySuccess: return "NonBinarySuccess";
    case RowErrorKind::DuplicateRun: return "DuplicateRun";
    case RowErrorKind::MalformedRow: return "MalformedRow";
  }
  return "Unknown";
}

struct RowError {
  std::size_t row = 0;  // 1-based data row (header excluded)
  RowErrorKind kind = RowErrorKind::MalformedRow;
  std::string message;
};

class RunTable {
 public:
  RunTable() = default;
  explicit RunTable(std::vector<RunRecord> runs) : runs_(std::move(runs)) {}

  const std::vector<RunRecord>& runs() const noexcept { return runs_; }
  std::size_t size() const noexcept { return runs_.size(); }
  bool empty() const noexcept { return runs_.empty(); }
  auto begin() const noexcept { return runs_.begin(); }
  auto end() const noexcept { return runs_.end(); }

  std::vector<RunRecord> slice(std::string_view model_id) const {
    std::vector<RunRecord> out;
    for (const auto& r : runs_)
      if (r.model_id == model_id) out.push_back(r);
    return out;
  }

  std::size_t distinct_tasks() const {
    std::set<std::string> ids;
    for (const auto& r : runs_) ids.insert(r.task_id);
    return ids.size();
  }

  std::vector<std::string> model_ids() const {
    std::set<std::string> ids;
    for (const auto& r : runs_) ids.insert(r.model_id);
    return {ids.begin(), ids.end()};
  }

 private:
  std::vector<RunRecord> runs_;
};

class ModelTable {
 public:
  ModelTable() = default;

  /// Throws DuplicateModel when two records share an id.
  explicit ModelTable(std::vector<ModelRecord> models) : models_(std::move(models)) {
    std::set<std::string> seen;
    for (const auto& m : models_) {
      require(seen.insert(m.model_id).second, ErrorKind::DuplicateModel, m.model_id);
    }
  }

  const std::vector<ModelRecord>& models() const noexcept { return models_; }
  std::size_t size() const noexcept { return models_.size(); }
  bool empty() const noexcept { return models_.empty(); }
  auto begin() const noexcept { return models_.begin(); }
  auto end() const noexcept { return models_.end(); }

  const ModelRecord* find(std::string_view id) const {
    for (const auto& m : models_)
      if (m.model_id == id) return &m;
    return nullptr;
  }

  const ModelRecord& at(std::string_view id) const {
    const auto* m = find(id);
    require(m != nullptr, ErrorKind::ModelNotFound, std::string(id));
    return *m;
  }

 private:
  std::vector<ModelRecord> models_;
};

struct RunIngest {
  RunTable table;
  std::vector<RowError> rejects;
  std::size_t input_rows = 0;
};

// ---------------------------------------------------------------------------
// Dates

inline Date parse_date(std::string_view text) {
  auto bad = [&] { return Error(ErrorKind::UnparseableDate, "'" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  auto field = [&](std::size_t pos, std::size_t len) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
    if (ec != std::errc{} || ptr != text.data() + pos + len) throw bad();
    return value;
  };
  const Date d{std::chrono::year{field(0, 4)}, std::chrono::month{static_cast<unsigned>(field(5, 2))},
               std::chrono::day{static_cast<unsigned>(field(8, 2))}};
  if (!d.ok()) throw bad();
  return d;
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

inline Date make_date(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

/// Affine map from calendar dates to years since an epoch.
struct TimeScale {
  Date epoch = make_date(2019, 1, 1);
  double days_per_unit = 365.25;
};

inline double encode_date(const TimeScale& scale, const Date& date) {
  require(date.ok(), ErrorKind::InvalidDate, "invalid calendar date");
  const auto days = (std::chrono::sys_days{date} - std::chrono::sys_days{scale.epoch}).count();
  return static_cast<double>(days) / scale.days_per_unit;
}

/// Rounds to the nearest whole day, halves away from the epoch (std::llround).
inline Date decode_date(const TimeScale& scale, double x) {
  const auto days = std::llround(x * scale.days_per_unit);
  return Date{std::chrono::sys_days{scale.epoch} + std::chrono::days{days}};
}

// ---------------------------------------------------------------------------
// Parsing helpers

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Yields non-blank, non-comment lines with their 1-based physical line number.
inline std::vector<std::pair<std::size_t, std::string>> content_lines(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.emplace_back(n, std::string(t));
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  // strtod handles the full decimal grammar; require the whole field to be consumed.
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<int> parse_int(std::string_view s) {
  s = trim(s);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<bool> parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "1" || s == "true" || s == "TRUE" || s == "True") return true;
  if (s == "0" || s == "false" || s == "FALSE" || s == "False") return false;
  return std::nullopt;
}

inline TaskFamily parse_family(std::string_view s) {
  std::string up;
  for (char c : trim(s)) up.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "HCAST") return TaskFamily::HCAST;
  if (up == "RE_BENCH") return TaskFamily::RE_BENCH;
  if (up == "SWAA") return TaskFamily::SWAA;
  return TaskFamily::OTHER;
}

inline std::string_view family_name(TaskFamily f) {
  switch (f) {
    case TaskFamily::HCAST: return "HCAST";
    case TaskFamily::RE_BENCH: return "RE_BENCH";
    case TaskFamily::SWAA: return "SWAA";
    case TaskFamily::OTHER: return "OTHER";
  }
  return "OTHER";
}

/// Field access over either a CSV row (by header index) or a JSON object.
struct RowView {
  const std::vector<std::string>* fields = nullptr;
  const std::map<std::string, std::size_t>* columns = nullptr;
  const nlohmann::json* object = nullptr;

  bool has(const std::string& key) const {
    if (object) return object->contains(key) && !(*object)[key].is_null();
    return columns->count(key) > 0;
  }

  std::string text(const std::string& key) const {
    if (object) {
      const auto& v = (*object)[key];
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
      return v.dump();
    }
    return (*fields)[columns->at(key)];
  }
};

struct RunRowParser {
  std::set<std::tuple<std::string, std::string, int>> seen;
  std::map<std::pair<std::string, std::string>, int> next_attempt;
  std::vector<RunRecord> accepted;

  void operator()(const RowView& row, std::size_t index, RunIngest& out) {
    auto reject = [&](RowErrorKind kind, std::string msg) { out.rejects.push_back({index, kind, std::move(msg)}); };

    RunRecord r;
    r.model_id = std::string(trim(row.text("model_id")));
    r.task_id = std::string(trim(row.text("task_id")));
    if (r.model_id.empty() || r.task_id.empty()) return reject(RowErrorKind::MalformedRow, "empty model_id or task_id");
    r.task_family = parse_family(row.text("task_family"));

    const auto minutes = parse_double(row.text("human_minutes"));
    if (!minutes) return reject(RowErrorKind::MalformedRow, "human_minutes is not a number");
    if (*minutes <= 0.0) return reject(RowErrorKind::NonPositiveDifficulty, "human_minutes must be > 0");
    r.human_minutes = *minutes;

    const auto s = parse_double(row.text("success"));
    if (!s || (*s != 0.0 && *s != 1.0)) return reject(RowErrorKind::NonBinarySuccess, "success must be 0 or 1");
    r.success = static_cast<int>(*s);

    if (row.has("weight")) {
      const auto w = parse_double(row.text("weight"));
      if (!w || *w < 0.0) return reject(RowErrorKind::MalformedRow, "weight must be a non-negative number");
      r.weight = *w;
    }

    const auto key = std::make_pair(r.model_id, r.task_id);
    if (row.has("attempt")) {
      const auto a = parse_int(row.text("attempt"));
      if (!a) return reject(RowErrorKind::MalformedRow, "attempt must be an integer");
      r.attempt = *a;
    } else {
      r.attempt = next_attempt[key];
    }
    if (!seen.emplace(r.model_id, r.task_id, r.attempt).second)
      return reject(RowErrorKind::DuplicateRun, r.model_id + "/" + r.task_id + " attempt " + std::to_string(r.attempt));
    next_attempt[key] = std::max(next_attempt[key], r.attempt + 1);

    accepted.push_back(std::move(r));
  }
};

inline const std::vector<std::string>& run_columns() {
  static const std::vector<std::string> cols{"model_id", "task_id", "task_family", "human_minutes", "success"};
  return cols;
}

inline const std::vector<std::string>& model_columns() {
  static const std::vector<std::string> cols{"model_id", "release_date", "is_sota", "k_thinking"};
  return cols;
}

inline std::map<std::string, std::size_t> read_header(const std::string& line, const std::vector<std::string>& required) {
  std::map<std::string, std::size_t> columns;
  const auto names = split_csv_line(line);
  for (std::size_t i = 0; i < names.size(); ++i) columns[std::string(trim(names[i]))] = i;
  for (const auto& c : required) require(columns.count(c) > 0, ErrorKind::MissingColumn, c);
  return columns;
}

template <class RowFn>
void for_each_row(std::istream& in, InputFormat format, const std::vector<std::string>& required, RowFn&& fn,
                  std::size_t& row_count, std::vector<RowError>* rejects) {
  const auto lines = content_lines(in);
  if (format == InputFormat::CSV) {
    if (lines.empty()) return;
    const auto columns = read_header(lines.front().second, required);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      ++row_count;
      const auto fields = split_csv_line(lines[i].second);
      if (fields.size() < columns.size()) {
        if (rejects) {
          rejects->push_back({i, RowErrorKind::MalformedRow, "expected " + std::to_string(columns.size()) + " fields"});
          continue;
        }
        throw Error(ErrorKind::Precondition, "row " + std::to_string(i) + ": too few fields");
      }
      fn(RowView{&fields, &columns, nullptr}, i);
    }
    return;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ++row_count;
    nlohmann::json obj = nlohmann::json::parse(lines[i].second, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      if (rejects) {
        rejects->push_back({i + 1, RowErrorKind::MalformedRow, "not a JSON object"});
        continue;
      }
      throw Error(ErrorKind::Precondition, "line " + std::to_string(i + 1) + ": not a JSON object");
    }
    for (const auto& c : required)
      require(obj.contains(c), ErrorKind::MissingColumn, c + " (line " + std::to_string(i + 1) + ")");
    fn(RowView{nullptr, nullptr, &obj}, i + 1);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public parsers

/// Parses the canonical run schema. Row-level problems are collected in `rejects`;
/// a missing required column aborts with MissingColumn.
inline RunIngest parse_runs(std::istream& source, InputFormat format) {
  RunIngest out;
  detail::RunRowParser parser;
  detail::for_each_row(
      source, format, detail::run_columns(), [&](const detail::RowView& row, std::size_t i) { parser(row, i, out); },
      out.input_rows, &out.rejects);
  out.table = RunTable(std::move(parser.accepted));
  return out;
}

inline ModelTable parse_models(std::istream& source, InputFormat format = InputFormat::CSV) {
  std::vector<ModelRecord> models;
  std::size_t rows = 0;
  detail::for_each_row(
      source, format, detail::model_columns(),
      [&](const detail::RowView& row, std::size_t i) {
        ModelRecord m;
        m.model_id = std::string(detail::trim(row.text("model_id")));
        try {
          m.release_date = parse_date(detail::trim(row.text("release_date")));
        } catch (const Error&) {
          throw Error(ErrorKind::UnparseableDate, "row " + std::to_string(i) + ": '" + row.text("release_date") + "'");
        }
        const auto sota = detail::parse_bool(row.text("is_sota"));
        const auto think = detail::parse_bool(row.text("k_thinking"));
        require(sota && think, ErrorKind::Precondition, "row " + std::to_string(i) + ": is_sota/k_thinking must be 0/1");
        m.is_sota = *sota;
        m.k_thinking = *think;
        models.push_back(std::move(m));
      },
      rows, nullptr);
  return ModelTable(std::move(models));
}

/// SOTA subset ordered by release date (stable for ties).
inline ModelTable filter_sota(const ModelTable& models) {
  std::vector<ModelRecord> out;
  for (const auto& m : models)
    if (m.is_sota) out.push_back(m);
  std::stable_sort(out.begin(), out.end(), [](const ModelRecord& a, const ModelRecord& b) {
    return std::chrono::sys_days{a.release_date} < std::chrono::sys_days{b.release_date};
  });
  return ModelTable(std::move(out));
}

/// Keeps only runs whose model appears in `models`.
inline RunTable restrict_runs(const RunTable& runs, const ModelTable& models) {
  std::vector<RunRecord> out;
  for (const auto& r : runs)
    if (models.find(r.model_id)) out.push_back(r);
  return RunTable(std::move(out));
}

/// Reads METR's public `runs.jsonl` layout: `alias` (or `model`), `task_id`, `task_source`,
/// `human_minutes`, `score_binarized`, optional `invsqrt_task_weight`. `aliases` renames
/// upstream model names to local model ids; names without an entry pass through unchanged.
inline RunIngest parse_metr_runs(std::istream& source, const std::unordered_map<std::string, std::string>& aliases,
                                 bool use_weights = false) {
  RunIngest out;
  detail::RunRowParser parser;
  const auto lines = detail::content_lines(source);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ++out.input_rows;
    const auto obj = nlohmann::json::parse(lines[i].second, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      out.rejects.push_back({i + 1, RowErrorKind::MalformedRow, "not a JSON object"});
      continue;
    }
    const char* model_key = obj.contains("alias") ? "alias" : "model";
    for (const char* key : {model_key, "task_id", "human_minutes", "score_binarized"})
      require(obj.contains(key), ErrorKind::MissingColumn, std::string(key) + " (line " + std::to_string(i + 1) + ")");

    nlohmann::json canon;
    std::string model = obj[model_key].get<std::string>();
    if (auto it = aliases.find(model); it != aliases.end()) model = it->second;
    canon["model_id"] = model;
    canon["task_id"] = obj["task_id"];
    canon["task_family"] = obj.contains("task_source") ? obj["task_source"] : nlohmann::json("OTHER");
    canon["human_minutes"] = obj["human_minutes"];
    canon["success"] = obj["score_binarized"];
    if (use_weights && obj.contains("invsqrt_task_weight")) canon["weight"] = obj["invsqrt_task_weight"];
    parser(detail::RowView{nullptr, nullptr, &canon}, i + 1, out);
  }
  out.table = RunTable(std::move(parser.accepted));
  return out;
}

/// Two-column CSV `metr_alias,model_id`.
inline std::unordered_map<std::string, std::string> parse_alias_map(std::istream& source) {
  std::unordered_map<std::string, std::string> out;
  std::size_t rows = 0;
  detail::for_each_row(
      source, InputFormat::CSV, {"metr_alias", "model_id"},
      [&](const detail::RowView& row, std::size_t) {
        out[std::string(detail::trim(row.text("metr_alias")))] = std::string(detail::trim(row.text("model_id")));
      },
      rows, nullptr);
  return out;
}

// ---------------------------------------------------------------------------
// Writers

inline void write_runs_csv(std::ostream& os, const RunTable& runs) {
  os << "model_id,task_id,task_family,human_minutes,success,attempt,weight\n";
  for (const auto& r : runs) {
    os << detail::csv_escape(r.model_id) << ',' << detail::csv_escape(r.task_id) << ',' << detail::family_name(r.task_family)
       << ',' << nlohmann::json(r.human_minutes).dump() << ',' << r.success << ',' << r.attempt << ','
       << nlohmann::json(r.weight).dump() << '\n';
  }
}

inline void write_models_csv(std::ostream& os, const ModelTable& models) {
  os << "model_id,release_date,is_sota,k_thinking\n";
  for (const auto& m : models) {
    os << detail::csv_escape(m.model_id) << ',' << format_date(m.release_date) << ',' << (m.is_sota ? 1 : 0) << ','
       << (m.k_thinking ? 1 : 0) << '\n';
  }
}

}  // namespace capcurve
