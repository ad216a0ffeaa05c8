#include "npivlab/error.hpp"
#include "npivlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace npivlab {

ResultTable::ResultTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void ResultTable::add_row(std::vector<Cell> row) {
  require(row.size() == columns_.size(), ErrorCode::invalid_argument,
          "row has " + std::to_string(row.size()) + " cells, table has " +
              std::to_string(columns_.size()) + " columns");
  rows_.push_back(std::move(row));
}

std::size_t ResultTable::column_index(std::string_view name) const {
  const auto it = std::find(columns_.begin(), columns_.end(), name);
  require(it != columns_.end(), ErrorCode::invalid_argument,
          "no column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - columns_.begin());
}

double ResultTable::number(std::size_t row, std::string_view column) const {
  const Cell& c = rows_.at(row).at(column_index(column));
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (const auto* b = std::get_if<bool>(&c)) return *b ? 1.0 : 0.0;
  fail(ErrorCode::invalid_argument, "column '" + std::string(column) + "' is not numeric");
}

const std::string& ResultTable::text(std::size_t row, std::string_view column) const {
  const Cell& c = rows_.at(row).at(column_index(column));
  const auto* s = std::get_if<std::string>(&c);
  require(s != nullptr, ErrorCode::invalid_argument,
          "column '" + std::string(column) + "' is not text");
  return *s;
}

void ResultTable::add_metadata(std::string key, std::string value) {
  metadata_.emplace_back(std::move(key), std::move(value));
}

void ResultTable::add_postcondition(std::string name, bool ok, std::string detail) {
  post_.push_back({std::move(name), ok, std::move(detail)});
}

bool ResultTable::postconditions_ok() const {
  return std::all_of(post_.begin(), post_.end(), [](const Postcondition& p) { return p.ok; });
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string timestamp_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string format_cell(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    if (std::isnan(*d)) return "nan";
    if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *d);
    return buf;
  }
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (const auto* b = std::get_if<bool>(&c)) return *b ? "true" : "false";
  return quote(std::get<std::string>(c));
}

std::string to_csv(const ResultTable& table, bool timestamp) {
  std::string out;
  for (const auto& [k, v] : table.metadata()) out += "# " + k + ": " + one_line(v) + "\n";
  for (const auto& p : table.postconditions()) {
    out += "# postcondition: " + p.name + " = " + (p.ok ? "pass" : "FAIL");
    if (!p.detail.empty()) out += " (" + one_line(p.detail) + ")";
    out += "\n";
  }
  if (timestamp) out += "# generated_at: " + timestamp_utc() + "\n";
  for (std::size_t i = 0; i < table.columns().size(); ++i) {
    if (i) out += ',';
    out += quote(table.columns()[i]);
  }
  out += "\n";
  for (const auto& row : table.rows()) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_cell(row[i]);
    }
    out += "\n";
  }
  return out;
}

void emit_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open '" + path + "' for writing");
  out << to_csv(table, true);
  out.flush();
  if (!out) fail(ErrorCode::io, "write to '" + path + "' failed");
}

ParsedCsv parse_csv(const std::string& text) {
  ParsedCsv p;
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool at_line_start = true;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (at_line_start && !in_quotes && c == '#') {
      const std::size_t end = text.find('\n', i);
      p.comments.push_back(text.substr(i, end == std::string::npos ? std::string::npos : end - i));
      if (end == std::string::npos) break;
      i = end;
      continue;
    }
    at_line_start = false;
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      record.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(record));
      record.clear();
      at_line_start = true;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  if (!records.empty()) {
    p.header = std::move(records.front());
    p.rows.assign(std::make_move_iterator(records.begin() + 1),
                  std::make_move_iterator(records.end()));
  }
  return p;
}

unsigned worker_count() {
  unsigned n = 0;
  if (const char* env = std::getenv("NPIVLAB_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0') n = static_cast<unsigned>(std::min(v, 1024UL));
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace npivlab
