#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "disteval/error.hpp"
#include "disteval/format.hpp"
#include "disteval/model.hpp"

namespace disteval {

namespace detail {

// Line reader accepting LF or CRLF and a leading UTF-8 byte-order mark.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++number_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    return true;
  }

  std::size_t number() const { return number_; }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError("line " + std::to_string(number_) + ": " + message);
  }

 private:
  std::istream& in_;
  std::size_t number_ = 0;
};

inline bool is_blank_or_comment(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

}  // namespace detail

// Parses "request_id item_id rank score system_id" lines for one system.
// Ranks must form 1..k per request; the parser never re-ranks by score.
inline Run parse_run(std::istream& in) {
  detail::LineReader reader(in);
  Run run;
  std::map<std::string, std::map<long long, std::string>, std::less<>> ranked;
  std::map<std::string, std::set<std::string, std::less<>>, std::less<>> seen;
  std::string line;
  while (reader.next(line)) {
    if (detail::is_blank_or_comment(line)) continue;
    const auto fields = split_whitespace(line);
    if (fields.size() != 5) {
      reader.fail("expected 5 fields (request item rank score system), got " +
                  std::to_string(fields.size()));
    }
    const std::string request(fields[0]);
    const std::string item(fields[1]);
    const auto rank = parse_integer(fields[2]);
    if (!rank) reader.fail("non-numeric rank '" + std::string(fields[2]) + "'");
    if (*rank < 1) reader.fail("rank must be >= 1");
    if (!parse_double(fields[3])) {
      reader.fail("non-numeric score '" + std::string(fields[3]) + "'");
    }
    if (run.system_id.empty()) {
      run.system_id = std::string(fields[4]);
    } else if (run.system_id != fields[4]) {
      reader.fail("mixed system ids '" + run.system_id + "' and '" +
                  std::string(fields[4]) + "'");
    }
    if (!ranked[request].emplace(*rank, item).second) {
      reader.fail("duplicate rank " + std::to_string(*rank) + " for request " +
                  request);
    }
    if (!seen[request].insert(item).second) {
      reader.fail("duplicate item " + item + " for request " + request);
    }
  }
  if (run.system_id.empty()) throw ParseError("run file has no records");
  for (auto& [request, by_rank] : ranked) {
    ItemList list;
    list.reserve(by_rank.size());
    long long expected = 1;
    for (auto& [rank, item] : by_rank) {
      if (rank != expected) {
        throw ParseError("non-contiguous ranks for request " + request +
                         ": expected rank " + std::to_string(expected) +
                         ", found " + std::to_string(rank));
      }
      list.push_back(std::move(item));
      ++expected;
    }
    run.requests.emplace(request, std::move(list));
  }
  return run;
}

inline Run parse_run(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_run(in);
}

// Scores are written as k - rank + 1; they carry no meaning on re-parse.
inline std::string serialize_run(const Run& run) {
  std::string out;
  for (const auto& [request, items] : run.requests) {
    const auto k = items.size();
    for (std::size_t i = 0; i < k; ++i) {
      out += request;
      out += ' ';
      out += items[i];
      out += ' ';
      out += std::to_string(i + 1);
      out += ' ';
      out += std::to_string(k - i);
      out += ' ';
      out += run.system_id;
      out += '\n';
    }
  }
  return out;
}

// Parses "request_id item_id gain" lines.
inline TruthSet parse_truth(std::istream& in) {
  detail::LineReader reader(in);
  TruthSet truth;
  std::string line;
  while (reader.next(line)) {
    if (detail::is_blank_or_comment(line)) continue;
    const auto fields = split_whitespace(line);
    if (fields.size() != 3) {
      reader.fail("expected 3 fields (request item gain), got " +
                  std::to_string(fields.size()));
    }
    const auto gain = parse_double(fields[2]);
    if (!gain) reader.fail("non-numeric gain '" + std::string(fields[2]) + "'");
    if (*gain < 0.0) reader.fail("negative gain " + std::string(fields[2]));
    try {
      truth.add(std::string(fields[0]), std::string(fields[1]), *gain);
    } catch (const ValidationError& e) {
      reader.fail(e.what());
    }
  }
  return truth;
}

inline TruthSet parse_truth(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_truth(in);
}

// Requests without any pair cannot be expressed and are dropped.
inline std::string serialize_truth(const TruthSet& truth) {
  std::string out;
  for (const auto& [request, row] : truth.requests()) {
    for (const auto& [item, gain] : row) {
      out += request + ' ' + item + ' ' + format_number(gain) + '\n';
    }
  }
  return out;
}

// Comma-separated table: header names the columns, first column is the
// subject id, multi-valued cells use '|'. Quoting is not supported.
inline AttributeTable parse_attributes(std::istream& in, SubjectKind kind) {
  detail::LineReader reader(in);
  std::string line;
  bool have_header = false;
  while (reader.next(line)) {
    if (!trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw ParseError("attribute table has no header");
  std::vector<std::string> columns;
  for (auto cell : split(line, ',')) columns.emplace_back(trim(cell));
  if (columns.empty() || columns.front().empty()) {
    reader.fail("empty header");
  }
  std::vector<std::string> attributes(columns.begin() + 1, columns.end());
  AttributeTable table;
  try {
    table = AttributeTable(kind, attributes);
  } catch (const ValidationError& e) {
    reader.fail(std::string("bad header: ") + e.what());
  }
  while (reader.next(line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() > columns.size()) {
      reader.fail("row has " + std::to_string(cells.size()) +
                  " cells but header has " + std::to_string(columns.size()));
    }
    const std::string subject(trim(cells[0]));
    if (subject.empty()) reader.fail("empty subject id");
    AttributeTable::Row row;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      std::vector<std::string> values;
      for (auto v : split(cells[c], '|')) {
        const auto t = trim(v);
        if (!t.empty()) values.emplace_back(t);
      }
      row.emplace(attributes[c - 1], std::move(values));
    }
    if (table.contains(subject)) reader.fail("duplicate subject id " + subject);
    table.add(subject, std::move(row));
  }
  return table;
}

inline AttributeTable parse_attributes(std::string_view text, SubjectKind kind) {
  std::istringstream in{std::string(text)};
  return parse_attributes(in, kind);
}

inline std::string serialize_attributes(const AttributeTable& table) {
  std::string out = table.kind() == SubjectKind::user ? "user" : "item";
  for (const auto& a : table.attributes()) out += ',' + a;
  out += '\n';
  for (const auto& [subject, row] : table.rows()) {
    out += subject;
    for (const auto& a : table.attributes()) {
      out += ',';
      const auto& vals = row.find(a)->second;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i > 0) out += '|';
        out += vals[i];
      }
    }
    out += '\n';
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path,
                       std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

namespace detail {

template <typename Parse>
auto parse_file(const std::filesystem::path& path, Parse&& parse) {
  const std::string text = read_file(path);
  try {
    return parse(std::string_view(text));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace detail

inline Run load_run(const std::filesystem::path& path) {
  return detail::parse_file(path, [](std::string_view t) { return parse_run(t); });
}

inline TruthSet load_truth(const std::filesystem::path& path) {
  return detail::parse_file(path,
                            [](std::string_view t) { return parse_truth(t); });
}

inline AttributeTable load_attributes(const std::filesystem::path& path,
                                      SubjectKind kind) {
  return detail::parse_file(
      path, [kind](std::string_view t) { return parse_attributes(t, kind); });
}

inline RunSet load_runs(const std::vector<std::filesystem::path>& paths) {
  if (paths.empty()) throw ValidationError("no run files given");
  RunSet runs;
  for (const auto& p : paths) add_run(runs, load_run(p));
  return runs;
}

// Layout: <dir>/<rep_id>/runs/<any files> and <dir>/<rep_id>/truth[.ext].
// Repetitions are ordered by directory name.
inline RepetitionSet load_repetitions(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> rep_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) rep_dirs.push_back(entry.path());
  }
  std::sort(rep_dirs.begin(), rep_dirs.end());
  RepetitionSet set;
  for (const auto& rep_dir : rep_dirs) {
    Repetition rep;
    rep.id = rep_dir.filename().string();
    const fs::path runs_dir = rep_dir / "runs";
    if (!fs::is_directory(runs_dir)) {
      throw IoError("repetition " + rep.id + " has no runs/ directory");
    }
    std::vector<fs::path> run_files;
    for (const auto& entry : fs::directory_iterator(runs_dir)) {
      if (entry.is_regular_file()) run_files.push_back(entry.path());
    }
    std::sort(run_files.begin(), run_files.end());
    rep.runs = load_runs(run_files);
    std::vector<fs::path> truth_files;
    for (const auto& entry : fs::directory_iterator(rep_dir)) {
      if (entry.is_regular_file() && entry.path().stem() == "truth") {
        truth_files.push_back(entry.path());
      }
    }
    if (truth_files.size() != 1) {
      throw IoError("repetition " + rep.id +
                    " needs exactly one truth file, found " +
                    std::to_string(truth_files.size()));
    }
    rep.truth = load_truth(truth_files.front());
    set.add(std::move(rep));
  }
  if (set.empty()) throw IoError("no repetitions under " + dir.string());
  return set;
}

}  // namespace disteval
