#pragma once

// File formats.
//
// Dataset (comma-separated, header row): one column per covariate factor, in
// schema order, then r1..rp. Column r_i holds the rank given to item i, so
// the p rank columns of a row form a one-line word; its lexicographic
// position is the PermIndex of the observed ranking. Fields are trimmed of
// surrounding blanks; quoting is not supported.
//
// Schema (JSON): {"items": ["a", "b", ...], "factors": [{"name": "...",
// "levels": ["...", ...]}, ...]}. The category of a row is the lexicographic
// position of its level tuple in the product of the level lists, first
// factor varying slowest. A schema with no factors has a single category.
//
// Counts (comma-separated): header "category,z1,...,z{p!}", then one row per
// category with its counts.
//
// Traces: header "iteration,theta1..theta{p!},pi1..pi{g},accepted"; lines
// starting with '#' are comments. Reals are written with 17 significant
// digits so that a trace re-reads to identical doubles.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rankda/error.hpp"
#include "rankda/model.hpp"
#include "rankda/oracle.hpp"
#include "rankda/permutation.hpp"
#include "rankda/samplers.hpp"

namespace rankda {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

inline long long parse_integer(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw DataError(where + ": '" + s + "' is not an integer");
  }
  if (pos != s.size()) throw DataError(where + ": '" + s + "' is not an integer");
  return v;
}

inline double parse_real(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DataError(where + ": '" + s + "' is not a number");
  }
  if (pos != s.size()) throw DataError(where + ": '" + s + "' is not a number");
  return v;
}

}  // namespace detail

struct Factor {
  std::string name;
  std::vector<std::string> levels;
};

class Schema {
public:
  Schema(std::vector<std::string> items, std::vector<Factor> factors)
      : items_(std::move(items)), factors_(std::move(factors)) {
    if (items_.empty()) throw ConfigError("schema: at least one item required");
    if (items_.size() > static_cast<std::size_t>(kDefaultMaxItems)) {
      throw ConfigError("schema: at most " + std::to_string(kDefaultMaxItems) + " items supported");
    }
    categories_ = 1;
    for (const auto& f : factors_) {
      if (f.name.empty()) throw ConfigError("schema: factor without a name");
      if (f.levels.empty()) throw ConfigError("schema: factor '" + f.name + "' has no levels");
      for (std::size_t i = 0; i < f.levels.size(); ++i)
        for (std::size_t k = i + 1; k < f.levels.size(); ++k)
          if (f.levels[i] == f.levels[k]) throw ConfigError("schema: duplicate level '" + f.levels[i] + "'");
      categories_ *= f.levels.size();
    }
  }

  static Schema from_json(const nlohmann::json& j) {
    try {
      std::vector<std::string> items = j.at("items").get<std::vector<std::string>>();
      std::vector<Factor> factors;
      if (j.contains("factors")) {
        for (const auto& f : j.at("factors")) {
          factors.push_back({f.at("name").get<std::string>(), f.at("levels").get<std::vector<std::string>>()});
        }
      }
      return Schema(std::move(items), std::move(factors));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("schema: ") + e.what());
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["items"] = items_;
    j["factors"] = nlohmann::json::array();
    for (const auto& f : factors_) j["factors"].push_back({{"name", f.name}, {"levels", f.levels}});
    return j;
  }

  int items() const { return static_cast<int>(items_.size()); }
  const std::vector<std::string>& item_names() const { return items_; }
  const std::vector<Factor>& factors() const { return factors_; }
  std::size_t categories() const { return categories_; }

  /// Category of a level tuple; throws DataError on an unknown level.
  std::size_t category(const std::vector<std::string>& levels) const {
    if (levels.size() != factors_.size()) throw DataError("expected " + std::to_string(factors_.size()) + " levels");
    std::size_t c = 0;
    for (std::size_t f = 0; f < factors_.size(); ++f) {
      const auto& lv = factors_[f].levels;
      const auto it = std::find(lv.begin(), lv.end(), levels[f]);
      if (it == lv.end()) throw DataError("unknown level '" + levels[f] + "' of factor '" + factors_[f].name + "'");
      c = c * lv.size() + static_cast<std::size_t>(it - lv.begin());
    }
    return c;
  }

  std::vector<std::string> levels_of(std::size_t category) const {
    if (category >= categories_) throw std::out_of_range("schema: category out of range");
    std::vector<std::string> out(factors_.size());
    for (std::size_t f = factors_.size(); f-- > 0;) {
      const auto& lv = factors_[f].levels;
      out[f] = lv[category % lv.size()];
      category /= lv.size();
    }
    return out;
  }

private:
  std::vector<std::string> items_;
  std::vector<Factor> factors_;
  std::size_t categories_ = 1;
};

inline Schema load_schema(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema " + path.string() + ": " + e.what());
  }
  return Schema::from_json(j);
}

struct DataRow {
  std::vector<std::string> levels;
  Permutation ranking;
  std::size_t category;
};

struct Dataset {
  Schema schema;
  std::vector<DataRow> rows;
  RankCounts counts;
};

/// Tallies rows into RankCounts under the schema.
inline RankCounts tally(const Schema& schema, const std::vector<DataRow>& rows) {
  const auto states = static_cast<std::size_t>(factorial(schema.items()));
  std::vector<std::vector<std::int64_t>> n(schema.categories(), std::vector<std::int64_t>(states, 0));
  for (const auto& r : rows) ++n[r.category][rank(r.ranking).offset()];
  return RankCounts(schema.items(), std::move(n));
}

inline Dataset read_dataset(std::istream& in, const Schema& schema, const std::string& name = "dataset") {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError(name + ": empty file");
  ++line_no;
  const auto header = detail::split_csv(line);
  const std::size_t nf = schema.factors().size();
  const auto p = static_cast<std::size_t>(schema.items());
  if (header.size() != nf + p) {
    throw DataError(name + " line 1: expected " + std::to_string(nf + p) + " columns, found " +
                    std::to_string(header.size()));
  }
  for (std::size_t f = 0; f < nf; ++f) {
    if (header[f] != schema.factors()[f].name) {
      throw DataError(name + " line 1: column " + std::to_string(f + 1) + " should be '" + schema.factors()[f].name +
                      "', found '" + header[f] + "'");
    }
  }
  for (std::size_t i = 0; i < p; ++i) {
    if (header[nf + i] != "r" + std::to_string(i + 1)) {
      throw DataError(name + " line 1: expected rank column r" + std::to_string(i + 1));
    }
  }
  std::vector<DataRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::string where = name + " line " + std::to_string(line_no);
    const auto fields = detail::split_csv(line);
    if (fields.size() != nf + p) {
      throw DataError(where + ": expected " + std::to_string(nf + p) + " columns, found " +
                      std::to_string(fields.size()));
    }
    std::vector<std::string> levels(fields.begin(), fields.begin() + static_cast<std::ptrdiff_t>(nf));
    std::vector<int> word(p);
    for (std::size_t i = 0; i < p; ++i) word[i] = static_cast<int>(detail::parse_integer(fields[nf + i], where));
    std::optional<Permutation> ranking;
    try {
      ranking.emplace(word);
    } catch (const std::invalid_argument&) {
      throw DataError(where + ": ranks are not a permutation of 1.." + std::to_string(p));
    }
    std::size_t category;
    try {
      category = schema.category(levels);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    rows.push_back({std::move(levels), std::move(*ranking), category});
  }
  auto counts = tally(schema, rows);
  return Dataset{schema, std::move(rows), std::move(counts)};
}

inline Dataset load_dataset(const std::filesystem::path& path, const Schema& schema) {
  auto in = detail::open_in(path);
  return read_dataset(in, schema, path.string());
}

inline void write_dataset(std::ostream& out, const Dataset& data) {
  const auto& s = data.schema;
  bool first = true;
  for (const auto& f : s.factors()) {
    out << (first ? "" : ",") << f.name;
    first = false;
  }
  for (int i = 1; i <= s.items(); ++i) {
    out << (first ? "" : ",") << "r" << i;
    first = false;
  }
  out << "\n";
  for (const auto& r : data.rows) {
    first = true;
    for (const auto& l : r.levels) {
      out << (first ? "" : ",") << l;
      first = false;
    }
    for (int v : r.ranking.images()) {
      out << (first ? "" : ",") << v;
      first = false;
    }
    out << "\n";
  }
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  auto out = detail::open_out(path);
  write_dataset(out, data);
}

inline void write_counts(std::ostream& out, const RankCounts& counts) {
  out << "category";
  for (std::size_t k = 1; k <= counts.states(); ++k) out << ",z" << k;
  out << "\n";
  for (std::size_t j = 0; j < counts.categories(); ++j) {
    out << j + 1;
    for (auto c : counts.row(j)) out << "," << c;
    out << "\n";
  }
}

inline RankCounts read_counts(std::istream& in, const std::string& name = "counts") {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<std::int64_t>> rows;
  std::size_t states = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty() || line[0] == '#') continue;
    const auto fields = detail::split_csv(line);
    if (states == 0) {
      if (fields.empty() || fields[0] != "category") throw DataError(name + ": missing header");
      states = fields.size() - 1;
      continue;
    }
    const std::string where = name + " line " + std::to_string(line_no);
    if (fields.size() != states + 1) throw DataError(where + ": wrong column count");
    if (detail::parse_integer(fields[0], where) != static_cast<long long>(rows.size() + 1)) {
      throw DataError(where + ": categories must be numbered 1, 2, ... in order");
    }
    std::vector<std::int64_t> r(states);
    for (std::size_t k = 0; k < states; ++k) {
      r[k] = detail::parse_integer(fields[k + 1], where);
      if (r[k] < 0) throw DataError(where + ": negative count");
    }
    rows.push_back(std::move(r));
  }
  int p = 0;
  while (p < kMaxWordLength && factorial(p) < states) ++p;
  if (states == 0 || factorial(p) != states) throw DataError(name + ": column count is not p! for any p");
  if (rows.empty()) throw DataError(name + ": no categories");
  return RankCounts(p, std::move(rows));
}

inline void write_trace(std::ostream& out, const ChainTrace& trace) {
  out << "# kernel = " << to_string(trace.kernel()) << "\n";
  out << "iteration";
  for (std::size_t k = 1; k <= trace.states(); ++k) out << ",theta" << k;
  for (std::size_t j = 1; j <= trace.categories(); ++j) out << ",pi" << j;
  out << ",accepted\n";
  for (std::size_t r = 0; r < trace.size(); ++r) {
    out << trace.iteration(r);
    for (double v : trace.theta(r)) out << "," << format_double(v);
    for (std::size_t j = 0; j < trace.categories(); ++j) out << "," << trace.pi(r, j).value();
    out << "," << (trace.accepted(r) ? 1 : 0) << "\n";
  }
}

inline ChainTrace read_trace(std::istream& in, const std::string& name = "trace") {
  std::string line;
  std::size_t line_no = 0;
  Kernel kernel = Kernel::gibbs;
  std::size_t states = 0, categories = 0;
  std::optional<ChainTrace> trace;
  std::vector<double> theta;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("# kernel = ", 0) == 0) {
      kernel = kernel_from_string(detail::trim(line.substr(11)));
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    const auto fields = detail::split_csv(line);
    if (!trace) {
      for (const auto& f : fields) {
        if (f.rfind("theta", 0) == 0) ++states;
        if (f.rfind("pi", 0) == 0) ++categories;
      }
      if (fields.size() != states + categories + 2 || fields.front() != "iteration" || fields.back() != "accepted") {
        throw DataError(name + ": malformed header");
      }
      trace.emplace(states, categories, kernel);
      theta.resize(states);
      continue;
    }
    const std::string where = name + " line " + std::to_string(line_no);
    if (fields.size() != states + categories + 2) throw DataError(where + ": wrong column count");
    const auto iteration = static_cast<std::size_t>(detail::parse_integer(fields[0], where));
    for (std::size_t k = 0; k < states; ++k) theta[k] = detail::parse_real(fields[1 + k], where);
    std::vector<PermIndex> pi(categories);
    for (std::size_t j = 0; j < categories; ++j) {
      const auto v = detail::parse_integer(fields[1 + states + j], where);
      if (v < 1 || static_cast<std::size_t>(v) > states) throw DataError(where + ": rank index out of range");
      pi[j] = PermIndex(static_cast<std::size_t>(v));
    }
    trace->push(iteration, theta, CentralRanks(std::move(pi)), detail::parse_integer(fields.back(), where) != 0);
  }
  if (!trace) throw DataError(name + ": missing header");
  return std::move(*trace);
}

inline void save_trace(const std::filesystem::path& path, const ChainTrace& trace) {
  auto out = detail::open_out(path);
  write_trace(out, trace);
}

inline ChainTrace load_trace(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  return read_trace(in, path.string());
}

/// Label of a joint state, e.g. "(1 2)" for (zeta_1, zeta_2). Blank-separated so it
/// can sit in a CSV field unquoted.
inline std::string state_label(const StateSpace& space, std::size_t s) {
  std::string out = "(";
  const auto r = space.ranks(s);
  for (std::size_t j = 0; j < r.size(); ++j) out += (j ? " " : "") + std::to_string(r[j].value());
  return out + ")";
}

inline void write_matrix(std::ostream& out, const TransitionMatrix& k) {
  out << "# rows and columns are joint states (pi_1,...,pi_g) of ranking indices, pi_1 varying slowest\n";
  out << "state";
  for (std::size_t t = 0; t < k.size(); ++t) out << "," << state_label(k.space, t);
  out << "\n";
  for (std::size_t s = 0; s < k.size(); ++s) {
    out << state_label(k.space, s);
    for (std::size_t t = 0; t < k.size(); ++t) out << "," << format_double(k(s, t));
    out << "\n";
  }
}

/// Flat key = value summary, keys kept in insertion order.
class Summary {
public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
      if (k == key) {
        v = value;
        return;
      }
    }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  void set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  std::string get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    throw std::out_of_range("summary: no key " + key);
  }
  bool contains(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return true;
    return false;
  }

  std::string to_text() const {
    std::string s;
    for (const auto& [k, v] : entries_) s += k + " = " + v + "\n";
    return s;
  }

  static Summary parse(std::istream& in) {
    Summary s;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find(" = ");
      if (eq == std::string::npos) throw DataError("summary: malformed line '" + line + "'");
      s.set(line.substr(0, eq), line.substr(eq + 3));
    }
    return s;
  }

private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = detail::open_out(path);
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace rankda
