#include "config.hpp"

#include <cctype>
#include <cmath>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "reparam/errors.hpp"

namespace reparam::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::regex& key_pattern() {
  static const std::regex re(R"([A-Za-z_][A-Za-z0-9_]*(\[[0-9]+\])?(\.[A-Za-z_][A-Za-z0-9_]*(\[[0-9]+\])?)*)");
  return re;
}

const std::set<std::string>& sections() {
  static const std::set<std::string> s{"scenario", "parametrization", "potential", "loss",
                                       "integrator", "problem", "checks", "loop"};
  return s;
}

void validate_key(const std::string& key, const std::string& where) {
  if (!std::regex_match(key, key_pattern())) throw ConfigError(where + ": malformed key '" + key + "'");
  const std::string head = key.substr(0, key.find_first_of(".["));
  if (!sections().count(head)) {
    throw ConfigError(where + ": unknown section '" + head + "' in key '" + key + "'");
  }
}

double parse_real(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t.empty()) throw ConfigError(what + ": expected a number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (errno != 0 || end != t.c_str() + t.size()) throw ConfigError(what + ": '" + t + "' is not a number");
  return v;
}

std::vector<std::string> split_list(const std::string& text, char extra) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',' || c == extra || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& source) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = source + ":" + std::to_string(number);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    validate_key(key, where);
    if (cfg.entries_.count(key)) {
      throw ConfigError(where + ": duplicate key '" + key + "' (first at " + cfg.origin_[key] + ")");
    }
    cfg.entries_[key] = value;
    cfg.origin_[key] = where;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path);
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  validate_key(key, "override");
  entries_[key] = value;
  origin_[key] = "override";
}

bool Config::has(const std::string& key) const { return entries_.count(key) > 0; }

const std::string& Config::raw(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
  const std::lock_guard<std::mutex> lock(usage_->mutex);
  usage_->keys.insert(key);
  return it->second;
}

std::string Config::where(const std::string& key) const {
  const auto it = origin_.find(key);
  return it == origin_.end() ? key : it->second + " (" + key + ")";
}

std::string Config::str(const std::string& key) const { return raw(key); }

std::string Config::str(const std::string& key, const std::string& fallback) const {
  return has(key) ? raw(key) : fallback;
}

double Config::real(const std::string& key) const { return parse_real(raw(key), where(key)); }

double Config::real(const std::string& key, double fallback) const {
  return has(key) ? real(key) : fallback;
}

long long Config::integer(const std::string& key) const {
  const double v = real(key);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError(where(key) + ": expected an integer");
  return static_cast<long long>(v);
}

long long Config::integer(const std::string& key, long long fallback) const {
  return has(key) ? integer(key) : fallback;
}

bool Config::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = raw(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where(key) + ": expected true or false");
}

Vector Config::vector(const std::string& key) const {
  const auto items = split_list(raw(key), ',');
  if (items.empty()) throw ConfigError(where(key) + ": empty vector");
  Vector v(static_cast<Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) v[static_cast<Index>(i)] = parse_real(items[i], where(key));
  return v;
}

std::optional<Vector> Config::vector_opt(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return vector(key);
}

Matrix Config::matrix(const std::string& key) const {
  const std::string text = raw(key);
  std::vector<Vector> rows;
  std::stringstream in(text);
  std::string row;
  while (std::getline(in, row, ';')) {
    const auto items = split_list(row, ',');
    if (items.empty()) continue;
    Vector r(static_cast<Index>(items.size()));
    for (std::size_t i = 0; i < items.size(); ++i) r[static_cast<Index>(i)] = parse_real(items[i], where(key));
    rows.push_back(r);
  }
  if (rows.empty()) throw ConfigError(where(key) + ": empty matrix");
  Matrix m(static_cast<Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw ConfigError(where(key) + ": ragged matrix rows");
    m.row(static_cast<Index>(i)) = rows[i].transpose();
  }
  return m;
}

std::vector<long long> Config::integers(const std::string& key) const {
  const Vector v = vector(key);
  std::vector<long long> out;
  for (Index i = 0; i < v.size(); ++i) {
    if (v[i] != std::floor(v[i])) throw ConfigError(where(key) + ": expected integers");
    out.push_back(static_cast<long long>(v[i]));
  }
  return out;
}

std::size_t Config::count_indexed(const std::string& prefix) const {
  std::size_t n = 0;
  while (true) {
    const std::string head = prefix + "[" + std::to_string(n) + "]";
    const auto it = entries_.lower_bound(head);
    if (it == entries_.end() || it->first.compare(0, head.size(), head) != 0) break;
    const char next = it->first.size() > head.size() ? it->first[head.size()] : '\0';
    if (next != '.' && next != '\0') break;
    ++n;
  }
  return n;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

std::string Config::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> Config::unused_keys() const {
  const std::lock_guard<std::mutex> lock(usage_->mutex);
  std::vector<std::string> out;
  for (const auto& kv : entries_) {
    if (!usage_->keys.count(kv.first)) out.push_back(kv.first);
  }
  return out;
}

}  // namespace reparam::cli
