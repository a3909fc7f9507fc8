#include "psir/keyvalue.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace psir {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_f64(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_f64(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValueError("keyvalue: '" + key + "' is not a number: " + s);
  }
}

} // namespace

void KeyValueFile::set(const std::string& key, const std::string& value) {
  for (auto& e : entries_)
    if (e.first == key) {
      e.second = value;
      return;
    }
  entries_.emplace_back(key, value);
}

void KeyValueFile::set_f64(const std::string& key, double value) {
  set(key, format_f64(value));
}

void KeyValueFile::set_i64(const std::string& key, std::int64_t value) {
  set(key, std::to_string(value));
}

void KeyValueFile::set_f64_list(const std::string& key,
                                const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ",";
    s += format_f64(values[i]);
  }
  set(key, s);
}

bool KeyValueFile::has(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return true;
  return false;
}

std::optional<std::string> KeyValueFile::get(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return e.second;
  return std::nullopt;
}

std::string KeyValueFile::require(const std::string& key) const {
  auto v = get(key);
  if (!v) throw ValueError("keyvalue: missing key '" + key + "'");
  return *v;
}

double KeyValueFile::require_f64(const std::string& key) const {
  return parse_f64(require(key), key);
}

std::int64_t KeyValueFile::require_i64(const std::string& key) const {
  const std::string s = require(key);
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValueError("keyvalue: '" + key + "' is not an integer: " + s);
  return v;
}

std::vector<double> KeyValueFile::require_f64_list(const std::string& key) const {
  const std::string s = require(key);
  std::vector<double> out;
  std::string item;
  std::istringstream iss(s);
  while (std::getline(iss, item, ',')) out.push_back(parse_f64(trim(item), key));
  return out;
}

double KeyValueFile::get_f64_or(const std::string& key, double fallback) const {
  auto v = get(key);
  return v ? parse_f64(*v, key) : fallback;
}

std::int64_t KeyValueFile::get_i64_or(const std::string& key,
                                      std::int64_t fallback) const {
  return has(key) ? require_i64(key) : fallback;
}

std::string KeyValueFile::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

void KeyValueFile::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("keyvalue: cannot open for write: " + path.string());
  os << to_string();
  os.flush();
  if (!os) throw Error("keyvalue: write failed: " + path.string());
}

KeyValueFile KeyValueFile::parse(const std::string& text) {
  KeyValueFile kv;
  std::istringstream iss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(iss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValueError("keyvalue: line " + std::to_string(lineno) + " has no '='");
    kv.entries_.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("keyvalue: cannot open: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

} // namespace psir
