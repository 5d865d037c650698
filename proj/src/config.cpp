#include "listrecon/config.hpp"

#include <fstream>
#include <sstream>

#include "listrecon/errors.hpp"

namespace listrecon {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw InvalidConfigError("config line " + std::to_string(lineno) +
                               " is not 'key = value': " + t);
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw InvalidConfigError("config line " + std::to_string(lineno) +
                               " has an empty key");
    cfg.kv_[key] = value;
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool RunConfig::has(const std::string& key) const {
  return kv_.find(key) != kv_.end();
}

void RunConfig::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end())
    throw InvalidConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string RunConfig::get_or(const std::string& key,
                              const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidConfigError("config key '" + key + "' is not a number: " + v);
  }
}

double RunConfig::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  double d = get_double(key);  // accepts 1e5-style counts
  auto i = static_cast<std::int64_t>(d);
  if (static_cast<double>(i) != d)
    throw InvalidConfigError("config key '" + key + "' is not an integer: " +
                             get(key));
  return i;
}

std::int64_t RunConfig::get_int_or(const std::string& key,
                                   std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t RunConfig::get_u64_or(const std::string& key,
                                    std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = get(key);
  try {
    std::size_t pos = 0;
    unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(u);
  } catch (const std::exception&) {
    throw InvalidConfigError("config key '" + key +
                             "' is not an unsigned integer: " + v);
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
  return out.str();
}

}  // namespace listrecon
