#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gibbs_lines {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                    : message),
        line_(line) {}

  int line() const { return line_; }

 private:
  int line_ = 0;
};

// One parsed value. Arrays hold scalars only; the TOML subset accepted here
// covers comments, [section] headers, and single-line key = value pairs with
// string, boolean, integer, float, and flat array values.
struct ConfigValue {
  enum class Kind { boolean, integer, floating, string, array };

  Kind kind = Kind::integer;
  bool bool_value = false;
  long long int_value = 0;
  double float_value = 0.0;
  std::string string_value;
  std::vector<ConfigValue> items;
  int line = 0;

  static ConfigValue of_bool(bool v) {
    ConfigValue out;
    out.kind = Kind::boolean;
    out.bool_value = v;
    return out;
  }
  static ConfigValue of_int(long long v) {
    ConfigValue out;
    out.kind = Kind::integer;
    out.int_value = v;
    return out;
  }
  static ConfigValue of_double(double v) {
    ConfigValue out;
    out.kind = Kind::floating;
    out.float_value = v;
    return out;
  }
  static ConfigValue of_string(std::string v) {
    ConfigValue out;
    out.kind = Kind::string;
    out.string_value = std::move(v);
    return out;
  }
  static ConfigValue of_array(std::vector<ConfigValue> v) {
    ConfigValue out;
    out.kind = Kind::array;
    out.items = std::move(v);
    return out;
  }

  const char* kind_name() const {
    switch (kind) {
      case Kind::boolean: return "boolean";
      case Kind::integer: return "integer";
      case Kind::floating: return "float";
      case Kind::string: return "string";
      case Kind::array: return "array";
    }
    return "unknown";
  }
};

namespace detail {

inline bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

inline std::string strip(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Cuts an unquoted comment off a physical line.
inline std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

inline ConfigValue parse_scalar_token(const std::string& token, int line_no) {
  if (token.empty()) throw ConfigError("missing value", line_no);
  if (token == "true") return ConfigValue::of_bool(true);
  if (token == "false") return ConfigValue::of_bool(false);
  if (token.size() >= 2 && token.front() == '"') {
    if (token.back() != '"' || token.size() < 2)
      throw ConfigError("unterminated string", line_no);
    std::string out;
    for (std::size_t i = 1; i + 1 < token.size(); ++i) {
      char c = token[i];
      if (c == '"') throw ConfigError("stray quote inside string", line_no);
      if (c == '\\') {
        if (i + 2 >= token.size()) throw ConfigError("dangling escape", line_no);
        const char esc = token[++i];
        switch (esc) {
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case 'r': c = '\r'; break;
          default:
            throw ConfigError(std::string("unknown escape '\\") + esc + "'", line_no);
        }
      }
      out.push_back(c);
    }
    return ConfigValue::of_string(std::move(out));
  }
  if (token.front() == '"' || token.back() == '"')
    throw ConfigError("unterminated string", line_no);

  std::string digits;
  digits.reserve(token.size());
  for (std::size_t i = 0; i < token.size(); ++i) {
    if (token[i] == '_') {
      const bool ok = i > 0 && i + 1 < token.size() &&
                      std::isdigit(static_cast<unsigned char>(token[i - 1])) &&
                      std::isdigit(static_cast<unsigned char>(token[i + 1]));
      if (!ok) throw ConfigError("misplaced underscore in number", line_no);
      continue;
    }
    digits.push_back(token[i]);
  }

  {
    long long v = 0;
    const char* begin = digits.data();
    const char* end = begin + digits.size();
    const char* start = begin;
    if (start != end && (*start == '+' || *start == '-')) ++start;
    const auto res = std::from_chars(start, end, v);
    if (res.ec == std::errc() && res.ptr == end && start != end) {
      if (digits.front() == '-') v = -v;
      return ConfigValue::of_int(v);
    }
  }
  if (digits == "inf" || digits == "+inf")
    return ConfigValue::of_double(HUGE_VAL);
  if (digits == "-inf") return ConfigValue::of_double(-HUGE_VAL);
  {
    double v = 0.0;
    const char* begin = digits.data();
    const char* end = begin + digits.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec == std::errc() && res.ptr == end)
      return ConfigValue::of_double(v);
  }
  throw ConfigError("bad value '" + token + "'", line_no);
}

// Splits a single-line array body on top-level commas.
inline ConfigValue parse_value_text(const std::string& text, int line_no) {
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') throw ConfigError("unterminated array", line_no);
    const std::string body = text.substr(1, text.size() - 2);
    std::vector<ConfigValue> items;
    std::string current;
    bool in_string = false;
    bool saw_any = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
      const char c = body[i];
      if (in_string) {
        current.push_back(c);
        if (c == '\\' && i + 1 < body.size()) current.push_back(body[++i]);
        else if (c == '"') in_string = false;
      } else if (c == '"') {
        current.push_back(c);
        in_string = true;
      } else if (c == ',') {
        items.push_back(parse_scalar_token(strip(current), line_no));
        current.clear();
        saw_any = true;
      } else {
        current.push_back(c);
      }
    }
    if (in_string) throw ConfigError("unterminated string", line_no);
    const std::string last = strip(current);
    if (!last.empty()) {
      items.push_back(parse_scalar_token(last, line_no));
    } else if (saw_any) {
      throw ConfigError("trailing comma in array", line_no);
    }
    auto out = ConfigValue::of_array(std::move(items));
    out.line = line_no;
    return out;
  }
  auto out = parse_scalar_token(text, line_no);
  out.line = line_no;
  return out;
}

}  // namespace detail

// Flat key-value configuration. Section headers prefix the keys that follow
// ("[mcmc]" + "events = 5" stores "mcmc.events"), so lookups always use the
// full dotted key. Keys are kept sorted for deterministic enumeration.
class Config {
 public:
  static Config parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string raw;
    std::string prefix;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      const std::string line = detail::strip(detail::strip_comment(raw));
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
        const std::string name = detail::strip(line.substr(1, line.size() - 2));
        if (name.empty()) throw ConfigError("empty section name", line_no);
        for (char c : name) {
          if (!detail::is_bare_key_char(c) && c != '.')
            throw ConfigError(std::string("bad section character '") + c + "'", line_no);
        }
        prefix = name + ".";
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
      const std::string key = detail::strip(line.substr(0, eq));
      if (key.empty()) throw ConfigError("empty key", line_no);
      for (char c : key) {
        if (!detail::is_bare_key_char(c) && c != '.')
          throw ConfigError(std::string("bad key character '") + c + "'", line_no);
      }
      const std::string value_text = detail::strip(line.substr(eq + 1));
      const std::string full_key = prefix + key;
      if (cfg.values_.count(full_key))
        throw ConfigError("duplicate key '" + full_key + "'", line_no);
      cfg.values_.emplace(full_key, detail::parse_value_text(value_text, line_no));
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_string(text.str());
  }

  bool contains(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, ConfigValue value) { values_[key] = std::move(value); }

  // Overlay wins on key collisions.
  void merge_from(const Config& overlay) {
    for (const auto& [key, value] : overlay.values_) values_[key] = value;
  }

  bool get_bool(const std::string& key) const {
    const auto& v = require(key);
    if (v.kind != ConfigValue::Kind::boolean)
      throw ConfigError("key '" + key + "' is " + v.kind_name() + ", expected boolean",
                        v.line);
    return v.bool_value;
  }

  long long get_int(const std::string& key) const {
    const auto& v = require(key);
    if (v.kind != ConfigValue::Kind::integer)
      throw ConfigError("key '" + key + "' is " + v.kind_name() + ", expected integer",
                        v.line);
    return v.int_value;
  }

  double get_double(const std::string& key) const {
    const auto& v = require(key);
    return as_double(v, key);
  }

  std::string get_string(const std::string& key) const {
    const auto& v = require(key);
    if (v.kind != ConfigValue::Kind::string)
      throw ConfigError("key '" + key + "' is " + v.kind_name() + ", expected string",
                        v.line);
    return v.string_value;
  }

  std::vector<double> get_double_array(const std::string& key) const {
    const auto& v = require(key);
    if (v.kind != ConfigValue::Kind::array)
      throw ConfigError("key '" + key + "' is " + v.kind_name() + ", expected array",
                        v.line);
    std::vector<double> out;
    out.reserve(v.items.size());
    for (const auto& item : v.items) out.push_back(as_double(item, key));
    return out;
  }

  std::vector<long long> get_int_array(const std::string& key) const {
    const auto& v = require(key);
    if (v.kind != ConfigValue::Kind::array)
      throw ConfigError("key '" + key + "' is " + v.kind_name() + ", expected array",
                        v.line);
    std::vector<long long> out;
    out.reserve(v.items.size());
    for (const auto& item : v.items) {
      if (item.kind != ConfigValue::Kind::integer)
        throw ConfigError("key '" + key + "' holds a non-integer element", item.line);
      out.push_back(item.int_value);
    }
    return out;
  }

  bool get_bool_or(const std::string& key, bool fallback) const {
    return contains(key) ? get_bool(key) : fallback;
  }
  long long get_int_or(const std::string& key, long long fallback) const {
    return contains(key) ? get_int(key) : fallback;
  }
  double get_double_or(const std::string& key, double fallback) const {
    return contains(key) ? get_double(key) : fallback;
  }
  std::string get_string_or(const std::string& key, const std::string& fallback) const {
    return contains(key) ? get_string(key) : fallback;
  }

  const std::map<std::string, ConfigValue>& entries() const { return values_; }

 private:
  const ConfigValue& require(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
    return it->second;
  }

  static double as_double(const ConfigValue& v, const std::string& key) {
    if (v.kind == ConfigValue::Kind::floating) return v.float_value;
    if (v.kind == ConfigValue::Kind::integer)
      return static_cast<double>(v.int_value);
    throw ConfigError("key '" + key + "' is " + std::string(v.kind_name()) +
                          ", expected number",
                      v.line);
  }

  std::map<std::string, ConfigValue> values_;
};

}  // namespace gibbs_lines
