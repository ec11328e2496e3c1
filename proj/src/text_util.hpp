#pragma once

// Line-oriented "keyword key=value ..." parsing shared by the network,
// platform and manifest readers.

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cnnmap/error.hpp"

namespace cnnmap::detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::string_view strip_comment(std::string_view s) {
  const auto hash = s.find('#');
  return hash == std::string_view::npos ? s : s.substr(0, hash);
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

/// One non-empty, comment-stripped line.
struct Line {
  std::size_t number = 0;
  std::string keyword;
  std::vector<std::string> positional;
  std::map<std::string, std::string> kv;
};

inline std::vector<Line> tokenize(std::string_view text, const std::string& source) {
  std::vector<Line> lines;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++number;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    const auto body = trim(strip_comment(raw));
    if (body.empty()) continue;
    Line line;
    line.number = number;
    auto toks = split_ws(body);
    line.keyword = toks.front();
    for (std::size_t i = 1; i < toks.size(); ++i) {
      const auto eq = toks[i].find('=');
      if (eq == std::string::npos) {
        line.positional.push_back(toks[i]);
        continue;
      }
      auto key = toks[i].substr(0, eq);
      auto value = toks[i].substr(eq + 1);
      if (key.empty() || value.empty()) throw ParseError(source, number, "malformed pair '" + toks[i] + "'");
      if (!line.kv.emplace(key, value).second) throw ParseError(source, number, "duplicate key '" + key + "'");
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

inline int64_t to_int(const std::string& s, const std::string& source, std::size_t line) {
  int64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(source, line, "expected integer, got '" + s + "'");
  return v;
}

inline double to_double(const std::string& s, const std::string& source, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(source, line, "expected number, got '" + s + "'");
  }
}

inline std::optional<int64_t> opt_int(const Line& l, const std::string& key, const std::string& source) {
  const auto it = l.kv.find(key);
  if (it == l.kv.end()) return std::nullopt;
  return to_int(it->second, source, l.number);
}

inline int64_t req_int(const Line& l, const std::string& key, const std::string& source) {
  auto v = opt_int(l, key, source);
  if (!v) throw ParseError(source, l.number, "missing key '" + key + "'");
  return *v;
}

}  // namespace cnnmap::detail
