// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#include "amsinc/kvconfig.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace amsinc::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

KvConfig KvConfig::parse(std::string_view text, std::string source) {
  KvConfig cfg;
  cfg.source_ = std::move(source);
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigParseError(fmt::format("{}:{}: expected key=value, got '{}'", cfg.source_, line_no, line), line_no,
                             "");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      throw ConfigParseError(fmt::format("{}:{}: empty key", cfg.source_, line_no), line_no, "");
    }
    if (cfg.entries_.contains(key)) {
      throw ConfigParseError(fmt::format("{}:{}: key '{}' set twice (first on line {})", cfg.source_, line_no, key,
                                         cfg.entries_[key].line),
                             line_no, key);
    }
    cfg.entries_[key] = Entry{value, line_no};
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void KvConfig::set(const std::string& key, std::string value) {
  auto& e = entries_[key];
  e.value = std::move(value);
  e.read = false;
}

const KvConfig::Entry* KvConfig::lookup(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.read = true;
  return &it->second;
}

void KvConfig::fail(const std::string& key, const Entry& e, std::string_view expected) const {
  throw ConfigParseError(
      fmt::format("{}:{}: field '{}': expected {}, got '{}'", source_, e.line, key, expected, e.value), e.line, key);
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  const Entry* e = lookup(key);
  return e ? e->value : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  double v = 0.0;
  if (!parse_number(e->value, v) || !std::isfinite(v)) fail(key, *e, "a finite number");
  return v;
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  std::int64_t v = 0;
  if (!parse_number(e->value, v)) fail(key, *e, "an integer");
  return v;
}

std::size_t KvConfig::get_size(const std::string& key, std::size_t fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  std::size_t v = 0;
  if (!parse_number(e->value, v)) fail(key, *e, "a non-negative integer");
  return v;
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  std::uint64_t v = 0;
  if (!parse_number(e->value, v)) fail(key, *e, "a non-negative integer");
  return v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1") return true;
  if (e->value == "false" || e->value == "0") return false;
  fail(key, *e, "true or false");
}

std::vector<std::size_t> KvConfig::get_size_list(const std::string& key,
                                                 const std::vector<std::size_t>& fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  std::vector<std::size_t> out;
  std::string_view rest = e->value;
  if (trim(rest).empty()) return out;
  while (true) {
    const auto comma = rest.find(',');
    std::size_t v = 0;
    if (!parse_number(trim(rest.substr(0, comma)), v)) fail(key, *e, "a comma-separated list of integers");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

std::vector<std::string> KvConfig::unread_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_)
    if (!e.read) out.push_back(k);
  return out;
}

void KvConfig::reject_unread() const {
  for (const auto& [k, e] : entries_) {
    if (!e.read) {
      throw ConfigParseError(fmt::format("{}:{}: unknown field '{}'", source_, e.line, k), e.line, k);
    }
  }
}

std::vector<std::string> KvConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_) out.push_back(k);
  return out;
}

}  // namespace amsinc::config
