// Copyright 2026 The amsinc Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "amsinc/error.hpp"

namespace amsinc::config {

/// Raised for malformed lines and for values that do not parse; the message
/// names the source, line and key.
class ConfigParseError : public ConfigError {
 public:
  ConfigParseError(const std::string& what, int line, std::string key)
      : ConfigError(what), line_(line), key_(std::move(key)) {}
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  int line_;
  std::string key_;
};

/// Flat `section.key=value` text. Blank lines and lines starting with '#'
/// are ignored; whitespace around keys and values is trimmed.
class KvConfig {
 public:
  static KvConfig parse(std::string_view text, std::string source = "<string>");
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.contains(key); }
  void set(const std::string& key, std::string value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated list of non-negative integers.
  std::vector<std::size_t> get_size_list(const std::string& key, const std::vector<std::size_t>& fallback) const;

  /// Keys never read by a getter, in sorted order.
  std::vector<std::string> unread_keys() const;
  /// Throws ConfigParseError for the first unread key.
  void reject_unread() const;

  std::vector<std::string> keys() const;
  const std::string& source() const { return source_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
    mutable bool read = false;
  };
  const Entry* lookup(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const Entry& e, std::string_view expected) const;

  std::string source_;
  std::map<std::string, Entry> entries_;
};

}  // namespace amsinc::config
