#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace uvrec {

// Line-oriented "key = value" text. '#' starts a comment; blank lines are
// ignored; later duplicates of a key are an error.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;

  // Keys that no getter has asked for; lets callers reject typos.
  std::vector<std::string> unused_keys() const;
  void reject_unused() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }
  std::string to_text() const;

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> entries_;
  std::string origin_;
  mutable std::set<std::string> used_;
};

std::string format_double(double v);

}  // namespace uvrec
