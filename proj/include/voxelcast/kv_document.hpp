#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace voxelcast {

/// UTF-8 text document of `key = value` lines. `#` starts a comment line.
/// Keys keep insertion order so serialisation is byte-stable.
class KeyValueDocument {
 public:
  static KeyValueDocument parse(const std::string& text);
  static KeyValueDocument load(const std::filesystem::path& path);

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  bool has(const std::string& key) const { return index_.contains(key); }
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, int value);
  void set(const std::string& key, const std::vector<double>& values);

  /// Throws FormatError when the key is missing or malformed.
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;
  /// Whitespace-separated numbers; `expected` = kAnyCount accepts any count.
  std::vector<double> get_doubles(const std::string& key, std::size_t expected) const;
  static constexpr std::size_t kAnyCount = static_cast<std::size_t>(-1);

  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_or(const std::string& key, double fallback) const;
  int get_or(const std::string& key, int fallback) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace voxelcast
