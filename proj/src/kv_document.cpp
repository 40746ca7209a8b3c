#include "voxelcast/kv_document.hpp"

#include <charconv>
#include <sstream>

#include "voxelcast/core.hpp"
#include "voxelcast/io.hpp"

namespace voxelcast {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& token) {
  double v = 0.0;
  const auto* end = token.data() + token.size();
  const auto res = std::from_chars(token.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw FormatError("key '" + key + "': not a number: " + token);
  return v;
}

}  // namespace

KeyValueDocument KeyValueDocument::parse(const std::string& text) {
  KeyValueDocument doc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw FormatError("line " + std::to_string(lineno) + ": empty key");
    doc.set(key, trim(t.substr(eq + 1)));
  }
  return doc;
}

KeyValueDocument KeyValueDocument::load(const std::filesystem::path& path) { return parse(io::read_text(path)); }

std::string KeyValueDocument::serialize() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

void KeyValueDocument::save(const std::filesystem::path& path) const { io::write_text_atomic(path, serialize()); }

void KeyValueDocument::set(const std::string& key, const std::string& value) {
  if (auto it = index_.find(key); it != index_.end()) {
    entries_[it->second].second = value;
    return;
  }
  index_[key] = entries_.size();
  entries_.emplace_back(key, value);
}

void KeyValueDocument::set(const std::string& key, double value) { set(key, io::format_double(value)); }

void KeyValueDocument::set(const std::string& key, int value) { set(key, std::to_string(value)); }

void KeyValueDocument::set(const std::string& key, const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ' ';
    s += io::format_double(values[i]);
  }
  set(key, s);
}

const std::string& KeyValueDocument::get(const std::string& key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) throw FormatError("missing key: " + key);
  return entries_[it->second].second;
}

double KeyValueDocument::get_double(const std::string& key) const { return parse_double(key, get(key)); }

int KeyValueDocument::get_int(const std::string& key) const {
  const std::string& token = get(key);
  int v = 0;
  const auto* end = token.data() + token.size();
  const auto res = std::from_chars(token.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw FormatError("key '" + key + "': not an integer: " + token);
  return v;
}

std::vector<double> KeyValueDocument::get_doubles(const std::string& key, std::size_t expected) const {
  std::istringstream in(get(key));
  std::vector<double> values;
  std::string token;
  while (in >> token) values.push_back(parse_double(key, token));
  if (expected != kAnyCount && values.size() != expected)
    throw FormatError("key '" + key + "': expected " + std::to_string(expected) + " values");
  return values;
}

std::string KeyValueDocument::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double KeyValueDocument::get_or(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int KeyValueDocument::get_or(const std::string& key, int fallback) const { return has(key) ? get_int(key) : fallback; }

}  // namespace voxelcast
