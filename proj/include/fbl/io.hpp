#pragma once

#include <fstream>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

namespace fbl {

// Shortest round-trip decimal representation (std::to_chars), so emitted
// files are byte-stable across runs and parse back to the identical double.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

/// Deterministic CSV emitter: '\n' line endings, shortest round-trip floats.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  void row(std::initializer_list<const char*> cells);
  void row(std::initializer_list<double> cells);
  void row(const std::vector<double>& cells);

 private:
  std::ofstream out_;
};

// Minimal CSV reader for our own numeric files (skips the header row).
std::vector<std::vector<double>> read_csv(const std::string& path);

/// Sectioned key-value text config ("[section]" headers, "key = value"
/// lines, '#' comments). Values keep their raw text; typed access and
/// canonical serialization live in config.cpp.
class KvFile {
 public:
  static KvFile parse(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  const std::string& get(const std::string& section,
                         const std::string& key) const;
  void set(const std::string& section, const std::string& key,
           const std::string& value);

  // Canonical form: sections and keys in insertion order, "key = value".
  std::string serialize() const;

 private:
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };
  std::vector<Section> sections_;
};

}  // namespace fbl
