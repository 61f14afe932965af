#include "fbl/io.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace fbl {

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
}

CsvWriter::CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
  if (!out_) throw std::runtime_error("cannot write " + path);
}

void CsvWriter::row(std::initializer_list<const char*> cells) {
  bool first = true;
  for (const char* c : cells) {
    if (!first) out_ << ',';
    out_ << c;
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::row(std::initializer_list<double> cells) {
  row(std::vector<double>(cells));
}

void CsvWriter::row(const std::vector<double>& cells) {
  bool first = true;
  for (double c : cells) {
    if (!first) out_ << ',';
    out_ << format_double(c);
    first = false;
  }
  out_ << '\n';
}

std::vector<std::vector<double>> read_csv(const std::string& path) {
  std::string text = read_text_file(path);
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  bool header = true;
  while (std::getline(lines, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      row.push_back(std::stod(line.substr(pos, comma - pos)));
      pos = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

KvFile KvFile::parse(const std::string& text) {
  KvFile kv;
  std::istringstream lines(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) +
                                 ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      kv.set(section, "", "");  // ensure section exists, even if empty
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    kv.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return kv;
}

bool KvFile::has(const std::string& section, const std::string& key) const {
  for (const Section& s : sections_)
    if (s.name == section)
      for (const auto& [k, v] : s.entries)
        if (k == key) return true;
  return false;
}

const std::string& KvFile::get(const std::string& section,
                               const std::string& key) const {
  for (const Section& s : sections_)
    if (s.name == section)
      for (const auto& [k, v] : s.entries)
        if (k == key) return v;
  throw std::runtime_error("config: missing key [" + section + "] " + key);
}

void KvFile::set(const std::string& section, const std::string& key,
                 const std::string& value) {
  Section* sec = nullptr;
  for (Section& s : sections_)
    if (s.name == section) {
      sec = &s;
      break;
    }
  if (sec == nullptr) {
    sections_.push_back({section, {}});
    sec = &sections_.back();
  }
  if (key.empty()) return;
  for (auto& [k, v] : sec->entries)
    if (k == key) {
      v = value;
      return;
    }
  sec->entries.emplace_back(key, value);
}

std::string KvFile::serialize() const {
  std::ostringstream out;
  bool first = true;
  for (const Section& s : sections_) {
    if (!first) out << '\n';
    first = false;
    out << '[' << s.name << "]\n";
    for (const auto& [k, v] : s.entries) out << k << " = " << v << '\n';
  }
  return out.str();
}

}  // namespace fbl
