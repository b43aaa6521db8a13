#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "polish/common.hpp"

namespace polish {

// Append-only JSON-lines sink: one record per line, streaming-parseable.
class JsonlWriter {
 public:
  JsonlWriter() = default;

  explicit JsonlWriter(const std::filesystem::path& path) { open(path); }

  void open(const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::app);
    if (!out_) throw ConfigError("cannot open metrics file: " + path.string());
  }

  bool is_open() const { return out_.is_open(); }

  void write(const nlohmann::json& record) {
    if (!out_.is_open()) return;
    out_ << record.dump() << '\n';
  }

  void flush() {
    if (out_.is_open()) out_.flush();
  }

 private:
  std::ofstream out_;
};

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics file: " + path.string());
  std::vector<nlohmann::json> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(nlohmann::json::parse(line));
  }
  return records;
}

}  // namespace polish
