#pragma once

// Output plumbing: RFC-4180 CSV with pinned number formatting, JSON files,
// SHA-256 content hashes and the per-run manifest.

#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pilotwave {

[[nodiscard]] std::string sha256_hex(std::string_view bytes);
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

// 17 significant digits, round-trippable.
[[nodiscard]] std::string format_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  CsvWriter& row(std::initializer_list<double> values);
  CsvWriter& row(std::span<const double> values);
  CsvWriter& row_cells(std::span<const std::string> cells);

  [[nodiscard]] const std::string& text() const { return text_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::string text_;
};

// Plain row-major matrix, one row per line, values separated by single spaces.
void write_matrix(const std::filesystem::path& path, std::span<const double> values, std::size_t cols);

void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

class RunManifest {
 public:
  RunManifest(std::string command, nlohmann::json config);

  void add_output(const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
  [[nodiscard]] nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::string command_;
  nlohmann::json config_;
  nlohmann::json outputs_ = nlohmann::json::array();
  nlohmann::json extra_ = nlohmann::json::object();
};

inline constexpr std::string_view kVersion = "1.0.0";

}  // namespace pilotwave
