#include "pilotwave/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "pilotwave/errors.hpp"

namespace pilotwave {

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string quote_cell(const std::string& cell) {
  if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
  std::string q = "\"";
  for (char c : cell) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  q.push_back('"');
  return q;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  row_cells(header);
}

CsvWriter& CsvWriter::row(std::initializer_list<double> values) {
  return row(std::span<const double>(values.begin(), values.size()));
}

CsvWriter& CsvWriter::row(std::span<const double> values) {
  if (values.size() != columns_) throw Error("CSV row width does not match header");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) text_.push_back(',');
    text_ += format_double(values[i]);
  }
  text_.push_back('\n');
  return *this;
}

CsvWriter& CsvWriter::row_cells(std::span<const std::string> cells) {
  if (cells.size() != columns_) throw Error("CSV row width does not match header");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) text_.push_back(',');
    text_ += quote_cell(cells[i]);
  }
  text_.push_back('\n');
  return *this;
}

void CsvWriter::save(const std::filesystem::path& path) const { write_text(path, text_); }

void write_matrix(const std::filesystem::path& path, std::span<const double> values, std::size_t cols) {
  if (cols == 0 || values.size() % cols != 0) throw Error("matrix dump: size is not a multiple of cols");
  std::string text;
  text.reserve(values.size() * 24);
  for (std::size_t i = 0; i < values.size(); ++i) {
    text += format_double(values[i]);
    text.push_back((i + 1) % cols == 0 ? '\n' : ' ');
  }
  write_text(path, text);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

RunManifest::RunManifest(std::string command, nlohmann::json config)
    : command_(std::move(command)), config_(std::move(config)) {}

void RunManifest::add_output(const std::filesystem::path& path) {
  outputs_.push_back({{"file", path.filename().string()}, {"sha256", sha256_file(path)}});
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json doc = {
      {"tool", "pilotwave"},
      {"version", std::string(kVersion)},
      {"command", command_},
      {"config", config_},
      {"config_sha256", sha256_hex(config_.dump())},
      {"outputs", outputs_},
  };
  for (auto it = extra_.begin(); it != extra_.end(); ++it) doc[it.key()] = it.value();
  return doc;
}

void RunManifest::save(const std::filesystem::path& path) const { write_json(path, to_json()); }

}  // namespace pilotwave
