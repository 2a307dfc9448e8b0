#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "headway/errors.hpp"
#include "headway/report.hpp"

namespace headway {

/// Hex SHA-1 of "blob <size>\0<content>", the same id git gives the file.
inline std::string git_blob_hash(const std::string& content) {
  const std::string data = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw InvariantViolation("SHA-1 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Reproducibility record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;  // arguments after the program name
  std::string scenario;           // as given on the command line
  std::string scenario_hash;      // blob hash of the resolved scenario document
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  nlohmann::json overrides = nlohmann::json::object();

  nlohmann::json to_json() const {
    return {{"command", command},          {"argv", argv},   {"scenario", scenario},
            {"scenario_hash", scenario_hash}, {"seeds", seeds}, {"out_dir", out_dir},
            {"overrides", overrides},      {"csv_schema_version", kCsvSchemaVersion}};
  }

  static RunManifest from_json(const nlohmann::json& j) {
    try {
      RunManifest m;
      m.command = j.at("command").get<std::string>();
      m.argv = j.at("argv").get<std::vector<std::string>>();
      m.scenario = j.at("scenario").get<std::string>();
      m.scenario_hash = j.at("scenario_hash").get<std::string>();
      m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      m.out_dir = j.at("out_dir").get<std::string>();
      m.overrides = j.value("overrides", nlohmann::json::object());
      if (j.at("csv_schema_version").get<int>() != kCsvSchemaVersion)
        throw ConfigError("manifest was written with a different CSV schema version");
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
  }

  void save(const std::string& path) const { write_text(path, to_json().dump(2) + "\n"); }

  static RunManifest load(const std::string& path) {
    try {
      return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
    }
  }
};

}  // namespace headway
