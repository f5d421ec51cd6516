#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "covspec/sampler.hpp"

namespace covspec {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

nlohmann::ordered_json config_to_json(const SamplerConfig& config);
/// Missing keys keep their defaults; throws ConfigError on bad values.
SamplerConfig config_from_json(const nlohmann::json& j);
/// hex64 of the compact dump of config_to_json.
std::string config_hash(const SamplerConfig& config);

nlohmann::ordered_json stats_to_json(const MoveStats& stats);

struct ChainHeader {
  std::string tool;
  std::string version;
  SamplerConfig config;
  std::string config_hash;
  std::size_t chain_index = 0;
  std::size_t length = 0;
  std::size_t subjects = 0;
  std::vector<double> distinct_covariates;

  /// "covspec 0.1.0 seed=1 config=0123abcd..." for file header lines.
  std::string banner() const;
};

ChainHeader make_header(const TimeSeriesSet& data, const SamplerConfig& config,
                        std::size_t chain_index = 0);

/// Line-delimited chain file: a header record, one record per state and a
/// footer. Every record ends with "check", the FNV-1a hash of the record
/// text before that field. Output goes to `path` + ".tmp" and is renamed
/// into place by finish(); an unfinished writer removes its temporary file.
class ChainWriter {
 public:
  /// Throws IoError if the temporary file cannot be created.
  ChainWriter(std::filesystem::path path, const ChainHeader& header);
  ~ChainWriter();
  ChainWriter(const ChainWriter&) = delete;
  ChainWriter& operator=(const ChainWriter&) = delete;

  void write(const ChainState& state);
  void finish(const MoveStats& stats);

 private:
  void write_record(nlohmann::ordered_json record);

  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  std::size_t records_ = 0;
  bool finished_ = false;
};

struct ChainFile {
  ChainHeader header;
  std::vector<ChainState> states;  // loglik caches are left empty
  nlohmann::json footer;
};

/// Throws IoError on a missing file, a bad checksum, a malformed record or a
/// missing footer (truncation).
ChainFile read_chain(const std::filesystem::path& path);

/// Writes `contents` to `path` + ".tmp" and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace covspec
