#include "covspec/chain_io.hpp"

#include <cstdio>
#include <sstream>
#include <system_error>

#include "covspec/error.hpp"
#include "covspec/version.hpp"

namespace covspec {

using ojson = nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

// ------------------------------------------------------------------- config

ojson config_to_json(const SamplerConfig& c) {
  ojson j;
  j["iterations"] = c.iterations;
  j["burnin"] = c.burn_in;
  j["tmin"] = c.t_min;
  j["wmin"] = c.w_min;
  j["max-time-seg"] = c.max_time_segments;
  j["max-cov-seg"] = c.max_cov_segments;
  j["nbasis"] = c.num_basis;
  j["sigma2-alpha"] = c.sigma2_alpha;
  j["pi-time"] = c.pi_time;
  j["pi-cov"] = c.pi_cov;
  j["seed"] = c.seed;
  j["tau2-prior"] = c.tau2_prior == Tau2Prior::Uniform ? "uniform" : "reciprocal";
  j["tau2-max"] = c.tau2_max;
  j["frequency-rule"] = c.frequency_rule == FrequencyRule::Complete ? "complete" : "standard";
  j["prior-only"] = c.prior_only;
  j["relocation-density"] = c.relocation_density_in_ratio;
  j["within-sweeps"] = c.within_sweeps;
  j["pair-shift"] = c.pair_shift;
  return j;
}

SamplerConfig config_from_json(const nlohmann::json& j) {
  SamplerConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("iterations", c.iterations);
    get("burnin", c.burn_in);
    get("tmin", c.t_min);
    get("wmin", c.w_min);
    get("max-time-seg", c.max_time_segments);
    get("max-cov-seg", c.max_cov_segments);
    get("nbasis", c.num_basis);
    get("sigma2-alpha", c.sigma2_alpha);
    get("pi-time", c.pi_time);
    get("pi-cov", c.pi_cov);
    get("seed", c.seed);
    get("tau2-max", c.tau2_max);
    get("prior-only", c.prior_only);
    get("relocation-density", c.relocation_density_in_ratio);
    get("within-sweeps", c.within_sweeps);
    get("pair-shift", c.pair_shift);
    if (j.contains("tau2-prior")) {
      const auto v = j.at("tau2-prior").get<std::string>();
      if (v == "uniform") c.tau2_prior = Tau2Prior::Uniform;
      else if (v == "reciprocal") c.tau2_prior = Tau2Prior::Reciprocal;
      else throw ConfigError("unknown tau2 prior '" + v + "'");
    }
    if (j.contains("frequency-rule")) {
      const auto v = j.at("frequency-rule").get<std::string>();
      if (v == "complete") c.frequency_rule = FrequencyRule::Complete;
      else if (v == "standard") c.frequency_rule = FrequencyRule::Standard;
      else throw ConfigError("unknown frequency rule '" + v + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad sampler configuration: ") + e.what());
  }
  return c;
}

std::string config_hash(const SamplerConfig& config) {
  return hex64(fnv1a64(config_to_json(config).dump()));
}

ojson stats_to_json(const MoveStats& stats) {
  auto counts = [](const MoveCounts& c) {
    ojson j;
    j["proposed"] = c.proposed;
    j["accepted"] = c.accepted;
    j["rate"] = c.rate();
    j["laplace_failures"] = c.laplace_failures;
    return j;
  };
  ojson j;
  for (std::size_t k = 0; k < kNumMoveKinds; ++k) {
    j[move_name(static_cast<MoveKind>(k))] = counts(stats.counts[k]);
  }
  j["births"] = counts(stats.births);
  j["deaths"] = counts(stats.deaths);
  return j;
}

// ------------------------------------------------------------------- header

std::string ChainHeader::banner() const {
  std::ostringstream os;
  os << tool << ' ' << version << " seed=" << config.seed << " config=" << config_hash;
  if (chain_index > 0) os << " chain=" << chain_index;
  return os.str();
}

ChainHeader make_header(const TimeSeriesSet& data, const SamplerConfig& config,
                        std::size_t chain_index) {
  ChainHeader h;
  h.tool = kToolName;
  h.version = kVersion;
  h.config = config;
  h.config_hash = config_hash(config);
  h.chain_index = chain_index;
  h.length = data.length();
  h.subjects = data.num_subjects();
  h.distinct_covariates = data.distinct_covariates();
  return h;
}

namespace {

ojson header_to_json(const ChainHeader& h) {
  ojson j;
  j["type"] = "header";
  j["tool"] = h.tool;
  j["version"] = h.version;
  j["seed"] = h.config.seed;
  j["config_hash"] = h.config_hash;
  j["chain"] = h.chain_index;
  j["config"] = config_to_json(h.config);
  j["T"] = h.length;
  j["subjects"] = h.subjects;
  j["covariates"] = h.distinct_covariates;
  return j;
}

ojson state_to_json(const ChainState& s) {
  ojson j;
  j["type"] = "state";
  j["iteration"] = s.iteration;
  j["m"] = s.m();
  j["p"] = s.p();
  j["time_cuts"] = s.time.cuts();
  j["cov_cut_ranks"] = s.cov.cut_ranks();
  ojson blocks = ojson::array();
  for (const BlockParams& b : s.blocks) {
    ojson bj;
    bj["alpha"] = b.alpha;
    bj["beta"] = b.beta;
    bj["tau2"] = b.tau2;
    blocks.push_back(std::move(bj));
  }
  j["blocks"] = std::move(blocks);
  return j;
}

constexpr std::string_view kCheckKey = ",\"check\":\"";

// Splits a record line into its body and recorded checksum and verifies
// them; returns the parsed record.
nlohmann::json verified_record(const std::string& line, std::size_t line_no,
                               const std::string& where) {
  auto fail = [&](const std::string& what) {
    throw IoError(where + " line " + std::to_string(line_no) + ": " + what);
  };
  const auto pos = line.rfind(kCheckKey);
  if (pos == std::string::npos || line.size() < pos + kCheckKey.size() + 18 ||
      line.compare(line.size() - 2, 2, "\"}") != 0) {
    fail("record has no checksum (truncated or edited file)");
  }
  const std::string body = line.substr(0, pos) + "}";
  const std::string recorded = line.substr(pos + kCheckKey.size(), 16);
  if (hex64(fnv1a64(body)) != recorded) fail("checksum mismatch");
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed record: ") + e.what());
  }
  return {};
}

}  // namespace

// ------------------------------------------------------------------- writer

ChainWriter::ChainWriter(std::filesystem::path path, const ChainHeader& header)
    : path_(std::move(path)) {
  tmp_ = path_;
  tmp_ += ".tmp";
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot create " + tmp_.string());
  write_record(header_to_json(header));
}

ChainWriter::~ChainWriter() {
  if (!finished_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_, ec);
  }
}

void ChainWriter::write_record(ojson record) {
  const std::string body = record.dump();
  record["check"] = hex64(fnv1a64(body));
  out_ << record.dump() << '\n';
  if (!out_) throw IoError("write failed for " + tmp_.string());
  ++records_;
}

void ChainWriter::write(const ChainState& state) { write_record(state_to_json(state)); }

void ChainWriter::finish(const MoveStats& stats) {
  ojson footer;
  footer["type"] = "footer";
  footer["states"] = records_ - 1;
  footer["moves"] = stats_to_json(stats);
  write_record(std::move(footer));
  out_.close();
  if (!out_) throw IoError("cannot close " + tmp_.string());
  std::error_code ec;
  std::filesystem::rename(tmp_, path_, ec);
  if (ec) throw IoError("cannot rename " + tmp_.string() + " to " + path_.string() + ": " + ec.message());
  finished_ = true;
}

// ------------------------------------------------------------------- reader

ChainFile read_chain(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open chain file " + path.string());
  const std::string where = path.filename().string();
  ChainFile file;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  bool have_footer = false;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (have_footer) throw IoError(where + ": data after the footer");
      const nlohmann::json rec = verified_record(line, line_no, where);
      const std::string type = rec.at("type").get<std::string>();
      if (!have_header) {
        if (type != "header") throw IoError(where + ": first record is not a header");
        ChainHeader& h = file.header;
        h.tool = rec.at("tool").get<std::string>();
        h.version = rec.at("version").get<std::string>();
        h.config = config_from_json(rec.at("config"));
        h.config_hash = rec.at("config_hash").get<std::string>();
        h.chain_index = rec.at("chain").get<std::size_t>();
        h.length = rec.at("T").get<std::size_t>();
        h.subjects = rec.at("subjects").get<std::size_t>();
        h.distinct_covariates = rec.at("covariates").get<std::vector<double>>();
        have_header = true;
      } else if (type == "state") {
        ChainState s;
        s.iteration = rec.at("iteration").get<std::size_t>();
        s.time = TimePartition(file.header.length, rec.at("time_cuts").get<std::vector<std::size_t>>());
        s.cov = CovariatePartition(file.header.distinct_covariates,
                                   rec.at("cov_cut_ranks").get<std::vector<std::size_t>>());
        for (const auto& bj : rec.at("blocks")) {
          BlockParams b;
          b.alpha = bj.at("alpha").get<double>();
          b.beta = bj.at("beta").get<std::vector<double>>();
          b.tau2 = bj.at("tau2").get<double>();
          s.blocks.push_back(std::move(b));
        }
        if (s.blocks.size() != s.m() * s.p()) {
          throw IoError(where + " line " + std::to_string(line_no) + ": block count mismatch");
        }
        file.states.push_back(std::move(s));
      } else if (type == "footer") {
        if (rec.at("states").get<std::size_t>() != file.states.size()) {
          throw IoError(where + ": footer state count does not match the records");
        }
        file.footer = rec;
        have_footer = true;
      } else {
        throw IoError(where + " line " + std::to_string(line_no) + ": unknown record type");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(where + " line " + std::to_string(line_no) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(where + " line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw IoError(where + ": empty chain file");
  if (!have_footer) throw IoError(where + ": missing footer (truncated chain file)");
  return file;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace covspec
