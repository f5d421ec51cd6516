#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "covspec/chain_io.hpp"
#include "covspec/data_model.hpp"
#include "covspec/error.hpp"
#include "covspec/sampler.hpp"
#include "covspec/simgen.hpp"
#include "covspec/summary.hpp"
#include "covspec/version.hpp"

namespace fs = std::filesystem;
using namespace covspec;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitIo = 4;

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ----------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string design = "piecewise-ar";
  std::size_t subjects = 8;
  std::size_t length = 1000;
  std::uint64_t seed = 1;
  double phi = 0.5;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a) {
  SimDesign d;
  d.kind = parse_sim_kind(a.design);
  d.num_subjects = a.subjects;
  d.length = a.length;
  d.seed = a.seed;
  d.phi = a.phi;
  const TimeSeriesSet data = simulate(d);

  nlohmann::ordered_json design;
  design["design"] = sim_kind_name(d.kind);
  design["subjects"] = d.num_subjects;
  design["length"] = d.length;
  design["seed"] = d.seed;
  if (d.kind == SimKind::CustomAr) design["phi"] = d.phi;
  const std::string hash = hex64(fnv1a64(design.dump()));
  const std::string banner = std::string(kToolName) + " " + kVersion +
                             " seed=" + std::to_string(d.seed) + " config=" + hash;

  const fs::path out(a.out);
  ensure_dir(out);
  write_dataset(data, out / "series.csv", out / "covariates.csv", banner);
  nlohmann::ordered_json manifest;
  manifest["tool"] = kToolName;
  manifest["version"] = kVersion;
  manifest["seed"] = d.seed;
  manifest["config_hash"] = hash;
  manifest["design"] = design;
  manifest["series"] = "series.csv";
  manifest["covariates"] = "covariates.csv";
  write_file_atomic(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << d.num_subjects << " x " << d.length << " series to " << out.string()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------- fit

struct FitArgs {
  std::string series, covariates, out;
  SamplerConfig config;
  std::string tau2_prior = "uniform";
  std::string frequency_rule = "complete";
  bool standard_ratio = false;
  bool no_pair_shift = false;
  std::size_t chains = 1;
};

struct ChainOutcome {
  MoveStats stats;
  double seconds = 0.0;
  std::exception_ptr error;
};

int cmd_fit(FitArgs a) {
  SamplerConfig& c = a.config;
  if (a.tau2_prior == "uniform") c.tau2_prior = Tau2Prior::Uniform;
  else if (a.tau2_prior == "reciprocal") c.tau2_prior = Tau2Prior::Reciprocal;
  else throw ConfigError("tau2-prior must be 'uniform' or 'reciprocal'");
  if (a.frequency_rule == "complete") c.frequency_rule = FrequencyRule::Complete;
  else if (a.frequency_rule == "standard") c.frequency_rule = FrequencyRule::Standard;
  else throw ConfigError("frequency-rule must be 'complete' or 'standard'");
  if (a.standard_ratio) c.relocation_density_in_ratio = false;
  if (a.no_pair_shift) c.pair_shift = false;
  if (a.chains < 1) throw ConfigError("--chains must be at least 1");
  c.validate();

  const TimeSeriesSet data = load_dataset(a.series, a.covariates, 2 * c.t_min);
  c.validate_for(data);
  const fs::path out(a.out);
  ensure_dir(out);

  std::vector<ChainOutcome> outcomes(a.chains);
  std::vector<fs::path> files(a.chains);
  auto run_one = [&](std::size_t k) {
    try {
      SamplerConfig ck = c;
      ck.seed = c.seed + k;
      files[k] = out / (a.chains == 1 ? std::string("chain.jsonl")
                                      : "chain-" + std::to_string(k) + ".jsonl");
      const auto t0 = std::chrono::steady_clock::now();
      ChainWriter writer(files[k], make_header(data, ck, k));
      const MoveStats stats =
          run_chain(data, ck, [&](const ChainState& s) { writer.write(s); });
      writer.finish(stats);
      outcomes[k].stats = stats;
      outcomes[k].seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } catch (...) {
      outcomes[k].error = std::current_exception();
    }
  };
  const auto t0 = std::chrono::steady_clock::now();
  if (a.chains == 1) {
    run_one(0);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t k = 0; k < a.chains; ++k) workers.emplace_back(run_one, k);
    for (auto& w : workers) w.join();
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& o : outcomes) {
    if (o.error) std::rethrow_exception(o.error);
  }

  nlohmann::ordered_json report;
  report["tool"] = kToolName;
  report["version"] = kVersion;
  report["seed"] = c.seed;
  report["config_hash"] = config_hash(c);
  report["config"] = config_to_json(c);
  report["T"] = data.length();
  report["subjects"] = data.num_subjects();
  report["wall_seconds"] = wall;
  report["chains"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < a.chains; ++k) {
    nlohmann::ordered_json ch;
    ch["index"] = k;
    ch["seed"] = c.seed + k;
    ch["file"] = files[k].filename().string();
    ch["wall_seconds"] = outcomes[k].seconds;
    ch["acceptance"] = stats_to_json(outcomes[k].stats);
    report["chains"].push_back(std::move(ch));
  }
  write_file_atomic(out / "report.json", report.dump(2) + "\n");

  for (std::size_t k = 0; k < a.chains; ++k) {
    std::cout << "chain " << k << " (seed " << c.seed + k << "): " << files[k].string() << "\n";
    for (std::size_t i = 0; i < kNumMoveKinds; ++i) {
      const MoveCounts& mc = outcomes[k].stats.counts[i];
      if (mc.proposed == 0) continue;
      std::printf("  %-16s accepted %zu / %zu (%.3f)\n", move_name(static_cast<MoveKind>(i)),
                  mc.accepted, mc.proposed, mc.rate());
    }
  }
  std::printf("wall time %.1f s\n", wall);
  return 0;
}

// ---------------------------------------------------------------- summarize

struct SummarizeArgs {
  std::vector<std::string> chains;
  std::string out;
  long burnin = -1;
  double level = 0.95;
  std::string band_name = "HFnu";
  std::vector<double> band{0.15, 0.40};
  std::vector<double> norm_band{0.04, 0.40};
  double sampling_rate = 1.0;
  std::size_t band_points = 512;
  std::size_t grid_time = 50;
  std::size_t grid_cov = 8;
  std::size_t grid_freq = 50;
  int decimals = 2;
};

std::string cuts_text(const std::vector<double>& cuts) {
  std::string s;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (i) s += ';';
    s += num(cuts[i]);
  }
  return s;
}

void partition_rows(std::ostringstream& os, const char* scope, const char* axis,
                    const std::vector<CutPosterior>& cuts, std::size_t draws) {
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    for (const auto& [value, count] : cuts[k].histogram) {
      os << scope << ',' << axis << ',' << k + 1 << ',' << num(value) << ',' << count << ','
         << num(static_cast<double>(count) / static_cast<double>(draws)) << '\n';
    }
  }
}

void mean_rows(std::ostringstream& os, const char* scope, const char* axis,
               const std::vector<CutPosterior>& cuts) {
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    os << scope << ',' << axis << ',' << k + 1 << ',' << num(cuts[k].mean) << ','
       << num(cuts[k].mode()) << ',' << cuts[k].draws << '\n';
  }
}

void surface_rows(std::ostringstream& os, const SpectrumSurface& s, const std::vector<double>& w) {
  for (std::size_t iu = 0; iu < s.grid.time.size(); ++iu) {
    for (std::size_t iw = 0; iw < w.size(); ++iw) {
      for (std::size_t k = 0; k < s.grid.freq.size(); ++k) {
        const std::size_t i = (iu * w.size() + iw) * s.grid.freq.size() + k;
        os << num(s.grid.time[iu]) << ',' << num(w[iw]) << ',' << num(s.grid.freq[k]) << ','
           << num(s.mean_log_f[i]) << ',' << num(s.lower[i]) << ',' << num(s.upper[i]) << '\n';
      }
    }
  }
}

int cmd_summarize(const SummarizeArgs& a) {
  if (a.band.size() != 2 || a.norm_band.size() != 2) {
    throw ConfigError("--band and --norm-band take two values (low high)");
  }
  std::vector<ChainState> states;
  ChainHeader header;
  for (std::size_t i = 0; i < a.chains.size(); ++i) {
    ChainFile f = read_chain(a.chains[i]);
    if (i == 0) header = f.header;
    else if (f.header.length != header.length ||
             f.header.distinct_covariates != header.distinct_covariates) {
      throw DataError("chain files " + a.chains[0] + " and " + a.chains[i] +
                      " were fit to different data");
    }
    for (auto& s : f.states) states.push_back(std::move(s));
  }
  const std::size_t burn_in =
      a.burnin >= 0 ? static_cast<std::size_t>(a.burnin) : header.config.burn_in;
  if (!(a.level > 0.0 && a.level < 1.0)) throw ConfigError("--quantile-level must lie in (0, 1)");
  std::size_t post = 0;
  for (const auto& s : states) post += s.iteration > burn_in ? 1 : 0;
  if (post == 0) throw DataError("no iterations after burn-in " + std::to_string(burn_in));

  CollapsedConfig cc;
  cc.name = a.band_name;
  cc.band = {a.band[0], a.band[1]};
  cc.norm = {a.norm_band[0], a.norm_band[1]};
  cc.sampling_rate = a.sampling_rate;
  cc.points = a.band_points;
  cc.level = a.level;
  cc.validate();

  const fs::path out(a.out);
  ensure_dir(out);
  const std::string head = "# " + header.banner() + " burnin=" + std::to_string(burn_in) + "\n";

  const ModelPosterior mp = model_posterior(states, burn_in);
  const auto modal = mp.modal();
  {
    std::ostringstream os;
    os << head << "axis,segments,probability\n";
    for (const auto& [k, v] : mp.m) os << "time," << k << ',' << num(v) << '\n';
    for (const auto& [k, v] : mp.p) os << "covariate," << k << ',' << num(v) << '\n';
    write_file_atomic(out / "model_posterior.csv", os.str());
  }
  {
    std::ostringstream os;
    os << head << "m,p,probability\n";
    for (const auto& [k, v] : mp.joint) os << k.first << ',' << k.second << ',' << num(v) << '\n';
    write_file_atomic(out / "joint_posterior.csv", os.str());
  }
  const PartitionPosterior marg = partition_posterior(states, burn_in);
  const PartitionPosterior cond =
      partition_posterior(states, burn_in, ModelFilter{modal.first, modal.second});
  {
    std::ostringstream os;
    os << head << "scope,axis,cut,value,count,probability\n";
    partition_rows(os, "conditional", "time", cond.time_cuts, cond.draws);
    partition_rows(os, "conditional", "covariate", cond.cov_cuts, cond.draws);
    partition_rows(os, "marginal", "time", marg.time_cuts, marg.draws);
    partition_rows(os, "marginal", "covariate", marg.cov_cuts, marg.draws);
    write_file_atomic(out / "partition_posterior.csv", os.str());
  }
  {
    std::ostringstream os;
    os << head << "scope,axis,cut,mean,mode,draws\n";
    mean_rows(os, "conditional", "time", cond.time_cuts);
    mean_rows(os, "conditional", "covariate", cond.cov_cuts);
    mean_rows(os, "marginal", "time", marg.time_cuts);
    mean_rows(os, "marginal", "covariate", marg.cov_cuts);
    write_file_atomic(out / "partition_means.csv", os.str());
  }
  {
    std::ostringstream os;
    os << head << "iteration,m,p,time_cuts,cov_cuts\n";
    for (std::size_t i = 0; i < marg.time_trace.size(); ++i) {
      const auto& [it, tc] = marg.time_trace[i];
      const auto& cc2 = marg.cov_trace[i].second;
      os << it << ',' << tc.size() + 1 << ',' << cc2.size() + 1 << ',' << cuts_text(tc) << ','
         << cuts_text(cc2) << '\n';
    }
    write_file_atomic(out / "traces.csv", os.str());
  }
  const SurfaceGrid grid = SurfaceGrid::regular(a.grid_time, a.grid_cov, a.grid_freq);
  {
    const SpectrumSurface s = spectrum_surface(states, burn_in, grid, a.level);
    std::ostringstream os;
    os << head << "u,w,nu,mean_logf,lo,hi\n";
    surface_rows(os, s, grid.cov);
    write_file_atomic(out / "surface_marginal.csv", os.str());
  }
  for (const ConditionalSurface& cs :
       conditional_surfaces(states, burn_in, grid.time, grid.freq, a.level, modal)) {
    std::ostringstream os;
    os << "# " << header.banner() << " burnin=" << burn_in << " m=" << cs.m << " p=" << cs.p
       << " covariate segment " << cs.cov_segment + 1 << " of [" << num(cs.cov_lo) << ", "
       << num(cs.cov_hi) << "]\n";
    os << "u,w,nu,mean_logf,lo,hi\n";
    surface_rows(os, cs.surface, {0.5 * (cs.cov_lo + cs.cov_hi)});
    write_file_atomic(out / ("surface_conditional_" + std::to_string(cs.cov_segment + 1) + ".csv"),
                      os.str());
  }
  const CollapsedMeasure measure = collapsed_measure(states, burn_in, cc, modal);
  const std::string report = head + format_collapsed(measure, a.decimals);
  write_file_atomic(out / "collapsed.txt", report);

  std::printf("%zu post-burn-in draws; modal (m, p) = (%zu, %zu), Pr = %.4f\n", mp.draws,
              modal.first, modal.second, mp.joint.at(modal));
  std::cout << report.substr(head.size());
  return 0;
}

void add_sampler_options(CLI::App* cmd, FitArgs& a) {
  SamplerConfig& c = a.config;
  cmd->add_option("--iterations", c.iterations, "Total iterations")->capture_default_str();
  cmd->add_option("--burnin", c.burn_in, "Burn-in iterations")->capture_default_str();
  cmd->add_option("--tmin", c.t_min, "Minimum time segment length")->capture_default_str();
  cmd->add_option("--wmin", c.w_min, "Minimum distinct covariates per segment")->capture_default_str();
  cmd->add_option("--max-time-seg", c.max_time_segments, "Maximum time segments")->capture_default_str();
  cmd->add_option("--max-cov-seg", c.max_cov_segments, "Maximum covariate segments")->capture_default_str();
  cmd->add_option("--nbasis", c.num_basis, "Number of spline basis functions")->capture_default_str();
  cmd->add_option("--sigma2-alpha", c.sigma2_alpha, "Prior variance of alpha")->capture_default_str();
  cmd->add_option("--pi-time", c.pi_time, "Uniform weight of the time relocation kernel")->capture_default_str();
  cmd->add_option("--pi-cov", c.pi_cov, "Uniform weight of the covariate relocation kernel")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--tau2-prior", a.tau2_prior, "uniform or reciprocal")->capture_default_str();
  cmd->add_option("--tau2-max", c.tau2_max, "Upper end of the tau2 prior")->capture_default_str();
  cmd->add_option("--frequency-rule", a.frequency_rule, "complete or standard")->capture_default_str();
  cmd->add_flag("--prior-only", c.prior_only, "Drop the likelihood");
  cmd->add_flag("--no-relocation-density", a.standard_ratio,
                "Leave the relocation densities out of within-model ratios");
  cmd->add_option("--within-sweeps", c.within_sweeps, "Within-model moves per axis per iteration")
      ->capture_default_str();
  cmd->add_flag("--no-pair-shift", a.no_pair_shift, "Disable the pair-shift move");
  cmd->add_option("--audit", c.audit_interval, "Check cached likelihoods every N iterations");
  cmd->add_option("--chains", a.chains, "Independent chains run in parallel (seed + index)")
      ->capture_default_str();
}

// Removes "--config FILE" from the arguments and splices the file's
// key=value entries in as "--key value" right after the subcommand, so any
// flag given on the command line (parsed later, last one wins) overrides it.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::vector<std::string> injected;
  for (std::size_t i = 1; i < args.size(); ++i) {
    std::string file;
    std::size_t consumed = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[i + 1];
      consumed = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
      consumed = 1;
    } else {
      continue;
    }
    std::ifstream in(file);
    if (!in) throw IoError("cannot open config file " + file);
    for (const CLI::ConfigItem& item : CLI::ConfigINI().from_config(in)) {
      if (item.name == "++" || item.name == "--") continue;
      std::string key = item.name;
      for (auto it = item.parents.rbegin(); it != item.parents.rend(); ++it) key = *it + "." + key;
      injected.push_back("--" + key);
      for (const auto& v : item.inputs) injected.push_back(v);
    }
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
               args.begin() + static_cast<std::ptrdiff_t>(i + consumed));
    --i;
  }
  if (!injected.empty()) {
    if (args.size() < 2) throw ConfigError("--config needs a subcommand");
    args.insert(args.begin() + 2, injected.begin(), injected.end());
  }
  return args;
}

int map_exception() {
  try {
    throw;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariate-indexed time-varying spectrum estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolName) + " " + kVersion);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_option("--config", "key=value configuration file; keys are long option names")
      ->check(CLI::ExistingFile);

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Generate a simulated dataset");
  simulate_cmd->add_option("--design", sim.design, "piecewise-ar, slowly-varying-ar or custom-ar")
      ->capture_default_str();
  simulate_cmd->add_option("--subjects", sim.subjects, "Number of series")->capture_default_str();
  simulate_cmd->add_option("--length", sim.length, "Series length")->capture_default_str();
  simulate_cmd->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate_cmd->add_option("--phi", sim.phi, "AR coefficient for custom-ar")->capture_default_str();
  simulate_cmd->add_option("--out", sim.out, "Output directory")->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Run the sampler");
  fit_cmd->add_option("--series", fit.series, "Series CSV, one row per subject")->required();
  fit_cmd->add_option("--covariates", fit.covariates, "Covariate file, one value per line")
      ->required();
  fit_cmd->add_option("--out", fit.out, "Output directory")->required();
  add_sampler_options(fit_cmd, fit);

  SummarizeArgs sum;
  auto* sum_cmd = app.add_subcommand("summarize", "Summarize chain files");
  sum_cmd->add_option("--chain", sum.chains, "Chain file(s); several are pooled")
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  sum_cmd->add_option("--out", sum.out, "Output directory")->required();
  sum_cmd->add_option("--burnin", sum.burnin, "Burn-in (default: the fit's)");
  sum_cmd->add_option("--quantile-level", sum.level, "Credible level")->capture_default_str();
  sum_cmd->add_option("--band-name", sum.band_name, "Name of the collapsed measure")
      ->capture_default_str();
  sum_cmd->add_option("--band", sum.band, "Band of interest, low high (Hz)")->expected(2);
  sum_cmd->add_option("--norm-band", sum.norm_band, "Normalizing band, low high (Hz)")
      ->expected(2);
  sum_cmd->add_option("--sampling-rate", sum.sampling_rate, "Samples per second")
      ->capture_default_str();
  sum_cmd->add_option("--band-points", sum.band_points, "Trapezoid points per band")
      ->capture_default_str();
  sum_cmd->add_option("--grid-time", sum.grid_time, "Time grid points")->capture_default_str();
  sum_cmd->add_option("--grid-cov", sum.grid_cov, "Covariate grid points")->capture_default_str();
  sum_cmd->add_option("--grid-freq", sum.grid_freq, "Frequency grid points")->capture_default_str();
  sum_cmd->add_option("--decimals", sum.decimals, "Decimals in the collapsed report")
      ->capture_default_str();

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (...) {
    return map_exception();
  }
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate_cmd) return cmd_simulate(sim);
    if (*fit_cmd) return cmd_fit(fit);
    if (*sum_cmd) return cmd_summarize(sum);
  } catch (...) {
    return map_exception();
  }
  return 0;
}
