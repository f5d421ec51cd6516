// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
// (with indented detail lines before it) and exits non-zero if any fails.
//
//   covspec_acceptance            run everything
//   covspec_acceptance 1 4b 6     run only the listed criteria

#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "covspec/data_model.hpp"
#include "covspec/partition.hpp"
#include "covspec/sampler.hpp"
#include "covspec/simgen.hpp"
#include "covspec/summary.hpp"
#include "covspec/whittle.hpp"

using namespace covspec;
using std::numbers::pi;

namespace {

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

int failures = 0;

[[gnu::format(printf, 1, 2)]] void detail(const char* fmt, ...) {
  std::va_list args;
  va_start(args, fmt);
  std::printf("    ");
  std::vprintf(fmt, args);
  std::printf("\n");
  std::fflush(stdout);
  va_end(args);
}

void verdict(bool ok, const std::string& id, const std::string& what) {
  std::printf("%s  criterion %s: %s\n", ok ? "PASS" : "FAIL", id.c_str(), what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Fit {
  ChainRun run;
  double seconds = 0.0;
};

Fit fit(const TimeSeriesSet& data, const SamplerConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  Fit f;
  f.run = run_chain(data, cfg);
  f.seconds = seconds_since(t0);
  return f;
}

SamplerConfig default_config(std::uint64_t seed, std::size_t iterations = 10000,
                           std::size_t burn_in = 2000) {
  SamplerConfig c;
  c.iterations = iterations;
  c.burn_in = burn_in;
  c.seed = seed;
  return c;
}

double modal_cov_cut(const ChainRun& run, std::size_t burn_in) {
  const auto pp = partition_posterior(run.states, burn_in, ModelFilter{std::nullopt, 2});
  return pp.cov_cuts.empty() ? NAN : pp.cov_cuts[0].mode();
}

// ------------------------------------------------------------------ 1

void criterion_1() {
  bool ok = true;
  double worst_seconds = 0.0;
  for (std::uint64_t seed : kSeeds) {
    const auto data = gen_piecewise_ar(8, 1000, seed);
    const auto cfg = default_config(seed);
    const Fit f = fit(data, cfg);
    const auto mp = model_posterior(f.run.states, cfg.burn_in);
    const auto pp = partition_posterior(f.run.states, cfg.burn_in, ModelFilter{2, std::nullopt});
    const double xi = pp.time_cuts.empty() ? NAN : pp.time_cuts[0].mean;
    const double psi = modal_cov_cut(f.run, cfg.burn_in);
    const bool seed_ok = mp.prob_m(2) >= 0.90 && mp.prob_p(2) >= 0.90 && xi >= 490 && xi <= 512 &&
                         std::abs(psi - 3.0 / 7.0) < 1e-9;
    ok &= seed_ok;
    worst_seconds = std::max(worst_seconds, f.seconds);
    detail("seed %llu: Pr(m=2)=%.4f Pr(p=2)=%.4f mean xi=%.2f modal psi=%.4f  (%.1f s) %s",
           static_cast<unsigned long long>(seed), mp.prob_m(2), mp.prob_p(2), xi, psi, f.seconds,
           seed_ok ? "ok" : "MISS");
  }
  verdict(ok, "1",
          "piecewise AR, 10000/2000 iterations, seeds 1-3: Pr(m=2)>=0.90, Pr(p=2)>=0.90, "
          "mean xi in [490,512], modal psi = 3/7");
  char buf[128];
  std::snprintf(buf, sizeof buf, "runtime per 10000-iteration run <= 1800 s (slowest %.1f s)",
                worst_seconds);
  verdict(worst_seconds <= 1800.0, "1-runtime", buf);

  bool smoke_ok = true;
  double smoke_worst = 0.0;
  for (std::uint64_t seed : kSeeds) {
    const auto data = gen_piecewise_ar(8, 1000, seed);
    const auto cfg = default_config(seed, 4000, 1000);
    const Fit f = fit(data, cfg);
    const auto mp = model_posterior(f.run.states, cfg.burn_in);
    const bool seed_ok = mp.prob_m(2) >= 0.8 && f.seconds <= 480.0;
    smoke_ok &= seed_ok;
    smoke_worst = std::max(smoke_worst, f.seconds);
    detail("smoke seed %llu: Pr(m=2)=%.4f (%.1f s) %s", static_cast<unsigned long long>(seed),
           mp.prob_m(2), f.seconds, seed_ok ? "ok" : "MISS");
  }
  std::snprintf(buf, sizeof buf,
                "4000/1000 smoke variant: Pr(m=2)>=0.8 within 480 s (slowest %.1f s)", smoke_worst);
  verdict(smoke_ok, "1-smoke", buf);
}

// ------------------------------------------------------------------ 2

// Mean over the subjects in [lo, hi] of their true log spectra at (u, nu).
double slowly_varying_truth(const TimeSeriesSet& data, double lo, double hi, double u, double nu) {
  const std::size_t T = data.length();
  const std::size_t t = time_index(u, T) + 1;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t l = 0; l < data.num_subjects(); ++l) {
    const double w = data.covariate(l);
    if (w < lo - 1e-12 || w > hi + 1e-12) continue;
    sum += ar1_true_log_spectrum(slowly_varying_ar_coefficient(w, t, T), nu);
    ++n;
  }
  return sum / static_cast<double>(n);
}

void criterion_2() {
  bool ok = true;
  const auto grid = SurfaceGrid::regular(50, 1, 50);
  for (std::uint64_t seed : kSeeds) {
    const auto data = gen_slowly_varying_ar(8, 1000, seed);
    const auto cfg = default_config(seed);
    const Fit f = fit(data, cfg);
    const auto mp = model_posterior(f.run.states, cfg.burn_in);
    double mass_m3 = 0.0;
    for (const auto& [m, pr] : mp.m) {
      if (m >= 3) mass_m3 += pr;
    }
    const double psi = modal_cov_cut(f.run, cfg.burn_in);
    const auto surfaces = conditional_surfaces(f.run.states, cfg.burn_in, grid.time, grid.freq);
    std::string ise_text;
    bool ise_ok = true;
    for (const auto& cs : surfaces) {
      double ise = 0.0;
      for (std::size_t iu = 0; iu < grid.time.size(); ++iu) {
        for (std::size_t k = 0; k < grid.freq.size(); ++k) {
          const double truth =
              slowly_varying_truth(data, cs.cov_lo, cs.cov_hi, grid.time[iu], grid.freq[k]);
          const double d = cs.surface.mean_log_f[cs.surface.index(iu, 0, k)] - truth;
          ise += d * d;
        }
      }
      ise /= static_cast<double>(grid.time.size() * grid.freq.size());
      ise_ok &= ise <= 0.35;
      char buf[64];
      std::snprintf(buf, sizeof buf, " %.3f", ise);
      ise_text += buf;
    }
    const bool seed_ok = mass_m3 > 0.8 && mp.prob_p(2) >= 0.9 &&
                         std::abs(psi - 3.0 / 7.0) < 1e-9 && ise_ok;
    ok &= seed_ok;
    const auto modal = mp.modal();
    detail("seed %llu: Pr(m>=3)=%.4f Pr(p=2)=%.4f modal psi=%.4f modal (m,p)=(%zu,%zu) "
           "ISE per covariate segment:%s  (%.1f s) %s",
           static_cast<unsigned long long>(seed), mass_m3, mp.prob_p(2), psi, modal.first,
           modal.second, ise_text.c_str(), f.seconds, seed_ok ? "ok" : "MISS");
  }
  verdict(ok, "2",
          "slowly varying AR, seeds 1-3: Pr(m>=3)>0.8, Pr(p=2)>=0.9 with modal psi = 3/7, "
          "conditional surface ISE <= 0.35 on a 50x50 grid");
}

// ------------------------------------------------------------------ 3

void criterion_3() {
  bool ok = true;
  SurfaceGrid grid = SurfaceGrid::regular(1, 1, 50);
  grid.cov = {0.5};
  for (std::uint64_t seed : kSeeds) {
    const auto data = gen_custom_ar(4, 1000, 0.5, seed);
    auto cfg = default_config(seed);
    cfg.max_time_segments = 1;
    cfg.max_cov_segments = 1;
    const Fit f = fit(data, cfg);
    const auto surf = spectrum_surface(f.run.states, cfg.burn_in, grid);
    double ise = 0.0;
    for (std::size_t k = 0; k < grid.freq.size(); ++k) {
      const double d = surf.mean_log_f[surf.index(0, 0, k)] - ar1_true_log_spectrum(0.5, grid.freq[k]);
      ise += d * d;
    }
    ise /= static_cast<double>(grid.freq.size());
    // Low-frequency end, against log 4.
    const double near_zero = surf.mean_log_f[surf.index(0, 0, 0)];
    ok &= ise <= 0.05;
    detail("seed %llu: ISE=%.4f, mean log f(%.3f)=%.3f (log 4 = %.3f)  (%.1f s) %s",
           static_cast<unsigned long long>(seed), ise, grid.freq[0], near_zero, std::log(4.0),
           f.seconds, ise <= 0.05 ? "ok" : "MISS");
  }
  verdict(ok, "3", "stationary AR(1) phi=0.5, L=4, T=1000, m=p=1 forced: ISE <= 0.05");
}

// ------------------------------------------------------------------ 4

// Frequency of each value 1..max and its standard error from batch means.
struct Recovery {
  std::vector<double> freq;
  std::vector<double> se;
};

Recovery batch_means(const std::vector<std::size_t>& xs, std::size_t max_value,
                     std::size_t batches = 50) {
  Recovery r;
  const std::size_t len = xs.size() / batches;
  for (std::size_t v = 1; v <= max_value; ++v) {
    std::vector<double> means(batches, 0.0);
    for (std::size_t i = 0; i < batches * len; ++i) means[i / len] += (xs[i] == v) / double(len);
    double mean = 0.0;
    for (double b : means) mean += b / batches;
    double var = 0.0;
    for (double b : means) var += (b - mean) * (b - mean) / (batches - 1);
    r.freq.push_back(mean);
    r.se.push_back(std::sqrt(var / batches));
  }
  return r;
}

// Runs prior-only and reports whether m and p are uniform within 3 sigma.
bool prior_recovery(const std::string& label, std::size_t max_m, std::size_t max_p,
                    std::size_t iterations, bool print_all) {
  const auto data = gen_custom_ar(20, 1000, 0.0, 1);
  SamplerConfig cfg;
  cfg.iterations = iterations;
  cfg.burn_in = 1000;
  cfg.seed = 1;
  cfg.prior_only = true;
  cfg.max_time_segments = max_m;
  cfg.max_cov_segments = max_p;
  std::vector<std::size_t> ms, ps;
  const auto t0 = std::chrono::steady_clock::now();
  run_chain(data, cfg, [&](const ChainState& s) {
    if (s.iteration <= cfg.burn_in) return;
    ms.push_back(s.m());
    ps.push_back(s.p());
  });
  bool ok = true;
  double worst_z = 0.0;
  for (auto [axis, xs, max] : {std::tuple{"m", &ms, max_m}, std::tuple{"p", &ps, max_p}}) {
    if (max == 1) continue;
    const auto r = batch_means(*xs, max);
    const double target = 1.0 / static_cast<double>(max);
    std::string line;
    for (std::size_t v = 0; v < max; ++v) {
      const double z = (r.freq[v] - target) / std::max(r.se[v], 1e-12);
      worst_z = std::max(worst_z, std::abs(z));
      ok &= std::abs(z) <= 3.0;
      char buf[64];
      std::snprintf(buf, sizeof buf, " %zu:%.3f(%+.1f)", v + 1, r.freq[v], z);
      line += buf;
    }
    if (print_all) detail("%s %s: freq(z)%s", label.c_str(), axis, line.c_str());
  }
  detail("%s: %zu iterations, max |z| = %.1f  (%.1f s) %s", label.c_str(), iterations, worst_z,
         seconds_since(t0), ok ? "ok" : "MISS");
  return ok;
}

void criterion_4a() {
  const bool joint = prior_recovery("joint M=10/10", 10, 10, 200000, true);
  detail("diagnostics (not part of the verdict):");
  prior_recovery("  time axis only, M=10", 10, 1, 200000, false);
  prior_recovery("  covariate axis only, M=10", 1, 10, 200000, false);
  prior_recovery("  joint M=3/3", 3, 3, 200000, false);
  verdict(joint, "4a",
          "prior-only chain, 200000 iterations: m and p uniform on 1..10 within 3 sigma "
          "(sigma from batch means)");
}

void criterion_4b() {
  const PenaltyMatrix d(7);
  const std::vector<double> beta{0.05, -0.02, 0.01, 0.0, 0.004, 0.0, -0.001};
  const auto ig = tau2_conditional(beta, d, Tau2Prior::Uniform);
  boost::math::inverse_gamma_distribution<double> target(ig.shape, ig.scale);
  Rng rng(20240601);
  std::vector<double> xs(100000);
  for (double& x : xs) x = gibbs_tau2(beta, d, rng);
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = boost::math::cdf(target, xs[i]);
    stat = std::max({stat, f - i / n, (i + 1) / n - f});
  }
  const double critical = 1.628 / std::sqrt(n);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "tau2 Gibbs draws vs inverse gamma, 100000 draws: KS D=%.5f < %.5f (level 0.01)",
                stat, critical);
  verdict(stat < critical, "4b", buf);
}

void criterion_4c() {
  Rng rng(4242);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t B = 3 + rep % 8;
    const std::size_t T = 40 + 17 * (rep % 13);
    const auto rule = rep % 2 == 0 ? FrequencyRule::Complete : FrequencyRule::Standard;
    const std::size_t subjects = 1 + rep % 4;
    std::vector<Periodogram> ps;
    for (std::size_t l = 0; l < subjects; ++l) {
      std::vector<double> x(T);
      for (double& v : x) v = rng.normal();
      ps.push_back(periodogram(demean(x), rule));
      ps.back().zero_value = std::exp(rng.normal());
    }
    std::vector<const Periodogram*> ptrs;
    for (const auto& p : ps) ptrs.push_back(&p);
    const BlockData data(ptrs, std::make_shared<const BasisMatrix>(ps[0].grid, B));
    Eigen::VectorXd theta(static_cast<Eigen::Index>(B + 1));
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = 0.5 * rng.normal() / (1.0 + i);
    const double tau2 = std::exp(rng.normal());
    const auto gh = grad_hessian(theta, tau2, data, 100.0);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd up = theta, dn = theta;
      up[i] += h;
      dn[i] -= h;
      const double fd = (log_conditional_posterior(up, tau2, data, 100.0) -
                         log_conditional_posterior(dn, tau2, data, 100.0)) / (2 * h);
      worst = std::max(worst, std::abs(fd - gh.gradient[i]) / std::max(1.0, std::abs(fd)));
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "analytic gradient vs central differences, 100 random configurations: "
                "max error %.2e <= 1e-5", worst);
  verdict(worst <= 1e-5, "4c", buf);
}

void criterion_4d() {
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t T = 2; T <= 60; ++T) {
    for (std::size_t t_min = 1; t_min <= 10; ++t_min) {
      for (std::size_t m = 1; m <= 3; ++m) {
        if (m * t_min > T) continue;
        double total = 0.0;
        std::vector<std::size_t> cuts;
        std::function<void(std::size_t)> rec = [&](std::size_t prev) {
          if (cuts.size() == m - 1) {
            if (T - prev >= t_min) total += std::exp(log_prior_time_partition(TimePartition(T, cuts), t_min));
            return;
          }
          for (std::size_t x = prev + t_min; x + t_min <= T; ++x) {
            cuts.push_back(x);
            rec(x);
            cuts.pop_back();
          }
        };
        rec(0);
        worst = std::max(worst, std::abs(total - 1.0));
        ++cases;
      }
    }
  }
  for (std::size_t D = 2; D <= 8; ++D) {
    std::vector<double> values(D);
    for (std::size_t i = 0; i < D; ++i) values[i] = static_cast<double>(i) / static_cast<double>(D - 1);
    for (std::size_t w_min = 1; w_min <= 4; ++w_min) {
      for (std::size_t p = 1; p * w_min <= D; ++p) {
        double total = 0.0;
        std::vector<std::size_t> ranks;
        std::function<void(std::size_t)> rec = [&](std::size_t next) {
          if (ranks.size() == p - 1) {
            if (D - next >= w_min) {
              total += std::exp(log_prior_covariate_partition(CovariatePartition(values, ranks), w_min));
            }
            return;
          }
          for (std::size_t r = next + w_min - 1; r + 1 + w_min <= D; ++r) {
            ranks.push_back(r);
            rec(r + 1);
            ranks.pop_back();
          }
        };
        rec(0);
        worst = std::max(worst, std::abs(total - 1.0));
        ++cases;
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "partition priors sum to 1 over %zu exhaustively enumerated small cases "
                "(max error %.1e)", cases, worst);
  verdict(worst < 1e-12, "4d", buf);
}

// ------------------------------------------------------------------ 5

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(COVSPEC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc == -1 ? -1 : WEXITSTATUS(rc);
}

void criterion_5() {
  const auto dir = std::filesystem::temp_directory_path() / "covspec-acceptance-determinism";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::string d = dir.string();
  bool ok = run_cli("simulate --design piecewise-ar --subjects 8 --length 1000 --seed 11 --out " + d + "/sim") == 0;
  const std::string data = " --series " + d + "/sim/series.csv --covariates " + d + "/sim/covariates.csv";
  ok &= run_cli("fit" + data + " --iterations 1500 --burnin 300 --seed 5 --out " + d + "/a") == 0;
  ok &= run_cli("fit" + data + " --iterations 1500 --burnin 300 --seed 5 --out " + d + "/b") == 0;
  const std::string a = slurp(dir / "a" / "chain.jsonl");
  const std::string b = slurp(dir / "b" / "chain.jsonl");
  const bool same = ok && !a.empty() && a == b;
  detail("chain files: %zu and %zu bytes, identical: %s", a.size(), b.size(), same ? "yes" : "no");
  std::filesystem::remove_all(dir);
  verdict(same, "5", "two fit runs with equal seed, config and data give byte-identical chain files");
}

// ------------------------------------------------------------------ 6

void criterion_6() {
  CollapsedConfig cfg;  // HFnu: 0.15-0.40 over 0.04-0.40, 1 Hz
  std::vector<ChainState> chain(2);
  for (std::size_t i = 0; i < 2; ++i) {
    chain[i].iteration = i;
    chain[i].time = TimePartition(1000, {});
    chain[i].cov = CovariatePartition({0.0, 1.0}, {});
    chain[i].blocks = {BlockParams{1.7, std::vector<double>(7, 0.0), 1.0}};
  }
  const double flat = collapsed_measure(chain, 0, cfg).blocks[0].mean;
  char buf[160];
  std::snprintf(buf, sizeof buf, "flat spectrum HFnu = %.12f, |error| vs 0.25/0.36 <= 1e-9", flat);
  verdict(std::abs(flat - 0.25 / 0.36) <= 1e-9, "6-flat", buf);

  // AR(1) log spectrum as its cosine series: sum_b (2 phi^b / b) cos(2 pi b nu).
  const double phi = 0.5;
  std::vector<double> beta(40);
  for (std::size_t b = 1; b <= beta.size(); ++b) beta[b - 1] = 2.0 * std::pow(phi, b) / b;
  for (auto& s : chain) s.blocks = {BlockParams{0.0, beta, 1.0}};
  const double est = collapsed_measure(chain, 0, cfg).blocks[0].mean;
  auto f = [&](double nu) { return std::exp(ar1_true_log_spectrum(phi, nu)); };
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double oracle = Quad::integrate(f, 0.15, 0.40, 15, 1e-14) / Quad::integrate(f, 0.04, 0.40, 15, 1e-14);
  std::snprintf(buf, sizeof buf, "AR(1) phi=0.5 HFnu = %.6f vs adaptive quadrature %.6f, |error| <= 1e-3",
                est, oracle);
  verdict(std::abs(est - oracle) <= 1e-3, "6-ar1", buf);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void()>>> all{
      {"1", criterion_1},   {"2", criterion_2},   {"3", criterion_3},   {"4a", criterion_4a},
      {"4b", criterion_4b}, {"4c", criterion_4c}, {"4d", criterion_4d}, {"5", criterion_5},
      {"6", criterion_6}};
  std::set<std::string> wanted(argv + 1, argv + argc);
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& [id, fn] : all) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    try {
      fn();
    } catch (const std::exception& e) {
      verdict(false, id, std::string("threw: ") + e.what());
    }
  }
  std::printf("%d criterion line(s) failed; total %.0f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
