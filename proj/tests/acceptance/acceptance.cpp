// Acceptance checks. Prints one PASS/FAIL line per criterion, preceded by
// indented detail lines; exits nonzero when any selected criterion fails.
//
//   netcoop_acceptance            all criteria
//   netcoop_acceptance 3 5        only criteria 3 and 5

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "netcoop/analytic.hpp"
#include "netcoop/cli/commands.hpp"
#include "netcoop/oracle.hpp"
#include "netcoop/simulate.hpp"
#include "support/reference.hpp"

using namespace netcoop;

namespace {

constexpr std::uint64_t master_seed = 20240601;

struct Verdict
{
  bool pass = true;
  std::vector<std::string> notes;

  void fail(const std::string& note)
  {
    pass = false;
    notes.push_back("FAIL " + note);
  }
  void note(const std::string& text) { notes.push_back(text); }
};

struct Criterion
{
  int id;
  std::string title;
  double limit_seconds;
  std::function<Verdict()> check;
};

std::string fmt(const char* format, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string describe(const NetworkConfig& cfg)
{
  std::ostringstream os;
  os << "n=" << cfg.n << " f_sd=[";
  for (std::size_t i = 0; i < cfg.n; ++i) {
    os << (i ? "," : "") << cfg.f_sd[i];
  }
  os << "] f_sr=" << cfg.f_sr << " f_rd=[";
  for (std::size_t i = 0; i < cfg.n; ++i) {
    os << (i ? "," : "") << cfg.f_rd[i];
  }
  os << "]";
  return os.str();
}

NetworkConfig random_config(RandomStream& rng, unsigned max_n, double f_sr)
{
  NetworkConfig cfg;
  cfg.n = 1 + static_cast<unsigned>(rng.uniform_below(max_n));
  for (unsigned i = 0; i < cfg.n; ++i) {
    cfg.f_sd.push_back(0.05 + 0.9 * rng.uniform());
    cfg.f_rd.push_back(0.05 + 0.9 * rng.uniform());
  }
  cfg.f_sr = f_sr;
  return cfg;
}

/// f_SR in {0.5, 0.8}, symmetric p in {0.3, 0.5}, pr in {0.8, 0.9}.
std::vector<NetworkConfig> benchmark_grid(unsigned n)
{
  std::vector<NetworkConfig> out;
  for (const double f_sr : {0.5, 0.8}) {
    for (const double p : {0.3, 0.5}) {
      for (const double pr : {0.8, 0.9}) {
        out.push_back(NetworkConfig::symmetric(n, p, f_sr, pr));
      }
    }
  }
  return out;
}

sim::BisectionOptions bisection_defaults()
{
  sim::BisectionOptions o;
  o.slots = 1'000'000;
  o.seeds = 5;
  o.resolution = 0.005;
  o.seed = master_seed;
  return o;
}

Verdict reduction_identity()
{
  Verdict v;
  RandomStream rng{derive_seed(master_seed, "acceptance.reduction")};
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto cfg = random_config(rng, 5, 0.0);
    const double coop = analytic::coop_source_service_rate(cfg);
    const double prp = analytic::prp_max_stable(cfg);
    const double diff = std::abs(coop - prp);
    worst = std::max(worst, diff);
    if (diff > 1e-12) {
      v.fail(fmt("%s: coop %.17g vs prp %.17g", describe(cfg).c_str(), coop, prp));
    }
  }
  v.note(fmt("50 configs, worst |difference| %.3g (limit 1e-12)", worst));
  return v;
}

Verdict closed_form_vs_series()
{
  using analytic::Method;
  Verdict v;
  RandomStream rng{derive_seed(master_seed, "acceptance.series")};
  double worst_max = 0.0;
  double worst_state = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto cfg = random_config(rng, 6, 0.05 + 0.95 * rng.uniform());
    const double closed = analytic::expected_max_geometric(cfg.f_sd, {}, Method::closed_form);
    const double series = analytic::expected_max_geometric(cfg.f_sd, {}, Method::series);
    worst_max = std::max(worst_max, std::abs(closed - series));
    if (std::abs(closed - series) > 1e-10) {
      v.fail(fmt("E[max] %s: %.17g vs %.17g", describe(cfg).c_str(), closed, series));
    }
    for (const auto& failed : enumerate_states(cfg.n)) {
      const double a = analytic::state_probability(cfg, failed, {}, Method::closed_form);
      const double b = analytic::state_probability(cfg, failed, {}, Method::series);
      worst_state = std::max(worst_state, std::abs(a - b));
      if (std::abs(a - b) > 1e-10) {
        v.fail(fmt("state %s mask %llu: %.17g vs %.17g", describe(cfg).c_str(),
                   static_cast<unsigned long long>(failed.mask()), a, b));
      }
    }
  }
  v.note(fmt("100 configs, worst |difference| E[max] %.3g, state %.3g (limit 1e-10)", worst_max, worst_state));
  return v;
}

Verdict rank_distribution()
{
  Verdict v;
  constexpr std::uint64_t trials = 100'000;
  double worst_sigma = 0.0;
  double worst_exact = 0.0;
  std::uint64_t index = 0;
  for (const std::uint32_t q : {2u, 4u, 8u}) {
    const galois::FieldSpec spec{q};
    for (std::size_t k = 1; k <= 4; ++k) {
      const auto est = oracle::mc_rank_completion(spec, k, trials, derive_seed(master_seed, "acceptance.rank", index++));
      // Cells expecting fewer than 5 counts are pooled into one tail bin
      // "M >= tail_start" so every bin supports the normal approximation.
      const double n_trials = static_cast<double>(trials);
      std::size_t tail_start = k;
      while (galois::decode_count_pmf(spec, k, tail_start) * n_trials >= 5.0) {
        ++tail_start;
      }
      const auto check_bin = [&](double p, double observed, const std::string& what) {
        const double sigma = std::sqrt(p * (1.0 - p) / n_trials);
        const double z = sigma > 0.0 ? std::abs(observed - p) / sigma : (observed == p ? 0.0 : INFINITY);
        worst_sigma = std::max(worst_sigma, z);
        if (z > 3.0) {
          v.fail(fmt("q=%u K=%zu %s: pmf %.6g vs observed %.6g (%.2f sigma)", q, k, what.c_str(), p, observed, z));
        }
      };
      double head_p = 0.0;
      double head_observed = 0.0;
      for (std::size_t l = k; l < tail_start; ++l) {
        const double p = galois::decode_count_pmf(spec, k, l);
        const auto it = est.pmf.find(l);
        const double observed = it == est.pmf.end() ? 0.0 : it->second;
        head_p += p;
        head_observed += observed;
        check_bin(p, observed, fmt("M=%zu", l));
      }
      for (const auto& [l, freq] : est.pmf) {
        if (l < k) {
          v.fail(fmt("q=%u K=%zu: observed impossible M=%zu", q, k, l));
        }
      }
      check_bin(1.0 - head_p, 1.0 - head_observed, fmt("M>=%zu", tail_start));
      const double mean = reference::rank_completion_mean(q, k);
      const double z_mean = std::abs(est.mean.mean - mean) / est.mean.std_error;
      worst_sigma = std::max(worst_sigma, z_mean);
      if (!est.mean.covers(mean, 3.0)) {
        v.fail(fmt("q=%u K=%zu: E[M] %.6g vs observed %.6g (%.2f sigma)", q, k, mean, est.mean.mean, z_mean));
      }
      const double exact = reference::full_rank_probability(q, k);
      const double pmf_k = galois::decode_count_pmf(spec, k, k);
      worst_exact = std::max(worst_exact, std::abs(exact - pmf_k));
      if (std::abs(exact - pmf_k) > 1e-12) {
        v.fail(fmt("q=%u K=%zu: Pr[M=K] %.17g vs product %.17g", q, k, pmf_k, exact));
      }
    }
  }
  v.note(fmt("12 (q, K) pairs, worst pmf deviation %.2f sigma (limit 3), worst |Pr[M=K] - product| %.3g", worst_sigma,
             worst_exact));
  return v;
}

Verdict relay_state()
{
  Verdict v;
  constexpr std::uint64_t trials = 1'000'000;
  double worst_state = 0.0;
  double worst_service = 0.0;
  std::uint64_t index = 0;
  for (unsigned n = 1; n <= 3; ++n) {
    for (const auto& cfg : benchmark_grid(n)) {
      const auto est = oracle::mc_relay_state_and_service(cfg, trials, derive_seed(master_seed, "acceptance.relay", index++));
      const auto table = analytic::state_probability_table(cfg);
      for (std::size_t mask = 0; mask < table.size(); ++mask) {
        const double p = table[mask];
        const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
        const double diff = std::abs(est.state_frequency[mask] - p);
        const double z = sigma > 0.0 ? diff / sigma : (diff == 0.0 ? 0.0 : INFINITY);
        worst_state = std::max(worst_state, z);
        if (z > 3.0) {
          v.fail(fmt("%s mask %zu: %.6g vs observed %.6g (%.2f sigma)", describe(cfg).c_str(), mask, p,
                     est.state_frequency[mask], z));
        }
      }
      const double etr = analytic::relay_expected_service_saturated(cfg);
      const double z = std::abs(est.relay_service.mean - etr) / est.relay_service.std_error;
      worst_service = std::max(worst_service, z);
      if (!est.relay_service.covers(etr, 3.0)) {
        v.fail(fmt("%s: E[T_R] %.6g vs observed %.6g +- %.2g", describe(cfg).c_str(), etr, est.relay_service.mean,
                   est.relay_service.std_error));
      }
    }
  }
  v.note(fmt("24 configs, worst deviation: states %.2f sigma, E[T_R] %.2f sigma (limit 3)", worst_state,
             worst_service));
  return v;
}

/// Relative distance of `value` outside [lo, hi]; zero inside.
double relative_gap(double value, double lo, double hi)
{
  const double gap = std::max({0.0, lo - value, value - hi});
  return gap / value;
}

Verdict stability_bracketing()
{
  Verdict v;
  const auto opts = bisection_defaults();
  for (const auto& cfg : benchmark_grid(2)) {
    struct Case
    {
      const char* name;
      sim::ProtocolKind kind;
      double analytic;
    };
    const Case cases[] = {
      {"A", sim::ProtocolKind::prp(), analytic::prp_max_stable(cfg)},
      {"C", sim::ProtocolKind::cooperation(), analytic::coop_max_stable(cfg).lambda_max},
    };
    for (const auto& c : cases) {
      if (c.name[0] == 'A' && cfg.f_sr != 0.5) {
        continue; // A ignores the relay link; one pass over (p, pr) suffices
      }
      const auto est = sim::find_lambda_max(cfg, c.kind, opts);
      const double gap = relative_gap(c.analytic, est.lower(), est.upper());
      const auto line = fmt("%s %s: analytic %.4f, simulated [%.4f, %.4f], relative gap %.1f%%", c.name,
                            describe(cfg).c_str(), c.analytic, est.lower(), est.upper(), 100.0 * gap);
      if (gap > 0.05) {
        v.fail(line);
      } else {
        v.note(line);
      }
    }
  }
  return v;
}

Verdict coded_degeneracy()
{
  Verdict v;
  const NcParams nc{65536, 1};
  double worst = 0.0;
  for (unsigned n = 1; n <= 3; ++n) {
    for (const auto& cfg : benchmark_grid(n)) {
      const double c = analytic::coop_max_stable(cfg).lambda_max;
      const double d = analytic::coop_nc_max_stable(cfg, nc).lambda_max;
      worst = std::max(worst, std::abs(c - d));
      if (std::abs(c - d) > 1e-3) {
        v.fail(fmt("%s: C %.6f vs D(K=1, q=65536) %.6f", describe(cfg).c_str(), c, d));
      }
    }
  }
  v.note(fmt("analytic: 24 configs, worst |C - D| %.3g (limit 1e-3)", worst));

  const auto opts = bisection_defaults();
  for (const auto& cfg : benchmark_grid(2)) {
    const auto c = sim::find_lambda_max(cfg, sim::ProtocolKind::cooperation(), opts);
    const auto d = sim::find_lambda_max(cfg, sim::ProtocolKind::cooperation_nc(nc), opts);
    const bool overlap = c.lower() <= d.upper() && d.lower() <= c.upper();
    const auto line = fmt("simulated %s: C [%.4f, %.4f], D [%.4f, %.4f]", describe(cfg).c_str(), c.lower(), c.upper(),
                          d.lower(), d.upper());
    if (overlap) {
      v.note(line);
    } else {
      v.fail(line);
    }
  }
  return v;
}

Verdict figure34_orderings()
{
  Verdict v;
  auto grid = cli::preset_grid("fig3");
  grid.protocols = {sim::Protocol::cooperation_nc};
  std::map<std::tuple<unsigned, std::uint32_t, std::size_t>, double> value;
  for (const auto& pt : cli::expand_grid(grid)) {
    const auto net = NetworkConfig::symmetric(pt.n, pt.p, pt.f_sr, pt.pr);
    value[{pt.n, pt.nc->q, pt.nc->k}] = analytic::coop_nc_max_stable(net, *pt.nc).lambda_max;
  }
  int checked = 0;
  for (const auto n : grid.n) {
    for (const auto k : grid.k) {
      for (std::size_t i = 1; i < grid.q.size(); ++i) {
        ++checked;
        const double a = value[{n, grid.q[i - 1], k}];
        const double b = value[{n, grid.q[i], k}];
        if (b < a) {
          v.fail(fmt("q axis n=%u K=%zu: q=%u %.4f > q=%u %.4f", n, k, grid.q[i - 1], a, grid.q[i], b));
        }
      }
    }
    for (const auto q : grid.q) {
      for (std::size_t i = 1; i < grid.k.size(); ++i) {
        ++checked;
        const double a = value[{n, q, grid.k[i - 1]}];
        const double b = value[{n, q, grid.k[i]}];
        if (b < a) {
          v.fail(fmt("K axis n=%u q=%u: K=%zu %.4f > K=%zu %.4f", n, q, grid.k[i - 1], a, grid.k[i], b));
        }
      }
    }
  }
  v.note(fmt("%d adjacent pairs checked on n in {2,4}, q in {2,4,16}, K in {1,2,3}", checked));
  return v;
}

Verdict figure2_ordering()
{
  Verdict v;
  const auto grid = cli::preset_grid("fig2");
  int checked = 0;
  for (const auto n : grid.n) {
    for (const auto p : grid.p) {
      for (const auto pr : grid.pr) {
        for (const auto f_sr : grid.f_sr) {
          if (!(pr > p && f_sr >= 0.8)) {
            continue;
          }
          const auto net = NetworkConfig::symmetric(n, p, f_sr, pr);
          const double a = analytic::prp_max_stable(net);
          const double c = analytic::coop_max_stable(net).lambda_max;
          ++checked;
          if (!(c > a)) {
            v.fail(fmt("n=%u p=%.2f: C %.6f <= A %.6f", n, p, c, a));
          }
        }
      }
    }
  }
  v.note(fmt("%d grid points with pr > p and f_sr >= 0.8", checked));
  return v;
}

std::string serialize(const sim::SimReport& r)
{
  std::ostringstream os;
  os << std::hexfloat << r.seed << ' ' << r.slots_run << ' ' << r.arrivals << ' ' << r.packets_delivered << ' '
     << r.source_len << ' ' << r.relay_len << ' ' << r.source_drift << ' ' << r.relay_drift << ' '
     << r.source_busy_slots << ' ' << r.relay_busy_slots << ' ' << r.relay_handoffs << ' ' << r.source_service.count()
     << ' ' << r.source_service.mean() << ' ' << r.source_service.variance() << ' ' << r.relay_service.count() << ' '
     << r.relay_service.mean() << ' ' << r.relay_service.variance() << '\n';
  for (const auto& t : r.trace) {
    os << t.slot << ' ' << t.source_len << ' ' << t.relay_len << ' ' << t.arrivals << ' ' << t.delivered << '\n';
  }
  return os.str();
}

Verdict conservation_and_determinism()
{
  Verdict v;
  RandomStream rng{derive_seed(master_seed, "acceptance.conservation")};
  std::uint64_t samples = 0;
  for (int i = 0; i < 20; ++i) {
    const auto cfg = random_config(rng, 4, rng.uniform());
    const auto which = rng.uniform_below(6);
    const NcParams nc{rng.bernoulli(0.5) ? 2u : 16u, 1 + static_cast<std::size_t>(rng.uniform_below(3))};
    const auto fidelity = rng.bernoulli(0.5) ? sim::Fidelity::mechanistic : sim::Fidelity::formula_faithful;
    const sim::ProtocolKind kinds[] = {
      sim::ProtocolKind::prp(),
      sim::ProtocolKind::cooperation(),
      sim::ProtocolKind::source_rlnc(nc, sim::Fidelity::formula_faithful),
      sim::ProtocolKind::source_rlnc(nc, sim::Fidelity::mechanistic),
      sim::ProtocolKind::cooperation_nc(nc, sim::Fidelity::formula_faithful),
      sim::ProtocolKind::cooperation_nc(nc, fidelity),
    };
    const auto& kind = kinds[which];
    const double lambda = 0.7 * rng.uniform();
    const auto seed = rng.next_u64();
    sim::RunOptions o;
    o.max_trace_samples = 1000;
    const auto first = sim::run(cfg, kind, lambda, 100'000, seed, o);
    const auto second = sim::run(cfg, kind, lambda, 100'000, seed, o);
    const auto label = fmt("%s protocol %s lambda %.3f", describe(cfg).c_str(),
                           std::string(sim::protocol_letter(kind.protocol)).c_str(), lambda);
    for (const auto& s : first.trace) {
      ++samples;
      if (s.arrivals != s.delivered + s.source_len + s.relay_len) {
        v.fail(fmt("%s slot %llu: %llu arrivals vs %llu delivered + %llu + %llu queued", label.c_str(),
                   static_cast<unsigned long long>(s.slot), static_cast<unsigned long long>(s.arrivals),
                   static_cast<unsigned long long>(s.delivered), static_cast<unsigned long long>(s.source_len),
                   static_cast<unsigned long long>(s.relay_len)));
        break;
      }
    }
    if (!(first == second) || serialize(first) != serialize(second)) {
      v.fail(label + ": reruns differ");
    }
  }
  v.note(fmt("20 runs, %llu trace samples checked, reruns byte-identical", static_cast<unsigned long long>(samples)));
  return v;
}

} // namespace

int main(int argc, char** argv)
{
  const std::vector<Criterion> criteria = {
    {1, "reduction identity: cooperative service rate at f_SR=0 equals retransmission", 1.0, reduction_identity},
    {2, "closed form vs series for E[max] and reception-state probabilities", 10.0, closed_form_vs_series},
    {3, "rank-completion pmf vs Monte Carlo rank process", 30.0, rank_distribution},
    {4, "reception-state table and saturated relay service vs Monte Carlo", 120.0, relay_state},
    {5, "simulated stability bracket vs analytic lambda_max for A and C", 600.0, stability_bracketing},
    {6, "coded relay at K=1 and large q degenerates to plain cooperation", 600.0, coded_degeneracy},
    {7, "coded relay lambda_max nondecreasing in q and in K on the fig3/fig4 grid", 60.0, figure34_orderings},
    {8, "cooperation beats retransmission on the fig2 grid", 60.0, figure2_ordering},
    {9, "conservation at every trace sample and deterministic reruns", 60.0, conservation_and_determinism},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    selected.insert(std::atoi(argv[i]));
  }

  bool all_pass = true;
  for (const auto& c : criteria) {
    if (!selected.empty() && selected.count(c.id) == 0) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > c.limit_seconds) {
      v.fail(fmt("runtime %.1f s exceeds %.0f s", seconds, c.limit_seconds));
    }
    for (const auto& n : v.notes) {
      std::cout << "    " << n << '\n';
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title
              << fmt(" (%.1f s)", seconds) << std::endl;
    all_pass = all_pass && v.pass;
  }
  return all_pass ? 0 : 1;
}
