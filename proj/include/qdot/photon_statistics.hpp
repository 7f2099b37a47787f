#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace qdot {

enum class DriveLaw {
  saturating,  // P / (P + P_sat)
  exponential, // 1 - exp(-P / P_sat)
};

/// Pulsed emitter. Each pulse yields one excitation with probability
/// `p_excite` and two with `p_multi`; the second photon of a pair follows the
/// first after its own exponential delay.
struct EmitterModel {
  double pulse_period_ns = 12.5;
  double lifetime_ns = 1.0;
  double p_excite = 1.0 / 3.0;
  double p_multi = 0.0;
  /// When both powers are set, p_excite is derived from them through `drive_law`.
  std::optional<double> drive_power_nw;
  std::optional<double> saturation_power_nw;
  DriveLaw drive_law = DriveLaw::saturating;
  /// Reference source: Poisson(poisson_mean) photons per pulse, ignoring p_excite/p_multi.
  bool poissonian = false;
  double poisson_mean = 1.0;

  double effective_p_excite() const {
    if (drive_power_nw && saturation_power_nw) {
      const double ratio = *drive_power_nw / *saturation_power_nw;
      return drive_law == DriveLaw::saturating ? ratio / (1.0 + ratio) : 1.0 - std::exp(-ratio);
    }
    return p_excite;
  }

  void validate() const {
    if (!(pulse_period_ns > 0.0) || !(lifetime_ns > 0.0)) throw std::domain_error("emitter times must be positive");
    if (drive_power_nw && !(*drive_power_nw >= 0.0)) throw std::domain_error("drive power must be non-negative");
    if (saturation_power_nw && !(*saturation_power_nw > 0.0))
      throw std::domain_error("saturation power must be positive");
    const double pe = effective_p_excite();
    if (!(pe >= 0.0 && pe <= 1.0) || !(p_multi >= 0.0 && p_multi <= 1.0))
      throw std::domain_error("emission probabilities must lie in [0, 1]");
    if (pe + p_multi > 1.0 + 1e-12) throw std::domain_error("p_excite + p_multi exceeds 1");
    if (poissonian && !(poisson_mean >= 0.0)) throw std::domain_error("Poisson mean must be non-negative");
  }
};

struct DetectorModel {
  double efficiency = 1.0;
  double dark_rate_cps = 0.0;
  double dead_time_ns = 0.0;
  /// Gaussian timing jitter (standard deviation); zero disables it.
  double jitter_ns = 0.0;

  void validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw std::domain_error("detector efficiency must lie in [0, 1]");
    if (!(dark_rate_cps >= 0.0)) throw std::domain_error("dark rate must be non-negative");
    if (!(dead_time_ns >= 0.0)) throw std::domain_error("dead time must be non-negative");
    if (!(jitter_ns >= 0.0)) throw std::domain_error("jitter must be non-negative");
  }
};

/// Beam splitter feeding two detectors.
struct HbtSetup {
  DetectorModel a;
  DetectorModel b;
  double splitter_ratio = 0.5; // fraction sent to detector A

  void validate() const {
    a.validate();
    b.validate();
    if (!(splitter_ratio >= 0.0 && splitter_ratio <= 1.0)) throw std::domain_error("splitter ratio must lie in [0, 1]");
  }
};

enum class Detector : std::uint8_t { A = 0, B = 1 };

struct TimestampStream {
  Detector detector = Detector::A;
  std::vector<double> times_ns;
  double duration_s = 0.0;

  bool is_sorted() const { return std::is_sorted(times_ns.begin(), times_ns.end()); }

  friend bool operator==(const TimestampStream&, const TimestampStream&) = default;
};

struct SimulationConfig {
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  /// Record emitted photons per pulse (before the splitter) for diagnostics.
  bool record_photon_numbers = false;
};

struct SimulationOutput {
  TimestampStream a;
  TimestampStream b;
  std::uint64_t pulses = 0;
  std::vector<std::uint8_t> photons_per_pulse; // only with record_photon_numbers
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t block_seed(std::uint64_t master, std::uint64_t block) {
  return splitmix64(splitmix64(master) ^ splitmix64(block + 0x632BE59BD9B4E019ull));
}

inline void apply_dead_time(std::vector<double>& t, double dead_ns) {
  std::vector<double> kept;
  kept.reserve(t.size());
  for (double v : t) {
    if (!kept.empty() && (v <= kept.back() || v - kept.back() < dead_ns)) continue;
    kept.push_back(v);
  }
  t = std::move(kept);
}

inline constexpr std::uint64_t kPulsesPerBlock = 1u << 16;

} // namespace detail

/// Monte Carlo HBT run. Pulses are simulated in fixed blocks with independent
/// seeds derived from the master seed, so the output does not depend on the
/// number of workers.
inline SimulationOutput simulate_streams(const EmitterModel& emitter, const HbtSetup& setup,
                                         const SimulationConfig& config) {
  emitter.validate();
  setup.validate();
  if (!(config.duration_s > 0.0)) throw std::domain_error("simulation duration must be positive");

  const double period = emitter.pulse_period_ns;
  const double duration_ns = config.duration_s * 1e9;
  const auto pulses = std::uint64_t(std::floor(duration_ns / period));
  const std::uint64_t blocks = (pulses + detail::kPulsesPerBlock - 1) / detail::kPulsesPerBlock;
  const double p1 = emitter.effective_p_excite();
  const double p2 = emitter.p_multi;

  struct Block {
    std::vector<double> a, b;
  };
  std::vector<Block> out(blocks);
  SimulationOutput result;
  result.pulses = pulses;
  if (config.record_photon_numbers) result.photons_per_pulse.assign(pulses, 0);

  const auto run_block = [&](std::uint64_t blk) {
    std::mt19937_64 rng(detail::block_seed(config.seed, blk));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::exponential_distribution<double> decay(1.0 / emitter.lifetime_ns);
    std::poisson_distribution<int> poisson(emitter.poissonian ? emitter.poisson_mean : 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Block& o = out[blk];
    const std::uint64_t first = blk * detail::kPulsesPerBlock;
    const std::uint64_t last = std::min(pulses, first + detail::kPulsesPerBlock);

    const auto detect = [&](double t) {
      const bool to_a = uni(rng) < setup.splitter_ratio;
      const DetectorModel& det = to_a ? setup.a : setup.b;
      if (uni(rng) >= det.efficiency) return;
      if (det.jitter_ns > 0.0) t += det.jitter_ns * gauss(rng);
      if (t < 0.0 || t >= duration_ns) return;
      (to_a ? o.a : o.b).push_back(t);
    };

    for (std::uint64_t k = first; k < last; ++k) {
      const double t0 = double(k) * period;
      int n = 0;
      if (emitter.poissonian) {
        n = poisson(rng);
        for (int j = 0; j < n; ++j) detect(t0 + decay(rng));
      } else {
        const double u = uni(rng);
        if (u < p2) {
          n = 2;
          const double first_t = t0 + decay(rng);
          const double second_t = first_t + decay(rng);
          detect(first_t);
          detect(second_t);
        } else if (u < p2 + p1) {
          n = 1;
          detect(t0 + decay(rng));
        }
      }
      if (config.record_photon_numbers) result.photons_per_pulse[k] = std::uint8_t(std::min(n, 255));
    }

    // Dark clicks over this block's time slice.
    const double t_lo = double(first) * period;
    const double t_hi = blk + 1 == blocks ? duration_ns : double(last) * period;
    for (int which = 0; which < 2; ++which) {
      const DetectorModel& det = which == 0 ? setup.a : setup.b;
      if (det.dark_rate_cps <= 0.0) continue;
      std::poisson_distribution<long long> count(det.dark_rate_cps * (t_hi - t_lo) * 1e-9);
      const long long nd = count(rng);
      for (long long j = 0; j < nd; ++j) (which == 0 ? o.a : o.b).push_back(t_lo + (t_hi - t_lo) * uni(rng));
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(config.workers, unsigned(std::max<std::uint64_t>(blocks, 1))));
  if (workers == 1) {
    for (std::uint64_t blk = 0; blk < blocks; ++blk) run_block(blk);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::uint64_t blk = next++; blk < blocks; blk = next++) run_block(blk);
      });
    for (auto& t : pool) t.join();
  }

  const auto merge = [&](bool is_a, const DetectorModel& det) {
    std::vector<double> t;
    std::size_t total = 0;
    for (const auto& blk : out) total += (is_a ? blk.a : blk.b).size();
    t.reserve(total);
    for (const auto& blk : out) {
      const auto& v = is_a ? blk.a : blk.b;
      t.insert(t.end(), v.begin(), v.end());
    }
    std::sort(t.begin(), t.end());
    detail::apply_dead_time(t, det.dead_time_ns);
    return t;
  };
  result.a = {Detector::A, merge(true, setup.a), config.duration_s};
  result.b = {Detector::B, merge(false, setup.b), config.duration_s};
  return result;
}

// ---------------------------------------------------------------------------
// Coincidence histogram

/// Counts of A-B pairs by delay tau = t_b - t_a. Bin k covers [k*w, (k+1)*w).
struct CoincidenceHistogram {
  double bin_width_ns = 0.128;
  double tau_max_ns = 75.0;
  long first_bin = 0;
  std::vector<std::uint64_t> counts;
  double pulse_period_ns = 12.5;
  double duration_s = 0.0;
  std::uint64_t clicks_a = 0;
  std::uint64_t clicks_b = 0;

  std::size_t size() const noexcept { return counts.size(); }
  long bin_index(std::size_t i) const noexcept { return first_bin + long(i); }
  double bin_center(std::size_t i) const noexcept { return (double(bin_index(i)) + 0.5) * bin_width_ns; }
  double bin_left(std::size_t i) const noexcept { return double(bin_index(i)) * bin_width_ns; }
  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }

  friend bool operator==(const CoincidenceHistogram&, const CoincidenceHistogram&) = default;
};

struct CorrelateOptions {
  double bin_width_ns = 0.128;
  double tau_max_ns = 75.0;
  /// Pulse period used to check that tau_max is a whole number of periods.
  double pulse_period_ns = 12.5;
  /// When both streams come from the same detector, skip each click paired with itself.
  bool exclude_self_pairs = true;
};

/// Full cross-correlation: every pair with |t_b - t_a| <= tau_max is binned.
inline CoincidenceHistogram correlate(const TimestampStream& a, const TimestampStream& b,
                                      const CorrelateOptions& opt = {}) {
  if (!(opt.bin_width_ns > 0.0) || !(opt.tau_max_ns > 0.0) || !(opt.pulse_period_ns > 0.0))
    throw std::domain_error("correlation bin width, window and period must be positive");
  const double periods = opt.tau_max_ns / opt.pulse_period_ns;
  if (std::abs(periods - std::round(periods)) > 1e-9 * std::max(1.0, periods))
    throw std::invalid_argument("tau_max must be an integer multiple of the pulse period");
  if (!a.is_sorted() || !b.is_sorted()) throw std::invalid_argument("timestamp streams must be sorted");

  CoincidenceHistogram h;
  h.bin_width_ns = opt.bin_width_ns;
  h.tau_max_ns = opt.tau_max_ns;
  h.pulse_period_ns = opt.pulse_period_ns;
  h.duration_s = std::max(a.duration_s, b.duration_s);
  h.clicks_a = a.times_ns.size();
  h.clicks_b = b.times_ns.size();
  h.first_bin = long(std::floor(-opt.tau_max_ns / opt.bin_width_ns));
  const long last_bin = long(std::floor(opt.tau_max_ns / opt.bin_width_ns));
  h.counts.assign(std::size_t(last_bin - h.first_bin + 1), 0);

  const bool self = opt.exclude_self_pairs && a.detector == b.detector && &a == &b;
  const bool same_data = opt.exclude_self_pairs && a.detector == b.detector && a.times_ns == b.times_ns;
  const bool skip_diagonal = self || same_data;

  const auto& tb = b.times_ns;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < a.times_ns.size(); ++i) {
    const double ta = a.times_ns[i];
    while (lo < tb.size() && tb[lo] < ta - opt.tau_max_ns) ++lo;
    for (std::size_t j = lo; j < tb.size(); ++j) {
      const double tau = tb[j] - ta;
      if (tau > opt.tau_max_ns) break;
      if (skip_diagonal && j == i) continue;
      const long k = long(std::floor(tau / opt.bin_width_ns));
      if (k < h.first_bin || k > last_bin) continue;
      ++h.counts[std::size_t(k - h.first_bin)];
    }
  }
  return h;
}

} // namespace qdot
