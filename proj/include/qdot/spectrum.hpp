#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qdot/detail/numfmt.hpp"
#include "qdot/units.hpp"

namespace qdot {

/// Acquisition metadata. Entries keep their insertion order so files round-trip unchanged.
class SpectrumMetadata {
public:
  using Entry = std::pair<std::string, std::string>;

  void set(const std::string& key, std::string value) {
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = std::move(value);
        return;
      }
    entries_.emplace_back(key, std::move(value));
  }

  void set(const std::string& key, double value) { set(key, detail::format_shortest(value)); }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    return std::nullopt;
  }

  std::optional<double> get_number(const std::string& key) const {
    auto v = get(key);
    if (!v) return std::nullopt;
    return detail::parse_double(*v);
  }

  std::optional<double> excitation_power_nw() const { return get_number("excitation_power_nw"); }
  std::optional<double> temperature_k() const { return get_number("temperature_k"); }
  std::optional<std::string> integration() const { return get("integration"); }

  const std::vector<Entry>& entries() const noexcept { return entries_; }

  friend bool operator==(const SpectrumMetadata&, const SpectrumMetadata&) = default;

private:
  std::vector<Entry> entries_;
};

/// Sampled spectrum on a strictly increasing photon-energy axis (eV).
/// Counts are per sample bin, not per unit energy.
class Spectrum {
public:
  Spectrum(std::vector<double> energy_ev, std::vector<double> counts, SpectrumMetadata meta = {})
      : energy_(std::move(energy_ev)), counts_(std::move(counts)), meta_(std::move(meta)) {
    if (energy_.size() != counts_.size())
      throw std::invalid_argument("spectrum axis and counts differ in length");
    if (energy_.size() < 2) throw std::invalid_argument("spectrum needs at least two samples");
    for (std::size_t i = 0; i < energy_.size(); ++i) {
      if (!(energy_[i] > 0.0) || !std::isfinite(energy_[i]))
        throw std::domain_error("spectrum axis energies must be positive");
      if (i > 0 && !(energy_[i] > energy_[i - 1]))
        throw std::invalid_argument("spectrum axis must be strictly increasing (index " + std::to_string(i) + ")");
      if (!(counts_[i] >= 0.0) || !std::isfinite(counts_[i]))
        throw std::domain_error("spectrum counts must be non-negative (index " + std::to_string(i) + ")");
    }
  }

  std::size_t size() const noexcept { return energy_.size(); }
  std::span<const double> energy() const noexcept { return energy_; }
  std::span<const double> counts() const noexcept { return counts_; }
  const SpectrumMetadata& metadata() const noexcept { return meta_; }
  SpectrumMetadata& metadata() noexcept { return meta_; }

  double total_counts() const {
    double s = 0.0;
    for (double c : counts_) s += c;
    return s;
  }

  /// Mean sample spacing in eV.
  double mean_spacing() const { return (energy_.back() - energy_.front()) / double(size() - 1); }

  /// True when every spacing matches the mean to `rel_tol`.
  bool is_uniform(double rel_tol = 1e-6) const {
    const double h = mean_spacing();
    for (std::size_t i = 1; i < size(); ++i)
      if (std::abs((energy_[i] - energy_[i - 1]) - h) > rel_tol * h) return false;
    return true;
  }

  /// Width of the energy interval attributed to sample i (half distance to each neighbour).
  double bin_width(std::size_t i) const {
    if (i == 0) return energy_[1] - energy_[0];
    if (i + 1 == size()) return energy_[i] - energy_[i - 1];
    return 0.5 * (energy_[i + 1] - energy_[i - 1]);
  }

  Spectrum scaled(double c) const {
    if (!(c >= 0.0)) throw std::domain_error("scale factor must be non-negative");
    std::vector<double> out(counts_);
    for (double& v : out) v *= c;
    return Spectrum(energy_, std::move(out), meta_);
  }

  friend bool operator==(const Spectrum&, const Spectrum&) = default;

private:
  std::vector<double> energy_;
  std::vector<double> counts_;
  SpectrumMetadata meta_;
};

/// Uniform energy grid of `n` points from `lo` to `hi` (eV).
inline std::vector<double> uniform_energy_axis(double lo_ev, double hi_ev, std::size_t n) {
  if (n < 2 || !(hi_ev > lo_ev) || !(lo_ev > 0.0)) throw std::invalid_argument("bad energy axis bounds");
  std::vector<double> axis(n);
  const double h = (hi_ev - lo_ev) / double(n - 1);
  for (std::size_t i = 0; i < n; ++i) axis[i] = lo_ev + h * double(i);
  return axis;
}

/// Uniform energy grid centred on `center_ev` with `half_points` samples either side.
inline std::vector<double> centered_energy_axis(double center_ev, double spacing_ev, std::size_t half_points) {
  if (!(spacing_ev > 0.0)) throw std::invalid_argument("axis spacing must be positive");
  std::vector<double> axis(2 * half_points + 1);
  for (std::size_t i = 0; i < axis.size(); ++i)
    axis[i] = center_ev + spacing_ev * (double(i) - double(half_points));
  if (!(axis.front() > 0.0)) throw std::domain_error("axis extends to non-positive energy");
  return axis;
}

/// Linear interpolation onto a uniform energy grid spanning the same range.
/// Counts are rescaled by the ratio of bin widths so total counts are preserved
/// to first order.
inline Spectrum resample_uniform_energy(const Spectrum& s, std::size_t n = 0) {
  if (n == 0) n = s.size();
  auto axis = uniform_energy_axis(s.energy().front(), s.energy().back(), n);
  const double h = axis[1] - axis[0];
  const auto e = s.energy();
  const auto c = s.counts();
  // Interpolate counts per unit energy, then multiply by the new bin width.
  std::vector<double> density(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) density[i] = c[i] / s.bin_width(i);
  std::vector<double> out(n);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = axis[i];
    while (j + 2 < s.size() && e[j + 1] < x) ++j;
    const double t = std::clamp((x - e[j]) / (e[j + 1] - e[j]), 0.0, 1.0);
    out[i] = std::max(0.0, ((1.0 - t) * density[j] + t * density[j + 1]) * h);
  }
  return Spectrum(std::move(axis), std::move(out), s.metadata());
}

} // namespace qdot
