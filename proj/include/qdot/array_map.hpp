#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "qdot/units.hpp"

namespace qdot {

struct ArrayEntry {
  int row = 0;
  int col = 0;
  Wavelength wavelength{1.0};
  std::optional<std::string> label;

  friend bool operator==(const ArrayEntry&, const ArrayEntry&) = default;
};

/// Emission wavelength per site of a rectangular emitter array.
class QdArrayMap {
public:
  QdArrayMap(int rows, int cols, std::vector<ArrayEntry> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("array dimensions must be positive");
    std::set<std::pair<int, int>> seen;
    for (const auto& e : entries_) {
      if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
        throw std::invalid_argument("entry (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                                    ") outside the array");
      if (!seen.emplace(e.row, e.col).second)
        throw std::invalid_argument("duplicate entry (" + std::to_string(e.row) + "," + std::to_string(e.col) + ")");
    }
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  const std::vector<ArrayEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  friend bool operator==(const QdArrayMap&, const QdArrayMap&) = default;

private:
  int rows_;
  int cols_;
  std::vector<ArrayEntry> entries_;
};

struct UniformityStats {
  double mean_nm = 0.0;
  double std_nm = 0.0;
  double mean_ev = 0.0;
  double std_ev = 0.0;
  double min_nm = 0.0;
  double max_nm = 0.0;
};

/// Sample statistics (n - 1 denominator) in wavelength and in energy.
inline UniformityStats uniformity_stats(const QdArrayMap& m) {
  const auto& e = m.entries();
  if (e.size() < 2) throw std::invalid_argument("uniformity statistics need at least two entries");
  // Deviations are taken from the first entry, so identical values give exactly zero spread.
  const auto mean_std = [&](auto value) {
    const double ref = value(e.front());
    double shift = 0.0;
    for (const auto& x : e) shift += value(x) - ref;
    shift /= double(e.size());
    double ss = 0.0;
    for (const auto& x : e) ss += (value(x) - ref - shift) * (value(x) - ref - shift);
    return std::pair{ref + shift, std::sqrt(ss / double(e.size() - 1))};
  };
  UniformityStats s;
  std::tie(s.mean_nm, s.std_nm) = mean_std([](const ArrayEntry& x) { return x.wavelength.nm(); });
  std::tie(s.mean_ev, s.std_ev) = mean_std([](const ArrayEntry& x) { return wavelength_to_energy(x.wavelength).ev(); });
  const auto [lo, hi] = std::minmax_element(e.begin(), e.end(), [](const ArrayEntry& a, const ArrayEntry& b) {
    return a.wavelength.nm() < b.wavelength.nm();
  });
  s.min_nm = lo->wavelength.nm();
  s.max_nm = hi->wavelength.nm();
  return s;
}

struct SitePair {
  int row_a = 0, col_a = 0;
  int row_b = 0, col_b = 0;
  double de_ev = 0.0;

  friend bool operator==(const SitePair&, const SitePair&) = default;
};

struct PairReport {
  std::vector<SitePair> pairs;
  double threshold_ev = 0.0;
};

/// All unordered site pairs whose emission energies differ by at most
/// `threshold_ev`, ordered by energy difference and then by site.
inline PairReport find_pairs(const QdArrayMap& m, double threshold_ev) {
  if (!(threshold_ev >= 0.0) || !std::isfinite(threshold_ev))
    throw std::domain_error("pair threshold must be non-negative and finite");
  struct Site {
    int row, col;
    double ev;
  };
  std::vector<Site> sites;
  for (const auto& e : m.entries()) sites.push_back({e.row, e.col, wavelength_to_energy(e.wavelength).ev()});
  std::sort(sites.begin(), sites.end(), [](const Site& a, const Site& b) {
    return a.ev != b.ev ? a.ev < b.ev : std::pair{a.row, a.col} < std::pair{b.row, b.col};
  });

  PairReport r;
  r.threshold_ev = threshold_ev;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (std::size_t j = i + 1; j < sites.size(); ++j) {
      const double de = sites[j].ev - sites[i].ev;
      if (de > threshold_ev) break;
      Site a = sites[i], b = sites[j];
      if (std::pair{b.row, b.col} < std::pair{a.row, a.col}) std::swap(a, b);
      r.pairs.push_back({a.row, a.col, b.row, b.col, de});
    }
  }
  std::sort(r.pairs.begin(), r.pairs.end(), [](const SitePair& a, const SitePair& b) {
    return std::tie(a.de_ev, a.row_a, a.col_a, a.row_b, a.col_b) < std::tie(b.de_ev, b.row_a, b.col_a, b.row_b, b.col_b);
  });
  return r;
}

struct SyntheticArrayConfig {
  int rows = 5;
  int cols = 8;
  double mean_nm = 919.0;
  double std_nm = 8.0;
  std::uint64_t seed = 0;
};

/// Fixture generator: independent normal wavelengths, one per site, row-major.
inline QdArrayMap synthetic_array(const SyntheticArrayConfig& c) {
  if (!(c.std_nm >= 0.0) || !(c.mean_nm > 0.0)) throw std::domain_error("invalid wavelength distribution");
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> dist(c.mean_nm, c.std_nm);
  std::vector<ArrayEntry> e;
  for (int r = 0; r < c.rows; ++r)
    for (int col = 0; col < c.cols; ++col) {
      double w = dist(rng);
      while (!(w > 0.0)) w = dist(rng);
      e.push_back({r, col, Wavelength(w), std::nullopt});
    }
  return QdArrayMap(c.rows, c.cols, std::move(e));
}

} // namespace qdot
