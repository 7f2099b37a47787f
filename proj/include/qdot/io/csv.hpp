#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qdot/array_map.hpp"
#include "qdot/detail/numfmt.hpp"
#include "qdot/finestructure.hpp"
#include "qdot/photon_statistics.hpp"
#include "qdot/spectrum.hpp"
#include "qdot/units.hpp"

namespace qdot::io {

using Metadata = SpectrumMetadata;

/// Malformed input; `line()` is 1-based, 0 when the problem is not tied to a line.
class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line), message_(what) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

private:
  std::size_t line_;
  std::string message_;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Row {
  std::size_t line;
  std::vector<std::string_view> fields;
};

struct Document {
  Metadata meta;
  std::vector<std::string> storage;
  std::vector<Row> rows;
};

inline std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(',', start);
    out.push_back(qdot::detail::trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Header line, then `# key=value` lines, then comma-separated rows.
inline Document read_document(std::istream& in, std::string_view header) {
  Document doc;
  std::string line;
  std::size_t n = 0;
  bool seen_header = false, seen_data = false;
  while (std::getline(in, line)) {
    ++n;
    const auto t = qdot::detail::trim(line);
    if (t.empty()) continue;
    if (!seen_header) {
      if (t != header) throw ParseError(n, "expected header '" + std::string(header) + "'");
      seen_header = true;
      continue;
    }
    if (t.front() == '#') {
      if (seen_data) throw ParseError(n, "metadata after data rows");
      auto body = qdot::detail::trim(t.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos || eq == 0) throw ParseError(n, "metadata line must be '# key=value'");
      const std::string key(qdot::detail::trim(body.substr(0, eq)));
      if (doc.meta.get(key)) throw ParseError(n, "duplicate metadata key '" + key + "'");
      doc.meta.set(key, std::string(qdot::detail::trim(body.substr(eq + 1))));
      continue;
    }
    seen_data = true;
    doc.storage.emplace_back(t);
    doc.rows.push_back({n, {}});
  }
  if (in.bad()) throw IoError("read failure");
  if (!seen_header) throw ParseError(0, "missing header '" + std::string(header) + "'");
  for (std::size_t i = 0; i < doc.rows.size(); ++i) doc.rows[i].fields = split(doc.storage[i]);
  return doc;
}

inline double number(const Row& r, std::size_t col, const char* name) {
  const auto v = qdot::detail::parse_double(r.fields[col]);
  if (!v || !std::isfinite(*v)) throw ParseError(r.line, std::string("invalid ") + name + " '" + std::string(r.fields[col]) + "'");
  return *v;
}

inline std::int64_t integer(const Row& r, std::size_t col, const char* name) {
  const auto v = qdot::detail::parse_int(r.fields[col]);
  if (!v) throw ParseError(r.line, std::string("invalid ") + name + " '" + std::string(r.fields[col]) + "'");
  return *v;
}

inline void expect_fields(const Row& r, std::size_t lo, std::size_t hi) {
  if (r.fields.size() < lo || r.fields.size() > hi)
    throw ParseError(r.line, "expected " + std::to_string(lo) + (lo == hi ? "" : "-" + std::to_string(hi)) +
                                 " fields, got " + std::to_string(r.fields.size()));
}

inline double meta_number(const Metadata& m, const std::string& key) {
  const auto s = m.get(key);
  if (!s) throw ParseError(0, "missing metadata '" + key + "'");
  const auto v = qdot::detail::parse_double(*s);
  if (!v) throw ParseError(0, "invalid metadata '" + key + "'");
  return *v;
}

inline std::int64_t meta_integer(const Metadata& m, const std::string& key) {
  const auto s = m.get(key);
  if (!s) throw ParseError(0, "missing metadata '" + key + "'");
  const auto v = qdot::detail::parse_int(*s);
  if (!v) throw ParseError(0, "invalid metadata '" + key + "'");
  return *v;
}

inline void write_header(std::ostream& out, std::string_view header, const Metadata& meta) {
  out << header << '\n';
  for (const auto& [k, v] : meta.entries()) out << "# " << k << '=' << v << '\n';
}

} // namespace detail

// ---------------------------------------------------------------------------
// Spectrum: rows wavelength_nm,counts in increasing wavelength.

inline constexpr std::string_view kSpectrumHeader = "# qdot-spectrum v1";

/// Wavelengths are written with 9 decimals (femtometre resolution) so a
/// canonical file survives parse -> serialize byte for byte.
inline void write_spectrum(std::ostream& out, const Spectrum& s) {
  detail::write_header(out, kSpectrumHeader, s.metadata());
  const auto e = s.energy();
  const auto c = s.counts();
  for (std::size_t i = e.size(); i-- > 0;)
    out << qdot::detail::format_fixed(kHcEvNm / e[i], 9) << ',' << qdot::detail::format_shortest(c[i]) << '\n';
}

inline Spectrum read_spectrum(std::istream& in) {
  auto doc = detail::read_document(in, kSpectrumHeader);
  if (doc.rows.size() < 2) throw ParseError(0, "spectrum needs at least two rows");
  std::vector<double> energy(doc.rows.size()), counts(doc.rows.size());
  double prev = 0.0;
  const std::size_t n = doc.rows.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = doc.rows[i];
    detail::expect_fields(r, 2, 2);
    const double wl = detail::number(r, 0, "wavelength");
    const double ct = detail::number(r, 1, "counts");
    if (!(wl > 0.0)) throw ParseError(r.line, "wavelength must be positive");
    if (i > 0 && !(wl > prev)) throw ParseError(r.line, "wavelengths must be strictly increasing");
    if (!(ct >= 0.0)) throw ParseError(r.line, "counts must be non-negative");
    prev = wl;
    energy[n - 1 - i] = kHcEvNm / wl;
    counts[n - 1 - i] = ct;
  }
  return Spectrum(std::move(energy), std::move(counts), std::move(doc.meta));
}

// ---------------------------------------------------------------------------
// Polarisation-resolved intensities.

inline constexpr std::string_view kPolarHeader = "# qdot-polar v1";

struct PolarFile {
  PolarPattern pattern;
  Metadata meta;
};

inline void write_polar(std::ostream& out, const PolarPattern& p, const Metadata& meta = {}) {
  p.validate();
  detail::write_header(out, kPolarHeader, meta);
  for (std::size_t k = 0; k < p.size(); ++k) {
    out << qdot::detail::format_shortest(p.angles_deg[k]) << ',' << qdot::detail::format_shortest(p.intensities[k]);
    if (!p.uncertainties.empty()) out << ',' << qdot::detail::format_shortest(p.uncertainties[k]);
    out << '\n';
  }
}

/// The uncertainty column is optional but must be present on every row or none.
inline PolarFile read_polar(std::istream& in) {
  auto doc = detail::read_document(in, kPolarHeader);
  PolarFile f;
  f.meta = std::move(doc.meta);
  std::size_t width = 0;
  for (const auto& r : doc.rows) {
    detail::expect_fields(r, 2, 3);
    if (width == 0) width = r.fields.size();
    if (r.fields.size() != width) throw ParseError(r.line, "inconsistent number of columns");
    const double a = detail::number(r, 0, "angle");
    const double v = detail::number(r, 1, "intensity");
    if (!(a >= 0.0 && a < 360.0)) throw ParseError(r.line, "angle outside [0, 360)");
    if (!(v >= 0.0)) throw ParseError(r.line, "intensity must be non-negative");
    f.pattern.angles_deg.push_back(a);
    f.pattern.intensities.push_back(v);
    if (width == 3) {
      const double u = detail::number(r, 2, "uncertainty");
      if (!(u >= 0.0)) throw ParseError(r.line, "uncertainty must be non-negative");
      f.pattern.uncertainties.push_back(u);
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// Detector timestamps: rows detector,time_ns merged in time order.

inline constexpr std::string_view kTagsHeader = "# qdot-tags v1";

struct TagsFile {
  TimestampStream a;
  TimestampStream b;
  Metadata meta; // always carries duration_s
};

inline void write_tags(std::ostream& out, const TimestampStream& a, const TimestampStream& b, Metadata meta = {}) {
  if (!a.is_sorted() || !b.is_sorted()) throw std::invalid_argument("timestamp streams must be sorted");
  meta.set("duration_s", std::max(a.duration_s, b.duration_s));
  detail::write_header(out, kTagsHeader, meta);
  std::size_t i = 0, j = 0;
  const auto& ta = a.times_ns;
  const auto& tb = b.times_ns;
  while (i < ta.size() || j < tb.size()) {
    if (j == tb.size() || (i < ta.size() && ta[i] <= tb[j]))
      out << "A," << qdot::detail::format_shortest(ta[i++]) << '\n';
    else
      out << "B," << qdot::detail::format_shortest(tb[j++]) << '\n';
  }
}

inline TagsFile read_tags(std::istream& in) {
  auto doc = detail::read_document(in, kTagsHeader);
  TagsFile f;
  const double duration = detail::meta_number(doc.meta, "duration_s");
  if (!(duration > 0.0)) throw ParseError(0, "duration_s must be positive");
  f.a = {Detector::A, {}, duration};
  f.b = {Detector::B, {}, duration};
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& r : doc.rows) {
    detail::expect_fields(r, 2, 2);
    const double t = detail::number(r, 1, "time");
    if (t < prev) throw ParseError(r.line, "timestamps must be sorted");
    prev = t;
    if (r.fields[0] == "A")
      f.a.times_ns.push_back(t);
    else if (r.fields[0] == "B")
      f.b.times_ns.push_back(t);
    else
      throw ParseError(r.line, "detector must be A or B");
  }
  f.meta = std::move(doc.meta);
  return f;
}

// ---------------------------------------------------------------------------
// Coincidence histogram: rows tau_ns,counts with tau at the bin centre.

inline constexpr std::string_view kG2Header = "# qdot-g2 v1";

struct HistogramFile {
  CoincidenceHistogram histogram;
  Metadata meta; // extra keys beyond the histogram's own
};

inline const std::vector<std::string>& histogram_keys() {
  static const std::vector<std::string> keys{"bin_width_ns", "tau_max_ns",  "pulse_period_ns",
                                             "duration_s",   "counts_a", "counts_b"};
  return keys;
}

inline void write_histogram(std::ostream& out, const CoincidenceHistogram& h, const Metadata& extra = {}) {
  Metadata meta;
  meta.set("bin_width_ns", h.bin_width_ns);
  meta.set("tau_max_ns", h.tau_max_ns);
  meta.set("pulse_period_ns", h.pulse_period_ns);
  meta.set("duration_s", h.duration_s);
  meta.set("counts_a", std::to_string(h.clicks_a));
  meta.set("counts_b", std::to_string(h.clicks_b));
  for (const auto& [k, v] : extra.entries())
    if (std::find(histogram_keys().begin(), histogram_keys().end(), k) == histogram_keys().end()) meta.set(k, v);
  detail::write_header(out, kG2Header, meta);
  for (std::size_t i = 0; i < h.size(); ++i)
    out << qdot::detail::format_shortest(h.bin_center(i)) << ',' << h.counts[i] << '\n';
}

inline HistogramFile read_histogram(std::istream& in) {
  auto doc = detail::read_document(in, kG2Header);
  HistogramFile f;
  auto& h = f.histogram;
  h.bin_width_ns = detail::meta_number(doc.meta, "bin_width_ns");
  h.tau_max_ns = detail::meta_number(doc.meta, "tau_max_ns");
  h.pulse_period_ns = detail::meta_number(doc.meta, "pulse_period_ns");
  h.duration_s = detail::meta_number(doc.meta, "duration_s");
  const auto ca = detail::meta_integer(doc.meta, "counts_a");
  const auto cb = detail::meta_integer(doc.meta, "counts_b");
  if (!(h.bin_width_ns > 0.0) || !(h.tau_max_ns > 0.0) || !(h.pulse_period_ns > 0.0) || !(h.duration_s >= 0.0) ||
      ca < 0 || cb < 0)
    throw ParseError(0, "histogram metadata out of range");
  h.clicks_a = std::uint64_t(ca);
  h.clicks_b = std::uint64_t(cb);
  if (doc.rows.empty()) throw ParseError(0, "histogram has no rows");
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    const auto& r = doc.rows[i];
    detail::expect_fields(r, 2, 2);
    const double tau = detail::number(r, 0, "tau");
    const auto c = detail::integer(r, 1, "counts");
    if (c < 0) throw ParseError(r.line, "counts must be non-negative");
    if (i == 0) h.first_bin = long(std::llround(tau / h.bin_width_ns - 0.5));
    const double expected = (double(h.first_bin + long(i)) + 0.5) * h.bin_width_ns;
    if (std::abs(tau - expected) > 1e-6 * h.bin_width_ns)
      throw ParseError(r.line, "tau does not lie on the bin-centre lattice");
    h.counts.push_back(std::uint64_t(c));
  }
  for (const auto& [k, v] : doc.meta.entries())
    if (std::find(histogram_keys().begin(), histogram_keys().end(), k) == histogram_keys().end()) f.meta.set(k, v);
  return f;
}

// ---------------------------------------------------------------------------
// Emitter array: rows row,col,wavelength_nm[,label].

inline constexpr std::string_view kArrayHeader = "# qdot-array v1";

struct ArrayFile {
  QdArrayMap map;
  Metadata meta; // extra keys beyond rows/cols
};

inline void write_array(std::ostream& out, const QdArrayMap& m, const Metadata& extra = {}) {
  Metadata meta;
  meta.set("rows", std::to_string(m.rows()));
  meta.set("cols", std::to_string(m.cols()));
  for (const auto& [k, v] : extra.entries())
    if (k != "rows" && k != "cols") meta.set(k, v);
  detail::write_header(out, kArrayHeader, meta);
  for (const auto& e : m.entries()) {
    out << e.row << ',' << e.col << ',' << qdot::detail::format_shortest(e.wavelength.nm());
    if (e.label) {
      if (e.label->find_first_of(",\n") != std::string::npos) throw std::invalid_argument("label contains a comma");
      out << ',' << *e.label;
    }
    out << '\n';
  }
}

/// Dimensions come from `# rows=` / `# cols=` when present, otherwise from the largest indices.
inline ArrayFile read_array(std::istream& in) {
  auto doc = detail::read_document(in, kArrayHeader);
  std::vector<ArrayEntry> entries;
  int max_row = -1, max_col = -1;
  for (const auto& r : doc.rows) {
    detail::expect_fields(r, 3, 4);
    const auto row = detail::integer(r, 0, "row");
    const auto col = detail::integer(r, 1, "col");
    const double wl = detail::number(r, 2, "wavelength");
    if (row < 0 || col < 0 || row > 1'000'000 || col > 1'000'000) throw ParseError(r.line, "index out of range");
    if (!(wl > 0.0)) throw ParseError(r.line, "wavelength must be positive");
    ArrayEntry e{int(row), int(col), Wavelength(wl), std::nullopt};
    if (r.fields.size() == 4) e.label = std::string(r.fields[3]);
    for (const auto& prev : entries)
      if (prev.row == e.row && prev.col == e.col) throw ParseError(r.line, "duplicate site");
    max_row = std::max(max_row, e.row);
    max_col = std::max(max_col, e.col);
    entries.push_back(std::move(e));
  }
  const int rows = doc.meta.get("rows") ? int(detail::meta_integer(doc.meta, "rows")) : max_row + 1;
  const int cols = doc.meta.get("cols") ? int(detail::meta_integer(doc.meta, "cols")) : max_col + 1;
  if (rows < 1 || cols < 1) throw ParseError(0, "array has no sites");
  if (max_row >= rows || max_col >= cols) throw ParseError(0, "site index outside declared dimensions");
  Metadata extra;
  for (const auto& [k, v] : doc.meta.entries())
    if (k != "rows" && k != "cols") extra.set(k, v);
  return ArrayFile{QdArrayMap(rows, cols, std::move(entries)), std::move(extra)};
}

// ---------------------------------------------------------------------------
// File helpers.

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

/// Writes the whole text at once so a failed write never leaves a partial report.
inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

template <class Fn>
auto read_file(const std::string& path, Fn&& parse) {
  auto in = open_input(path);
  try {
    return parse(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), "'" + path + "': " + e.message());
  }
}

} // namespace qdot::io
