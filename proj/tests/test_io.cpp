#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "qdot/io/csv.hpp"
#include "qdot/io/reports.hpp"
#include "qdot/io/svg.hpp"
#include "qdot/lineshape.hpp"

using namespace qdot;

namespace {

template <class Read, class Write>
std::string reserialize(const std::string& text, Read read, Write write) {
  std::istringstream in(text);
  auto parsed = read(in);
  std::ostringstream out;
  write(out, parsed);
  return out.str();
}

template <class Read>
std::size_t error_line(const std::string& text, Read read) {
  std::istringstream in(text);
  try {
    read(in);
  } catch (const io::ParseError& e) {
    return e.line();
  }
  return std::size_t(-1);
}

std::string spectrum_text() {
  const auto e1 = wavelength_to_energy(Wavelength(919.108));
  const PeakModel m({{e1, 21e-6, 1e5}}, 3.0);
  Spectrum s = synthesize(m, centered_energy_axis(e1.ev(), 1.5e-6, 40), PoissonNoise{1});
  s.metadata().set("excitation_power_nw", 30.0);
  s.metadata().set("temperature_k", 9.4);
  s.metadata().set("integration", std::string("1 s x 60"));
  std::ostringstream o;
  io::write_spectrum(o, s);
  return o.str();
}

} // namespace

TEST(SpectrumCsv, ByteIdenticalRoundTrip) {
  const std::string text = spectrum_text();
  EXPECT_EQ(reserialize(text, io::read_spectrum, io::write_spectrum), text);
  std::istringstream in(text);
  const Spectrum s = io::read_spectrum(in);
  EXPECT_EQ(*s.metadata().temperature_k(), 9.4);
  EXPECT_EQ(*s.metadata().integration(), "1 s x 60");
  EXPECT_EQ(s.size(), 81u);
}

TEST(SpectrumCsv, HandWrittenCanonicalFile) {
  const std::string text = "# qdot-spectrum v1\n# temperature_k=9.4\n918.800000000,12\n918.900000000,40.5\n919.000000000,3\n";
  EXPECT_EQ(reserialize(text, io::read_spectrum, io::write_spectrum), text);
}

TEST(SpectrumCsv, ParseErrorsNameTheLine) {
  EXPECT_EQ(error_line("# qdot-spectrum v1\n918.8,1\n918.9,x\n", io::read_spectrum), 3u);
  EXPECT_EQ(error_line("# qdot-spectrum v1\n918.8,1\n918.7,2\n", io::read_spectrum), 3u);
  EXPECT_EQ(error_line("# qdot-spectrum v1\n918.8,1\n918.9,-2\n", io::read_spectrum), 3u);
  EXPECT_EQ(error_line("# qdot-spectrum v1\n918.8,1\n# late=1\n918.9,2\n", io::read_spectrum), 3u);
  EXPECT_EQ(error_line("# qdot-spectrum v1\n# a=1\n# a=2\n918.8,1\n918.9,2\n", io::read_spectrum), 3u);
  EXPECT_EQ(error_line("# qdot-spectrum v1\n918.8,1,4\n918.9,2\n", io::read_spectrum), 2u);
  EXPECT_EQ(error_line("# qdot-polar v1\n918.8,1\n918.9,2\n", io::read_spectrum), 1u);
  EXPECT_NE(error_line("", io::read_spectrum), std::size_t(-1));
}

TEST(PolarCsv, RoundTrip) {
  const auto p = polar_pattern(dipoles_from_mixing({0.25, 0.0, 0.1, 0.0}), polarizer_angles(10.0, 180.0));
  io::Metadata meta;
  meta.set("seed", std::string("4"));
  std::ostringstream o;
  io::write_polar(o, p, meta);
  const auto write = [](std::ostream& out, const io::PolarFile& f) { io::write_polar(out, f.pattern, f.meta); };
  EXPECT_EQ(reserialize(o.str(), io::read_polar, write), o.str());
  std::istringstream in(o.str());
  const auto f = io::read_polar(in);
  EXPECT_EQ(f.pattern.intensities, p.intensities);
  EXPECT_TRUE(f.pattern.uncertainties.empty());

  const std::string with_err = "# qdot-polar v1\n0,100,10\n10,90,9.5\n";
  EXPECT_EQ(reserialize(with_err, io::read_polar, write), with_err);
  EXPECT_EQ(error_line("# qdot-polar v1\n0,100,10\n10,90\n", io::read_polar), 3u);
  EXPECT_EQ(error_line("# qdot-polar v1\n0,100\n370,90\n", io::read_polar), 3u);
}

TEST(TagsCsv, RoundTrip) {
  const TimestampStream a{Detector::A, {0.5, 3.25, 10.0}, 1e-6}, b{Detector::B, {0.5, 7.0}, 1e-6};
  std::ostringstream o;
  io::write_tags(o, a, b);
  EXPECT_EQ(o.str(), "# qdot-tags v1\n# duration_s=1e-06\nA,0.5\nB,0.5\nA,3.25\nB,7\nA,10\n");
  const auto write = [](std::ostream& out, const io::TagsFile& f) { io::write_tags(out, f.a, f.b, f.meta); };
  EXPECT_EQ(reserialize(o.str(), io::read_tags, write), o.str());
  std::istringstream in(o.str());
  const auto f = io::read_tags(in);
  EXPECT_EQ(f.a, a);
  EXPECT_EQ(f.b, b);
  EXPECT_EQ(error_line("# qdot-tags v1\n# duration_s=1\nA,2\nC,3\n", io::read_tags), 4u);
  EXPECT_EQ(error_line("# qdot-tags v1\n# duration_s=1\nA,2\nB,1\n", io::read_tags), 4u);
  EXPECT_EQ(error_line("# qdot-tags v1\nA,2\n", io::read_tags), 0u);
}

TEST(HistogramCsv, RoundTrip) {
  const TimestampStream a{Detector::A, {0.0, 12.6, 30.0}, 1e-6}, b{Detector::B, {0.3, 25.0}, 1e-6};
  const auto h = correlate(a, b, {0.5, 25.0, 12.5, true});
  io::Metadata extra;
  extra.set("seed", std::string("12"));
  std::ostringstream o;
  io::write_histogram(o, h, extra);
  const auto write = [](std::ostream& out, const io::HistogramFile& f) { io::write_histogram(out, f.histogram, f.meta); };
  EXPECT_EQ(reserialize(o.str(), io::read_histogram, write), o.str());
  std::istringstream in(o.str());
  const auto f = io::read_histogram(in);
  EXPECT_EQ(f.histogram, h);
  EXPECT_EQ(*f.meta.get("seed"), "12");
  const std::string head = "# qdot-g2 v1\n# bin_width_ns=1\n# tau_max_ns=12.5\n# pulse_period_ns=12.5\n"
                           "# duration_s=1\n# counts_a=1\n# counts_b=1\n";
  EXPECT_EQ(error_line(head + "-12.5,1\n-11.5,2\n-10,3\n", io::read_histogram), 10u);
  EXPECT_EQ(error_line(head + "-12.5,1\n-11.5,-2\n", io::read_histogram), 9u);
}

TEST(ArrayCsv, RoundTrip) {
  auto m = synthetic_array({5, 8, 919.0, 8.0, 3});
  std::vector<ArrayEntry> e = m.entries();
  e[3].label = "QD-0-3";
  const QdArrayMap labelled(5, 8, e);
  std::ostringstream o;
  io::write_array(o, labelled);
  const auto write = [](std::ostream& out, const io::ArrayFile& f) { io::write_array(out, f.map, f.meta); };
  EXPECT_EQ(reserialize(o.str(), io::read_array, write), o.str());
  std::istringstream in(o.str());
  EXPECT_EQ(io::read_array(in).map, labelled);
  EXPECT_EQ(error_line("# qdot-array v1\n0,0,919\n0,0,920\n", io::read_array), 3u);
  EXPECT_EQ(error_line("# qdot-array v1\n0,0,919\n0,1,-920\n", io::read_array), 3u);
  EXPECT_EQ(error_line("# qdot-array v1\n0,0\n", io::read_array), 2u);
}

TEST(ReadFile, MissingFileIsIoError) {
  EXPECT_THROW(io::read_file("/nonexistent/spectrum.csv", io::read_spectrum), io::IoError);
}

TEST(Reports, G2Fields) {
  G2Result r;
  r.g2_zero = 0.3;
  r.upper_bound = 0.35;
  r.purity = purity(0.3);
  r.side_peak_areas = {1.0, 2.0};
  const auto j = io::to_json(r);
  for (const char* k : {"g2_zero", "upper_bound", "purity", "side_peak_areas", "background_per_bin"})
    EXPECT_TRUE(j.contains(k)) << k;
}

TEST(Reports, PolarFields) {
  const auto p = polar_pattern(dipoles_from_mixing({0.25, 0.0, 0.1, 0.0}), polarizer_angles(10.0, 180.0));
  const auto j = io::to_json(fit_polar(p));
  for (const char* k : {"beta", "theta_deg", "scale", "ellipticity", "major_axis_deg", "residual"})
    EXPECT_TRUE(j.contains(k)) << k;
}

TEST(Reports, PeakFitFields) {
  const auto e1 = wavelength_to_energy(Wavelength(919.108));
  const PeakModel m({{e1, 21e-6, 1e5}}, 3.0);
  const auto j = io::to_json(fit_peaks(synthesize(m, centered_energy_axis(e1.ev(), 1.5e-6, 40)), 1));
  ASSERT_TRUE(j.contains("peaks"));
  for (const char* k : {"center_ev", "fwhm_ev", "area", "center_err", "fwhm_err"}) EXPECT_TRUE(j["peaks"][0].contains(k));
  for (const char* k : {"background", "lambda", "residual"}) EXPECT_TRUE(j.contains(k)) << k;
}

TEST(Svg, WellFormedOutput) {
  const std::string s = io::svg_plot({{{0, 1, 2}, {1, 4, 9}, "red", false}}, "x <a>", "y");
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  EXPECT_NE(s.find("&lt;a&gt;"), std::string::npos);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  EXPECT_NE(io::svg_polar({{{0, 90}, {1, 2}, "black", true}}).find("<circle"), std::string::npos);
  EXPECT_NE(io::svg_array(synthetic_array({2, 2, 919.0, 1.0, 0})).find("<rect"), std::string::npos);
}
