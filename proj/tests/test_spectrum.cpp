#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "qdot/spectrum.hpp"

using namespace qdot;

TEST(Spectrum, RejectsBadConstruction) {
  EXPECT_THROW(Spectrum({1.0, 1.0}, {1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(Spectrum({1.0, 0.9}, {1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(Spectrum({1.0, 1.1}, {1.0, -2.0}), std::domain_error);
  EXPECT_THROW(Spectrum({1.0, 1.1}, {1.0}), std::invalid_argument);
  EXPECT_THROW(Spectrum({1.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(Spectrum({-1.0, 1.0}, {1.0, 1.0}), std::domain_error);
}

TEST(Spectrum, MetadataAccessors) {
  SpectrumMetadata m;
  m.set("excitation_power_nw", 30.0);
  m.set("temperature_k", 9.4);
  m.set("integration", std::string("60 s"));
  m.set("temperature_k", 10.0);
  EXPECT_EQ(*m.excitation_power_nw(), 30.0);
  EXPECT_EQ(*m.temperature_k(), 10.0);
  EXPECT_EQ(*m.integration(), "60 s");
  EXPECT_EQ(m.entries().size(), 3u);
  EXPECT_FALSE(m.get("missing").has_value());
}

TEST(Spectrum, UniformityAndBinWidth) {
  const Spectrum s(uniform_energy_axis(1.0, 1.001, 11), std::vector<double>(11, 1.0));
  EXPECT_TRUE(s.is_uniform());
  EXPECT_NEAR(s.mean_spacing(), 1e-4, 1e-15);
  EXPECT_NEAR(s.bin_width(0), 1e-4, 1e-12);
  EXPECT_NEAR(s.bin_width(5), 1e-4, 1e-12);
  const Spectrum t({1.0, 1.1, 1.3}, {1.0, 1.0, 1.0});
  EXPECT_FALSE(t.is_uniform());
  EXPECT_NEAR(t.bin_width(1), 0.15, 1e-12);
}

TEST(Spectrum, CenteredAxis) {
  const auto a = centered_energy_axis(1.35, 1e-6, 4);
  ASSERT_EQ(a.size(), 9u);
  EXPECT_DOUBLE_EQ(a[4], 1.35);
  EXPECT_THROW(centered_energy_axis(1e-6, 1e-6, 4), std::domain_error);
}

TEST(Spectrum, ResamplePreservesLinearDensity) {
  // Axis uniform in wavelength, hence non-uniform in energy.
  std::vector<double> e, c;
  for (int i = 40; i >= 0; --i) e.push_back(1239.841984 / (918.0 + 0.05 * i));
  Spectrum probe(e, std::vector<double>(e.size(), 1.0));
  for (std::size_t i = 0; i < e.size(); ++i) c.push_back(5.0 * probe.bin_width(i));
  const Spectrum s(e, c);
  ASSERT_FALSE(s.is_uniform());
  const Spectrum r = resample_uniform_energy(s);
  EXPECT_TRUE(r.is_uniform());
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r.counts()[i] / r.bin_width(i), 5.0, 0.05);
  EXPECT_NEAR(r.total_counts(), s.total_counts(), 0.02 * s.total_counts());
}
