#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "qdot/units.hpp"

using namespace qdot;

namespace {

// Two-point conversion used as the oracle for the linearised window.
double two_point_window(double center_nm, double de_ev) {
  const double e0 = 1239.841984 / center_nm;
  return 1239.841984 / (e0 - de_ev / 2) - 1239.841984 / (e0 + de_ev / 2);
}

} // namespace

TEST(Units, HcDefinesOneElectronVolt) {
  EXPECT_DOUBLE_EQ(wavelength_to_energy(Wavelength(1239.841984)).ev(), 1.0);
  EXPECT_DOUBLE_EQ(energy_to_wavelength(PhotonEnergy(1.0)).nm(), 1239.841984);
}

TEST(Units, PeakSplitting) {
  const double split = wavelength_to_energy(Wavelength(918.891)).ev() - wavelength_to_energy(Wavelength(919.108)).ev();
  EXPECT_NEAR(split / kMicroEv, 320.0, 2.0);
}

TEST(Units, RoundTripPeakWavelength) {
  const Wavelength w(919.108);
  EXPECT_NEAR(energy_to_wavelength(wavelength_to_energy(w)).nm(), 919.108, 1e-9);
}

TEST(Units, RoundTripAcrossRange) {
  for (double nm = 100.0; nm <= 10000.0; nm *= 1.07) {
    const double back = energy_to_wavelength(wavelength_to_energy(Wavelength(nm))).nm();
    EXPECT_LE(std::abs(back - nm) / nm, 1e-12) << nm;
  }
}

TEST(Units, MicroElectronVolt) {
  const auto e = PhotonEnergy::from_micro_ev(1.3e6);
  EXPECT_DOUBLE_EQ(e.ev(), 1.3);
  EXPECT_DOUBLE_EQ(e.micro_ev(), 1.3e6);
}

TEST(Units, RejectsNonPositive) {
  EXPECT_THROW(Wavelength(0.0), std::domain_error);
  EXPECT_THROW(Wavelength(-919.0), std::domain_error);
  EXPECT_THROW(PhotonEnergy(0.0), std::domain_error);
  EXPECT_THROW(PhotonEnergy(std::nan("")), std::domain_error);
}

TEST(Units, WindowExamples) {
  const Wavelength c(920.0);
  EXPECT_NEAR(energy_window_to_wavelength_window(c, 300e-6), two_point_window(920.0, 300e-6), 1e-6);
  EXPECT_NEAR(energy_window_to_wavelength_window(c, 300e-6), 0.205, 0.001);
  EXPECT_NEAR(energy_window_to_wavelength_window(c, 320e-6), 0.218, 0.002);
  EXPECT_EQ(energy_window_to_wavelength_window(c, 0.0), 0.0);
  EXPECT_THROW(energy_window_to_wavelength_window(c, -1e-6), std::domain_error);
}

TEST(Units, WindowMatchesGapBetweenPeaks) {
  EXPECT_NEAR(energy_window_to_wavelength_window(Wavelength(920.0), 320e-6), 919.108 - 918.891, 0.002);
}

TEST(Units, LinearisedWindowAgreesWithExact) {
  for (double nm = 500.0; nm <= 2000.0; nm += 75.0)
    for (double de = 1e-6; de <= 1e-3; de *= 1.5) {
      const double lin = energy_window_to_wavelength_window(Wavelength(nm), de);
      const double ex = exact_wavelength_window(Wavelength(nm), de);
      EXPECT_LE(std::abs(lin - ex) / ex, 0.005) << nm << " nm, " << de << " eV";
      EXPECT_NEAR(ex, two_point_window(nm, de), 1e-12 * ex);
    }
}
