#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace qdot {

/// hc in eV*nm. Fixed so that every conversion in the library agrees bit for bit.
inline constexpr double kHcEvNm = 1239.841984;

inline constexpr double kMicroEv = 1e-6;

/// Photon energy, stored in eV.
class PhotonEnergy {
public:
  explicit PhotonEnergy(double ev) : ev_(ev) {
    if (!(ev > 0.0) || !std::isfinite(ev))
      throw std::domain_error("photon energy must be positive and finite, got " + std::to_string(ev) + " eV");
  }

  static PhotonEnergy from_micro_ev(double uev) { return PhotonEnergy(uev * kMicroEv); }

  double ev() const noexcept { return ev_; }
  double micro_ev() const noexcept { return ev_ / kMicroEv; }

  friend bool operator==(PhotonEnergy, PhotonEnergy) = default;
  friend auto operator<=>(PhotonEnergy, PhotonEnergy) = default;

private:
  double ev_;
};

/// Vacuum wavelength, stored in nm.
class Wavelength {
public:
  explicit Wavelength(double nm) : nm_(nm) {
    if (!(nm > 0.0) || !std::isfinite(nm))
      throw std::domain_error("wavelength must be positive and finite, got " + std::to_string(nm) + " nm");
  }

  double nm() const noexcept { return nm_; }

  friend bool operator==(Wavelength, Wavelength) = default;
  friend auto operator<=>(Wavelength, Wavelength) = default;

private:
  double nm_;
};

inline PhotonEnergy wavelength_to_energy(Wavelength w) { return PhotonEnergy(kHcEvNm / w.nm()); }

inline Wavelength energy_to_wavelength(PhotonEnergy e) { return Wavelength(kHcEvNm / e.ev()); }

/// First-order width conversion around `center`: d(lambda) = lambda^2 dE / hc.
/// `de_ev` is an energy difference, so zero is allowed.
inline double energy_window_to_wavelength_window(Wavelength center, double de_ev) {
  if (!(de_ev >= 0.0) || !std::isfinite(de_ev))
    throw std::domain_error("energy window must be non-negative and finite");
  return center.nm() * center.nm() * de_ev / kHcEvNm;
}

/// Exact wavelength span of an energy window centred (in energy) on `center`.
inline double exact_wavelength_window(Wavelength center, double de_ev) {
  if (!(de_ev >= 0.0) || !std::isfinite(de_ev))
    throw std::domain_error("energy window must be non-negative and finite");
  const double e0 = kHcEvNm / center.nm();
  if (de_ev / 2.0 >= e0)
    throw std::domain_error("energy window wider than twice the centre energy");
  return kHcEvNm / (e0 - de_ev / 2.0) - kHcEvNm / (e0 + de_ev / 2.0);
}

} // namespace qdot
