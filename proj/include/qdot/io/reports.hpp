#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "qdot/array_map.hpp"
#include "qdot/deconvolution.hpp"
#include "qdot/finestructure.hpp"
#include "qdot/g2.hpp"
#include "qdot/lineshape.hpp"

namespace qdot::io {

using Json = nlohmann::ordered_json;

inline Json peaks_to_json(const PeakFitResult& r) {
  Json peaks = Json::array();
  for (std::size_t i = 0; i < r.model.peaks().size(); ++i) {
    const auto& p = r.model.peaks()[i];
    const auto& e = r.errors.at(i);
    peaks.push_back(Json{{"center_ev", p.center().ev()},
                         {"fwhm_ev", p.fwhm_ev()},
                         {"area", p.area()},
                         {"center_err", e.center_ev},
                         {"fwhm_err", e.fwhm_ev},
                         {"area_err", e.area}});
  }
  return peaks;
}

inline Json to_json(const PeakFitResult& r) {
  return {{"peaks", peaks_to_json(r)},
          {"background", r.model.background()},
          {"background_err", r.background_err},
          {"lambda", nullptr},
          {"residual", r.residual},
          {"iterations", r.iterations},
          {"warnings", r.warnings}};
}

/// `residual` is the data misfit of the regularised solve; the intrinsic
/// peak fit keeps its own residual under `fit_residual`.
inline Json to_json(const DeconvolutionResult& r) {
  return {{"peaks", peaks_to_json(r.fit)},
          {"background", r.fit.model.background()},
          {"lambda", r.lambda},
          {"residual", r.residual},
          {"fit_residual", r.fit.residual},
          {"iterations", r.iterations},
          {"warnings", r.warnings}};
}

inline Json to_json(const PolarFitResult& r) {
  Json j{{"beta", r.params.beta},
         {"theta_deg", r.theta_deg()},
         {"scale", r.scale},
         {"ellipticity", r.ellipticity},
         {"major_axis_deg", r.major_axis_deg},
         {"residual", r.residual},
         {"gamma", r.params.gamma},
         {"beta_err", r.beta_err},
         {"theta_err_deg", r.theta_err_deg}};
  j["beta_upper_bound"] = r.beta_upper_bound ? Json(*r.beta_upper_bound) : Json(nullptr);
  j["iterations"] = r.iterations;
  j["warnings"] = r.warnings;
  return j;
}

inline Json to_json(const G2Result& r) {
  return {{"g2_zero", r.g2_zero},
          {"upper_bound", r.upper_bound},
          {"purity", r.purity ? Json(*r.purity) : Json(nullptr)},
          {"side_peak_areas", r.side_peak_areas},
          {"background_per_bin", r.background_per_bin},
          {"zero_peak_area", r.zero_peak_area},
          {"g2_error", r.g2_error},
          {"warnings", r.warnings}};
}

inline Json to_json(const HistogramFitResult& r) {
  return {{"background", r.model.background},
          {"side_amplitude", r.model.side_amplitude},
          {"zero_amplitude", r.model.zero_amplitude},
          {"decay_ns", r.model.decay_ns},
          {"background_err", r.errors.background},
          {"side_amplitude_err", r.errors.side_amplitude},
          {"zero_amplitude_err", r.errors.zero_amplitude},
          {"decay_ns_err", r.errors.decay_ns},
          {"g2_zero", r.g2_zero},
          {"g2_error", r.g2_error},
          {"residual", r.residual},
          {"iterations", r.iterations}};
}

inline Json to_json(const UniformityStats& s) {
  return {{"mean_nm", s.mean_nm}, {"std_nm", s.std_nm}, {"mean_ev", s.mean_ev},
          {"std_ev", s.std_ev},   {"min_nm", s.min_nm}, {"max_nm", s.max_nm}};
}

inline Json to_json(const PairReport& r) {
  Json pairs = Json::array();
  for (const auto& p : r.pairs)
    pairs.push_back(Json{{"a", {p.row_a, p.col_a}}, {"b", {p.row_b, p.col_b}}, {"de_ev", p.de_ev}});
  return {{"threshold_ev", r.threshold_ev}, {"count", r.pairs.size()}, {"pairs", std::move(pairs)}};
}

/// Stable text form used for every report file.
inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

} // namespace qdot::io
