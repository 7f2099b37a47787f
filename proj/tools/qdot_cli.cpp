// qdot: command-line front end for the spectroscopy and photon-statistics library.
//
// Exit codes: 0 success, 1 usage or domain error, 2 I/O or malformed input,
// 3 a fit did not converge.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "qdot/qdot.hpp"

namespace fs = std::filesystem;
using qdot::io::Json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kNoConvergence = 3 };

struct Global {
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string format = "json";
};

struct Output {
  fs::path dir;
  std::string format;

  void prepare() {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw qdot::io::IoError("cannot create output directory '" + dir.string() + "'");
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  void text(const std::string& name, const std::string& body) const { qdot::io::write_text_file(path(name), body); }
  void json(const std::string& name, const Json& j) const { text(name, qdot::io::dump(j)); }
  bool svg() const { return format == "svg"; }
  bool csv() const { return format == "csv"; }
};

template <class Fn>
std::string to_text(Fn&& write) {
  std::ostringstream o;
  write(o);
  return o.str();
}

std::string base_name(const std::string& p) { return fs::path(p).filename().string(); }

Json report_header(const char* command, const Global& g) { return Json{{"command", command}, {"seed", g.seed}}; }

void merge(Json& into, const Json& from) {
  for (auto it = from.begin(); it != from.end(); ++it) into[it.key()] = it.value();
}

std::vector<double> wavelengths_of(const qdot::Spectrum& s) {
  std::vector<double> w;
  for (double e : s.energy()) w.push_back(qdot::kHcEvNm / e);
  return w;
}

std::string spectrum_svg(const qdot::Spectrum& data, const std::vector<double>& model) {
  qdot::io::Series d{wavelengths_of(data), {data.counts().begin(), data.counts().end()}, "black", true};
  std::vector<qdot::io::Series> series{d};
  if (!model.empty()) series.push_back({d.x, model, "red", false});
  return qdot::io::svg_plot(series, "wavelength (nm)", "counts");
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string kind = "spectrum";
  std::string noise = "poisson";
  double p1_nm = 919.108, p2_nm = 918.891;
  double fwhm1_uev = 21.0, fwhm2_uev = 34.0;
  double area1 = 8e6, area2 = 4e6;
  double background = 10.0;
  double irf_uev = 0.0;
  double spacing_uev = 1.5;
  std::size_t half_points = 160;
  double power_nw = 30.0, temperature_k = 9.4;
  double beta = 0.25, gamma = 0.0, theta_deg = 5.0, step_deg = 10.0, polar_counts = 1000.0;
  int rows = 5, cols = 8;
  double mean_nm = 919.0, std_nm = 8.0;
};

int cmd_synth(const SynthArgs& a, const Global& g, Output& out) {
  out.prepare();
  const bool noisy = a.noise == "poisson";
  if (a.kind == "spectrum") {
    const qdot::PhotonEnergy e1 = qdot::wavelength_to_energy(qdot::Wavelength(a.p1_nm));
    const qdot::PhotonEnergy e2 = qdot::wavelength_to_energy(qdot::Wavelength(a.p2_nm));
    const qdot::PeakModel model({{e1, a.fwhm1_uev * qdot::kMicroEv, a.area1}, {e2, a.fwhm2_uev * qdot::kMicroEv, a.area2}},
                                a.background);
    if (!(a.spacing_uev > 0.0) || a.half_points < 3) throw std::domain_error("invalid axis spacing or size");
    const auto axis =
        qdot::centered_energy_axis(0.5 * (e1.ev() + e2.ev()), a.spacing_uev * qdot::kMicroEv, a.half_points);
    qdot::Spectrum clean = a.irf_uev > 0.0 ? qdot::convolve(model, qdot::InstrumentResponse(a.irf_uev * qdot::kMicroEv), axis)
                                           : qdot::synthesize(model, axis);
    std::vector<double> counts(clean.counts().begin(), clean.counts().end());
    if (noisy) counts = qdot::detail::poisson_draw(counts, g.seed);
    qdot::SpectrumMetadata meta;
    meta.set("seed", std::to_string(g.seed));
    meta.set("noise", a.noise);
    meta.set("irf_fwhm_uev", a.irf_uev);
    meta.set("excitation_power_nw", a.power_nw);
    meta.set("temperature_k", a.temperature_k);
    const qdot::Spectrum s(std::vector<double>(axis.begin(), axis.end()), std::move(counts), meta);
    out.text("spectrum.csv", to_text([&](std::ostream& o) { qdot::io::write_spectrum(o, s); }));
    if (out.svg()) out.text("spectrum.svg", spectrum_svg(s, {}));
    return kOk;
  }
  if (a.kind == "polar") {
    const double deg = std::numbers::pi / 180.0;
    const auto d = qdot::dipoles_from_mixing({a.beta, a.gamma, a.theta_deg * deg, 0.0});
    auto p = qdot::polar_pattern(d, qdot::polarizer_angles(a.step_deg, 180.0));
    const double peak = *std::max_element(p.intensities.begin(), p.intensities.end());
    for (double& v : p.intensities) v *= a.polar_counts / peak;
    if (noisy) p.intensities = qdot::detail::poisson_draw(p.intensities, g.seed);
    for (double v : p.intensities) p.uncertainties.push_back(std::sqrt(std::max(v, 1.0)));
    qdot::io::Metadata meta;
    meta.set("seed", std::to_string(g.seed));
    meta.set("noise", a.noise);
    out.text("polar.csv", to_text([&](std::ostream& o) { qdot::io::write_polar(o, p, meta); }));
    if (out.svg()) {
      const auto full = qdot::extend_polarizer_data(p);
      out.text("polar.svg", qdot::io::svg_polar({{full.angles_deg, full.intensities, "black", true}}));
    }
    return kOk;
  }
  if (a.kind == "array") {
    const auto m = qdot::synthetic_array({a.rows, a.cols, a.mean_nm, a.std_nm, g.seed});
    qdot::io::Metadata meta;
    meta.set("seed", std::to_string(g.seed));
    out.text("array.csv", to_text([&](std::ostream& o) { qdot::io::write_array(o, m, meta); }));
    if (out.svg()) out.text("array.svg", qdot::io::svg_array(m));
    return kOk;
  }
  throw CLI::ValidationError("--kind", "unknown kind '" + a.kind + "'");
}

// ---------------------------------------------------------------------------
// fit / deconv

struct FitArgs {
  std::string input;
  std::size_t peaks = 2;
  int max_iterations = 500;
};

int cmd_fit(const FitArgs& a, const Global& g, Output& out) {
  const auto s = qdot::io::read_file(a.input, qdot::io::read_spectrum);
  out.prepare();
  const auto r = qdot::fit_peaks(s, a.peaks, std::nullopt, {a.max_iterations});
  Json j = report_header("fit", g);
  j["input"] = base_name(a.input);
  merge(j, qdot::io::to_json(r));
  out.json("fit.json", j);
  const auto model = r.model.evaluate(s.energy());
  if (out.csv()) {
    const qdot::Spectrum m(std::vector<double>(s.energy().begin(), s.energy().end()), model, s.metadata());
    out.text("fit_model.csv", to_text([&](std::ostream& o) { qdot::io::write_spectrum(o, m); }));
  }
  if (out.svg()) out.text("fit.svg", spectrum_svg(s, model));
  return kOk;
}

struct DeconvArgs {
  std::string input;
  std::size_t peaks = 2;
  double irf_uev = 15.0;
  std::optional<double> lambda;
  std::string rule = "discrepancy";
};

int cmd_deconv(const DeconvArgs& a, const Global& g, Output& out) {
  const auto raw = qdot::io::read_file(a.input, qdot::io::read_spectrum);
  // Measured spectra are typically uniform in wavelength, not energy.
  const auto s = raw.is_uniform() ? raw : qdot::resample_uniform_energy(raw);
  out.prepare();
  qdot::DeconvolutionOptions opt;
  opt.lambda = a.lambda;
  opt.n_peaks = a.peaks;
  opt.rule = a.rule == "upre" ? qdot::LambdaRule::predictive_risk : qdot::LambdaRule::discrepancy;
  const auto r = qdot::deconvolve(s, qdot::InstrumentResponse(a.irf_uev * qdot::kMicroEv), opt);
  Json j = report_header("deconv", g);
  j["input"] = base_name(a.input);
  j["irf_fwhm_ev"] = a.irf_uev * qdot::kMicroEv;
  j["resampled"] = !raw.is_uniform();
  merge(j, qdot::io::to_json(r));
  out.json("deconv.json", j);
  auto meta = s.metadata();
  meta.set("deconvolved_lambda", r.lambda);
  const qdot::Spectrum intrinsic(std::vector<double>(r.intrinsic.energy().begin(), r.intrinsic.energy().end()),
                                 std::vector<double>(r.intrinsic.counts().begin(), r.intrinsic.counts().end()), meta);
  out.text("intrinsic.csv", to_text([&](std::ostream& o) { qdot::io::write_spectrum(o, intrinsic); }));
  if (out.svg()) out.text("deconv.svg", spectrum_svg(intrinsic, r.fit.model.evaluate(intrinsic.energy())));
  return kOk;
}

// ---------------------------------------------------------------------------
// polar-fit

struct PolarArgs {
  std::string input;
  double gamma = 0.0;
  bool extend = false;
};

int cmd_polar_fit(const PolarArgs& a, const Global& g, Output& out) {
  auto f = qdot::io::read_file(a.input, qdot::io::read_polar);
  out.prepare();
  const auto data = a.extend ? qdot::extend_polarizer_data(f.pattern) : f.pattern;
  qdot::PolarFitOptions opt;
  opt.fixed_gamma = a.gamma;
  const auto r = qdot::fit_polar(data, opt);
  Json j = report_header("polar-fit", g);
  j["input"] = base_name(a.input);
  merge(j, qdot::io::to_json(r));
  out.json("polar_fit.json", j);
  const auto d = qdot::dipoles_from_mixing(r.params);
  if (out.csv()) {
    auto model = qdot::polar_pattern(d, data.angles_deg);
    for (double& v : model.intensities) v *= r.scale;
    out.text("polar_model.csv", to_text([&](std::ostream& o) { qdot::io::write_polar(o, model, f.meta); }));
  }
  if (out.svg()) {
    auto curve = qdot::polar_pattern(d, qdot::polarizer_angles(2.0, 360.0));
    for (double& v : curve.intensities) v *= r.scale;
    const auto shown = qdot::extend_polarizer_data(data);
    out.text("polar_fit.svg", qdot::io::svg_polar({{shown.angles_deg, shown.intensities, "black", true},
                                                   {curve.angles_deg, curve.intensities, "red", false}}));
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// hbt-sim / g2

struct CorrelationArgs {
  double bin_width_ns = 0.128;
  double tau_max_ns = 75.0;
  int side_peaks = 5;
};

struct HbtArgs {
  double pulses = 1e7;
  double period_ns = 12.5;
  double lifetime_ns = 1.0;
  double p_excite = 1.0 / 3.0;
  double p_multi = 0.0;
  std::optional<double> drive_power_nw, saturation_power_nw;
  std::string drive_law = "saturating";
  bool poissonian = false;
  double mu = 1.0;
  double eff_a = 0.1, eff_b = 0.1;
  double dark_a = 150.0, dark_b = 250.0;
  double dead_ns = 0.0, jitter_ns = 0.0;
  double splitter = 0.5;
  unsigned workers = 1;
  bool write_tags = false;
  CorrelationArgs corr;
};

std::string histogram_svg(const qdot::CoincidenceHistogram& h) {
  qdot::io::Series s;
  for (std::size_t i = 0; i < h.size(); ++i) {
    s.x.push_back(h.bin_center(i));
    s.y.push_back(double(h.counts[i]));
  }
  return qdot::io::svg_plot({s}, "tau (ns)", "coincidences");
}

int cmd_hbt_sim(const HbtArgs& a, const Global& g, Output& out) {
  if (!(a.pulses >= 1.0)) throw std::domain_error("need at least one pulse");
  qdot::EmitterModel em;
  em.pulse_period_ns = a.period_ns;
  em.lifetime_ns = a.lifetime_ns;
  em.p_excite = a.p_excite;
  em.p_multi = a.p_multi;
  em.drive_power_nw = a.drive_power_nw;
  em.saturation_power_nw = a.saturation_power_nw;
  em.drive_law = a.drive_law == "exponential" ? qdot::DriveLaw::exponential : qdot::DriveLaw::saturating;
  em.poissonian = a.poissonian;
  em.poisson_mean = a.mu;
  qdot::HbtSetup setup;
  setup.a = {a.eff_a, a.dark_a, a.dead_ns, a.jitter_ns};
  setup.b = {a.eff_b, a.dark_b, a.dead_ns, a.jitter_ns};
  setup.splitter_ratio = a.splitter;
  qdot::SimulationConfig cfg;
  cfg.duration_s = std::floor(a.pulses) * a.period_ns * 1e-9;
  cfg.seed = g.seed;
  cfg.workers = a.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : a.workers;
  out.prepare();

  const auto sim = qdot::simulate_streams(em, setup, cfg);
  qdot::CorrelateOptions co{a.corr.bin_width_ns, a.corr.tau_max_ns, a.period_ns, true};
  const auto h = qdot::correlate(sim.a, sim.b, co);
  const auto est = qdot::estimate_g2(h, a.corr.side_peaks, qdot::BackgroundFromRates{a.dark_a, a.dark_b});

  qdot::io::Metadata meta;
  meta.set("seed", std::to_string(g.seed));
  if (a.write_tags)
    out.text("tags.csv", to_text([&](std::ostream& o) { qdot::io::write_tags(o, sim.a, sim.b, meta); }));
  out.text("g2.csv", to_text([&](std::ostream& o) { qdot::io::write_histogram(o, h, meta); }));

  Json j = report_header("hbt-sim", g);
  j["pulses"] = sim.pulses;
  j["duration_s"] = cfg.duration_s;
  j["p_excite"] = em.effective_p_excite();
  j["clicks_a"] = sim.a.times_ns.size();
  j["clicks_b"] = sim.b.times_ns.size();
  j["coincidences"] = h.total();
  j["g2"] = qdot::io::to_json(est);
  out.json("hbt.json", j);
  if (out.svg()) out.text("g2.svg", histogram_svg(h));
  return kOk;
}

struct G2Args {
  std::string input;
  std::string tags;
  std::string background = "rates";
  double dark_a = 150.0, dark_b = 250.0;
  double period_ns = 12.5;
  bool fit = false;
  CorrelationArgs corr;
};

int cmd_g2(const G2Args& a, const Global& g, Output& out) {
  if (a.input.empty() == a.tags.empty()) throw CLI::ValidationError("g2", "give exactly one of --input or --tags");
  qdot::CoincidenceHistogram h;
  if (!a.input.empty()) {
    h = qdot::io::read_file(a.input, qdot::io::read_histogram).histogram;
  } else {
    const auto t = qdot::io::read_file(a.tags, qdot::io::read_tags);
    h = qdot::correlate(t.a, t.b, {a.corr.bin_width_ns, a.corr.tau_max_ns, a.period_ns, true});
  }
  out.prepare();
  qdot::BackgroundModel bg = qdot::BackgroundFromRates{a.dark_a, a.dark_b};
  if (a.background == "baseline") bg = qdot::BackgroundFromBaseline{};
  const auto est = qdot::estimate_g2(h, a.corr.side_peaks, bg);
  Json j = report_header("g2", g);
  j["input"] = base_name(a.input.empty() ? a.tags : a.input);
  j["background_mode"] = a.background;
  merge(j, qdot::io::to_json(est));
  std::optional<qdot::HistogramFitResult> fit;
  if (a.fit) {
    fit = qdot::fit_histogram(h, a.corr.side_peaks);
    j["fit"] = qdot::io::to_json(*fit);
  }
  out.json("g2.json", j);
  if (out.svg()) out.text("g2.svg", histogram_svg(h));
  return kOk;
}

// ---------------------------------------------------------------------------
// array-stats

struct ArrayArgs {
  std::string input;
  double threshold_uev = 300.0;
};

int cmd_array_stats(const ArrayArgs& a, const Global& g, Output& out) {
  const auto f = qdot::io::read_file(a.input, qdot::io::read_array);
  out.prepare();
  Json j = report_header("array-stats", g);
  j["input"] = base_name(a.input);
  j["stats"] = qdot::io::to_json(qdot::uniformity_stats(f.map));
  j["pairs"] = qdot::io::to_json(qdot::find_pairs(f.map, a.threshold_uev * qdot::kMicroEv));
  out.json("array.json", j);
  if (out.svg()) out.text("array.svg", qdot::io::svg_array(f.map));
  return kOk;
}

void add_correlation_options(CLI::App* c, CorrelationArgs& a) {
  c->add_option("--bin-width-ns", a.bin_width_ns, "Histogram bin width")->capture_default_str();
  c->add_option("--tau-max-ns", a.tau_max_ns, "Histogram half-window (whole pulse periods)")->capture_default_str();
  c->add_option("--side-peaks", a.side_peaks, "Side peaks per side used for normalisation")->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"qdot: quantum-dot spectroscopy and photon-statistics toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML file; [subcommand] sections, flags override it");
  Global g;
  app.add_option("--seed", g.seed, "Master random seed")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--format", g.format, "json (report), csv (report + model data), svg (report + plot)")
      ->check(CLI::IsMember({"csv", "json", "svg"}))
      ->capture_default_str();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic spectrum, polar pattern or array map");
  synth->add_option("--kind", sa.kind)->check(CLI::IsMember({"spectrum", "polar", "array"}))->capture_default_str();
  synth->add_option("--noise", sa.noise)->check(CLI::IsMember({"none", "poisson"}))->capture_default_str();
  synth->add_option("--p1-nm", sa.p1_nm)->capture_default_str();
  synth->add_option("--p2-nm", sa.p2_nm)->capture_default_str();
  synth->add_option("--fwhm1-uev", sa.fwhm1_uev)->capture_default_str();
  synth->add_option("--fwhm2-uev", sa.fwhm2_uev)->capture_default_str();
  synth->add_option("--area1", sa.area1, "Integrated counts of peak 1")->capture_default_str();
  synth->add_option("--area2", sa.area2, "Integrated counts of peak 2")->capture_default_str();
  synth->add_option("--background", sa.background, "Dark counts per bin")->capture_default_str();
  synth->add_option("--irf-uev", sa.irf_uev, "Instrument response FWHM; 0 skips the convolution")->capture_default_str();
  synth->add_option("--spacing-uev", sa.spacing_uev)->capture_default_str();
  synth->add_option("--half-points", sa.half_points)->capture_default_str();
  synth->add_option("--power-nw", sa.power_nw)->capture_default_str();
  synth->add_option("--temperature-k", sa.temperature_k)->capture_default_str();
  synth->add_option("--beta", sa.beta)->capture_default_str();
  synth->add_option("--gamma", sa.gamma)->capture_default_str();
  synth->add_option("--theta-deg", sa.theta_deg)->capture_default_str();
  synth->add_option("--step-deg", sa.step_deg)->capture_default_str();
  synth->add_option("--polar-counts", sa.polar_counts, "Peak of the polar pattern")->capture_default_str();
  synth->add_option("--rows", sa.rows)->capture_default_str();
  synth->add_option("--cols", sa.cols)->capture_default_str();
  synth->add_option("--mean-nm", sa.mean_nm)->capture_default_str();
  synth->add_option("--std-nm", sa.std_nm)->capture_default_str();

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit Lorentzian peaks to a spectrum");
  fit->add_option("--input", fa.input)->required();
  fit->add_option("--peaks", fa.peaks)->capture_default_str();
  fit->add_option("--max-iterations", fa.max_iterations)->check(CLI::PositiveNumber)->capture_default_str();

  DeconvArgs da;
  auto* deconv = app.add_subcommand("deconv", "Remove the instrument response and fit intrinsic peaks");
  deconv->add_option("--input", da.input)->required();
  deconv->add_option("--peaks", da.peaks)->capture_default_str();
  deconv->add_option("--irf-uev", da.irf_uev)->capture_default_str();
  deconv->add_option("--lambda", da.lambda, "Fixed regularisation weight");
  deconv->add_option("--rule", da.rule)->check(CLI::IsMember({"discrepancy", "upre"}))->capture_default_str();

  PolarArgs pa;
  auto* polar = app.add_subcommand("polar-fit", "Fit heavy/light-hole mixing to a polar pattern");
  polar->add_option("--input", pa.input)->required();
  polar->add_option("--gamma", pa.gamma, "Fixed out-of-plane mixing")->capture_default_str();
  polar->add_flag("--extend", pa.extend, "Mirror half-turn data onto the full circle first");

  HbtArgs ha;
  auto* hbt = app.add_subcommand("hbt-sim", "Simulate an HBT measurement and histogram it");
  hbt->add_option("--pulses", ha.pulses)->capture_default_str();
  hbt->add_option("--period-ns", ha.period_ns)->capture_default_str();
  hbt->add_option("--lifetime-ns", ha.lifetime_ns)->capture_default_str();
  hbt->add_option("--p-excite", ha.p_excite)->capture_default_str();
  hbt->add_option("--p-multi", ha.p_multi)->capture_default_str();
  hbt->add_option("--drive-power-nw", ha.drive_power_nw);
  hbt->add_option("--saturation-power-nw", ha.saturation_power_nw);
  hbt->add_option("--drive-law", ha.drive_law)->check(CLI::IsMember({"saturating", "exponential"}))->capture_default_str();
  hbt->add_flag("--poissonian", ha.poissonian, "Poisson(mu) photons per pulse");
  hbt->add_option("--mu", ha.mu)->capture_default_str();
  hbt->add_option("--efficiency-a", ha.eff_a)->capture_default_str();
  hbt->add_option("--efficiency-b", ha.eff_b)->capture_default_str();
  hbt->add_option("--dark-a", ha.dark_a, "Dark counts/s, detector A")->capture_default_str();
  hbt->add_option("--dark-b", ha.dark_b, "Dark counts/s, detector B")->capture_default_str();
  hbt->add_option("--dead-time-ns", ha.dead_ns)->capture_default_str();
  hbt->add_option("--jitter-ns", ha.jitter_ns)->capture_default_str();
  hbt->add_option("--splitter", ha.splitter, "Fraction routed to detector A")->capture_default_str();
  hbt->add_option("--workers", ha.workers, "Simulation threads; 0 uses all cores")->capture_default_str();
  hbt->add_flag("--write-tags", ha.write_tags, "Also write the raw timestamp file");
  add_correlation_options(hbt, ha.corr);

  G2Args ga;
  auto* g2 = app.add_subcommand("g2", "Estimate g2(0) from a histogram or timestamp file");
  g2->add_option("--input", ga.input, "Histogram file");
  g2->add_option("--tags", ga.tags, "Timestamp file");
  g2->add_option("--background", ga.background)->check(CLI::IsMember({"rates", "baseline"}))->capture_default_str();
  g2->add_option("--dark-a", ga.dark_a)->capture_default_str();
  g2->add_option("--dark-b", ga.dark_b)->capture_default_str();
  g2->add_option("--period-ns", ga.period_ns)->capture_default_str();
  g2->add_flag("--fit", ga.fit, "Also fit the exponential peak model");
  add_correlation_options(g2, ga.corr);

  ArrayArgs aa;
  auto* arr = app.add_subcommand("array-stats", "Uniformity and spectral pairs of an emitter array");
  arr->add_option("--input", aa.input)->required();
  arr->add_option("--threshold-uev", aa.threshold_uev)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::FileError& e) {
    std::cerr << "qdot: " << e.what() << '\n';
    return kIo;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  Output out{g.out, g.format};
  try {
    if (*synth) return cmd_synth(sa, g, out);
    if (*fit) return cmd_fit(fa, g, out);
    if (*deconv) return cmd_deconv(da, g, out);
    if (*polar) return cmd_polar_fit(pa, g, out);
    if (*hbt) return cmd_hbt_sim(ha, g, out);
    if (*g2) return cmd_g2(ga, g, out);
    if (*arr) return cmd_array_stats(aa, g, out);
  } catch (const qdot::io::ParseError& e) {
    std::cerr << "qdot: parse error: " << e.what() << '\n';
    return kIo;
  } catch (const qdot::io::IoError& e) {
    std::cerr << "qdot: " << e.what() << '\n';
    return kIo;
  } catch (const qdot::FitError& e) {
    std::cerr << "qdot: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const qdot::PolarFitError& e) {
    std::cerr << "qdot: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const qdot::HistogramFitError& e) {
    std::cerr << "qdot: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const CLI::Error& e) {
    std::cerr << "qdot: " << e.what() << '\n';
    return kUsage;
  } catch (const std::logic_error& e) { // domain_error, invalid_argument
    std::cerr << "qdot: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "qdot: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
