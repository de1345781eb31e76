#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fastlight/calibration.hpp"
#include "fastlight/error.hpp"
#include "fastlight/scenario.hpp"

namespace fl = fastlight;

namespace {

int run(const std::string& scenario, const fl::RunOptions& opts, bool validate_only) {
  if (validate_only) {
    const auto diags = fl::validate_config(scenario);
    for (const auto& d : diags) std::cerr << d << '\n';
    if (!diags.empty()) return 2;
    std::cout << scenario << ": ok\n";
    return 0;
  }
  const fl::Scenario sc = fl::load_scenario(scenario);
  const fl::RunReport rep = fl::run_scenario(sc, opts);
  const auto& p = rep.pulse;
  std::cout << "scenario " << sc.name << '\n'
            << "  peak advancement " << p.edges.peak_advancement * 1e9 << " ns\n"
            << "  peak gain        " << p.peak_gain << '\n'
            << "  distortion D     " << p.distortion << '\n'
            << "  ringing          " << (p.output.ringing ? "yes" : "no") << '\n'
            << "  front preserved  " << (rep.front.front_preserved ? "yes" : "no") << '\n';
  if (rep.imaging) {
    const auto& im = *rep.imaging;
    std::cout << "  image advancement " << im.maps.whole_image.edges.peak_advancement * 1e9
              << " ns, gain " << im.maps.whole_image.peak_gain << '\n';
    if (im.evaluated_pixels > 0) {
      std::cout << "  map advancement  " << im.advancement_min * 1e9 << " .. "
                << im.advancement_max * 1e9 << " ns, gain " << im.gain_min << " .. "
                << im.gain_max << '\n';
    }
  }
  if (rep.sweep) {
    std::cout << "  sweep rows       " << rep.sweep->rows.size() << ", D change "
              << rep.sweep->summary.distortion_change << '\n';
  }
  std::cout << "  wrote " << rep.files.size() + 1 << " files to " << opts.out_dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulse propagation through fast-light media: traces, maps and metrics"};
  app.require_subcommand(0, 1);

  std::string scenario;
  std::string out_dir = "out";
  std::size_t time_samples = 0;
  unsigned parallel = 1;
  bool validate_only = false;
  bool list = false;
  app.add_option("--scenario", scenario, "preset name or config path");
  app.add_option("--out-dir", out_dir, "output directory")->capture_default_str();
  app.add_option("--time-samples", time_samples, "override pulse and imaging time samples")
      ->check(CLI::Range(std::size_t{4}, std::size_t{1} << 24));
  app.add_option("--parallel", parallel, "worker threads")->check(CLI::Range(1u, 1024u))->capture_default_str();
  app.add_flag("--validate-only", validate_only, "check the config and exit");
  app.add_flag("--list-presets", list, "print preset names");

  auto* cal = app.add_subcommand("calibrate", "fit a line set to a target gain and advancement");
  double gain = 2.0, adv_ns = 50.0, fwhm_ns = 200.0, length_cm = 1.7, wavelength_nm = 795.0;
  double tolerance = 0.02;
  std::string family = "notched-wing";
  std::vector<double> halfwidths_mhz;
  cal->add_option("--gain", gain, "target peak intensity gain")->required();
  cal->add_option("--advancement-ns", adv_ns, "target peak advancement")->required();
  cal->add_option("--fwhm-ns", fwhm_ns, "pulse intensity FWHM")->capture_default_str();
  cal->add_option("--family", family, "notched-wing or wing")->capture_default_str();
  cal->add_option("--halfwidth-mhz", halfwidths_mhz, "searched halfwidths, in order");
  cal->add_option("--length-cm", length_cm)->capture_default_str();
  cal->add_option("--wavelength-nm", wavelength_nm)->capture_default_str();
  cal->add_option("--tolerance", tolerance, "relative tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (list) {
      for (const auto& n : fl::preset_names()) std::cout << n << '\n';
      return 0;
    }
    if (*cal) {
      fl::CalibrationTargets t;
      t.peak_gain = gain;
      t.advancement = adv_ns * 1e-9;
      t.pulse_fwhm = fwhm_ns * 1e-9;
      t.length = length_cm * 1e-2;
      t.carrier_frequency = fl::kSpeedOfLight / (wavelength_nm * 1e-9);
      fl::CalibrationOptions o;
      o.family = fl::line_family_from_string(family);
      for (double h : halfwidths_mhz) o.halfwidths.push_back(h * 1e6);
      o.tolerance = tolerance;
      const auto r = fl::calibrate(t, o);
      std::cout << fl::medium_to_json(r.model) << '\n';
      std::cerr << "measured gain " << r.measured_gain << ", advancement "
                << r.measured_advancement * 1e9 << " ns, halfwidth "
                << r.searched_halfwidth * 1e-6 << " MHz, " << r.evaluations << " evaluations\n";
      return 0;
    }
    if (scenario.empty()) {
      std::cerr << "--scenario is required (see --help)\n";
      return 2;
    }
    fl::RunOptions opts;
    opts.out_dir = out_dir;
    if (time_samples > 0) opts.time_samples = time_samples;
    opts.parallel = parallel;
    return run(scenario, opts, validate_only);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fl::exit_code_for(e);
  }
}
