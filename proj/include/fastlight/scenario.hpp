#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fastlight/calibration.hpp"
#include "fastlight/imaging.hpp"
#include "fastlight/medium.hpp"
#include "fastlight/metrics.hpp"

namespace fastlight {

struct CalibrationConfig {
  CalibrationTargets targets;
  CalibrationOptions options;
};

struct ImagingConfig {
  TransverseGrid grid;
  Point2 spot_fwhm{600e-6, 600e-6};
  Point2 spot_center{};
  /// "" for none, "letter-c" for the built-in mask, otherwise a PGM path
  /// (relative paths resolve against the config file's directory).
  std::string stencil;
  bool stencil_resample = false;
  GradientSpec gradient;
  std::size_t bin_factor = 1;
  double gate_width = 2.44e-9;
  std::size_t time_samples = 1u << 12;
};

struct SweepSpec {
  /// strength_scale, detuning_shift_hz, detuning_shift_mhz, pulse_fwhm_s or pulse_fwhm_ns
  std::string parameter;
  double start = 0.0;
  double stop = 0.0;
  std::size_t steps = 1;

  double value(std::size_t i) const;
};

struct Scenario {
  std::string name;
  std::string notes;
  /// Exactly one of these two is set.
  std::optional<MediumModel> medium;
  std::optional<CalibrationConfig> calibration;
  PulseSetup pulse;
  std::optional<ImagingConfig> imaging;
  std::optional<SweepSpec> sweep;
  double front_turn_on = 0.0;
  std::filesystem::path base_dir;
};

/// Names of the presets compiled into the library.
std::vector<std::string> preset_names();
/// JSON text of a preset, or nullopt.
std::optional<std::string> preset_text(const std::string& name);

struct ParseResult {
  std::optional<Scenario> scenario;  // set when diagnostics is empty
  std::vector<std::string> diagnostics;
};

/// Parses config JSON, collecting every problem instead of stopping at the
/// first. Also checks referenced files and the sampling of the time grids.
ParseResult parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir);

/// Preset name or file path. Throws ConfigError listing all diagnostics.
Scenario load_scenario(const std::string& preset_or_path);

/// Diagnostics for a preset name or file path; empty when valid. Never throws
/// and never writes.
std::vector<std::string> validate_config(const std::string& preset_or_path);

struct RunOptions {
  std::filesystem::path out_dir = "out";
  std::optional<std::size_t> time_samples;  // overrides pulse and imaging samples
  unsigned parallel = 1;
};

struct SweepRow {
  double control = 0.0;
  PulseComparison comparison;
  double cw_advancement = 0.0;  // medium advancement at the probe detuning
};

struct SweepSummary {
  bool advancement_increasing = false;
  bool distortion_nondecreasing = false;
  double distortion_change = 0.0;  // last - first
};

struct SweepResult {
  std::vector<SweepRow> rows;
  SweepSummary summary;
};

/// Runs the scenario's sweep over `model`. Rows are computed independently
/// (in parallel when requested) and returned in sweep order.
SweepResult run_sweep(const Scenario& scenario, const MediumModel& model, unsigned parallel = 1);
void write_sweep_csv(const std::filesystem::path& path, const SweepSpec& spec,
                     const SweepResult& result);

struct ImagingSummary {
  MapSet maps;
  GatedFrameStack reference;  // binned
  GatedFrameStack output;     // binned
  Image input_intensity;
  /// Over (super)pixels whose center lies inside the probe's 1/e^2 contour.
  double advancement_min = 0.0, advancement_max = 0.0;
  double gain_min = 0.0, gain_max = 0.0;
  double group_index_max = 0.0;
  bool advancement_monotone_x = false;  // strictly decreasing with x in every row
  std::size_t evaluated_pixels = 0;
  double stencil_correlation = 0.0;  // integrated output vs stencil mask, NaN without one
};

ImagingSummary run_imaging(const Scenario& scenario, const MediumModel& model,
                           std::size_t time_samples, unsigned parallel);

struct RunReport {
  MediumModel model;
  std::optional<CalibrationResult> calibration;
  PulseComparison pulse;
  FrontReport front;
  std::optional<ImagingSummary> imaging;
  std::optional<SweepResult> sweep;
  std::vector<std::filesystem::path> files;  // relative to out_dir, sorted
};

/// Runs everything the scenario asks for and writes artifacts plus
/// manifest.json (SHA-256 of every file, no timestamps) into out_dir.
RunReport run_scenario(const Scenario& scenario, const RunOptions& options);

/// Lower-case hex SHA-256 of a file.
std::string sha256_file(const std::filesystem::path& path);

/// Exit status for an exception escaping run_scenario: 2 config, 3
/// calibration, 4 numerical guard, 1 anything else.
int exit_code_for(const std::exception& e);

std::string medium_to_json(const MediumModel& model, int indent = 2);

}  // namespace fastlight
