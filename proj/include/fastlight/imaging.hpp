#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fastlight/calibration.hpp"
#include "fastlight/medium.hpp"
#include "fastlight/metrics.hpp"
#include "fastlight/signal.hpp"

namespace fastlight {

/// Camera pixel grid. Pixel (ix, iy) is centered at
/// x = (ix - (nx - 1) / 2) * pitch, y = (iy - (ny - 1) / 2) * pitch.
struct TransverseGrid {
  std::size_t nx = 96;
  std::size_t ny = 96;
  double pitch = 25e-6;  // m

  void validate() const;
  std::size_t size() const noexcept { return nx * ny; }
  double x(std::size_t ix) const noexcept;
  double y(std::size_t iy) const noexcept;
  double half_extent_x() const noexcept { return 0.5 * static_cast<double>(nx) * pitch; }
  double half_extent_y() const noexcept { return 0.5 * static_cast<double>(ny) * pitch; }

  bool operator==(const TransverseGrid&) const = default;
};

/// Row-major (y outer, x inner) real image.
struct Image {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> data;

  Image() = default;
  Image(std::size_t nx_, std::size_t ny_, double fill = 0.0)
      : nx(nx_), ny(ny_), data(nx_ * ny_, fill) {}

  double& at(std::size_t ix, std::size_t iy) { return data[iy * nx + ix]; }
  double at(std::size_t ix, std::size_t iy) const { return data[iy * nx + ix]; }
  double max() const;
  double sum() const;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Separable Gaussian amplitude whose intensity FWHM is (fwhm_x, fwhm_y).
/// Throws ConfigError for non-positive widths or a center outside the grid.
Image make_gaussian_spot(const TransverseGrid& grid, double fwhm_x, double fwhm_y,
                         Point2 center = {});

/// Multiplies amplitude by mask / mask.max() (values clamp into [0, 1]). A
/// mask of another shape is resampled nearest-neighbor when `allow_resample`;
/// otherwise a shape mismatch throws ConfigError.
Image apply_stencil(const Image& amplitude, const Image& mask, bool allow_resample = false);

/// Allowed angular phase-mismatch spread sqrt(lambda / L), radians.
double phase_matching_spread(double wavelength, double length);

/// Transverse gradient of the phase matching, expressed through the medium.
struct GradientSpec {
  double detuning_slope = 0.0;          // Hz per m along x
  Point2 pump_waists{750e-6, 950e-6};   // 1/e^2 intensity radii
  Point2 pump_center{};
  double max_angle = 0.0;               // rad, |max_angle| <= sqrt(lambda / L)
  bool flat_pump = false;               // strength_scale = 1 everywhere

  /// Throws ConfigError when |max_angle| exceeds the phase-matching spread of
  /// `model` or the waists are not positive.
  void validate(const MediumModel& model) const;
};

/// Per-pixel input amplitude and medium modulation.
struct FieldMap {
  TransverseGrid grid;
  Image amplitude;
  Image detuning_offset;  // Hz, shift of every line center
  Image strength_scale;   // multiplier of every line strength, >= 0
};

/// detuning_offset = slope * (x - pump_center.x); strength_scale is the
/// elliptical Gaussian pump intensity normalized to 1 at pump_center.
FieldMap build_field_map(const TransverseGrid& grid, const Image& amplitude,
                         const MediumModel& base_model, const GradientSpec& spec);

/// Medium seen by one pixel.
MediumModel pixel_model(const MediumModel& base, const FieldMap& map, std::size_t ix,
                        std::size_t iy);

/// Time-binned intensity frames. frames[b] is an image holding, per pixel, the
/// energy (integral of intensity) collected in [origin + b w, origin + (b+1) w).
struct GatedFrameStack {
  TransverseGrid grid;  // pitch is the (super)pixel pitch
  double bin_width = 2.44e-9;
  double origin = 0.0;
  std::vector<Image> frames;
  /// Zero padding added by superpixel_bin (pixels appended in x and y).
  std::size_t padded_x = 0;
  std::size_t padded_y = 0;

  std::size_t bins() const noexcept { return frames.size(); }
  /// Time-integrated energy per pixel.
  Image integrated() const;
  /// Energy trace of one pixel, one value per bin.
  std::vector<double> trace(std::size_t ix, std::size_t iy) const;
  /// Sum of all pixels, one value per bin.
  std::vector<double> total_trace() const;
  TimeGrid bin_grid() const;
  double total_energy() const;
};

/// Bins sampled intensity into gates of width `bin_width` starting at the
/// grid start. Sample i counts as I_i held over one step; its energy is split
/// by overlap between at most two gates. Throws ConfigError when the gate is
/// shorter than the step.
std::vector<double> gate_trace(std::span<const double> intensity, const TimeGrid& grid,
                               double bin_width);

struct ImagingOptions {
  PulseSetup pulse;
  double gate_width = 2.44e-9;
  unsigned parallel = 1;
  AnalyzeOptions analyze;
};

struct ImagingResult {
  GatedFrameStack reference;
  GatedFrameStack output;
  /// Per-pixel metrics of the full-resolution output trace; empty for pixels
  /// with zero amplitude.
  std::vector<std::optional<PulseMetrics>> pixel_metrics;
  PulseMetrics reference_metrics;
};

/// Propagates every lit pixel independently: pixel envelope = amplitude x the
/// Gaussian probe sent through the pixel's medium. Work is split by pixel
/// column across options.parallel threads; the result does not depend on the
/// thread count. Errors are rethrown annotated with the pixel index.
ImagingResult propagate_image(const FieldMap& map, const MediumModel& base_model,
                              const ImagingOptions& options = {});

/// Sums factor x factor blocks. Dimensions that do not divide are zero padded
/// and the padding recorded. Throws ConfigError for factor < 1.
GatedFrameStack superpixel_bin(const GatedFrameStack& stack, std::size_t factor);

struct MapOptions {
  /// Pixels below this fraction of the largest pixel energy are flagged low-signal.
  double low_signal_fraction = 0.01;
  double low_signal_uncertainty = 10e-9;
  AnalyzeOptions analyze;
};

/// Per-(super)pixel maps. Pixels without signal hold NaN and are flagged empty.
struct MapSet {
  Image gain;
  Image advancement;     // s
  Image group_velocity;  // m/s, c / (1 - A c / L)
  Image group_index;
  Image uncertainty;     // s
  Image integrated;      // time-integrated output energy
  std::vector<std::uint8_t> low_signal;
  std::vector<std::uint8_t> empty;
  PulseComparison whole_image;  // from the traces summed over all pixels
};

MapSet maps(const GatedFrameStack& reference, const GatedFrameStack& output, double length,
            const MapOptions& options = {});

/// Normalized cross-correlation of two equally shaped images, in [-1, 1].
double normalized_cross_correlation(const Image& a, const Image& b);

/// Procedural letter-"c" stencil: an annulus open toward +x (opening +/- 45
/// degrees), outer radius outer_fraction x half the smaller side, inner
/// radius half of that.
Image letter_c_mask(std::size_t nx, std::size_t ny, double outer_fraction = 0.25);

// Portable graymap I/O (P2 and P5 read, P5 written). Values are returned as
// read; apply_stencil normalizes.
Image read_pgm(const std::filesystem::path& path);
/// Writes `img` scaled so its finite maximum maps to 255 (NaN -> 0).
void write_pgm(const std::filesystem::path& path, const Image& img);
/// x_index,y_index,value rows.
void write_map_csv(const std::filesystem::path& path, const Image& img);

/// Binary frame raster: 8-byte magic "FLGFSTK1", then uint64 nx, ny, bins,
/// then float64 bin_width, origin, pitch, then bins * ny * nx float64 values
/// (little endian, frame-major, row-major inside a frame).
void write_frame_stack(const std::filesystem::path& path, const GatedFrameStack& stack);
GatedFrameStack read_frame_stack(const std::filesystem::path& path);

}  // namespace fastlight
