#include "fastlight/imaging.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "fastlight/error.hpp"

namespace fastlight {

namespace {

constexpr char kStackMagic[8] = {'F', 'L', 'G', 'F', 'S', 'T', 'K', '1'};

std::string pixel_tag(std::size_t ix, std::size_t iy) {
  std::ostringstream os;
  os << "pixel (" << ix << ", " << iy << "): ";
  return os.str();
}

// Unit-amplitude results shared by every pixel with the same medium.
struct PixelRun {
  double scale = std::numeric_limits<double>::quiet_NaN();
  double offset = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> gated;
  PulseMetrics metrics;
};

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "frame raster is little endian");
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw ConfigError("frame stack file is truncated");
  return v;
}

// Next whitespace-separated PGM header token, skipping # comments.
std::string pgm_token(std::istream& is) {
  std::string tok;
  char ch;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string rest;
      std::getline(is, rest);
      if (!tok.empty()) return tok;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(ch);
  }
  if (tok.empty()) throw ConfigError("PGM header is truncated");
  return tok;
}

std::size_t parse_size(const std::string& s, const char* what, long long min = 1) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size() || v < min) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(std::string("PGM ") + what + " is not a valid integer: " + s);
  }
}

}  // namespace

void TransverseGrid::validate() const {
  if (nx < 1 || ny < 1) throw ConfigError("transverse grid needs nx, ny >= 1");
  if (!(pitch > 0.0) || !std::isfinite(pitch)) throw ConfigError("pixel pitch must be > 0");
}

double TransverseGrid::x(std::size_t ix) const noexcept {
  return (static_cast<double>(ix) - 0.5 * static_cast<double>(nx - 1)) * pitch;
}

double TransverseGrid::y(std::size_t iy) const noexcept {
  return (static_cast<double>(iy) - 0.5 * static_cast<double>(ny - 1)) * pitch;
}

double Image::max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : data) {
    if (std::isfinite(v)) m = std::max(m, v);
  }
  return m;
}

double Image::sum() const {
  double s = 0.0;
  for (double v : data) {
    if (std::isfinite(v)) s += v;
  }
  return s;
}

Image make_gaussian_spot(const TransverseGrid& grid, double fwhm_x, double fwhm_y,
                         Point2 center) {
  grid.validate();
  if (!(fwhm_x > 0.0) || !(fwhm_y > 0.0) || !std::isfinite(fwhm_x) || !std::isfinite(fwhm_y)) {
    throw ConfigError("spot FWHM must be finite and > 0");
  }
  if (std::abs(center.x) > grid.half_extent_x() || std::abs(center.y) > grid.half_extent_y()) {
    throw ConfigError("spot center lies outside the transverse grid");
  }
  // Amplitude exp(-2 ln2 r^2 / w^2) gives intensity exp(-4 ln2 r^2 / w^2).
  const double ax = 2.0 * kLn2 / (fwhm_x * fwhm_x);
  const double ay = 2.0 * kLn2 / (fwhm_y * fwhm_y);
  Image img(grid.nx, grid.ny);
  for (std::size_t iy = 0; iy < grid.ny; ++iy) {
    const double dy = grid.y(iy) - center.y;
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const double dx = grid.x(ix) - center.x;
      img.at(ix, iy) = std::exp(-ax * dx * dx - ay * dy * dy);
    }
  }
  return img;
}

Image apply_stencil(const Image& amplitude, const Image& mask, bool allow_resample) {
  if (mask.nx == 0 || mask.ny == 0 || mask.data.size() != mask.nx * mask.ny) {
    throw ConfigError("stencil mask is empty");
  }
  const bool same = mask.nx == amplitude.nx && mask.ny == amplitude.ny;
  if (!same && !allow_resample) {
    std::ostringstream os;
    os << "stencil is " << mask.nx << "x" << mask.ny << " but the field is " << amplitude.nx
       << "x" << amplitude.ny << " and resampling is off";
    throw ConfigError(os.str());
  }
  double peak = 0.0;
  for (double v : mask.data) {
    if (!std::isfinite(v)) throw ConfigError("stencil mask holds a non-finite value");
    peak = std::max(peak, v);
  }
  Image out(amplitude.nx, amplitude.ny);
  for (std::size_t iy = 0; iy < amplitude.ny; ++iy) {
    const std::size_t my = same ? iy : std::min(mask.ny - 1, iy * mask.ny / amplitude.ny);
    for (std::size_t ix = 0; ix < amplitude.nx; ++ix) {
      const std::size_t mx = same ? ix : std::min(mask.nx - 1, ix * mask.nx / amplitude.nx);
      const double m = peak > 0.0 ? std::clamp(mask.at(mx, my) / peak, 0.0, 1.0) : 0.0;
      out.at(ix, iy) = amplitude.at(ix, iy) * m;
    }
  }
  return out;
}

double phase_matching_spread(double wavelength, double length) {
  if (!(wavelength > 0.0) || !(length > 0.0)) {
    throw ConfigError("phase-matching spread needs positive wavelength and length");
  }
  return std::sqrt(wavelength / length);
}

void GradientSpec::validate(const MediumModel& model) const {
  const double bound = phase_matching_spread(model.wavelength(), model.length());
  if (!std::isfinite(max_angle) || std::abs(max_angle) > bound) {
    std::ostringstream os;
    os << "max_angle " << max_angle << " rad exceeds the phase-matching spread " << bound
       << " rad";
    throw ConfigError(os.str());
  }
  if (!flat_pump && (!(pump_waists.x > 0.0) || !(pump_waists.y > 0.0))) {
    throw ConfigError("pump waists must be > 0");
  }
  if (!std::isfinite(detuning_slope)) throw ConfigError("detuning slope must be finite");
}

FieldMap build_field_map(const TransverseGrid& grid, const Image& amplitude,
                         const MediumModel& base_model, const GradientSpec& spec) {
  grid.validate();
  spec.validate(base_model);
  if (amplitude.nx != grid.nx || amplitude.ny != grid.ny) {
    throw ConfigError("amplitude image does not match the transverse grid");
  }
  FieldMap map{grid, amplitude, Image(grid.nx, grid.ny), Image(grid.nx, grid.ny, 1.0)};
  for (std::size_t iy = 0; iy < grid.ny; ++iy) {
    const double dy = grid.y(iy) - spec.pump_center.y;
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const double dx = grid.x(ix) - spec.pump_center.x;
      map.detuning_offset.at(ix, iy) = spec.detuning_slope * dx;
      if (!spec.flat_pump) {
        const double wx = spec.pump_waists.x, wy = spec.pump_waists.y;
        map.strength_scale.at(ix, iy) = std::exp(-2.0 * (dx * dx / (wx * wx) + dy * dy / (wy * wy)));
      }
    }
  }
  return map;
}

MediumModel pixel_model(const MediumModel& base, const FieldMap& map, std::size_t ix,
                        std::size_t iy) {
  if (base.is_vacuum()) return base;
  return base.modulated(map.strength_scale.at(ix, iy), map.detuning_offset.at(ix, iy));
}

Image GatedFrameStack::integrated() const {
  Image out(grid.nx, grid.ny);
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += f.data[i];
  }
  return out;
}

std::vector<double> GatedFrameStack::trace(std::size_t ix, std::size_t iy) const {
  std::vector<double> t(frames.size());
  for (std::size_t b = 0; b < frames.size(); ++b) t[b] = frames[b].at(ix, iy);
  return t;
}

std::vector<double> GatedFrameStack::total_trace() const {
  std::vector<double> t(frames.size());
  for (std::size_t b = 0; b < frames.size(); ++b) {
    double s = 0.0;
    for (double v : frames[b].data) s += v;
    t[b] = s;
  }
  return t;
}

TimeGrid GatedFrameStack::bin_grid() const {
  return TimeGrid{origin + 0.5 * bin_width, bin_width, frames.size()};
}

double GatedFrameStack::total_energy() const {
  double s = 0.0;
  for (const auto& f : frames) {
    for (double v : f.data) s += v;
  }
  return s;
}

std::vector<double> gate_trace(std::span<const double> intensity, const TimeGrid& grid,
                               double bin_width) {
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw ConfigError("gate width must be > 0");
  if (intensity.size() != grid.count || grid.count == 0) {
    throw ConfigError("intensity does not match its time grid");
  }
  if (bin_width < grid.step) {
    std::ostringstream os;
    os << "gate width " << bin_width << " s is shorter than the time step " << grid.step << " s";
    throw ConfigError(os.str());
  }
  // Sample i holds I_i over [i step, (i + 1) step) after the grid start; its
  // energy is split between the gates it overlaps.
  const double ratio = grid.step / bin_width;
  const auto n = static_cast<double>(grid.count);
  const auto bins = static_cast<std::size_t>(std::ceil(n * ratio - 1e-9));
  std::vector<double> out(std::max<std::size_t>(bins, 1), 0.0);
  for (std::size_t i = 0; i < intensity.size(); ++i) {
    const double e = intensity[i] * grid.step;
    const double lo = static_cast<double>(i) * ratio, hi = lo + ratio;
    auto b = static_cast<std::size_t>(std::floor(lo));
    if (b >= out.size()) b = out.size() - 1;
    const double edge = static_cast<double>(b + 1);
    if (hi <= edge || b + 1 == out.size()) {
      out[b] += e;
    } else {
      const double first = e * (edge - lo) / ratio;
      out[b] += first;
      out[b + 1] += e - first;
    }
  }
  return out;
}

ImagingResult propagate_image(const FieldMap& map, const MediumModel& base_model,
                              const ImagingOptions& options) {
  const TransverseGrid& g = map.grid;
  g.validate();
  for (const Image* img : {&map.amplitude, &map.detuning_offset, &map.strength_scale}) {
    if (img->nx != g.nx || img->ny != g.ny) throw ConfigError("field map arrays do not share the grid shape");
  }
  for (double v : map.strength_scale.data) {
    if (!(v >= 0.0)) throw ConfigError("strength_scale must be >= 0");
  }

  const Envelope ref = options.pulse.reference();
  const TimeGrid& tg = ref.grid;
  const auto ref_intensity = ref.intensity();
  const auto ref_gated = gate_trace(ref_intensity, tg, options.gate_width);
  const std::size_t bins = ref_gated.size();

  ImagingResult res;
  res.reference_metrics = analyze(ref_intensity, tg, options.analyze);
  for (GatedFrameStack* s : {&res.reference, &res.output}) {
    s->grid = g;
    s->bin_width = options.gate_width;
    s->origin = tg.start;
    s->frames.assign(bins, Image(g.nx, g.ny));
  }
  res.pixel_metrics.assign(g.size(), std::nullopt);

  // Column ix is owned by exactly one worker; every write goes to that column.
  auto run_columns = [&](std::size_t first, std::size_t stride) {
    PixelRun cache;
    for (std::size_t ix = first; ix < g.nx; ix += stride) {
      for (std::size_t iy = 0; iy < g.ny; ++iy) {
        const double a = map.amplitude.at(ix, iy);
        if (a == 0.0) continue;
        const double scale = map.strength_scale.at(ix, iy);
        const double offset = map.detuning_offset.at(ix, iy);
        if (!(scale == cache.scale && offset == cache.offset)) {
          try {
            const Envelope out = propagate(ref, pixel_model(base_model, map, ix, iy));
            const auto inten = out.intensity();
            cache.gated = gate_trace(inten, tg, options.gate_width);
            cache.metrics = analyze(inten, tg, options.analyze);
          } catch (const NumericalGuardError& e) {
            throw NumericalGuardError(pixel_tag(ix, iy) + e.what());
          } catch (const ConfigError& e) {
            throw ConfigError(pixel_tag(ix, iy) + e.what());
          }
          cache.scale = scale;
          cache.offset = offset;
        }
        const double w = a * a;
        for (std::size_t b = 0; b < bins; ++b) {
          res.reference.frames[b].at(ix, iy) = w * ref_gated[b];
          res.output.frames[b].at(ix, iy) = w * cache.gated[b];
        }
        PulseMetrics m = cache.metrics;
        m.peak_intensity *= w;
        res.pixel_metrics[iy * g.nx + ix] = m;
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.parallel, 1, g.nx);
  if (workers == 1) {
    run_columns(0, 1);
    return res;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        run_columns(w, workers);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  // Report the failure of the lowest worker so the message does not depend on timing.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return res;
}

GatedFrameStack superpixel_bin(const GatedFrameStack& stack, std::size_t factor) {
  if (factor < 1) throw ConfigError("superpixel factor must be >= 1");
  if (factor == 1) return stack;
  const TransverseGrid& g = stack.grid;
  const std::size_t nx = (g.nx + factor - 1) / factor;
  const std::size_t ny = (g.ny + factor - 1) / factor;
  GatedFrameStack out;
  out.grid = TransverseGrid{nx, ny, g.pitch * static_cast<double>(factor)};
  out.bin_width = stack.bin_width;
  out.origin = stack.origin;
  out.padded_x = nx * factor - g.nx;
  out.padded_y = ny * factor - g.ny;
  out.frames.reserve(stack.frames.size());
  for (const auto& f : stack.frames) {
    Image b(nx, ny);
    for (std::size_t iy = 0; iy < g.ny; ++iy) {
      for (std::size_t ix = 0; ix < g.nx; ++ix) b.at(ix / factor, iy / factor) += f.at(ix, iy);
    }
    out.frames.push_back(std::move(b));
  }
  return out;
}

MapSet maps(const GatedFrameStack& reference, const GatedFrameStack& output, double length,
            const MapOptions& options) {
  if (!(reference.grid == output.grid) || reference.bins() != output.bins() ||
      reference.bin_width != output.bin_width || reference.origin != output.origin) {
    throw ConfigError("reference and output frame stacks are not aligned");
  }
  if (!(length > 0.0)) throw ConfigError("medium length must be > 0");
  const std::size_t nx = output.grid.nx, ny = output.grid.ny;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  MapSet m;
  m.gain = Image(nx, ny, nan);
  m.advancement = Image(nx, ny, nan);
  m.group_velocity = Image(nx, ny, nan);
  m.group_index = Image(nx, ny, nan);
  m.uncertainty = Image(nx, ny, nan);
  m.integrated = output.integrated();
  m.low_signal.assign(nx * ny, 0);
  m.empty.assign(nx * ny, 1);

  const TimeGrid tg = output.bin_grid();
  const Image ref_energy = reference.integrated();
  const double max_energy = std::max(0.0, m.integrated.max());
  const double half_bin = 0.5 * output.bin_width;

  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const std::size_t i = iy * nx + ix;
      if (!(m.integrated.data[i] > 0.0) || !(ref_energy.data[i] > 0.0)) continue;
      PulseComparison cmp;
      try {
        cmp = compare(reference.trace(ix, iy), output.trace(ix, iy), tg, options.analyze);
      } catch (const NumericalGuardError&) {
        continue;  // no usable peak: stays empty
      }
      m.empty[i] = 0;
      const double a = cmp.edges.peak_advancement;
      m.gain.data[i] = cmp.peak_gain;
      m.advancement.data[i] = a;
      m.group_index.data[i] = group_index_for_advancement(a, length);
      const double ng = m.group_index.data[i];
      m.group_velocity.data[i] = ng != 0.0 ? kSpeedOfLight / ng : nan;
      const bool low = m.integrated.data[i] < options.low_signal_fraction * max_energy;
      m.low_signal[i] = low ? 1 : 0;
      m.uncertainty.data[i] = low ? options.low_signal_uncertainty : half_bin;
    }
  }
  m.whole_image = compare(reference.total_trace(), output.total_trace(), tg, options.analyze);
  return m;
}

double normalized_cross_correlation(const Image& a, const Image& b) {
  if (a.nx != b.nx || a.ny != b.ny || a.data.empty()) {
    throw ConfigError("cross-correlation needs images of the same shape");
  }
  const double n = static_cast<double>(a.data.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    ma += a.data[i];
    mb += b.data[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double da = a.data[i] - ma, db = b.data[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw NumericalGuardError("cross-correlation of a constant image");
  return sab / std::sqrt(saa * sbb);
}

Image letter_c_mask(std::size_t nx, std::size_t ny, double outer_fraction) {
  if (nx < 4 || ny < 4) throw ConfigError("letter mask needs at least 4x4 pixels");
  if (!(outer_fraction > 0.0 && outer_fraction <= 1.0)) {
    throw ConfigError("letter size must be in (0, 1] of the half width");
  }
  Image img(nx, ny);
  const double cx = 0.5 * static_cast<double>(nx - 1), cy = 0.5 * static_cast<double>(ny - 1);
  const double outer = outer_fraction * 0.5 * static_cast<double>(std::min(nx, ny));
  const double inner = 0.5 * outer;
  // opening of +/- 45 degrees toward +x
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const double dx = static_cast<double>(ix) - cx, dy = static_cast<double>(iy) - cy;
      const double rho = std::hypot(dx, dy);
      const bool ring = rho <= outer && rho >= inner;
      const bool gap = dx > 0.0 && std::abs(dy) < dx;
      img.at(ix, iy) = ring && !gap ? 1.0 : 0.0;
    }
  }
  return img;
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open stencil image " + path.string());
  const std::string magic = pgm_token(is);
  if (magic != "P2" && magic != "P5") throw ConfigError(path.string() + " is not a P2/P5 graymap");
  const std::size_t w = parse_size(pgm_token(is), "width");
  const std::size_t h = parse_size(pgm_token(is), "height");
  const std::size_t maxval = parse_size(pgm_token(is), "maxval");
  if (maxval > 65535) throw ConfigError("PGM maxval above 65535");
  Image img(w, h);
  if (magic == "P2") {
    for (auto& v : img.data) {
      std::string tok;
      try {
        tok = pgm_token(is);
      } catch (const ConfigError&) {
        throw ConfigError(path.string() + ": PGM raster is truncated");
      }
      const std::size_t sample = parse_size(tok, "sample", 0);
      if (sample > maxval) throw ConfigError(path.string() + ": PGM sample above maxval");
      v = static_cast<double>(sample);
    }
    return img;
  }
  const std::size_t bytes = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(w * h * bytes);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
    throw ConfigError(path.string() + ": PGM raster is truncated");
  }
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    img.data[i] = bytes == 1 ? raw[i] : raw[2 * i] * 256.0 + raw[2 * i + 1];
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << "P5\n" << img.nx << ' ' << img.ny << "\n255\n";
  const double peak = img.max();
  for (double v : img.data) {
    double s = std::isfinite(v) && peak > 0.0 ? v / peak : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * s))));
  }
}

void write_map_csv(const std::filesystem::path& path, const Image& img) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << "x_index,y_index,value\n" << std::setprecision(12);
  for (std::size_t iy = 0; iy < img.ny; ++iy) {
    for (std::size_t ix = 0; ix < img.nx; ++ix) {
      const double v = img.at(ix, iy);
      os << ix << ',' << iy << ',';
      if (std::isfinite(v)) os << v;
      else os << "nan";
      os << '\n';
    }
  }
}

void write_frame_stack(const std::filesystem::path& path, const GatedFrameStack& stack) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os.write(kStackMagic, sizeof kStackMagic);
  put<std::uint64_t>(os, stack.grid.nx);
  put<std::uint64_t>(os, stack.grid.ny);
  put<std::uint64_t>(os, stack.frames.size());
  put<double>(os, stack.bin_width);
  put<double>(os, stack.origin);
  put<double>(os, stack.grid.pitch);
  for (const auto& f : stack.frames) {
    os.write(reinterpret_cast<const char*>(f.data.data()),
             static_cast<std::streamsize>(f.data.size() * sizeof(double)));
  }
}

GatedFrameStack read_frame_stack(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kStackMagic, sizeof magic) != 0) {
    throw ConfigError(path.string() + " is not a frame stack");
  }
  GatedFrameStack s;
  s.grid.nx = get<std::uint64_t>(is);
  s.grid.ny = get<std::uint64_t>(is);
  const auto bins = get<std::uint64_t>(is);
  s.bin_width = get<double>(is);
  s.origin = get<double>(is);
  s.grid.pitch = get<double>(is);
  s.grid.validate();
  s.frames.assign(bins, Image(s.grid.nx, s.grid.ny));
  for (auto& f : s.frames) {
    is.read(reinterpret_cast<char*>(f.data.data()),
            static_cast<std::streamsize>(f.data.size() * sizeof(double)));
    if (!is) throw ConfigError(path.string() + ": frame data is truncated");
  }
  return s;
}

}  // namespace fastlight
