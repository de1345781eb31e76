#include "fastlight/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <openssl/evp.h>

#include "fastlight/error.hpp"
#include "presets_data.hpp"

namespace fastlight {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Unit {
  const char* suffix;
  double factor;
};

const std::vector<Unit> kTime{{"_s", 1.0}, {"_ms", 1e-3}, {"_us", 1e-6}, {"_ns", 1e-9}};
const std::vector<Unit> kFreq{{"_hz", 1.0}, {"_khz", 1e3}, {"_mhz", 1e6}};
const std::vector<Unit> kLength{{"_m", 1.0}, {"_cm", 1e-2}, {"_mm", 1e-3}, {"_um", 1e-6}, {"_nm", 1e-9}};
const std::vector<Unit> kSlope{{"_hz_per_m", 1.0}, {"_mhz_per_mm", 1e9}};
const std::vector<Unit> kAngle{{"_rad", 1.0}, {"_mrad", 1e-3}};

const std::vector<std::string> kSweepParameters{"strength_scale",    "probe_detuning_hz",
                                                "probe_detuning_mhz", "pulse_fwhm_s",
                                                "pulse_fwhm_ns"};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

// One JSON object being read. Every key that is looked at is remembered so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& obj, std::string path, std::vector<std::string>& diags)
      : obj_(obj), path_(std::move(path)), diags_(diags) {}

  void error(const std::string& msg) const { diags_.push_back(path_ + ": " + msg); }
  const std::string& path() const { return path_; }
  std::vector<std::string>& diagnostics() const { return diags_; }

  bool has(const std::string& key) {
    used_.insert(key);
    return obj_.contains(key);
  }

  const json* get(const std::string& key) {
    used_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  // The one key among base + unit suffixes that is present, if any.
  std::optional<std::pair<std::string, double>> unit_key(const std::string& base,
                                                         const std::vector<Unit>& units) {
    std::vector<std::pair<std::string, double>> found;
    for (const auto& u : units) {
      const std::string key = base + u.suffix;
      used_.insert(key);
      if (obj_.contains(key)) found.emplace_back(key, u.factor);
    }
    if (found.size() > 1) {
      error("give only one of " + found[0].first + " and " + found[1].first);
      return std::nullopt;
    }
    if (found.empty()) return std::nullopt;
    return found.front();
  }

  std::optional<double> quantity(const std::string& base, const std::vector<Unit>& units) {
    const auto k = unit_key(base, units);
    if (!k) return std::nullopt;
    const json& v = obj_.at(k->first);
    if (!v.is_number()) {
      error(k->first + " must be a number");
      return std::nullopt;
    }
    return v.get<double>() * k->second;
  }

  std::optional<Point2> quantity_pair(const std::string& base, const std::vector<Unit>& units) {
    const auto k = unit_key(base, units);
    if (!k) return std::nullopt;
    const json& v = obj_.at(k->first);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      error(k->first + " must be an array of two numbers [x, y]");
      return std::nullopt;
    }
    return Point2{v[0].get<double>() * k->second, v[1].get<double>() * k->second};
  }

  std::optional<std::vector<double>> quantity_list(const std::string& base,
                                                   const std::vector<Unit>& units) {
    const auto k = unit_key(base, units);
    if (!k) return std::nullopt;
    const json& v = obj_.at(k->first);
    std::vector<double> out;
    if (!v.is_array()) {
      error(k->first + " must be an array of numbers");
      return std::nullopt;
    }
    for (const auto& e : v) {
      if (!e.is_number()) {
        error(k->first + " must be an array of numbers");
        return std::nullopt;
      }
      out.push_back(e.get<double>() * k->second);
    }
    return out;
  }

  std::optional<double> number(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      error(key + " must be a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<std::size_t> count(const std::string& key, std::size_t min) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer() || v->get<long long>() < static_cast<long long>(min)) {
      error(key + " must be an integer >= " + std::to_string(min));
      return std::nullopt;
    }
    return static_cast<std::size_t>(v->get<long long>());
  }

  std::optional<std::string> string(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      error(key + " must be a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<bool> boolean(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) {
      error(key + " must be true or false");
      return std::nullopt;
    }
    return v->get<bool>();
  }

  // Child object, or nullopt (with a diagnostic when present but not an object).
  const json* object(const std::string& key) {
    const json* v = get(key);
    if (v && !v->is_object()) {
      error(key + " must be an object");
      return nullptr;
    }
    return v;
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!used_.count(key)) error("unknown key '" + key + "'");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& diags_;
  std::set<std::string> used_;
};

// Length and carrier shared by the medium and calibration sections.
void read_cell(Section& s, double& length, double& carrier) {
  if (auto v = s.quantity("length", kLength)) {
    if (*v > 0.0) length = *v;
    else s.error("length must be > 0");
  }
  const auto wl = s.quantity("wavelength", kLength);
  const auto nu = s.quantity("carrier", kFreq);
  if (wl && nu) s.error("give either wavelength or carrier, not both");
  if (wl) {
    if (*wl > 0.0) carrier = kSpeedOfLight / *wl;
    else s.error("wavelength must be > 0");
  } else if (nu) {
    if (*nu > 0.0) carrier = *nu;
    else s.error("carrier must be > 0");
  }
}

std::optional<MediumModel> read_medium(Section& s) {
  const std::size_t before = s.diagnostics().size();
  double length = kDefaultCellLength, carrier = kDefaultCarrier;
  read_cell(s, length, carrier);
  std::vector<LorentzianLine> lines;
  if (const json* arr = s.get("lines")) {
    if (!arr->is_array()) {
      s.error("lines must be an array");
    } else {
      const MediumModel unit = MediumModel::vacuum(length, carrier);
      for (std::size_t i = 0; i < arr->size(); ++i) {
        const json& e = (*arr)[i];
        Section ls(e, s.path() + ".lines[" + std::to_string(i) + "]", s.diagnostics());
        if (!e.is_object()) {
          ls.error("must be an object");
          continue;
        }
        LorentzianLine line;
        line.center_offset = ls.quantity("center_offset", kFreq).value_or(0.0);
        const auto hw = ls.quantity("halfwidth", kFreq);
        if (!hw) ls.error("halfwidth is required");
        else if (!(*hw > 0.0)) ls.error("halfwidth must be > 0");
        else line.halfwidth = *hw;
        const auto strength = ls.number("strength");
        const auto log_gain = ls.number("log_gain");
        if (strength && log_gain) ls.error("give either strength or log_gain, not both");
        else if (strength) line.strength = *strength;
        else if (log_gain) line.strength = unit.strength_for_log_gain(*log_gain);
        else ls.error("strength or log_gain is required");
        ls.finish();
        lines.push_back(line);
      }
    }
  }
  s.finish();
  if (s.diagnostics().size() != before) return std::nullopt;
  try {
    return MediumModel(std::move(lines), length, carrier);
  } catch (const ConfigError& e) {
    s.error(e.what());
    return std::nullopt;
  }
}

std::optional<CalibrationConfig> read_calibration(Section& s) {
  const std::size_t before = s.diagnostics().size();
  CalibrationConfig c;
  read_cell(s, c.targets.length, c.targets.carrier_frequency);
  if (auto g = s.number("peak_gain")) {
    if (*g > 0.0) c.targets.peak_gain = *g;
    else s.error("peak_gain must be > 0");
  } else {
    s.error("peak_gain is required");
  }
  if (auto a = s.quantity("advancement", kTime)) c.targets.advancement = *a;
  else s.error("advancement is required");
  if (auto f = s.string("family")) {
    try {
      c.options.family = line_family_from_string(*f);
    } catch (const ConfigError& e) {
      s.error(e.what());
    }
  }
  if (auto h = s.quantity_list("halfwidths", kFreq)) {
    for (double v : *h) {
      if (!(v > 0.0)) s.error("halfwidths must be > 0");
    }
    c.options.halfwidths = *h;
  }
  if (auto v = s.quantity("wing_halfwidth", kFreq)) {
    if (*v > 0.0) c.options.wing_halfwidth = *v;
    else s.error("wing_halfwidth must be > 0");
  }
  if (auto v = s.quantity("wing_offset", kFreq)) c.options.wing_offset = *v;
  if (auto v = s.number("tolerance")) {
    if (*v > 0.0) c.options.tolerance = *v;
    else s.error("tolerance must be > 0");
  }
  if (auto v = s.count("max_evaluations", 3)) c.options.max_evaluations = static_cast<int>(*v);
  s.finish();
  if (s.diagnostics().size() != before) return std::nullopt;
  return c;
}

void read_pulse(Section& s, PulseSetup& p) {
  if (auto v = s.quantity("fwhm", kTime)) {
    if (*v > 0.0) p.fwhm = *v;
    else s.error("fwhm must be > 0");
  }
  if (auto v = s.number("window_fwhm")) {
    if (*v >= 8.0) p.window_fwhm = *v;
    else s.error("window_fwhm must be >= 8 (the pulse support would be clipped)");
  }
  if (auto v = s.count("samples", 4)) p.samples = *v;
  s.finish();
}

void read_imaging(Section& s, ImagingConfig& im) {
  if (const json* g = s.object("grid")) {
    Section gs(*g, s.path() + ".grid", s.diagnostics());
    if (auto v = gs.count("nx", 1)) im.grid.nx = *v;
    if (auto v = gs.count("ny", 1)) im.grid.ny = *v;
    if (auto v = gs.quantity("pitch", kLength)) {
      if (*v > 0.0) im.grid.pitch = *v;
      else gs.error("pitch must be > 0");
    }
    gs.finish();
  }
  if (auto v = s.quantity_pair("spot_fwhm", kLength)) {
    if (v->x > 0.0 && v->y > 0.0) im.spot_fwhm = *v;
    else s.error("spot_fwhm must be > 0 on both axes");
  }
  if (auto v = s.quantity_pair("spot_center", kLength)) im.spot_center = *v;
  if (std::abs(im.spot_center.x) > im.grid.half_extent_x() ||
      std::abs(im.spot_center.y) > im.grid.half_extent_y()) {
    s.error("spot_center lies outside the transverse grid");
  }
  if (auto v = s.string("stencil")) im.stencil = *v;
  if (auto v = s.boolean("stencil_resample")) im.stencil_resample = *v;
  if (const json* g = s.object("gradient")) {
    Section gs(*g, s.path() + ".gradient", s.diagnostics());
    if (auto v = gs.quantity("detuning_slope", kSlope)) im.gradient.detuning_slope = *v;
    if (auto v = gs.quantity_pair("pump_waists", kLength)) im.gradient.pump_waists = *v;
    if (auto v = gs.quantity_pair("pump_center", kLength)) im.gradient.pump_center = *v;
    if (auto v = gs.quantity("max_angle", kAngle)) im.gradient.max_angle = *v;
    if (auto v = gs.boolean("flat_pump")) im.gradient.flat_pump = *v;
    gs.finish();
  }
  if (auto v = s.count("bin_factor", 1)) im.bin_factor = *v;
  if (auto v = s.quantity("gate_width", kTime)) {
    if (*v > 0.0) im.gate_width = *v;
    else s.error("gate_width must be > 0");
  }
  if (auto v = s.count("time_samples", 4)) im.time_samples = *v;
  s.finish();
}

std::optional<SweepSpec> read_sweep(Section& s) {
  const std::size_t before = s.diagnostics().size();
  SweepSpec sw;
  if (auto p = s.string("parameter")) {
    if (std::find(kSweepParameters.begin(), kSweepParameters.end(), *p) == kSweepParameters.end()) {
      std::string all;
      for (const auto& k : kSweepParameters) all += (all.empty() ? "" : ", ") + k;
      s.error("unknown sweep parameter '" + *p + "' (expected one of " + all + ")");
    }
    sw.parameter = *p;
  } else {
    s.error("parameter is required");
  }
  if (auto v = s.number("start")) sw.start = *v;
  else s.error("start is required");
  if (auto v = s.number("stop")) sw.stop = *v;
  else s.error("stop is required");
  if (auto v = s.count("steps", 1)) sw.steps = *v;
  s.finish();
  if (sw.parameter == "strength_scale" && (sw.start < 0.0 || sw.stop < 0.0)) {
    s.error("strength_scale must be >= 0");
  }
  if (sw.parameter.rfind("pulse_fwhm", 0) == 0 && !(sw.start > 0.0 && sw.stop > 0.0)) {
    s.error("pulse_fwhm must be > 0");
  }
  if (s.diagnostics().size() != before) return std::nullopt;
  return sw;
}

// Largest |line center| + 4 halfwidths the run can meet, for the Nyquist check.
double line_reach(const Scenario& sc) {
  double reach = 0.0;
  if (sc.medium) {
    for (const auto& l : sc.medium->lines()) {
      reach = std::max(reach, std::abs(l.center_offset) + 4.0 * l.halfwidth);
    }
  } else if (sc.calibration) {
    const auto& o = sc.calibration->options;
    auto hws = o.halfwidths.empty() ? default_halfwidths(o.family) : o.halfwidths;
    const double hw = *std::max_element(hws.begin(), hws.end());
    if (o.family == LineFamily::NotchedWing) {
      reach = std::max(std::abs(o.wing_offset) + 4.0 * o.wing_halfwidth, 4.0 * hw);
    } else {
      reach = 54.0 * hw;  // probe offset bounded by 50 halfwidths
    }
  }
  return reach;
}

void check_step(std::vector<std::string>& diags, const std::string& what, double step,
                double window, double reach) {
  if (reach <= 0.0) return;
  const double needed = 0.5 / reach;
  if (step > needed) {
    std::ostringstream os;
    os << what << ": time step " << fmt(step) << " s is too coarse for the medium lines; required step <= "
       << fmt(needed) << " s (at least " << static_cast<std::size_t>(std::ceil(window / needed))
       << " samples)";
    diags.push_back(os.str());
  }
}

void check_sampling(const Scenario& sc, std::vector<std::string>& diags) {
  const double reach = line_reach(sc);
  const TimeGrid g = sc.pulse.grid();
  check_step(diags, "pulse", g.step, g.duration(), reach);
  if (sc.sweep) {
    const auto& sw = *sc.sweep;
    double extra = 0.0, fwhm = sc.pulse.fwhm;
    if (sw.parameter == "probe_detuning_hz") extra = std::max(std::abs(sw.start), std::abs(sw.stop));
    if (sw.parameter == "probe_detuning_mhz") extra = 1e6 * std::max(std::abs(sw.start), std::abs(sw.stop));
    if (sw.parameter == "pulse_fwhm_s") fwhm = std::max(sw.start, sw.stop);
    if (sw.parameter == "pulse_fwhm_ns") fwhm = 1e-9 * std::max(sw.start, sw.stop);
    const double window = sc.pulse.window_fwhm * fwhm;
    check_step(diags, "sweep", window / static_cast<double>(sc.pulse.samples), window,
               reach > 0.0 ? reach + extra : 0.0);
  }
  if (sc.imaging) {
    const auto& im = *sc.imaging;
    const auto& gr = im.gradient;
    const double hx = im.grid.half_extent_x();
    const double shift = std::abs(gr.detuning_slope) *
                         (hx + std::abs(gr.pump_center.x));
    const double window = sc.pulse.window_fwhm * sc.pulse.fwhm;
    const double step = window / static_cast<double>(im.time_samples);
    check_step(diags, "imaging", step, window, reach > 0.0 ? reach + shift : 0.0);
    if (im.gate_width < step) {
      diags.push_back("imaging: gate_width " + fmt(im.gate_width) +
                      " s is shorter than the time step " + fmt(step) + " s");
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void check_stencil(const Scenario& sc, std::vector<std::string>& diags) {
  if (!sc.imaging) return;
  const std::string& st = sc.imaging->stencil;
  if (st.empty() || st == "letter-c") return;
  const fs::path p = resolve(sc.base_dir, st);
  if (!fs::exists(p)) {
    diags.push_back("imaging.stencil: file not found: " + p.string());
    return;
  }
  try {
    const Image m = read_pgm(p);
    if ((m.nx != sc.imaging->grid.nx || m.ny != sc.imaging->grid.ny) &&
        !sc.imaging->stencil_resample) {
      diags.push_back("imaging.stencil: " + p.string() + " is " + std::to_string(m.nx) + "x" +
                      std::to_string(m.ny) + " but the grid is " +
                      std::to_string(sc.imaging->grid.nx) + "x" +
                      std::to_string(sc.imaging->grid.ny) + "; set stencil_resample");
    }
  } catch (const Error& e) {
    diags.push_back(std::string("imaging.stencil: ") + e.what());
  }
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw ConfigError("cannot open config " + p.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Preset text or file text plus the directory relative paths resolve against.
std::pair<std::string, fs::path> source_of(const std::string& preset_or_path) {
  if (auto t = preset_text(preset_or_path)) return {*t, fs::current_path()};
  const fs::path p(preset_or_path);
  if (!fs::exists(p)) {
    std::string names;
    for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("'" + preset_or_path + "' is neither a preset (" + names +
                      ") nor an existing file");
  }
  return {read_text(p), fs::absolute(p).parent_path()};
}

double row_value(const SweepSpec& s, double v) {
  if (s.parameter == "probe_detuning_mhz") return v * 1e6;
  if (s.parameter == "pulse_fwhm_ns") return v * 1e-9;
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << text;
  if (!os) throw ConfigError("write failed: " + path.string());
}

template <typename F>
void parallel_for(std::size_t n, unsigned parallel, F&& body) {
  const std::size_t workers = std::clamp<std::size_t>(parallel, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

double SweepSpec::value(std::size_t i) const {
  if (steps <= 1) return start;
  return start + (stop - start) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : detail::kPresets) out.emplace_back(p.name);
  return out;
}

std::optional<std::string> preset_text(const std::string& name) {
  for (const auto& p : detail::kPresets) {
    if (name == p.name) return std::string(p.text);
  }
  return std::nullopt;
}

ParseResult parse_scenario(const std::string& json_text, const fs::path& base_dir) {
  ParseResult r;
  auto& diags = r.diagnostics;
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    diags.push_back(std::string("config is not valid JSON: ") + e.what());
    return r;
  }
  if (!root.is_object()) {
    diags.push_back("config must be a JSON object");
    return r;
  }
  Scenario sc;
  sc.base_dir = base_dir;
  Section top(root, "config", diags);
  if (auto v = top.string("name")) sc.name = *v;
  else top.error("name is required");
  if (auto v = top.string("notes")) sc.notes = *v;

  const json* med = top.object("medium");
  const json* cal = top.object("calibration");
  if (top.has("medium") && top.has("calibration")) {
    top.error("give either medium or calibration, not both");
  } else if (!top.has("medium") && !top.has("calibration")) {
    top.error("one of medium or calibration is required");
  }
  if (med) {
    Section s(*med, "medium", diags);
    sc.medium = read_medium(s);
  }
  if (cal) {
    Section s(*cal, "calibration", diags);
    sc.calibration = read_calibration(s);
  }
  if (const json* p = top.object("pulse")) {
    Section s(*p, "pulse", diags);
    read_pulse(s, sc.pulse);
  }
  if (const json* im = top.object("imaging")) {
    Section s(*im, "imaging", diags);
    ImagingConfig cfg;
    read_imaging(s, cfg);
    double length = kDefaultCellLength, carrier = kDefaultCarrier;
    if (sc.medium) {
      length = sc.medium->length();
      carrier = sc.medium->carrier_frequency();
    } else if (sc.calibration) {
      length = sc.calibration->targets.length;
      carrier = sc.calibration->targets.carrier_frequency;
    }
    try {
      cfg.gradient.validate(MediumModel::vacuum(length, carrier));
    } catch (const ConfigError& e) {
      s.error(e.what());
    }
    sc.imaging = cfg;
  }
  if (const json* sw = top.object("sweep")) {
    Section s(*sw, "sweep", diags);
    sc.sweep = read_sweep(s);
  }
  if (const json* fp = top.object("front_probe")) {
    Section s(*fp, "front_probe", diags);
    if (auto v = s.quantity("turn_on", kTime)) sc.front_turn_on = *v;
    s.finish();
  }
  top.finish();
  if (sc.calibration) sc.calibration->targets.pulse_fwhm = sc.pulse.fwhm;
  // Both checks tolerate a partially read scenario.
  check_sampling(sc, diags);
  check_stencil(sc, diags);
  if (diags.empty()) r.scenario = std::move(sc);
  return r;
}

Scenario load_scenario(const std::string& preset_or_path) {
  const auto [text, base] = source_of(preset_or_path);
  ParseResult r = parse_scenario(text, base);
  if (!r.scenario) {
    std::string msg = "invalid scenario '" + preset_or_path + "':";
    for (const auto& d : r.diagnostics) msg += "\n  " + d;
    throw ConfigError(msg);
  }
  return std::move(*r.scenario);
}

std::vector<std::string> validate_config(const std::string& preset_or_path) {
  try {
    const auto [text, base] = source_of(preset_or_path);
    return parse_scenario(text, base).diagnostics;
  } catch (const std::exception& e) {
    return {e.what()};
  }
}

SweepResult run_sweep(const Scenario& sc, const MediumModel& model, unsigned parallel) {
  if (!sc.sweep) throw ConfigError("scenario has no sweep");
  const SweepSpec& spec = *sc.sweep;
  SweepResult res;
  res.rows.resize(spec.steps);
  parallel_for(spec.steps, parallel, [&](std::size_t i) {
    const double v = spec.value(i);
    const double x = row_value(spec, v);
    MediumModel m = model;
    PulseSetup setup = sc.pulse;
    if (spec.parameter == "strength_scale") {
      m = model.modulated(x, 0.0);
    } else if (spec.parameter.rfind("probe_detuning", 0) == 0) {
      m = model.modulated(1.0, -x);  // moving the probe up = moving the lines down
    } else {
      setup.fwhm = x;
    }
    SweepRow row;
    row.control = v;
    row.comparison = measure_pulse(m, setup);
    row.cw_advancement = advancement(m, 0.0);
    res.rows[i] = row;
  });
  auto& s = res.summary;
  s.advancement_increasing = true;
  s.distortion_nondecreasing = true;
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    const auto& a = res.rows[i - 1].comparison;
    const auto& b = res.rows[i].comparison;
    if (!(b.edges.peak_advancement > a.edges.peak_advancement)) s.advancement_increasing = false;
    if (!(b.distortion >= a.distortion)) s.distortion_nondecreasing = false;
  }
  if (!res.rows.empty()) {
    s.distortion_change = res.rows.back().comparison.distortion - res.rows.front().comparison.distortion;
  }
  return res;
}

void write_sweep_csv(const fs::path& path, const SweepSpec& spec, const SweepResult& result) {
  std::ostringstream os;
  os << spec.parameter
     << ",advancement_s,advancement_ns,peak_gain,distortion,beta_up,beta_down,cw_advancement_s,ringing\n";
  const auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("undefined"); };
  for (const auto& r : result.rows) {
    const auto& c = r.comparison;
    os << fmt(r.control) << ',' << fmt(c.edges.peak_advancement) << ','
       << fmt(c.edges.peak_advancement * 1e9) << ',' << fmt(c.peak_gain) << ','
       << fmt(c.distortion) << ',' << opt(c.edges.beta_up) << ',' << opt(c.edges.beta_down)
       << ',' << fmt(r.cw_advancement) << ',' << (c.output.ringing ? 1 : 0) << '\n';
  }
  os << "# advancement_increasing=" << bool_str(result.summary.advancement_increasing) << '\n'
     << "# distortion_nondecreasing=" << bool_str(result.summary.distortion_nondecreasing) << '\n'
     << "# distortion_change=" << fmt(result.summary.distortion_change) << '\n';
  write_text(path, os.str());
}

ImagingSummary run_imaging(const Scenario& sc, const MediumModel& model, std::size_t time_samples,
                           unsigned parallel) {
  if (!sc.imaging) throw ConfigError("scenario has no imaging section");
  const ImagingConfig& im = *sc.imaging;
  const TransverseGrid& grid = im.grid;
  Image amplitude = make_gaussian_spot(grid, im.spot_fwhm.x, im.spot_fwhm.y, im.spot_center);
  std::optional<Image> mask;
  if (im.stencil == "letter-c") {
    mask = letter_c_mask(grid.nx, grid.ny);
  } else if (!im.stencil.empty()) {
    mask = read_pgm(resolve(sc.base_dir, im.stencil));
  }
  if (mask) amplitude = apply_stencil(amplitude, *mask, im.stencil_resample);

  const FieldMap map = build_field_map(grid, amplitude, model, im.gradient);
  ImagingOptions opts;
  opts.pulse = sc.pulse;
  opts.pulse.samples = time_samples;
  opts.gate_width = im.gate_width;
  opts.parallel = parallel;
  const ImagingResult res = propagate_image(map, model, opts);

  ImagingSummary out;
  out.reference = superpixel_bin(res.reference, im.bin_factor);
  out.output = superpixel_bin(res.output, im.bin_factor);
  out.maps = maps(out.reference, out.output, model.length());
  out.input_intensity = Image(grid.nx, grid.ny);
  for (std::size_t i = 0; i < amplitude.data.size(); ++i) {
    out.input_intensity.data[i] = amplitude.data[i] * amplitude.data[i];
  }

  // Probe 1/e^2 intensity contour: radius = fwhm / sqrt(2 ln 2).
  const double rx = im.spot_fwhm.x / std::sqrt(2.0 * kLn2);
  const double ry = im.spot_fwhm.y / std::sqrt(2.0 * kLn2);
  const auto inside = [&](double x, double y) {
    const double u = (x - im.spot_center.x) / rx, v = (y - im.spot_center.y) / ry;
    return u * u + v * v <= 1.0;
  };
  const std::size_t f = im.bin_factor;
  const double half = 0.5 * static_cast<double>(f - 1);
  const auto& mp = out.maps;
  out.advancement_min = out.gain_min = std::numeric_limits<double>::infinity();
  out.advancement_max = out.gain_max = out.group_index_max = -std::numeric_limits<double>::infinity();
  out.advancement_monotone_x = true;
  for (std::size_t by = 0; by < mp.gain.ny; ++by) {
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t bx = 0; bx < mp.gain.nx; ++bx) {
      const double x = grid.x(0) + (static_cast<double>(bx * f) + half) * grid.pitch;
      const double y = grid.y(0) + (static_cast<double>(by * f) + half) * grid.pitch;
      const std::size_t i = by * mp.gain.nx + bx;
      if (!inside(x, y)) continue;
      if (mp.empty[i]) {
        out.advancement_monotone_x = false;
        continue;
      }
      ++out.evaluated_pixels;
      const double a = mp.advancement.data[i];
      out.advancement_min = std::min(out.advancement_min, a);
      out.advancement_max = std::max(out.advancement_max, a);
      out.gain_min = std::min(out.gain_min, mp.gain.data[i]);
      out.gain_max = std::max(out.gain_max, mp.gain.data[i]);
      out.group_index_max = std::max(out.group_index_max, mp.group_index.data[i]);
      if (!(a < prev)) out.advancement_monotone_x = false;
      prev = a;
    }
  }
  // Full-resolution pixels inside the contour must agree on the sign of n_g too.
  for (std::size_t iy = 0; iy < grid.ny; ++iy) {
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const auto& pm = res.pixel_metrics[iy * grid.nx + ix];
      if (!pm || !inside(grid.x(ix), grid.y(iy))) continue;
      const double a = advancement(res.reference_metrics, *pm);
      out.group_index_max = std::max(out.group_index_max, group_index_for_advancement(a, model.length()));
    }
  }
  out.stencil_correlation = std::numeric_limits<double>::quiet_NaN();
  if (mask) {
    const Image ones(grid.nx, grid.ny, 1.0);
    const Image m = apply_stencil(ones, *mask, im.stencil_resample);
    out.stencil_correlation = normalized_cross_correlation(res.output.integrated(), m);
  }
  return out;
}

namespace {

std::string imaging_report(const ImagingSummary& s) {
  std::ostringstream os;
  os << format_report(s.maps.whole_image);
  os << "map_advancement_min_ns=" << fmt(s.advancement_min * 1e9) << '\n'
     << "map_advancement_max_ns=" << fmt(s.advancement_max * 1e9) << '\n'
     << "map_gain_min=" << fmt(s.gain_min) << '\n'
     << "map_gain_max=" << fmt(s.gain_max) << '\n'
     << "map_group_index_max=" << fmt(s.group_index_max) << '\n'
     << "map_advancement_monotone_x=" << bool_str(s.advancement_monotone_x) << '\n'
     << "map_evaluated_pixels=" << s.evaluated_pixels << '\n'
     << "stencil_correlation=" << fmt(s.stencil_correlation) << '\n';
  std::size_t low = 0;
  for (auto f : s.maps.low_signal) low += f;
  os << "low_signal_pixels=" << low << '\n'
     << "superpixel_padding=" << s.output.padded_x << 'x' << s.output.padded_y << '\n';
  return os.str();
}

}  // namespace

std::string medium_to_json(const MediumModel& model, int indent) {
  json j;
  j["length_m"] = model.length();
  j["carrier_hz"] = model.carrier_frequency();
  j["lines"] = json::array();
  for (const auto& l : model.lines()) {
    j["lines"].push_back({{"center_offset_hz", l.center_offset},
                          {"halfwidth_hz", l.halfwidth},
                          {"strength", l.strength}});
  }
  return j.dump(indent);
}

RunReport run_scenario(const Scenario& sc, const RunOptions& options) {
  fs::create_directories(options.out_dir);
  std::vector<fs::path> files;
  const auto emit = [&](const fs::path& name, const std::string& text) {
    write_text(options.out_dir / name, text);
    files.push_back(name);
  };

  Scenario run = sc;
  if (options.time_samples) {
    run.pulse.samples = *options.time_samples;
    if (run.imaging) run.imaging->time_samples = *options.time_samples;
  }

  RunReport rep;
  if (run.medium) {
    rep.model = *run.medium;
  } else if (run.calibration) {
    CalibrationOptions co = run.calibration->options;
    co.pulse = run.pulse;
    rep.calibration = calibrate(run.calibration->targets, co);
    rep.model = rep.calibration->model;
  } else {
    throw ConfigError("scenario has neither medium nor calibration");
  }

  // Single pulse.
  const Envelope ref = run.pulse.reference();
  const Envelope out = propagate(ref, rep.model);
  rep.pulse = compare(ref, out);
  {
    const auto ri = ref.intensity();
    const auto oi = out.intensity();
    const double rp = *std::max_element(ri.begin(), ri.end());
    const double op = *std::max_element(oi.begin(), oi.end());
    std::ostringstream os;
    os << "time_s,reference_intensity,output_intensity,reference_normalized,output_normalized\n";
    for (std::size_t i = 0; i < ri.size(); ++i) {
      os << fmt(ref.grid.time(i)) << ',' << fmt(ri[i]) << ',' << fmt(oi[i]) << ','
         << fmt(ri[i] / rp) << ',' << fmt(oi[i] / op) << '\n';
    }
    emit("traces.csv", os.str());
  }

  FrontProbeOptions fo;
  fo.fwhm = run.pulse.fwhm;
  rep.front = front_probe(rep.model, run.front_turn_on, fo);

  {
    const double a = rep.pulse.edges.peak_advancement;
    const double ng = group_index_for_advancement(a, rep.model.length());
    std::ostringstream os;
    os << "scenario=" << run.name << '\n' << format_report(rep.pulse);
    os << "integrated_group_index=" << fmt(ng) << '\n'
       << "integrated_group_velocity_m_per_s=" << (ng != 0.0 ? fmt(kSpeedOfLight / ng) : "undefined")
       << '\n';
    if (!rep.model.is_vacuum()) {
      os << "cw_group_index=" << fmt(group_index(rep.model, 0.0)) << '\n'
         << "cw_advancement_s=" << fmt(advancement(rep.model, 0.0)) << '\n'
         << "cw_intensity_gain=" << fmt(intensity_gain(rep.model, 0.0)) << '\n';
    }
    os << "front_turn_on_s=" << fmt(rep.front.turn_on) << '\n'
       << "front_earliest_nonzero_s=" << fmt(rep.front.earliest_nonzero) << '\n'
       << "front_pre_ratio=" << fmt(rep.front.pre_front_ratio) << '\n'
       << "front_peak_advancement_s=" << fmt(rep.front.peak_advancement) << '\n'
       << "front_preserved=" << bool_str(rep.front.front_preserved) << '\n';
    if (rep.calibration) {
      os << "calibration_measured_gain=" << fmt(rep.calibration->measured_gain) << '\n'
         << "calibration_measured_advancement_s=" << fmt(rep.calibration->measured_advancement) << '\n'
         << "calibration_searched_halfwidth_hz=" << fmt(rep.calibration->searched_halfwidth) << '\n'
         << "calibration_residual=" << fmt(rep.calibration->residual) << '\n'
         << "calibration_evaluations=" << rep.calibration->evaluations << '\n';
    }
    emit("metrics.txt", os.str());
  }
  emit("medium.json", medium_to_json(rep.model) + "\n");

  if (run.imaging) {
    rep.imaging = run_imaging(run, rep.model, run.imaging->time_samples, options.parallel);
    const auto& s = *rep.imaging;
    const auto map_files = [&](const std::string& stem, const Image& img) {
      write_map_csv(options.out_dir / (stem + ".csv"), img);
      write_pgm(options.out_dir / (stem + ".pgm"), img);
      files.push_back(stem + ".csv");
      files.push_back(stem + ".pgm");
    };
    map_files("map_gain", s.maps.gain);
    map_files("map_advancement", s.maps.advancement);
    map_files("map_group_velocity", s.maps.group_velocity);
    map_files("map_group_index", s.maps.group_index);
    map_files("map_integrated", s.maps.integrated);
    map_files("input_intensity", s.input_intensity);
    Image unc = s.maps.uncertainty;
    write_map_csv(options.out_dir / "map_uncertainty.csv", unc);
    files.push_back("map_uncertainty.csv");
    Image low(s.maps.gain.nx, s.maps.gain.ny);
    for (std::size_t i = 0; i < low.data.size(); ++i) low.data[i] = s.maps.low_signal[i];
    write_map_csv(options.out_dir / "map_low_signal.csv", low);
    files.push_back("map_low_signal.csv");
    write_frame_stack(options.out_dir / "frames_reference.bin", s.reference);
    write_frame_stack(options.out_dir / "frames_output.bin", s.output);
    files.push_back("frames_reference.bin");
    files.push_back("frames_output.bin");
    {
      const TimeGrid bg = s.output.bin_grid();
      const auto rt = s.reference.total_trace();
      const auto ot = s.output.total_trace();
      std::ostringstream os;
      os << "bin_center_s,reference_energy,output_energy\n";
      for (std::size_t b = 0; b < rt.size(); ++b) {
        os << fmt(bg.time(b)) << ',' << fmt(rt[b]) << ',' << fmt(ot[b]) << '\n';
      }
      emit("image_traces.csv", os.str());
    }
    emit("imaging_metrics.txt", imaging_report(s));
  }

  if (run.sweep) {
    rep.sweep = run_sweep(run, rep.model, options.parallel);
    write_sweep_csv(options.out_dir / "sweep.csv", *run.sweep, *rep.sweep);
    files.push_back("sweep.csv");
  }

  std::sort(files.begin(), files.end());
  json manifest;
  manifest["scenario"] = run.name;
  manifest["files"] = json::array();
  for (const auto& f : files) {
    manifest["files"].push_back({{"path", f.generic_string()},
                                 {"bytes", fs::file_size(options.out_dir / f)},
                                 {"sha256", sha256_file(options.out_dir / f)}});
  }
  write_text(options.out_dir / "manifest.json", manifest.dump(2) + "\n");
  rep.files = files;
  return rep;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("sha256: cannot allocate digest context");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (is) {
    is.read(buf.data(), buf.size());
    if (is.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(md[i]);
  return os.str();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CalibrationError*>(&e)) return 3;
  if (dynamic_cast<const NumericalGuardError*>(&e)) return 4;
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  return 1;
}

}  // namespace fastlight
