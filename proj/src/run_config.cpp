#include "idvo/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>

extern char** environ;

namespace idvo {

namespace {

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string format_double(double x) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
  return out.str();
}

double to_double(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double x = std::strtod(begin, &end);
  if (s.empty() || end != begin + s.size() || !std::isfinite(x)) throw ConfigError("not a number");
  return x;
}

template <typename Int>
Int to_int(const std::string& s) {
  Int x{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("not an integer");
  return x;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("expected true or false");
}

template <typename Access>
Entry real(std::string key, Access access) {
  return {std::move(key), [access](RunConfig& c, const std::string& v) { access(c) = to_double(v); },
          [access](const RunConfig& c) { return format_double(access(const_cast<RunConfig&>(c))); }};
}

template <typename Int, typename Access>
Entry integer(std::string key, Access access) {
  return {std::move(key), [access](RunConfig& c, const std::string& v) { access(c) = to_int<Int>(v); },
          [access](const RunConfig& c) { return std::to_string(access(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Entry boolean(std::string key, Access access) {
  return {std::move(key), [access](RunConfig& c, const std::string& v) { access(c) = to_bool(v); },
          [access](const RunConfig& c) { return std::string(access(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <typename Access>
Entry text(std::string key, Access access) {
  return {std::move(key), [access](RunConfig& c, const std::string& v) { access(c) = v; },
          [access](const RunConfig& c) { return access(const_cast<RunConfig&>(c)); }};
}

std::vector<int> parse_scales(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_int<int>(item));
  if (out.empty()) throw ConfigError("expected a comma-separated list such as 1,2,4,8");
  return out;
}

std::string format_scales(const std::vector<int>& scales) {
  std::string out;
  for (std::size_t i = 0; i < scales.size(); ++i) out += (i ? "," : "") + std::to_string(scales[i]);
  return out;
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = [] {
    using C = RunConfig;
    std::vector<Entry> e;
    e.push_back(real("lr", [](C& c) -> double& { return c.optimizer.adam.lr; }));
    e.push_back(real("beta1", [](C& c) -> double& { return c.optimizer.adam.beta1; }));
    e.push_back(real("beta2", [](C& c) -> double& { return c.optimizer.adam.beta2; }));
    e.push_back(real("epsilon", [](C& c) -> double& { return c.optimizer.adam.epsilon; }));
    e.push_back(real("lr_depth", [](C& c) -> double& { return c.optimizer.lr_depth; }));
    e.push_back(real("lr_pose", [](C& c) -> double& { return c.optimizer.lr_pose; }));
    e.push_back(real("lr_mask", [](C& c) -> double& { return c.optimizer.lr_mask; }));
    e.push_back(integer<int>("iters", [](C& c) -> int& { return c.optimizer.iters; }));
    e.push_back(integer<int>("snippet_len", [](C& c) -> int& { return c.optimizer.snippet_len; }));
    e.push_back(integer<int>("snippet_stride", [](C& c) -> int& { return c.snippet_stride; }));
    e.push_back(real("w_inertia", [](C& c) -> double& { return c.optimizer.weights.inertia; }));
    e.push_back(real("w_rec", [](C& c) -> double& { return c.optimizer.weights.rec; }));
    e.push_back(real("w_ssim", [](C& c) -> double& { return c.optimizer.weights.ssim; }));
    e.push_back(real("w_align", [](C& c) -> double& { return c.optimizer.weights.align; }));
    e.push_back(real("w_mask", [](C& c) -> double& { return c.optimizer.weights.mask; }));
    e.push_back({"scales", [](C& c, const std::string& v) { c.optimizer.weights.scales = parse_scales(v); },
                 [](const C& c) { return format_scales(c.optimizer.weights.scales); }});
    e.push_back(real("chi", [](C& c) -> double& { return c.optimizer.inertia.chi; }));
    e.push_back(real("a_typ", [](C& c) -> double& { return c.optimizer.inertia.a_typ; }));
    e.push_back(real("j_typ", [](C& c) -> double& { return c.optimizer.inertia.j_typ; }));
    e.push_back(boolean("symmetric_denominator",
                        [](C& c) -> bool& { return c.optimizer.inertia.symmetric_denominator; }));
    e.push_back(real("dhem_speed_gain", [](C& c) -> double& { return c.optimizer.dhem.speed_gain; }));
    e.push_back(real("dhem_steering_gain", [](C& c) -> double& { return c.optimizer.dhem.steering_gain; }));
    e.push_back(real("dhem_max_fraction", [](C& c) -> double& { return c.optimizer.dhem.max_fraction; }));
    e.push_back(boolean("dhem_enabled", [](C& c) -> bool& { return c.optimizer.dhem.enabled; }));
    e.push_back(integer<int>("dhem_refresh", [](C& c) -> int& { return c.optimizer.dhem_refresh; }));
    e.push_back({"source_direction",
                 [](C& c, const std::string& v) {
                   if (v == "previous") c.optimizer.direction = SourceDirection::previous;
                   else if (v == "next") c.optimizer.direction = SourceDirection::next;
                   else if (v == "both") c.optimizer.direction = SourceDirection::both;
                   else throw ConfigError("expected previous, next or both");
                 },
                 [](const C& c) {
                   switch (c.optimizer.direction) {
                     case SourceDirection::previous: return std::string("previous");
                     case SourceDirection::next: return std::string("next");
                     default: return std::string("both");
                   }
                 }});
    e.push_back(real("static_threshold", [](C& c) -> double& { return c.optimizer.static_threshold; }));
    e.push_back(real("init_depth", [](C& c) -> double& { return c.optimizer.init_depth; }));
    e.push_back(real("init_step", [](C& c) -> double& { return c.optimizer.init_step; }));
    e.push_back(real("init_mask_logit", [](C& c) -> double& { return c.optimizer.init_mask_logit; }));
    e.push_back(boolean("fix_gauge", [](C& c) -> bool& { return c.optimizer.fix_gauge; }));
    e.push_back(integer<std::uint64_t>("seed", [](C& c) -> std::uint64_t& { return c.optimizer.seed; }));
    e.push_back(integer<int>("threads", [](C& c) -> int& { return c.threads; }));
    e.push_back(text("dataset", [](C& c) -> std::string& { return c.dataset; }));
    e.push_back(text("pose_file", [](C& c) -> std::string& { return c.pose_file; }));
    e.push_back(text("out", [](C& c) -> std::string& { return c.out; }));
    e.push_back({"resize",
                 [](C& c, const std::string& v) {
                   if (v == "none") {
                     c.resize.reset();
                     return;
                   }
                   try {
                     c.resize = parse_size(v);
                   } catch (const ParseError& err) {
                     throw ConfigError(err.what());
                   }
                 },
                 [](const C& c) {
                   return c.resize ? std::to_string(c.resize->width) + "x" + std::to_string(c.resize->height)
                                   : std::string("none");
                 }});
    e.push_back(real("depth_cap", [](C& c) -> double& { return c.depth_cap; }));
    e.push_back({"ate_alignment",
                 [](C& c, const std::string& v) {
                   if (v == "scale") c.ate_alignment = AteAlignment::scale;
                   else if (v == "similarity") c.ate_alignment = AteAlignment::similarity;
                   else throw ConfigError("expected scale or similarity");
                 },
                 [](const C& c) {
                   return std::string(c.ate_alignment == AteAlignment::scale ? "scale" : "similarity");
                 }});

    e.push_back(integer<int>("synth_width", [](C& c) -> int& { return c.synth.width; }));
    e.push_back(integer<int>("synth_height", [](C& c) -> int& { return c.synth.height; }));
    e.push_back(integer<int>("synth_frames", [](C& c) -> int& { return c.synth.frames; }));
    e.push_back(integer<std::uint64_t>("synth_seed", [](C& c) -> std::uint64_t& { return c.synth.seed; }));
    e.push_back(real("synth_focal", [](C& c) -> double& { return c.synth.focal; }));
    e.push_back(real("synth_base_depth", [](C& c) -> double& { return c.synth.base_depth; }));
    e.push_back(real("synth_tilt", [](C& c) -> double& { return c.synth.tilt; }));
    e.push_back(integer<int>("synth_bumps", [](C& c) -> int& { return c.synth.bumps; }));
    e.push_back(real("synth_bump_amplitude", [](C& c) -> double& { return c.synth.bump_amplitude; }));
    e.push_back(integer<int>("synth_texture_waves", [](C& c) -> int& { return c.synth.texture_waves; }));
    e.push_back(real("synth_texture_period_min", [](C& c) -> double& { return c.synth.texture_period_min; }));
    e.push_back(real("synth_texture_period_max", [](C& c) -> double& { return c.synth.texture_period_max; }));
    e.push_back(integer<int>("synth_canvas_margin", [](C& c) -> int& { return c.synth.canvas_margin; }));
    e.push_back(real("synth_speed", [](C& c) -> double& { return c.synth.speed; }));
    e.push_back(real("synth_speed_variation", [](C& c) -> double& { return c.synth.speed_variation; }));
    e.push_back(real("synth_yaw_rate", [](C& c) -> double& { return c.synth.yaw_rate; }));
    e.push_back(real("synth_heading_offset", [](C& c) -> double& { return c.synth.heading_offset; }));
    e.push_back(real("synth_jitter_translation", [](C& c) -> double& { return c.synth.jitter_translation; }));
    e.push_back(real("synth_jitter_rotation", [](C& c) -> double& { return c.synth.jitter_rotation; }));
    e.push_back(integer<int>("synth_stop_at", [](C& c) -> int& { return c.synth.stop_at; }));
    e.push_back(integer<int>("synth_stop_length", [](C& c) -> int& { return c.synth.stop_length; }));
    e.push_back(real("synth_noise", [](C& c) -> double& { return c.synth.noise; }));
    e.push_back(real("synth_frame_interval", [](C& c) -> double& { return c.synth.frame_interval; }));
    return e;
  }();
  return entries;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

void RunConfig::validate() const {
  try {
    optimizer.validate();
  } catch (const DomainError& err) {
    throw ConfigError(err.what());
  }
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (snippet_stride < 0) throw ConfigError("snippet_stride must be >= 0");
  if (stride() >= optimizer.snippet_len) {
    throw ConfigError("snippet_stride must be smaller than snippet_len");
  }
  if (!(depth_cap > 0.0)) throw ConfigError("depth_cap must be positive");
}

int RunConfig::stride() const {
  return snippet_stride > 0 ? snippet_stride : std::max(1, optimizer.snippet_len - 2);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : registry()) keys.push_back(e.key);
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                   const std::string& source) {
  const auto& entries = registry();
  const auto it = std::find_if(entries.begin(), entries.end(), [&](const Entry& e) { return e.key == key; });
  if (it == entries.end()) throw ConfigError(source + ": unknown key '" + key + "'");
  try {
    it->set(cfg, value);
  } catch (const ConfigError& err) {
    throw ConfigError(source + ": " + key + "='" + value + "': " + err.what());
  }
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(number);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
    apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str(), path);
}

void apply_environment(RunConfig& cfg, const std::map<std::string, std::string>& env) {
  for (const auto& [name, value] : env) {
    if (name.rfind("IDVO_", 0) != 0) continue;
    std::string key = name.substr(5);
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    apply_setting(cfg, key, value, "environment " + name);
  }
}

std::map<std::string, std::string> idvo_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq == std::string::npos || entry.rfind("IDVO_", 0) != 0) continue;
    env[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return env;
}

void apply_ablation(RunConfig& cfg, const std::string& name) {
  if (name == "no-inertia") {
    cfg.optimizer.weights.inertia = 0.0;
  } else if (name == "no-dhem") {
    cfg.optimizer.dhem.enabled = false;
  } else {
    throw ConfigError("unknown ablation '" + name + "' (expected no-inertia or no-dhem)");
  }
}

std::string serialize(const RunConfig& cfg) {
  std::string out;
  for (const Entry& e : registry()) out += e.key + "=" + e.get(cfg) + "\n";
  return out;
}

void write_config_echo(const std::string& dir, const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::string path = (std::filesystem::path(dir) / "config.txt").string();
  std::ofstream out(path);
  out << "# resolved configuration\n" << serialize(cfg);
  if (!out) throw LoadError("cannot write '" + path + "'");
}

}  // namespace idvo
