#ifndef IDVO_RUN_CONFIG_HPP
#define IDVO_RUN_CONFIG_HPP

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "idvo/dataset_io.hpp"
#include "idvo/evaluation.hpp"
#include "idvo/optimizer.hpp"

namespace idvo {

// Bad key, bad value or bad flag combination; the CLI maps it to the usage exit code.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Everything a command needs, as one flat key=value namespace. Synthetic-scene keys carry the
// prefix "synth_".
struct RunConfig {
  OptimizerConfig optimizer;
  SynthConfig synth;
  std::string dataset;
  std::string pose_file;
  std::string out = "idvo_out";
  std::optional<Size2> resize = Size2{416, 128};  // nullopt keeps the native size
  int threads = 1;
  int snippet_stride = 0;  // 0: snippet_len - 2, so neighbouring snippets share one pose
  double depth_cap = 80.0;
  AteAlignment ate_alignment = AteAlignment::scale;

  // Throws ConfigError (wrapping the library's DomainError) on inconsistent values.
  void validate() const;
  int stride() const;
};

// Documented key names in echo order.
std::vector<std::string> config_keys();

// Throws ConfigError naming `source` for unknown keys and unparsable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value,
                   const std::string& source = "<override>");

// "key=value" lines; '#' starts a comment, blank lines are skipped.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source);

// Throws LoadError if the file cannot be read.
void apply_config_file(RunConfig& cfg, const std::string& path);

// IDVO_<KEY> overrides, e.g. IDVO_LR=0.001. Unknown IDVO_ names are rejected.
void apply_environment(RunConfig& cfg, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> idvo_environment();

// "no-inertia" sets w_inertia = 0; "no-dhem" disables the hard edge mask.
void apply_ablation(RunConfig& cfg, const std::string& name);

// One key=value line per key, loadable by apply_config_text.
std::string serialize(const RunConfig& cfg);

// Writes serialize(cfg) to <dir>/config.txt, creating dir. Throws LoadError.
void write_config_echo(const std::string& dir, const RunConfig& cfg);

}  // namespace idvo

#endif  // IDVO_RUN_CONFIG_HPP
