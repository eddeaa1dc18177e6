#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gnsadv/augsearch.hpp"
#include "gnsadv/data.hpp"
#include "gnsadv/gns.hpp"
#include "gnsadv/models.hpp"
#include "gnsadv/optim.hpp"

namespace gnsadv {

/// One documented configuration key. Every key doubles as a `--key` flag.
struct ConfigKey {
  const char* name;
  const char* default_value;  // empty: unset
  const char* help;
};

const std::vector<ConfigKey>& config_keys();

using ConfigMap = std::map<std::string, std::string>;

/// Flat `key = value` document; '#' starts a comment, blank lines ignored.
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::filesystem::path& path);

enum class LrRule { fixed, eps_opt_scaled };
LrRule parse_lr_rule(const std::string& name);
std::string to_string(LrRule rule);

enum class ModelKind { mlp, quadratic };

/// Sweep grid entry: a concrete batch size or the GNS recommendation.
struct GridEntry {
  std::optional<std::size_t> batch;  // nullopt: "recommended"
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = ".";

  ModelKind model = ModelKind::mlp;
  std::vector<std::size_t> hidden{32};
  Activation activation = Activation::tanh;
  std::filesystem::path quadratic_spec;

  OptimizerConfig optimizer;

  std::filesystem::path dataset;
  LoadOptions load;
  BlobSpec blobs;
  double val_fraction = 0.2;

  std::size_t batch_size = 32;
  std::size_t steps = 500;
  std::size_t eval_every = 50;

  PairedBatchConfig pair{8, 64};
  double gns_alpha = kDefaultEmaAlpha;
  std::size_t gns_warmup = kDefaultWarmup;
  BatchPolicy gns_policy = BatchPolicy::balanced;
  std::size_t hardware_cap = 4096;
  std::optional<double> eps_max;
  std::optional<double> b_noise;
  std::size_t gns_steps = 500;

  std::vector<GridEntry> batch_grid;
  LrRule lr_rule = LrRule::eps_opt_scaled;
  std::optional<double> target_loss;

  std::vector<Transform> transforms;
  std::vector<double> magnitudes;
  std::size_t num_groups = 5;
  std::size_t embed_dim = 8;
  std::size_t image_width = 0;
  std::size_t synthetic_images = 0;
  std::size_t image_size = 16;

  /// eps_max if configured, otherwise the learning rate.
  double effective_eps_max() const { return eps_max.value_or(optimizer.learning_rate); }
};

/// Builds a typed config from key/value pairs (file values overlaid with
/// flags). Unknown keys, malformed values, a missing seed or a referenced
/// path that does not exist raise ConfigError.
RunConfig make_run_config(const ConfigMap& values);

/// Applies GNSADV_OUTPUT_DIR if set.
void apply_environment(RunConfig& config);

}  // namespace gnsadv
