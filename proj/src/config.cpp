#include "gnsadv/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "gnsadv/errors.hpp"

namespace gnsadv {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "", "random seed (required)"},
      {"output_dir", ".", "directory for report files"},
      {"model", "mlp", "mlp or quadratic"},
      {"hidden", "32", "comma-separated hidden layer widths for the MLP"},
      {"activation", "tanh", "relu or tanh"},
      {"quadratic_spec", "", "path to a noisy-quadratic spec file"},
      {"optimizer", "sgd", "gd, sgd, momentum, adam or lamb"},
      {"learning_rate", "0.1", "step size"},
      {"momentum", "0.9", "momentum coefficient / Adam beta1"},
      {"beta2", "0.999", "Adam second-moment decay"},
      {"epsilon", "1e-8", "Adam epsilon"},
      {"weight_decay", "0", "decoupled weight decay"},
      {"dataset", "", "dataset path; synthetic blobs are used when empty"},
      {"dataset_format", "csv", "csv or raw_f64"},
      {"labeled", "true", "last column holds the class label"},
      {"normalize", "false", "min-max normalize features into [0, 1]"},
      {"synthetic_samples", "2000", "synthetic blob count"},
      {"synthetic_dim", "2", "synthetic feature dimension"},
      {"synthetic_classes", "2", "synthetic class count"},
      {"synthetic_separation", "3", "distance of blob centres from the origin"},
      {"synthetic_noise", "1", "blob standard deviation"},
      {"synthetic_imbalance", "1", "largest / smallest class size"},
      {"val_fraction", "0.2", "validation share"},
      {"batch_size", "32", "training batch size"},
      {"steps", "500", "optimizer step budget"},
      {"eval_every", "50", "steps between validation evaluations (sweep)"},
      {"gns_b_small", "8", "small batch of the paired estimator"},
      {"gns_b_big", "64", "big batch of the paired estimator (multiple of gns_b_small)"},
      {"gns_alpha", "0.01", "EMA coefficient"},
      {"gns_warmup", "50", "estimator updates before a noise scale is reported"},
      {"gns_policy", "balanced", "balanced, min_time or min_compute"},
      {"hardware_cap", "4096", "largest batch the hardware allows"},
      {"eps_max", "", "infinite-batch step size; defaults to the quadratic oracle (quadratic model) or learning_rate"},
      {"b_noise", "", "known noise scale; skips estimation in sweep"},
      {"gns_steps", "500", "estimation steps run by sweep before training"},
      {"batch_grid", "8,recommended", "sweep batch sizes; 'recommended' uses the GNS advice"},
      {"lr_rule", "eps_opt_scaled", "fixed or eps_opt_scaled"},
      {"target_loss", "", "validation loss that counts as converged (sweep)"},
      {"transforms", "horizontal_flip,rotate,brightness,contrast,gaussian_noise,zoom",
       "transform catalog selection"},
      {"magnitudes", "0,0.25,0.5,0.75,1", "magnitude grid in [0, 1]"},
      {"num_groups", "5", "number of distance bands"},
      {"embed_dim", "8", "embedding dimension for the Frechet distance"},
      {"image_width", "0", "image width for dataset rows; 0 means square"},
      {"synthetic_images", "0", "generate this many synthetic images instead of loading"},
      {"image_size", "16", "side length of synthetic images"},
  };
  return keys;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (!v.empty() && v.find_first_not_of("0123456789") == std::string::npos) {
    try {
      return std::stoull(v);
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("config key '" + key + "': '" + v + "' is not a nonnegative integer");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("config: empty key", line_no);
    if (out.count(key)) throw ParseError("config: duplicate key '" + key + "'", line_no);
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

ConfigMap load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

LrRule parse_lr_rule(const std::string& name) {
  if (name == "fixed") return LrRule::fixed;
  if (name == "eps_opt_scaled") return LrRule::eps_opt_scaled;
  throw ConfigError("unknown lr_rule '" + name + "' (expected fixed or eps_opt_scaled)");
}

std::string to_string(LrRule rule) { return rule == LrRule::fixed ? "fixed" : "eps_opt_scaled"; }

RunConfig make_run_config(const ConfigMap& values) {
  std::set<std::string> known;
  for (const auto& k : config_keys()) known.insert(k.name);
  for (const auto& [k, v] : values)
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");

  auto get = [&](const std::string& key) -> std::string {
    if (auto it = values.find(key); it != values.end()) return it->second;
    for (const auto& k : config_keys())
      if (key == k.name) return k.default_value;
    return {};
  };
  auto count = [&](const std::string& key) { return static_cast<std::size_t>(to_u64(key, get(key))); };
  auto number = [&](const std::string& key) { return to_double(key, get(key)); };
  auto optional_number = [&](const std::string& key) -> std::optional<double> {
    const auto v = get(key);
    if (v.empty()) return std::nullopt;
    return to_double(key, v);
  };

  RunConfig c;
  if (get("seed").empty()) throw ConfigError("config key 'seed' is required");
  c.seed = to_u64("seed", get("seed"));
  c.output_dir = get("output_dir");

  const auto model = get("model");
  if (model == "mlp") c.model = ModelKind::mlp;
  else if (model == "quadratic") c.model = ModelKind::quadratic;
  else throw ConfigError("unknown model '" + model + "' (expected mlp or quadratic)");
  c.hidden.clear();
  for (const auto& w : split_list(get("hidden"))) {
    const auto width = static_cast<std::size_t>(to_u64("hidden", w));
    if (width == 0) throw ConfigError("hidden layer widths must be positive");
    c.hidden.push_back(width);
  }
  c.activation = parse_activation(get("activation"));
  c.quadratic_spec = get("quadratic_spec");
  if (c.model == ModelKind::quadratic) {
    if (c.quadratic_spec.empty()) throw ConfigError("model = quadratic needs 'quadratic_spec'");
  }
  if (!c.quadratic_spec.empty() && !std::filesystem::exists(c.quadratic_spec)) {
    throw ConfigError("quadratic_spec '" + c.quadratic_spec.string() + "' does not exist");
  }

  c.optimizer.kind = parse_optimizer_kind(get("optimizer"));
  c.optimizer.learning_rate = number("learning_rate");
  c.optimizer.beta1 = number("momentum");
  c.optimizer.beta2 = number("beta2");
  c.optimizer.epsilon = number("epsilon");
  c.optimizer.weight_decay = number("weight_decay");
  c.optimizer.validate();

  c.dataset = get("dataset");
  if (!c.dataset.empty() && !std::filesystem::exists(c.dataset)) {
    throw ConfigError("dataset '" + c.dataset.string() + "' does not exist");
  }
  c.load.format = parse_dataset_format(get("dataset_format"));
  c.load.labeled = to_bool("labeled", get("labeled"));
  c.load.normalize = to_bool("normalize", get("normalize"));
  c.blobs.samples = count("synthetic_samples");
  c.blobs.dim = count("synthetic_dim");
  c.blobs.classes = count("synthetic_classes");
  c.blobs.separation = number("synthetic_separation");
  c.blobs.noise = number("synthetic_noise");
  c.blobs.imbalance = number("synthetic_imbalance");
  c.blobs.seed = c.seed;
  c.val_fraction = number("val_fraction");
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");

  c.batch_size = count("batch_size");
  if (c.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  c.steps = count("steps");
  c.eval_every = count("eval_every");
  if (c.eval_every == 0) throw ConfigError("eval_every must be >= 1");

  c.pair = {count("gns_b_small"), count("gns_b_big")};
  c.pair.validate();
  c.gns_alpha = number("gns_alpha");
  if (!(c.gns_alpha > 0.0 && c.gns_alpha <= 1.0)) throw ConfigError("gns_alpha must lie in (0, 1]");
  c.gns_warmup = count("gns_warmup");
  c.gns_policy = parse_batch_policy(get("gns_policy"));
  c.hardware_cap = count("hardware_cap");
  if (c.hardware_cap == 0) throw ConfigError("hardware_cap must be >= 1");
  c.eps_max = optional_number("eps_max");
  if (c.eps_max && !(*c.eps_max > 0.0)) throw ConfigError("eps_max must be positive");
  c.b_noise = optional_number("b_noise");
  if (c.b_noise && !(*c.b_noise >= 0.0)) throw ConfigError("b_noise must be nonnegative");
  c.gns_steps = count("gns_steps");

  for (const auto& item : split_list(get("batch_grid"))) {
    if (item == "recommended") {
      c.batch_grid.push_back({std::nullopt});
    } else {
      const auto b = static_cast<std::size_t>(to_u64("batch_grid", item));
      if (b == 0) throw ConfigError("batch_grid entries must be >= 1");
      c.batch_grid.push_back({b});
    }
  }
  c.lr_rule = parse_lr_rule(get("lr_rule"));
  c.target_loss = optional_number("target_loss");

  for (const auto& t : split_list(get("transforms"))) c.transforms.push_back(parse_transform(t));
  for (const auto& m : split_list(get("magnitudes"))) {
    const double v = to_double("magnitudes", m);
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("magnitudes must lie in [0, 1]");
    c.magnitudes.push_back(v);
  }
  c.num_groups = count("num_groups");
  if (c.num_groups == 0) throw ConfigError("num_groups must be >= 1");
  c.embed_dim = count("embed_dim");
  if (c.embed_dim == 0) throw ConfigError("embed_dim must be >= 1");
  c.image_width = count("image_width");
  c.synthetic_images = count("synthetic_images");
  c.image_size = count("image_size");
  return c;
}

void apply_environment(RunConfig& config) {
  if (const char* dir = std::getenv("GNSADV_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
    config.output_dir = dir;
  }
}

}  // namespace gnsadv
