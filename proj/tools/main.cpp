#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

#include "gnsadv/commands.hpp"
#include "gnsadv/config.hpp"
#include "gnsadv/errors.hpp"

namespace {

struct SubcommandOptions {
  std::string config_file;
  std::map<std::string, std::string> flags;
};

void add_config_flags(CLI::App* sub, SubcommandOptions& opts) {
  sub->add_option("--config", opts.config_file, "key = value run-config file")->check(CLI::ExistingFile);
  for (const auto& key : gnsadv::config_keys()) {
    std::string help = key.help;
    if (*key.default_value != '\0') help += std::string(" [default: ") + key.default_value + "]";
    sub->add_option(std::string("--") + key.name, opts.flags[key.name], help);
  }
}

gnsadv::RunConfig resolve(CLI::App* sub, const SubcommandOptions& opts) {
  gnsadv::ConfigMap values;
  if (!opts.config_file.empty()) values = gnsadv::load_config_file(opts.config_file);
  for (const auto& [key, value] : opts.flags) {
    if (sub->count(std::string("--") + key) > 0) values[key] = value;
  }
  auto config = gnsadv::make_run_config(values);
  gnsadv::apply_environment(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient noise scale estimation, batch-size advice and augmentation grouping"};
  app.require_subcommand(1);

  const char* names[] = {"train", "estimate-gns", "sweep", "verify-quadratic", "group-transforms"};
  const char* descriptions[] = {
      "train the MLP to the step budget and report loss/accuracy",
      "estimate the gradient noise scale and recommend a batch size",
      "train once per batch size and compare steps to a target validation loss",
      "check the noise-scale machinery against a quadratic spec's closed forms",
      "group (transform, magnitude) tuples by Frechet distance"};
  std::map<std::string, SubcommandOptions> options;
  std::map<std::string, CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(names); ++i) {
    subs[names[i]] = app.add_subcommand(names[i], descriptions[i]);
    add_config_flags(subs[names[i]], options[names[i]]);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& [name, sub] : subs) {
      if (!sub->parsed()) continue;
      const auto config = resolve(sub, options[name]);
      if (name == "train") {
        const auto r = gnsadv::cmd_train(config, std::cout);
        std::cout << "wrote " << r.summary_path.string() << " and " << r.metrics_path.string() << '\n';
      } else if (name == "estimate-gns") {
        const auto r = gnsadv::cmd_estimate_gns(config, std::cout);
        std::cout << "wrote " << r.report_path.string() << " and " << r.curve_path.string() << '\n';
      } else if (name == "sweep") {
        const auto r = gnsadv::cmd_sweep(config, std::cout);
        std::cout << "wrote " << r.report_path.string() << " and " << r.csv_path.string() << '\n';
      } else if (name == "verify-quadratic") {
        const auto r = gnsadv::cmd_verify_quadratic(config, std::cout);
        std::cout << "wrote " << r.report_path.string() << '\n';
        return r.all_pass ? 0 : 1;
      } else if (name == "group-transforms") {
        const auto r = gnsadv::cmd_group_transforms(config, std::cout);
        std::cout << "wrote " << r.report_path.string() << '\n';
      }
    }
  } catch (const gnsadv::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
