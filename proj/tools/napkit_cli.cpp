// napkit command-line front end. Flags are merged over the --config file and
// handed to the shared library as a JSON options object.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "napkit/napkit.h"

using nlohmann::json;

namespace {

template <typename T>
CLI::Option* bind_opt(CLI::App* app, json& patch, const std::string& flag, const std::string& key,
                  const std::string& help) {
  return app->add_option_function<T>(
      flag, [&patch, key](const T& v) { patch[key] = v; }, help);
}

CLI::Option* bind_list(CLI::App* app, json& patch, const std::string& flag, const std::string& key,
                       const std::string& help) {
  return app
      ->add_option_function<std::vector<std::string>>(
          flag, [&patch, key](const std::vector<std::string>& v) { patch[key] = v; }, help)
      ->delimiter(',');
}

int fail_config(const std::string& message) {
  std::cerr << "napkit: error: " << message << "\n";
  return NAPKIT_ERR_CONFIG;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Naturalistic adversarial patch toolkit: compose datasets, optimize patches, run distance sweeps "
               "and report confidence changes."};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(napkit_version()));

  std::string config_path;
  json global = json::object();
  app.add_option("--config", config_path, "JSON config; top-level keys apply to every command, a section "
                                          "named after the command overrides them");
  bind_opt<std::uint64_t>(&app, global, "--seed", "seed", "Master seed (unsigned 64-bit)");
  bind_opt<int>(&app, global, "--jobs", "jobs", "Worker threads; 1 is the deterministic reference mode");
  bind_opt<std::string>(&app, global, "--out", "out", "Output directory");

  json compose_flags = json::object(), attack_flags = json::object(), evaluate_flags = json::object(),
       report_flags = json::object(), serve_flags = json::object();

  auto* compose = app.add_subcommand("compose", "Generate a composite sign dataset");
  bind_opt<std::string>(compose, compose_flags, "--calib", "calib", "Camera calibration JSON");
  bind_opt<std::string>(compose, compose_flags, "--signs", "signs", "Sign crops, one subdirectory per class id");
  bind_opt<std::string>(compose, compose_flags, "--backgrounds", "backgrounds", "Directory of raw platform frames");
  bind_opt<double>(compose, compose_flags, "--scale-min", "scale_min", "Smallest sign height / frame height");
  bind_opt<double>(compose, compose_flags, "--scale-max", "scale_max", "Largest sign height / frame height");
  bind_opt<double>(compose, compose_flags, "--margin", "margin", "Border kept clear, fraction of frame size");
  bind_opt<double>(compose, compose_flags, "--tau-dark", "tau_dark", "Darkness threshold on maRGB (0-255)");
  bind_opt<int>(compose, compose_flags, "--max-dark-retries", "max_dark_retries", "Redraws before a sample fails");
  bind_opt<std::string>(compose, compose_flags, "--brightness", "brightness", "reuse_only, always or never")
      ->check(CLI::IsMember({"reuse_only", "always", "never"}));

  auto* attack = app.add_subcommand("attack", "Optimize a patch in the generator latent space");
  bind_opt<std::string>(attack, attack_flags, "--dataset", "dataset", "Dataset from compose (default: toy scenes)");
  bind_opt<std::string>(attack, attack_flags, "--detector", "detector", "toy, constant:<c> or external:<command>");
  bind_opt<std::string>(attack, attack_flags, "--generator", "generator", "toy-sigmoid or toy-linear");
  bind_opt<int>(attack, attack_flags, "--iters", "iters", "Iterates per initialization, including the initial one");
  bind_opt<double>(attack, attack_flags, "--eta", "eta", "Step size");
  bind_opt<double>(attack, attack_flags, "--lambda-tv", "lambda_tv", "Total-variation weight");
  bind_list(attack, attack_flags, "--init", "init", "Initialization labels, e.g. peacock,dog,bear");
  bind_opt<std::string>(attack, attack_flags, "--rule", "rule", "gd or adam");
  bind_opt<std::string>(attack, attack_flags, "--slot", "slot", "Patch slot on the sign: center, upper or lower");
  bind_opt<double>(attack, attack_flags, "--size-fraction", "size_fraction", "Patch side / shorter sign-box side");
  bind_opt<int>(attack, attack_flags, "--checkpoint-every", "checkpoint_every", "Checkpoint interval in iterations");
  bind_opt<int>(attack, attack_flags, "--candidate-every", "candidate_every", "Candidate PNG interval in iterations");
  bind_opt<int>(attack, attack_flags, "--patch-side", "patch_side", "Generated patch side in pixels");
  bind_opt<int>(attack, attack_flags, "--latent-dim", "latent_dim", "Latent dimension");
  bind_opt<int>(attack, attack_flags, "--scenes", "scenes", "Number of toy scenes when no dataset is given");
  attack->add_flag_function(
      "--resume", [&](std::int64_t n) { attack_flags["resume"] = n > 0; }, "Continue from checkpoints in --out");

  auto* evaluate = app.add_subcommand("evaluate", "Run the distance/size/placement sweep");
  bind_opt<std::string>(evaluate, evaluate_flags, "--detector", "detector", "toy, constant:<c> or external:<command>");
  evaluate
      ->add_option_function<std::vector<std::string>>(
          "--patch",
          [&](const std::vector<std::string>& items) {
            for (const auto& item : items) {
              const auto eq = item.find('=');
              if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--patch", "expected NAME=PATH");
              evaluate_flags["patches"][item.substr(0, eq)] = item.substr(eq + 1);
            }
          },
          "Patch image as NAME=PATH, e.g. nap_bear=run/best_patch.png (repeatable)")
      ->allow_extra_args(false);
  bind_list(evaluate, evaluate_flags, "--nap", "nap", "NAP variant labels (default peacock,dog,bear)");
  evaluate
      ->add_option_function<std::vector<double>>(
          "--distances", [&](const std::vector<double>& v) { evaluate_flags["distances"] = v; },
          "Distances in meters")
      ->delimiter(',');
  bind_list(evaluate, evaluate_flags, "--placements", "placements", "Subset of center,upper,lower");
  bind_opt<int>(evaluate, evaluate_flags, "--window", "window", "Frames per cell");
  bind_opt<double>(evaluate, evaluate_flags, "--jitter", "jitter", "Brightness jitter bound in 8-bit steps");
  bind_opt<double>(evaluate, evaluate_flags, "--sign-side", "sign_side_m", "Physical sign side in meters");
  bind_opt<std::string>(evaluate, evaluate_flags, "--calib", "calib", "Camera calibration JSON");
  bind_opt<std::string>(evaluate, evaluate_flags, "--background", "background", "Background frame image");
  bind_opt<std::string>(evaluate, evaluate_flags, "--sign", "sign", "Sign image");

  auto* report = app.add_subcommand("report", "Summarize records into tables and a plot");
  bind_opt<std::string>(report, report_flags, "--records", "records", "records.csv from evaluate");
  bind_opt<std::string>(report, report_flags, "--plot-format", "plot_format", "svg or png")
      ->check(CLI::IsMember({"svg", "png"}));

  auto* serve = app.add_subcommand("serve", "Serve a detector over stdin/stdout (line-delimited JSON)");
  bind_opt<std::string>(serve, serve_flags, "--detector", "detector", "toy or constant:<c>");
  bind_opt<int>(serve, serve_flags, "--width", "width", "Detector input width");
  bind_opt<int>(serve, serve_flags, "--height", "height", "Detector input height");
  serve->add_flag_function(
      "--gradients", [&](std::int64_t n) { serve_flags["gradients"] = n > 0; }, "Answer grad requests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : NAPKIT_ERR_CONFIG;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();

  json options = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "napkit: error: IoError: cannot open config file: " << config_path << "\n";
      return NAPKIT_ERR_DATA;
    }
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      return fail_config("config " + config_path + " is not valid JSON: " + e.what());
    }
    if (!file.is_object()) return fail_config("config " + config_path + " must be a JSON object");
    static const char* kSections[] = {"compose", "attack", "evaluate", "report", "serve"};
    for (const auto& [k, v] : file.items()) {
      if (std::find(std::begin(kSections), std::end(kSections), k) == std::end(kSections)) options[k] = v;
    }
    if (auto it = file.find(name); it != file.end()) {
      if (!it->is_object()) return fail_config("config section \"" + name + "\" must be an object");
      for (const auto& [k, v] : it->items()) options[k] = v;
    }
  }
  options.update(global);
  const json& flags = name == "compose"    ? compose_flags
                      : name == "attack"   ? attack_flags
                      : name == "evaluate" ? evaluate_flags
                      : name == "report"   ? report_flags
                                           : serve_flags;
  for (const auto& [k, v] : flags.items()) {
    if (k == "patches" && options.contains("patches") && options["patches"].is_object()) {
      options["patches"].update(v);
    } else {
      options[k] = v;
    }
  }

  const std::string text = options.dump();
  napkit_status status;
  char* result = nullptr;
  if (name == "compose") {
    status = napkit_compose(text.c_str(), &result);
  } else if (name == "attack") {
    status = napkit_attack(text.c_str(), &result);
  } else if (name == "evaluate") {
    status = napkit_evaluate(text.c_str(), &result);
  } else if (name == "report") {
    status = napkit_report(text.c_str(), &result);
  } else {
    status = napkit_serve_detector(text.c_str());
  }

  if (status != NAPKIT_OK) {
    std::cerr << "napkit: error: " << napkit_last_error_kind() << ": " << napkit_last_error() << "\n";
    return status;
  }
  if (result != nullptr) {
    std::cout << result << "\n";
    napkit_free_string(result);
  }
  return 0;
}
