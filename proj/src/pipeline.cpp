#include "napkit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "napkit/assets.hpp"
#include "napkit/camera.hpp"
#include "napkit/compositor.hpp"
#include "napkit/error.hpp"
#include "napkit/evalsim.hpp"
#include "napkit/image_io.hpp"
#include "napkit/optimizer.hpp"
#include "napkit/report.hpp"
#include "napkit/rng.hpp"
#include "napkit/wire.hpp"

namespace napkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_options(const std::string& text) {
  if (text.empty()) return json::object();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ParseError, std::string("options are not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::ParseError, "options must be a JSON object");
  return j;
}

template <typename T>
T opt(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::ValidationError, std::string("option \"") + key + "\" has the wrong type");
  }
}

std::string require_string(const json& j, const char* key) {
  const std::string v = opt<std::string>(j, key, "");
  if (v.empty()) fail(ErrorKind::ValidationError, std::string("option \"") + key + "\" is required");
  return v;
}

std::uint64_t opt_seed(const json& j) {
  auto it = j.find("seed");
  if (it == j.end() || it->is_null()) return 0;
  if (it->is_number_unsigned()) return it->get<std::uint64_t>();
  if (it->is_number_integer() && it->get<std::int64_t>() >= 0) return it->get<std::uint64_t>();
  if (it->is_string()) {
    try {
      std::size_t used = 0;
      const std::string s = it->get<std::string>();
      const auto v = std::stoull(s, &used, 0);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
  }
  fail(ErrorKind::ValidationError, "option \"seed\" must be an unsigned 64-bit integer");
}

std::vector<std::string> opt_list(const json& j, const char* key, std::vector<std::string> fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (it->is_string()) {
    std::vector<std::string> out;
    const std::string s = it->get<std::string>();
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = s.find(',', start);
      std::string item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!item.empty()) out.push_back(item);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  }
  return opt<std::vector<std::string>>(j, key, fallback);
}

std::string iso_time(std::time_t t) {
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string now_stamp() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      return iso_time(static_cast<std::time_t>(std::stoll(epoch)));
    } catch (const std::exception&) {
    }
  }
  return iso_time(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now()));
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config, std::uint64_t seed,
                    const json& inputs, const json& outputs, const std::string& started, const json& extra = {}) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["seed"] = seed;
  m["tool_version"] = kToolVersion;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  m["started_at"] = started;
  m["finished_at"] = now_stamp();
  if (!extra.is_null()) m["notes"] = extra;
  write_text_file(dir / "run.json", m.dump(2) + "\n");
}

bool is_image_file(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".png" || ext == ".ppm";
}

std::vector<fs::path> image_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

BrightnessPolicy parse_brightness(const std::string& s) {
  if (s == "reuse_only" || s == "reuse") return BrightnessPolicy::ReuseOnly;
  if (s == "always") return BrightnessPolicy::Always;
  if (s == "never") return BrightnessPolicy::Never;
  fail(ErrorKind::ValidationError, "brightness must be reuse_only, always or never (got \"" + s + "\")");
}

ToyActivation parse_generator(const std::string& s) {
  if (s == "toy-sigmoid" || s == "toy") return ToyActivation::Sigmoid;
  if (s == "toy-linear") return ToyActivation::Linear;
  fail(ErrorKind::ValidationError, "unknown generator \"" + s + "\" (expected toy-sigmoid or toy-linear)");
}

std::shared_ptr<const ToyGenerator> make_generator(const json& o, std::uint64_t seed) {
  const auto act = parse_generator(opt<std::string>(o, "generator", "toy-sigmoid"));
  const int side = opt<int>(o, "patch_side", 16);
  const int dim = opt<int>(o, "latent_dim", 16);
  if (side < 2 || dim < 1) fail(ErrorKind::ValidationError, "patch_side must be >= 2 and latent_dim >= 1");
  return std::make_shared<const ToyGenerator>(act, side, 3, static_cast<std::size_t>(dim), derive_seed(seed, 2));
}

std::vector<Scene> load_stop_scenes(const fs::path& dataset) {
  std::vector<Scene> scenes;
  const auto images = image_files(dataset / "images");
  for (const auto& img_path : images) {
    const fs::path label_path = dataset / "labels" / (img_path.stem().string() + ".txt");
    if (!fs::exists(label_path)) continue;
    const auto boxes = parse_label_file(read_text_file(label_path));
    Image img;
    for (const auto& b : boxes) {
      if (b.class_id != kStopClassId) continue;
      if (img.empty()) img = read_image(img_path);
      if (!scenes.empty() && !img.same_shape(scenes.front().image)) {
        fail(ErrorKind::ResolutionMismatch, "dataset images differ in size: " + img_path.string());
      }
      scenes.push_back({img, b});
    }
  }
  if (scenes.empty()) fail(ErrorKind::NoStopBoxes, "no STOP boxes found under " + dataset.string());
  return scenes;
}

json records_status(const std::vector<EvalRecord>& records) {
  json failed = json::array();
  for (const auto& r : records) {
    if (r.status == "ok") continue;
    failed.push_back({{"distance_m", r.key.distance},
                      {"patch_type", r.key.patch_type},
                      {"size", r.key.size},
                      {"placement", r.key.placement},
                      {"status", r.status}});
  }
  return failed;
}

}  // namespace

std::shared_ptr<const DetectorAdapter> make_detector(const std::string& spec, std::uint64_t seed, int width,
                                                     int height) {
  if (spec == "toy") {
    return std::make_shared<const ToyDetector>(fit_default_toy_detector(width, height, derive_seed(seed, 1)));
  }
  if (spec.rfind("constant:", 0) == 0) {
    double c = 0.0;
    try {
      c = std::stod(spec.substr(9));
    } catch (const std::exception&) {
      fail(ErrorKind::ValidationError, "bad constant detector spec \"" + spec + "\"");
    }
    return std::make_shared<const ConstantDetector>(c);
  }
  if (spec.rfind("external:", 0) == 0) {
    const std::string command = spec.substr(9);
    if (command.empty()) fail(ErrorKind::ValidationError, "external detector needs a command");
    return std::make_shared<const ExternalDetector>(std::make_unique<SubprocessTransport>(command));
  }
  fail(ErrorKind::ValidationError, "unknown detector \"" + spec + "\" (expected toy, constant:<c> or external:<cmd>)");
}

std::string run_compose(const std::string& options_json) {
  const std::string started = now_stamp();
  const json o = parse_options(options_json);
  const fs::path out = require_string(o, "out");
  const fs::path calib = require_string(o, "calib");
  const fs::path signs_dir = require_string(o, "signs");
  const fs::path bg_dir = require_string(o, "backgrounds");

  CompositeConfig cfg;
  cfg.seed = opt_seed(o);
  cfg.jobs = opt<int>(o, "jobs", 1);
  cfg.scale_min = opt<double>(o, "scale_min", cfg.scale_min);
  cfg.scale_max = opt<double>(o, "scale_max", cfg.scale_max);
  cfg.margin = opt<double>(o, "margin", cfg.margin);
  cfg.tau_dark = opt<double>(o, "tau_dark", cfg.tau_dark);
  cfg.max_dark_retries = opt<int>(o, "max_dark_retries", cfg.max_dark_retries);
  cfg.brightness = parse_brightness(opt<std::string>(o, "brightness", "reuse_only"));
  cfg.validate();

  const CameraModel cam = load_calibration(calib);

  std::vector<SignInstance> signs;
  std::map<int, int> counts;
  if (!fs::is_directory(signs_dir)) fail(ErrorKind::IoError, "sign directory not found: " + signs_dir.string());
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(signs_dir)) {
    if (e.is_directory()) class_dirs.push_back(e.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  for (const auto& dir : class_dirs) {
    int class_id = 0;
    try {
      std::size_t used = 0;
      const std::string name = dir.filename().string();
      class_id = std::stoi(name, &used);
      if (used != name.size()) continue;
    } catch (const std::exception&) {
      continue;
    }
    for (const auto& f : image_files(dir)) {
      signs.push_back(SignInstance::make(read_image(f), class_id, fs::relative(f, signs_dir).string()));
      ++counts[class_id];
    }
  }
  if (signs.empty()) fail(ErrorKind::InsufficientSources, "no sign crops under " + signs_dir.string());

  std::vector<Background> pool;
  for (const auto& f : image_files(bg_dir)) {
    pool.push_back(Background::prepare(read_image(f), cam, f.filename().string()));
  }
  if (pool.empty()) fail(ErrorKind::EmptyPool, "no background frames under " + bg_dir.string());

  if (auto it = o.find("targets"); it != o.end() && !it->is_null()) {
    if (!it->is_object()) fail(ErrorKind::ValidationError, "targets must map class ids to counts");
    for (const auto& [k, v] : it->items()) {
      try {
        cfg.targets[std::stoi(k)] = v.get<int>();
      } catch (const std::exception&) {
        fail(ErrorKind::ValidationError, "bad targets entry \"" + k + "\"");
      }
    }
  } else {
    int most = 0;
    for (const auto& [c, n] : counts) most = std::max(most, n);
    for (const auto& [c, n] : counts) cfg.targets[c] = most;
  }

  const auto entries = generate_dataset(signs, pool, cam, cfg, out);

  json effective = o;
  effective["seed"] = cfg.seed;
  json targets = json::object();
  for (const auto& [c, n] : cfg.targets) targets[std::to_string(c)] = n;
  effective["targets"] = targets;
  write_manifest(out, "compose", effective, cfg.seed,
                 {{"calib", calib.string()}, {"signs", signs_dir.string()}, {"backgrounds", bg_dir.string()}},
                 {{"dataset", out.string()}, {"samples", entries.size()}}, started);
  return json{{"out", out.string()}, {"samples", entries.size()}}.dump();
}

std::string run_attack(const std::string& options_json) {
  const std::string started = now_stamp();
  const json o = parse_options(options_json);
  const fs::path out = require_string(o, "out");
  const std::uint64_t seed = opt_seed(o);
  const std::string detector_spec = opt<std::string>(o, "detector", "toy");
  const std::string dataset = opt<std::string>(o, "dataset", "");

  OverlayPlacement placement{parse_slot(opt<std::string>(o, "slot", "center")),
                             opt<double>(o, "size_fraction", 0.8)};
  std::vector<Scene> scenes;
  int width = 96, height = 72;
  if (!dataset.empty()) {
    scenes = load_stop_scenes(dataset);
    width = scenes.front().image.width();
    height = scenes.front().image.height();
  } else {
    ToyStackOptions stack_opts;
    stack_opts.optimization_scenes = static_cast<std::size_t>(opt<int>(o, "scenes", 12));
    scenes = make_stop_scenes(stack_opts.optimization_scenes, stack_opts.width, stack_opts.height,
                              derive_seed(seed, 3));
  }

  const auto detector = make_detector(detector_spec, seed, width, height);
  if (!detector->supports_gradients()) {
    fail(ErrorKind::NoGradientSupport, "detector \"" + detector_spec + "\" does not provide input gradients");
  }
  const auto generator = make_generator(o, seed);

  OptimizeConfig cfg;
  cfg.iterations = opt<int>(o, "iters", cfg.iterations);
  cfg.eta = opt<double>(o, "eta", cfg.eta);
  cfg.lambda_tv = opt<double>(o, "lambda_tv", cfg.lambda_tv);
  cfg.init_labels = opt_list(o, "init", cfg.init_labels);
  cfg.seed = seed;
  cfg.rule = parse_update_rule(opt<std::string>(o, "rule", "gd"));
  cfg.checkpoint_every = opt<int>(o, "checkpoint_every", cfg.checkpoint_every);
  cfg.candidate_every = opt<int>(o, "candidate_every", cfg.candidate_every);
  cfg.batch.full_batch_limit = static_cast<std::size_t>(opt<int>(o, "full_batch_limit", 64));
  cfg.batch.minibatch_size = static_cast<std::size_t>(opt<int>(o, "minibatch", 16));
  cfg.resume = opt<bool>(o, "resume", false);
  cfg.run_dir = out;
  cfg.validate();

  const SceneObjective objective(std::move(scenes), placement, detector);
  const OptimizeResult result = optimize(cfg, objective, *generator);

  json effective = o;
  effective["seed"] = seed;
  effective["iters"] = cfg.iterations;
  effective["eta"] = cfg.eta;
  effective["lambda_tv"] = cfg.lambda_tv;
  effective["init"] = cfg.init_labels;
  effective["rule"] = std::string(to_string(cfg.rule));
  effective["detector"] = detector_spec;
  json summary{{"best_patch", (out / "best_patch.png").string()},
               {"best_confidence", result.best.confidence},
               {"best_iteration", result.best.iteration},
               {"best_init", result.best.init_label}};
  write_manifest(out, "attack", effective, seed, {{"dataset", dataset.empty() ? "toy" : dataset}}, summary, started);
  return summary.dump();
}

std::string run_evaluate(const std::string& options_json) {
  const std::string started = now_stamp();
  const json o = parse_options(options_json);
  const fs::path out = require_string(o, "out");

  SweepConfig cfg;
  cfg.seed = opt_seed(o);
  cfg.jobs = opt<int>(o, "jobs", 1);
  cfg.distances = opt<std::vector<double>>(o, "distances", cfg.distances);
  cfg.window = opt<int>(o, "window", cfg.window);
  cfg.jitter = opt<double>(o, "jitter", cfg.jitter);
  cfg.sign_side_m = opt<double>(o, "sign_side_m", cfg.sign_side_m);
  cfg.anchor_x = opt<double>(o, "anchor_x", cfg.anchor_x);
  cfg.anchor_y = opt<double>(o, "anchor_y", cfg.anchor_y);
  if (auto it = o.find("sizes"); it != o.end() && !it->is_null()) {
    if (!it->is_object()) fail(ErrorKind::ValidationError, "sizes must map names to fractions");
    cfg.sizes.clear();
    for (const auto& [name, frac] : it->items()) {
      if (!frac.is_number()) fail(ErrorKind::ValidationError, "size \"" + name + "\" needs a numeric fraction");
      cfg.sizes.push_back({name, frac.get<double>()});
    }
    std::stable_sort(cfg.sizes.begin(), cfg.sizes.end(),
                     [](const SizeSpec& a, const SizeSpec& b) { return a.fraction < b.fraction; });
  }
  if (o.contains("placements")) {
    cfg.placements.clear();
    for (const auto& p : opt_list(o, "placements", {})) cfg.placements.push_back(parse_slot(p));
  }
  const std::string calib = opt<std::string>(o, "calib", "");
  if (!calib.empty()) cfg.camera = load_calibration(calib);
  const std::string background = opt<std::string>(o, "background", "");
  if (!background.empty()) cfg.background = read_image(background);
  const std::string sign = opt<std::string>(o, "sign", "");
  if (!sign.empty()) cfg.sign = read_image(sign);

  // Occlusion baselines always run; NAP variants come from files or, when no
  // file is given, from the toy generator at the label's initial latent.
  cfg.patch_types = occluder_patch_types();
  std::map<std::string, std::string> patch_files;
  if (auto it = o.find("patches"); it != o.end() && !it->is_null()) {
    if (!it->is_object()) fail(ErrorKind::ValidationError, "patches must map names to PNG paths");
    for (const auto& [name, path] : it->items()) {
      if (!path.is_string()) fail(ErrorKind::ValidationError, "patch \"" + name + "\" needs a file path");
      patch_files[name] = path.get<std::string>();
    }
  }
  const auto nap_labels = opt_list(o, "nap", {"peacock", "dog", "bear"});
  std::shared_ptr<const ToyGenerator> generator;
  json patch_sources = json::object();
  auto add_patch = [&](const std::string& name, const std::string& label) {
    if (auto f = patch_files.find(name); f != patch_files.end()) {
      cfg.patch_types.push_back({name, read_image(f->second)});
      patch_sources[name] = f->second;
      return;
    }
    if (!generator) generator = make_generator(o, cfg.seed);
    cfg.patch_types.push_back({name, generator->generate(generator->initial_latent(label, cfg.seed))});
    patch_sources[name] = "toy-generator:" + label;
  };
  for (const auto& label : nap_labels) add_patch("nap_" + label, label);
  for (const auto& [name, path] : patch_files) {
    const bool known = std::any_of(cfg.patch_types.begin(), cfg.patch_types.end(),
                                   [&](const PatchType& t) { return t.name == name; });
    if (!known) add_patch(name, name);
  }
  cfg.validate();

  const std::string detector_spec = opt<std::string>(o, "detector", "toy");
  const auto detector = make_detector(detector_spec, cfg.seed, opt<int>(o, "detector_width", 96),
                                      opt<int>(o, "detector_height", 72));
  const auto records = run_sweep(cfg, *detector);
  write_text_file(out / "records.csv", records_csv(records));

  json sweep{{"distances", cfg.distances},
             {"window", cfg.window},
             {"jitter", cfg.jitter},
             {"sign_side_m", cfg.sign_side_m},
             {"anchor", {cfg.anchor_x, cfg.anchor_y}},
             {"camera", json::parse(serialize_calibration(cfg.camera))},
             {"patch_types", patch_sources},
             {"detector", detector_spec}};
  json sizes = json::object();
  for (const auto& s : cfg.sizes) sizes[s.name] = s.fraction;
  sweep["sizes"] = sizes;
  json placements = json::array();
  for (Slot s : cfg.placements) placements.push_back(std::string(to_string(s)));
  sweep["placements"] = placements;
  sweep["patch_types"]["white"] = "occluder";
  sweep["patch_types"]["black"] = "occluder";
  write_text_file(out / "sweep_config.json", sweep.dump(2) + "\n");

  const json failed = records_status(records);
  json effective = o;
  effective["seed"] = cfg.seed;
  write_manifest(out, "evaluate", effective, cfg.seed, {{"patches", patch_sources}},
                 {{"records", (out / "records.csv").string()}, {"cells", records.size()}, {"failed_cells", failed}},
                 started);
  return json{{"records", (out / "records.csv").string()}, {"cells", records.size()}, {"failed_cells", failed.size()}}
      .dump();
}

std::string run_report(const std::string& options_json) {
  const std::string started = now_stamp();
  const json o = parse_options(options_json);
  const fs::path out = require_string(o, "out");
  const fs::path records_path = require_string(o, "records");
  const std::string plot_format = opt<std::string>(o, "plot_format", "svg");
  if (plot_format != "svg" && plot_format != "png") {
    fail(ErrorKind::ValidationError, "plot_format must be svg or png");
  }

  const auto records = parse_records_csv(read_text_file(records_path));
  const Summary summary = summarize(records);
  write_text_file(out / "summary.csv", render_table(summary, TableFormat::Csv));
  write_text_file(out / "summary.md", render_table(summary, TableFormat::Markdown));

  json meta;
  meta["mean_over_sizes"] = {
      {"emitted", true},
      {"note",
       "Extra block (size = mean): delta C averaged over the size blocks at each distance."}};
  const fs::path plot_path = out / ("confidence_vs_distance." + plot_format);
  try {
    plot_confidence_vs_distance(records, plot_path);
    meta["plot"] = plot_path.string();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InsufficientData) throw;
    meta["plot"] = nullptr;
    meta["plot_skipped"] = e.what();
  }
  write_text_file(out / "report_meta.json", meta.dump(2) + "\n");

  json effective = o;
  json outputs{{"summary_csv", (out / "summary.csv").string()},
               {"summary_md", (out / "summary.md").string()},
               {"plot", meta["plot"]},
               {"report_meta", (out / "report_meta.json").string()}};
  write_manifest(out, "report", effective, opt_seed(o), {{"records", records_path.string()}}, outputs, started);
  return outputs.dump();
}

void run_serve(const std::string& options_json, std::istream& in, std::ostream& out) {
  const json o = parse_options(options_json);
  const auto detector = make_detector(opt<std::string>(o, "detector", "toy"), opt_seed(o),
                                      opt<int>(o, "width", 96), opt<int>(o, "height", 72));
  WireServerOptions wo;
  wo.expose_gradients = opt<bool>(o, "gradients", false);
  WireServer(detector, wo).serve(in, out);
}

}  // namespace napkit
