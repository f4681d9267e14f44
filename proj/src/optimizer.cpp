#include "napkit/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "napkit/error.hpp"
#include "napkit/image_io.hpp"
#include "napkit/rng.hpp"

namespace napkit {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Slot slot) noexcept {
  switch (slot) {
    case Slot::Center: return "center";
    case Slot::Upper: return "upper";
    case Slot::Lower: return "lower";
  }
  return "center";
}

Slot parse_slot(std::string_view name) {
  if (name == "center") return Slot::Center;
  if (name == "upper") return Slot::Upper;
  if (name == "lower") return Slot::Lower;
  fail(ErrorKind::InvalidArgument, "unknown placement slot: " + std::string(name));
}

namespace {

double slot_anchor(Slot slot) noexcept {
  switch (slot) {
    case Slot::Upper: return 0.1;
    case Slot::Lower: return 0.9;
    case Slot::Center: break;
  }
  return 0.5;
}

}  // namespace

PatchRegion patch_region(int frame_width, int frame_height, const BBox& sign_box,
                         const OverlayPlacement& placement) {
  validate(sign_box);
  if (!(placement.size_fraction > 0.0 && placement.size_fraction <= 1.0)) {
    fail(ErrorKind::InvalidArgument, "size_fraction must be in (0, 1]");
  }
  const double bl = sign_box.left() * frame_width;
  const double bt = sign_box.top() * frame_height;
  const double bw = sign_box.w * frame_width;
  const double bh = sign_box.h * frame_height;
  const int side = static_cast<int>(std::lround(placement.size_fraction * std::min(bw, bh)));
  if (side < 2) {
    fail(ErrorKind::BoxTooSmall, "patch would be " + std::to_string(side) + " px inside the sign box");
  }
  int left = static_cast<int>(std::lround(bl + 0.5 * (bw - side)));
  int top = static_cast<int>(std::lround(bt + slot_anchor(placement.slot) * (bh - side)));
  // Keep the pixel square inside the box (and the frame) after rounding.
  const int min_left = static_cast<int>(std::ceil(bl - 1e-9));
  const int max_left = static_cast<int>(std::floor(bl + bw + 1e-9)) - side;
  const int min_top = static_cast<int>(std::ceil(bt - 1e-9));
  const int max_top = static_cast<int>(std::floor(bt + bh + 1e-9)) - side;
  if (min_left <= max_left) left = std::clamp(left, min_left, max_left);
  if (min_top <= max_top) top = std::clamp(top, min_top, max_top);
  left = std::clamp(left, 0, std::max(0, frame_width - side));
  top = std::clamp(top, 0, std::max(0, frame_height - side));
  return {left, top, side};
}

Image overlay_patch(const Image& scene, const BBox& sign_box, const Image& patch,
                    const OverlayPlacement& placement) {
  if (patch.width() != patch.height() || patch.empty()) {
    fail(ErrorKind::InvalidArgument, "patch must be a non-empty square");
  }
  if (patch.channels() != scene.channels()) {
    fail(ErrorKind::DimensionMismatch, "patch and scene channel counts differ");
  }
  const PatchRegion r = patch_region(scene.width(), scene.height(), sign_box, placement);
  Image out = scene;
  blit(out, resize_bilinear(patch, r.side, r.side), r.left, r.top);
  return out;
}

Image overlay_patch_adjoint(const Image& scene_gradient, const BBox& sign_box, int patch_side,
                            const OverlayPlacement& placement) {
  const PatchRegion r = patch_region(scene_gradient.width(), scene_gradient.height(), sign_box, placement);
  Image region(r.side, r.side, scene_gradient.channels());
  for (int y = 0; y < r.side; ++y) {
    for (int x = 0; x < r.side; ++x) {
      const int sx = r.left + x;
      const int sy = r.top + y;
      if (sx >= scene_gradient.width() || sy >= scene_gradient.height()) continue;
      for (int c = 0; c < region.channels(); ++c) region.at(x, y, c) = scene_gradient.at(sx, sy, c);
    }
  }
  return resize_bilinear_adjoint(region, patch_side, patch_side);
}

namespace {

void require_tv_size(const Image& patch) {
  if (patch.width() < 2 || patch.height() < 2) fail(ErrorKind::TooSmall, "total variation needs at least 2x2");
}

double tv_term_count(const Image& p) {
  return static_cast<double>(p.channels()) *
         (static_cast<double>(p.height() - 1) * p.width() + static_cast<double>(p.height()) * (p.width() - 1));
}

double sign_of(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double tv_loss(const Image& patch) {
  require_tv_size(patch);
  double sum = 0.0;
  for (int y = 0; y < patch.height(); ++y) {
    for (int x = 0; x < patch.width(); ++x) {
      for (int c = 0; c < patch.channels(); ++c) {
        const double v = patch.at(x, y, c);
        if (y + 1 < patch.height()) sum += std::abs(patch.at(x, y + 1, c) - v);
        if (x + 1 < patch.width()) sum += std::abs(patch.at(x + 1, y, c) - v);
      }
    }
  }
  return sum / tv_term_count(patch);
}

Image tv_loss_gradient(const Image& patch) {
  require_tv_size(patch);
  const double norm = 1.0 / tv_term_count(patch);
  Image g(patch.width(), patch.height(), patch.channels());
  for (int y = 0; y < patch.height(); ++y) {
    for (int x = 0; x < patch.width(); ++x) {
      for (int c = 0; c < patch.channels(); ++c) {
        const double v = patch.at(x, y, c);
        if (y + 1 < patch.height()) {
          const double s = sign_of(patch.at(x, y + 1, c) - v) * norm;
          g.at(x, y + 1, c) += s;
          g.at(x, y, c) -= s;
        }
        if (x + 1 < patch.width()) {
          const double s = sign_of(patch.at(x + 1, y, c) - v) * norm;
          g.at(x + 1, y, c) += s;
          g.at(x, y, c) -= s;
        }
      }
    }
  }
  return g;
}

double detection_loss(std::span<const Scene> scenes, const Image& patch, const OverlayPlacement& placement,
                      const DetectorAdapter& detector) {
  if (scenes.empty()) fail(ErrorKind::EmptyBatch, "detection loss over an empty batch");
  double sum = 0.0;
  for (const auto& s : scenes) sum += detector.stop_confidence(overlay_patch(s.image, s.sign_box, patch, placement));
  return sum / static_cast<double>(scenes.size());
}

double DetectionObjective::mean_confidence(const Image& patch) const {
  std::vector<std::size_t> all(set_size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return evaluate(patch, all).value;
}

SceneObjective::SceneObjective(std::vector<Scene> scenes, OverlayPlacement placement,
                               std::shared_ptr<const DetectorAdapter> detector)
    : scenes_(std::move(scenes)), placement_(placement), detector_(std::move(detector)) {
  if (!detector_) fail(ErrorKind::InvalidArgument, "scene objective needs a detector");
  for (const auto& s : scenes_) validate(s.sign_box);
}

LossGradient SceneObjective::evaluate(const Image& patch, std::span<const std::size_t> batch) const {
  if (batch.empty()) fail(ErrorKind::EmptyBatch, "detection loss over an empty batch");
  if (!detector_->supports_gradients()) {
    fail(ErrorKind::NoGradientSupport, "detector cannot back-propagate into the patch");
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  LossGradient out{0.0, Image(patch.width(), patch.height(), patch.channels())};
  for (std::size_t idx : batch) {
    const Scene& s = scenes_.at(idx);
    const Image patched = overlay_patch(s.image, s.sign_box, patch, placement_);
    out.value += detector_->stop_confidence(patched) * inv;
    const Image scene_grad = detector_->input_gradient(patched, inv);
    const Image g = overlay_patch_adjoint(scene_grad, s.sign_box, patch.width(), placement_);
    auto dst = out.patch_gradient.data();
    const auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return out;
}

double SceneObjective::mean_confidence(const Image& patch) const {
  return detection_loss(scenes_, patch, placement_, *detector_);
}

std::string_view to_string(UpdateRule rule) noexcept {
  return rule == UpdateRule::Adam ? "adam" : "gd";
}

UpdateRule parse_update_rule(std::string_view name) {
  if (name == "gd" || name == "sgd") return UpdateRule::GradientDescent;
  if (name == "adam") return UpdateRule::Adam;
  fail(ErrorKind::InvalidArgument, "unknown update rule: " + std::string(name));
}

std::vector<std::size_t> batch_indices(std::size_t set_size, const BatchPolicy& policy, std::uint64_t seed,
                                       int iteration) {
  std::vector<std::size_t> idx(set_size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (set_size <= policy.full_batch_limit) return idx;
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(iteration)));
  const std::size_t k = std::min(policy.minibatch_size, set_size);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(set_size - 1)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Evaluation evaluate_latent(std::span<const double> z, double lambda_tv, int iteration, const StepContext& ctx) {
  Evaluation ev;
  ev.patch = ctx.generator.generate(z);
  const auto batch = batch_indices(ctx.objective.set_size(), ctx.batch, ctx.seed, iteration);
  LossGradient det = ctx.objective.evaluate(ev.patch, batch);
  const double tv = tv_loss(ev.patch);
  if (lambda_tv != 0.0) {
    const Image gtv = tv_loss_gradient(ev.patch);
    auto dst = det.patch_gradient.data();
    const auto src = gtv.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += lambda_tv * src[i];
  }
  ev.gradient = ctx.generator.latent_gradient(z, det.patch_gradient);
  ev.record.iteration = iteration;
  ev.record.l_det = det.value;
  ev.record.l_tv = tv;
  ev.record.l_total = det.value + lambda_tv * tv;
  ev.record.mean_stop_conf =
      batch.size() == ctx.objective.set_size() ? det.value : ctx.objective.mean_confidence(ev.patch);
  if (!all_finite(ev.gradient) || !std::isfinite(ev.record.l_total)) {
    fail(ErrorKind::NonFiniteGradient, "non-finite loss or gradient at iteration " + std::to_string(iteration));
  }
  return ev;
}

LatentState init_state(std::vector<double> z0, double eta, double lambda_tv, const StepContext& ctx,
                       UpdateRule rule) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) fail(ErrorKind::InvalidArgument, "step size must be >= 0");
  if (!(lambda_tv >= 0.0)) fail(ErrorKind::InvalidArgument, "lambda_tv must be >= 0");
  if (z0.size() != ctx.generator.latent_dim()) {
    fail(ErrorKind::DimensionMismatch, "initial latent does not match the generator");
  }
  if (!ctx.generator.supports_gradients() || !ctx.objective.supports_gradients()) {
    fail(ErrorKind::NoGradientSupport, "optimization needs gradient-capable detector and generator");
  }
  LatentState s;
  s.eta = eta;
  s.lambda_tv = lambda_tv;
  s.rule = rule;
  s.z = std::move(z0);
  Evaluation ev = evaluate_latent(s.z, lambda_tv, 0, ctx);
  s.history.push_back(ev.record);
  s.gradient = std::move(ev.gradient);
  if (rule == UpdateRule::Adam) {
    s.adam_m.assign(s.z.size(), 0.0);
    s.adam_v.assign(s.z.size(), 0.0);
  }
  return s;
}

LatentState step(const LatentState& state, const StepContext& ctx) {
  if (state.gradient.size() != state.z.size() || !all_finite(state.gradient)) {
    fail(ErrorKind::NonFiniteGradient, "gradient at iteration " + std::to_string(state.iteration) + " is not finite");
  }
  LatentState next = state;
  const std::size_t n = next.z.size();
  if (state.rule == UpdateRule::Adam) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double t = static_cast<double>(state.iteration + 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = state.gradient[i];
      next.adam_m[i] = b1 * state.adam_m[i] + (1.0 - b1) * g;
      next.adam_v[i] = b2 * state.adam_v[i] + (1.0 - b2) * g * g;
      const double mhat = next.adam_m[i] / (1.0 - std::pow(b1, t));
      const double vhat = next.adam_v[i] / (1.0 - std::pow(b2, t));
      next.z[i] -= state.eta * mhat / (std::sqrt(vhat) + eps);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) next.z[i] -= state.eta * state.gradient[i];
  }
  next.iteration = state.iteration + 1;
  Evaluation ev = evaluate_latent(next.z, next.lambda_tv, next.iteration, ctx);
  next.history.push_back(ev.record);
  next.gradient = std::move(ev.gradient);
  return next;
}

void OptimizeConfig::validate() const {
  if (iterations < 1) fail(ErrorKind::ValidationError, "iterations must be >= 1");
  if (!(eta >= 0.0) || !std::isfinite(eta)) fail(ErrorKind::ValidationError, "eta must be >= 0");
  if (!(lambda_tv >= 0.0) || !std::isfinite(lambda_tv)) fail(ErrorKind::ValidationError, "lambda_tv must be >= 0");
  if (init_labels.empty()) fail(ErrorKind::ValidationError, "at least one initialization label is required");
  if (checkpoint_every < 1 || candidate_every < 1) {
    fail(ErrorKind::ValidationError, "checkpoint/candidate intervals must be >= 1");
  }
  if (batch.minibatch_size == 0) fail(ErrorKind::ValidationError, "minibatch size must be >= 1");
}

std::string loss_history_csv(std::span<const LossRecord> history) {
  std::string out = "iteration,L_det,L_tv,L_total,mean_stop_conf\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g\n", r.iteration, r.l_det, r.l_tv, r.l_total,
                  r.mean_stop_conf);
    out += buf;
  }
  return out;
}

namespace {

json record_to_json(const LossRecord& r) {
  return {r.iteration, r.l_det, r.l_tv, r.l_total, r.mean_stop_conf};
}

LossRecord record_from_json(const json& j) {
  return {j.at(0).get<int>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>(),
          j.at(4).get<double>()};
}

struct BestSoFar {
  int iteration = -1;
  double confidence = 0.0;
  std::vector<double> z;
};

void write_checkpoint(const fs::path& path, const std::string& label, const LatentState& s, const BestSoFar& best) {
  json hist = json::array();
  for (const auto& r : s.history) hist.push_back(record_to_json(r));
  const json j = {{"label", label},
                  {"iteration", s.iteration},
                  {"z", s.z},
                  {"eta", s.eta},
                  {"lambda_tv", s.lambda_tv},
                  {"rule", std::string(to_string(s.rule))},
                  {"adam_m", s.adam_m},
                  {"adam_v", s.adam_v},
                  {"history", hist},
                  {"best", {{"iteration", best.iteration}, {"confidence", best.confidence}, {"z", best.z}}}};
  write_text_file(path, j.dump() + "\n");
}

bool load_checkpoint(const fs::path& path, LatentState& s, BestSoFar& best) {
  if (!fs::exists(path)) return false;
  try {
    const json j = json::parse(read_text_file(path));
    s.iteration = j.at("iteration").get<int>();
    s.z = j.at("z").get<std::vector<double>>();
    s.eta = j.at("eta").get<double>();
    s.lambda_tv = j.at("lambda_tv").get<double>();
    s.rule = parse_update_rule(j.at("rule").get<std::string>());
    s.adam_m = j.at("adam_m").get<std::vector<double>>();
    s.adam_v = j.at("adam_v").get<std::vector<double>>();
    s.history.clear();
    for (const auto& r : j.at("history")) s.history.push_back(record_from_json(r));
    best.iteration = j.at("best").at("iteration").get<int>();
    best.confidence = j.at("best").at("confidence").get<double>();
    best.z = j.at("best").at("z").get<std::vector<double>>();
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError, "corrupt checkpoint " + path.string() + ": " + e.what());
  }
  return true;
}

std::string candidate_name(int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "iter_%05d.png", iteration);
  return buf;
}

}  // namespace

OptimizeResult optimize(const OptimizeConfig& config, const DetectionObjective& objective,
                        const GeneratorAdapter& generator) {
  config.validate();
  if (objective.set_size() == 0) fail(ErrorKind::NoStopBoxes, "optimization set contains no STOP boxes");
  if (!objective.supports_gradients() || !generator.supports_gradients()) {
    fail(ErrorKind::NoGradientSupport, "optimization needs gradient-capable detector and generator");
  }
  const bool write = !config.run_dir.empty();

  OptimizeResult result;
  bool have_best = false;
  for (const auto& label : config.init_labels) {
    const StepContext ctx{objective, generator, config.batch, derive_seed(config.seed, hash_label(label))};
    const fs::path dir = write ? config.run_dir / label : fs::path();
    const fs::path checkpoint = dir / "checkpoint.json";

    LatentState state;
    BestSoFar best;
    bool resumed = false;
    if (write && config.resume && load_checkpoint(checkpoint, state, best)) {
      if (state.iteration >= config.iterations) {
        fail(ErrorKind::ValidationError, "checkpoint is already past the requested iteration count");
      }
      // Recompute the cached gradient at the checkpointed iterate.
      Evaluation ev = evaluate_latent(state.z, state.lambda_tv, state.iteration, ctx);
      state.gradient = std::move(ev.gradient);
      resumed = true;
    } else {
      state = init_state(generator.initial_latent(label, config.seed), config.eta, config.lambda_tv, ctx, config.rule);
    }

    auto visit = [&](const LatentState& s) {
      const LossRecord& r = s.history.back();
      if (best.iteration < 0 || r.mean_stop_conf < best.confidence) {
        best = {r.iteration, r.mean_stop_conf, s.z};
      }
      if (write && r.iteration % config.candidate_every == 0) {
        write_png(dir / "candidates" / candidate_name(r.iteration), generator.generate(s.z));
      }
      if (write && r.iteration > 0 && r.iteration % config.checkpoint_every == 0) {
        write_checkpoint(checkpoint, label, s, best);
      }
    };
    if (!resumed) visit(state);
    while (state.iteration + 1 < config.iterations) {
      state = step(state, ctx);
      visit(state);
    }

    InitRun run;
    run.label = label;
    run.history = state.history;
    run.best = {generator.generate(best.z), best.z, best.confidence, best.iteration, label};
    if (write) write_text_file(dir / "loss_history.csv", loss_history_csv(run.history));

    const PatchCandidate& cand = run.best;
    if (!have_best || cand.confidence < result.best.confidence ||
        (cand.confidence == result.best.confidence && cand.iteration < result.best.iteration)) {
      result.best = cand;
      have_best = true;
    }
    result.runs.push_back(std::move(run));
  }

  if (write) {
    write_png(config.run_dir / "best_patch.png", result.best.patch);
    const json summary = {{"init_label", result.best.init_label},
                          {"iteration", result.best.iteration},
                          {"mean_stop_conf", result.best.confidence},
                          {"z", result.best.z}};
    write_text_file(config.run_dir / "best.json", summary.dump(2) + "\n");
  }
  return result;
}

}  // namespace napkit
