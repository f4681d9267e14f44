#include "napkit/evalsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "napkit/assets.hpp"
#include "napkit/error.hpp"
#include "napkit/parallel.hpp"
#include "napkit/rng.hpp"

namespace napkit {

namespace {

constexpr std::uint64_t kJitterStream = 0x6a6974746572ULL;
constexpr std::uint64_t kBackgroundStream = 0x62676e64ULL;

int jitter_bound(double jitter) { return static_cast<int>(std::lround(jitter)); }

std::string format_distance(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", d);
  return buf;
}

const PatchType& find_patch_type(const SweepConfig& config, const std::string& name) {
  for (const auto& t : config.patch_types) {
    if (t.name == name) return t;
  }
  fail(ErrorKind::InvalidArgument, "unknown patch type \"" + name + "\"");
}

double find_fraction(const SweepConfig& config, const std::string& name) {
  for (const auto& s : config.sizes) {
    if (s.name == name) return s.fraction;
  }
  fail(ErrorKind::InvalidArgument, "unknown patch size \"" + name + "\"");
}

Image to_detector_input(const Image& frame, const DetectorInfo& info) {
  if (info.width <= 0 || info.height <= 0) return frame;
  if (frame.width() == info.width && frame.height() == info.height) return frame;
  return resize_bilinear(frame, info.width, info.height);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

EvalRecord run_cell_with(const SceneRenderer& renderer, const SweepConfig& config, const CellKey& cell,
                         const DetectorAdapter& detector, const EvalRecord* clean) {
  EvalRecord rec;
  rec.key = cell;
  const Image* patch = nullptr;
  OverlayPlacement placement;
  if (!cell.clean()) {
    patch = &find_patch_type(config, cell.patch_type).pixels;
    placement = {parse_slot(cell.placement), find_fraction(config, cell.size)};
  }
  const Image base = renderer.render_base(patch, cell.distance, placement);
  const DetectorInfo info = detector.info();
  std::map<int, double> memo;
  rec.confidences.reserve(static_cast<std::size_t>(config.window));
  for (int f = 0; f < config.window; ++f) {
    const int delta = renderer.jitter_offset(f);
    if (info.deterministic) {
      if (auto it = memo.find(delta); it != memo.end()) {
        rec.confidences.push_back(it->second);
        continue;
      }
    }
    const double c = detector.stop_confidence(to_detector_input(renderer.apply_jitter(base, f), info));
    if (info.deterministic) memo.emplace(delta, c);
    rec.confidences.push_back(c);
  }
  rec.mean = mean_of(rec.confidences);
  if (clean != nullptr && clean->status == "ok") rec.delta = rec.mean - clean->mean;
  return rec;
}

}  // namespace

CameraModel default_eval_camera() {
  CameraModel cam;
  cam.k1 = -0.08;
  cam.k2 = 0.02;
  return cam;
}

std::vector<SizeSpec> default_sizes() { return {{"small", 0.464}, {"medium", 0.604}, {"large", 0.696}}; }

std::vector<PatchType> occluder_patch_types(int side) {
  return {{"white", Image(side, side, 3, 1.0)}, {"black", Image(side, side, 3, 0.0)}};
}

void SweepConfig::validate() const {
  if (distances.empty()) fail(ErrorKind::ValidationError, "sweep needs at least one distance");
  for (double d : distances) {
    if (!(d > 0.0) || !std::isfinite(d)) fail(ErrorKind::ValidationError, "distances must be positive");
  }
  if (window < 1) fail(ErrorKind::ValidationError, "window must be >= 1 frame");
  if (!(sign_side_m > 0.0)) fail(ErrorKind::ValidationError, "sign_side_m must be positive");
  if (!(jitter >= 0.0)) fail(ErrorKind::ValidationError, "jitter must be >= 0");
  if (jobs < 1) fail(ErrorKind::ValidationError, "jobs must be >= 1");
  for (const auto& s : sizes) {
    if (!(s.fraction > 0.0 && s.fraction <= 1.0)) {
      fail(ErrorKind::ValidationError, "size fraction for \"" + s.name + "\" must be in (0, 1]");
    }
  }
  for (const auto& t : patch_types) {
    if (t.name == kCleanType) fail(ErrorKind::ValidationError, "patch type name \"clean\" is reserved");
    if (t.pixels.empty() || t.pixels.channels() != 3) {
      fail(ErrorKind::ValidationError, "patch \"" + t.name + "\" must be a non-empty RGB image");
    }
  }
  camera.validate();
}

double projected_size(double side_m, double distance_m, double focal_px) {
  if (!(distance_m > 0.0)) fail(ErrorKind::InvalidArgument, "distance must be positive");
  return focal_px * side_m / distance_m;
}

SceneRenderer::SceneRenderer(const SweepConfig& config) : config_(config) {
  const int w = config.camera.width;
  const int h = config.camera.height;
  if (config.background.empty()) {
    background_ = make_background(w, h, derive_seed(config.seed, kBackgroundStream));
  } else if (config.background.width() != w || config.background.height() != h) {
    background_ = resize_bilinear(config.background, w, h);
  } else {
    background_ = config.background;
  }
  sign_ = config.sign.empty() ? make_stop_sign(256) : config.sign;
}

BBox SceneRenderer::sign_box(double distance) const {
  const int w = config_.camera.width;
  const int h = config_.camera.height;
  const int side = static_cast<int>(std::lround(projected_size(config_.sign_side_m, distance, config_.camera.fx)));
  const long left = std::lround(config_.anchor_x * w - 0.5 * side);
  const long top = std::lround(config_.anchor_y * h - 0.5 * side);
  const double l = std::clamp(static_cast<double>(left), 0.0, static_cast<double>(w));
  const double t = std::clamp(static_cast<double>(top), 0.0, static_cast<double>(h));
  const double r = std::clamp(static_cast<double>(left + side), 0.0, static_cast<double>(w));
  const double b = std::clamp(static_cast<double>(top + side), 0.0, static_cast<double>(h));
  if (r - l < 1.0 || b - t < 1.0) fail(ErrorKind::TooSmall, "sign is not visible at this distance");
  return BBox::from_edges(kStopClassId, l / w, t / h, r / w, b / h);
}

Image SceneRenderer::compose(const Image* patch, double distance, const OverlayPlacement& placement) const {
  const int w = config_.camera.width;
  const int h = config_.camera.height;
  const int side = static_cast<int>(std::lround(projected_size(config_.sign_side_m, distance, config_.camera.fx)));
  if (side < 2) fail(ErrorKind::TooSmall, "sign projects to under 2 px");
  const BBox box = sign_box(distance);
  Image scene = background_;
  const long left = std::lround(config_.anchor_x * w - 0.5 * side);
  const long top = std::lround(config_.anchor_y * h - 0.5 * side);
  blit(scene, resize_bilinear(sign_, side, side), static_cast<int>(left), static_cast<int>(top));
  if (patch != nullptr) scene = overlay_patch(scene, box, *patch, placement);
  return scene;
}

Image SceneRenderer::render_base(const Image* patch, double distance, const OverlayPlacement& placement) const {
  return Remapper::cached(config_.camera, RemapDirection::Distort)->apply(compose(patch, distance, placement));
}

int SceneRenderer::jitter_offset(int frame_index) const {
  const int bound = jitter_bound(config_.jitter);
  if (bound == 0) return 0;
  Rng rng(derive_seed(config_.seed ^ kJitterStream, static_cast<std::uint64_t>(frame_index)));
  return static_cast<int>(rng.uniform_int(-bound, bound));
}

Image SceneRenderer::apply_jitter(const Image& base, int frame_index) const {
  const int delta = jitter_offset(frame_index);
  if (delta == 0) return base;
  Image out = base;
  const double shift = delta / 255.0;
  for (double& v : out.data()) v += shift;
  clamp_values(out);
  return out;
}

Image SceneRenderer::render(const Image* patch, double distance, const OverlayPlacement& placement,
                            int frame_index) const {
  return apply_jitter(render_base(patch, distance, placement), frame_index);
}

double SceneRenderer::patch_coverage(double distance, double size_fraction) const {
  const int w = config_.camera.width;
  const int h = config_.camera.height;
  const PatchRegion region = patch_region(w, h, sign_box(distance), {Slot::Center, size_fraction});
  return static_cast<double>(region.side) * region.side / (static_cast<double>(w) * h);
}

Image render_scene(const SweepConfig& config, const Image* patch, double distance,
                   const OverlayPlacement& placement, int frame_index) {
  return SceneRenderer(config).render(patch, distance, placement, frame_index);
}

EvalRecord run_cell(const SweepConfig& config, const CellKey& cell, const DetectorAdapter& detector,
                    const EvalRecord* clean) {
  config.validate();
  return run_cell_with(SceneRenderer(config), config, cell, detector, clean);
}

std::vector<EvalRecord> run_sweep(const SweepConfig& config, const DetectorAdapter& detector) {
  config.validate();
  const SceneRenderer renderer(config);
  const int jobs = detector.info().reentrant ? config.jobs : 1;

  std::vector<CellKey> cells;
  std::vector<std::size_t> clean_index;  // per cell, index of its clean cell
  for (double d : config.distances) {
    const std::size_t c = cells.size();
    cells.push_back({d, kCleanType, kNoneField, kNoneField});
    clean_index.push_back(c);
    for (const auto& t : config.patch_types) {
      for (const auto& s : config.sizes) {
        for (Slot slot : config.placements) {
          cells.push_back({d, t.name, s.name, std::string(to_string(slot))});
          clean_index.push_back(c);
        }
      }
    }
  }

  std::vector<EvalRecord> records(cells.size());
  auto run_one = [&](std::size_t i) {
    try {
      records[i] = run_cell_with(renderer, config, cells[i], detector, nullptr);
    } catch (const Error& e) {
      records[i].key = cells[i];
      records[i].status = std::string("error: ") + std::string(to_string(e.kind())) + ": " + e.what();
    }
  };
  parallel_for(cells.size(), jobs, run_one);

  for (std::size_t i = 0; i < records.size(); ++i) {
    const EvalRecord& clean = records[clean_index[i]];
    if (!cells[i].clean() && records[i].status == "ok" && clean.status == "ok") {
      records[i].delta = records[i].mean - clean.mean;
    }
  }
  return records;
}

std::string records_csv(std::span<const EvalRecord> records) {
  std::string out = "distance_m,patch_type,size,placement,frame_idx,confidence\n";
  char buf[64];
  for (const auto& rec : records) {
    const std::string prefix = format_distance(rec.key.distance) + "," + rec.key.patch_type + "," + rec.key.size +
                               "," + rec.key.placement + ",";
    for (std::size_t f = 0; f < rec.confidences.size(); ++f) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", f, rec.confidences[f]);
      out += prefix;
      out += buf;
    }
  }
  return out;
}

std::vector<EvalRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::ParseError, "records file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "distance_m,patch_type,size,placement,frame_idx,confidence") {
    fail(ErrorKind::ParseError, "unexpected records header: " + line);
  }
  std::vector<EvalRecord> records;
  std::vector<std::vector<std::pair<long, double>>> frames;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 6) fail(ErrorKind::ParseError, "records line " + std::to_string(lineno) + ": expected 6 fields");
    CellKey key;
    long frame = 0;
    double conf = 0.0;
    try {
      std::size_t used = 0;
      key.distance = std::stod(f[0], &used);
      if (used != f[0].size()) throw std::invalid_argument("distance");
      frame = std::stol(f[4], &used);
      if (used != f[4].size()) throw std::invalid_argument("frame");
      conf = std::stod(f[5], &used);
      if (used != f[5].size()) throw std::invalid_argument("confidence");
    } catch (const std::exception&) {
      fail(ErrorKind::ParseError, "records line " + std::to_string(lineno) + ": bad number");
    }
    key.patch_type = f[1];
    key.size = f[2];
    key.placement = f[3];
    auto it = std::find_if(records.begin(), records.end(), [&](const EvalRecord& r) { return r.key == key; });
    std::size_t idx;
    if (it == records.end()) {
      idx = records.size();
      records.push_back({});
      records.back().key = key;
      frames.emplace_back();
    } else {
      idx = static_cast<std::size_t>(it - records.begin());
    }
    frames[idx].emplace_back(frame, conf);
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::stable_sort(frames[i].begin(), frames[i].end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [frame, c] : frames[i]) records[i].confidences.push_back(c);
    records[i].mean = mean_of(records[i].confidences);
  }
  for (auto& rec : records) {
    if (rec.key.clean()) continue;
    for (const auto& other : records) {
      if (other.key.clean() && other.key.distance == rec.key.distance) {
        rec.delta = rec.mean - other.mean;
        break;
      }
    }
  }
  return records;
}

}  // namespace napkit
