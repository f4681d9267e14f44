// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "napkit/assets.hpp"
#include "napkit/camera.hpp"
#include "napkit/compositor.hpp"
#include "napkit/error.hpp"
#include "napkit/evalsim.hpp"
#include "napkit/image_io.hpp"
#include "napkit/optimizer.hpp"
#include "napkit/pipeline.hpp"
#include "napkit/report.hpp"
#include "napkit/rng.hpp"

using namespace napkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("napkit_acceptance_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Reference confidence table: clean C per distance and delta C per size block.

const std::vector<double> kDistances{0.30, 0.38, 0.45, 0.60, 0.90};
const std::vector<double> kCleanC{0.7788, 0.7105, 0.8506, 0.7862, 0.8993};
const std::vector<std::string> kTypes{"white", "black", "nap_peacock", "nap_dog", "nap_bear"};
const std::vector<std::string> kSizes{"small", "medium", "large"};

// [size][distance][type], as printed with three decimals.
const char* const kDeltaText[3][5][5] = {
    {{"+0.022", "+0.001", "-0.178", "-0.128", "-0.223"},
     {"+0.021", "-0.005", "+0.006", "-0.036", "-0.008"},
     {"-0.005", "-0.018", "+0.005", "-0.004", "+0.006"},
     {"+0.004", "+0.005", "+0.014", "+0.015", "+0.017"},
     {"-0.028", "-0.009", "-0.014", "-0.007", "-0.020"}},
    {{"-0.197", "-0.199", "-0.279", "-0.288", "-0.342"},
     {"-0.044", "-0.104", "-0.119", "-0.191", "-0.173"},
     {"-0.030", "-0.030", "-0.010", "-0.030", "-0.051"},
     {"-0.021", "-0.074", "+0.012", "+0.016", "-0.022"},
     {"-0.031", "-0.012", "-0.011", "-0.011", "-0.009"}},
    {{"-0.270", "-0.232", "-0.359", "-0.323", "-0.358"},
     {"-0.243", "-0.264", "-0.293", "-0.307", "-0.301"},
     {"-0.132", "-0.079", "-0.035", "-0.147", "-0.142"},
     {"-0.060", "-0.146", "-0.092", "-0.041", "-0.106"},
     {"-0.088", "-0.019", "-0.013", "-0.010", "-0.004"}}};

std::vector<double> window_around(double mean, double spread, int n) {
  std::vector<double> frames(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) frames[static_cast<std::size_t>(i)] = mean + ((i % 2 == 0) ? spread : -spread);
  return frames;
}

std::vector<EvalRecord> reference_fixture() {
  std::vector<EvalRecord> records;
  const char* const slots[] = {"center", "upper", "lower"};
  const double offsets[] = {0.012, 0.0, -0.012};
  for (std::size_t di = 0; di < kDistances.size(); ++di) {
    EvalRecord clean;
    clean.key = {kDistances[di], kCleanType, kNoneField, kNoneField};
    clean.confidences = window_around(kCleanC[di], 0.05, 150);
    records.push_back(clean);
    for (std::size_t ti = 0; ti < kTypes.size(); ++ti) {
      for (std::size_t si = 0; si < kSizes.size(); ++si) {
        const double delta = std::stod(kDeltaText[si][di][ti]);
        for (int p = 0; p < 3; ++p) {
          EvalRecord rec;
          rec.key = {kDistances[di], kTypes[ti], kSizes[si], slots[p]};
          rec.confidences = window_around(kCleanC[di] + delta + offsets[p], 0.03, 150);
          records.push_back(rec);
        }
      }
    }
  }
  return records;
}

Outcome ac1_reference_table() {
  const fs::path dir = scratch_dir("ac1");
  const auto fixture = reference_fixture();
  write_text_file(dir / "records.csv", records_csv(fixture));
  run_report(nlohmann::json{{"records", (dir / "records.csv").string()}, {"out", (dir / "report").string()}}.dump());

  // Unrounded values straight from the written records.
  const Summary s = summarize(parse_records_csv(read_text_file(dir / "records.csv")));
  double worst = 0.0;
  int checked = 0;
  for (const auto& row : s.rows) {
    const auto di = static_cast<std::size_t>(
        std::find(kDistances.begin(), kDistances.end(), row.distance) - kDistances.begin());
    const auto si = static_cast<std::size_t>(std::find(kSizes.begin(), kSizes.end(), row.size) - kSizes.begin());
    if (di >= kDistances.size() || si >= kSizes.size()) return {false, "unexpected summary row " + row.size};
    worst = std::max(worst, std::abs(row.clean_c - kCleanC[di]));
    for (std::size_t ti = 0; ti < s.patch_types.size(); ++ti) {
      const auto t = static_cast<std::size_t>(std::find(kTypes.begin(), kTypes.end(), s.patch_types[ti]) - kTypes.begin());
      if (t >= kTypes.size() || !row.delta[ti]) return {false, "missing delta for " + s.patch_types[ti]};
      worst = std::max(worst, std::abs(*row.delta[ti] - std::stod(kDeltaText[si][di][t])));
      ++checked;
    }
  }
  if (checked != 75) return {false, "expected 75 delta cells, got " + std::to_string(checked)};

  // Serialized table cells must read exactly as printed.
  const std::string csv = read_text_file(dir / "report" / "summary.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  if (line != "size,distance_m,clean_C,dC_white,dC_black,dC_nap_peacock,dC_nap_dog,dC_nap_bear") {
    return {false, "unexpected summary header: " + line};
  }
  int text_mismatch = 0;
  int rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f[0] == "mean") continue;
    const auto si = static_cast<std::size_t>(std::find(kSizes.begin(), kSizes.end(), f[0]) - kSizes.begin());
    const double d = std::stod(f[1]);
    std::size_t di = 0;
    while (di < kDistances.size() && std::abs(kDistances[di] - d) > 1e-9) ++di;
    if (si >= 3 || di >= 5) return {false, "unexpected summary line: " + line};
    if (f[2] != fmt("%.4f", kCleanC[di])) ++text_mismatch;
    for (std::size_t ti = 0; ti < 5; ++ti) {
      if (f[3 + ti] != kDeltaText[si][di][ti]) ++text_mismatch;
    }
    ++rows;
  }
  const bool large_row = csv.find("large,0.30,0.7788,-0.270,-0.232,-0.359,-0.323,-0.358") != std::string::npos;
  const bool small_row = csv.find("small,0.30,0.7788,+0.022,") != std::string::npos;
  const bool pass = worst <= 0.0005 && text_mismatch == 0 && rows == 15 && large_row && small_row;
  return {pass, "max |error| " + fmt("%.2e", worst) + " over 75 cells + 15 clean; " + std::to_string(text_mismatch) +
                    " printed-cell mismatches"};
}

// ---------------------------------------------------------------------------

Outcome ac2_coverage() {
  const SweepConfig cfg;
  const SceneRenderer renderer(cfg);
  const std::map<std::string, double> target{{"small", 0.063}, {"medium", 0.107}, {"large", 0.142}};
  // Independently computed: round(0.15 * 600 / 0.30) = 300 px sign; patch sides
  // round(f * 300) = 139 / 181 / 209 px over a 640x480 frame.
  const std::map<std::string, double> oracle{{"small", 19321.0 / 307200.0},
                                             {"medium", 32761.0 / 307200.0},
                                             {"large", 43681.0 / 307200.0}};
  bool pass = true;
  std::string detail;
  for (const auto& s : cfg.sizes) {
    const double cov = renderer.patch_coverage(0.30, s.fraction);
    pass = pass && std::abs(cov - target.at(s.name)) <= 0.005 && std::abs(cov - oracle.at(s.name)) < 1e-12;
    detail += s.name + " " + fmt("%.2f%%", 100.0 * cov) + " ";
    double prev = 2.0;
    for (double d : {0.30, 0.38, 0.45, 0.60, 0.90, 1.20}) {
      const double c = renderer.patch_coverage(d, s.fraction);
      if (!(c < prev)) {
        pass = false;
        detail += "(not decreasing at " + fmt("%.2f", d) + ") ";
      }
      prev = c;
    }
  }
  return {pass, detail + "at 0.30 m; strictly decreasing over distance"};
}

// ---------------------------------------------------------------------------

Outcome ac3_camera() {
  CameraModel cam;
  cam.k1 = -0.2;
  cam.k2 = 0.05;
  cam.p1 = 0.005;
  cam.p2 = 0.005;
  double worst = 0.0;
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 9; ++j) {
      const double u = cam.width * (0.05 + 0.9 * i / 8.0);
      const double v = cam.height * (0.05 + 0.9 * j / 8.0);
      const NormalizedPoint und = undistort_point(cam.to_normalized({u, v}), cam);
      const PixelPoint back = cam.to_pixel(distort_point(und, cam));
      worst = std::max(worst, std::hypot(back.u - u, back.v - v));
    }
  }
  CameraModel plain;
  bool identity = true;
  for (int i = 0; i < 9 && identity; ++i) {
    for (int j = 0; j < 9; ++j) {
      const NormalizedPoint p = plain.to_normalized({plain.width * (0.05 + 0.9 * i / 8.0), plain.height * (0.05 + 0.9 * j / 8.0)});
      const NormalizedPoint d = distort_point(p, plain);
      const NormalizedPoint u = undistort_point(p, plain);
      if (d.x != p.x || d.y != p.y || u.x != p.x || u.y != p.y) identity = false;
    }
  }
  const Image img = make_background(plain.width, plain.height, 5);
  identity = identity && remap_image(img, plain, RemapDirection::Distort) == img &&
             remap_image(img, plain, RemapDirection::Undistort) == img;
  return {worst < 1e-3 && identity,
          "max round-trip error " + fmt("%.2e", worst) + " px; zero-coefficient identity " + (identity ? "exact" : "broken")};
}

// ---------------------------------------------------------------------------

BBox mask_oracle_box(const CompositeSample& s, const CameraModel& cam) {
  Image mask(cam.width, cam.height, 1, 0.0);
  const auto& p = s.provenance;
  for (int y = std::max(0, p.top); y < std::min(cam.height, p.top + p.height); ++y) {
    for (int x = std::max(0, p.left); x < std::min(cam.width, p.left + p.width); ++x) mask.at(x, y, 0) = 1.0;
  }
  const Image warped = remap_image(mask, cam, RemapDirection::Distort);
  int x0 = cam.width, y0 = cam.height, x1 = -1, y1 = -1;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      if (warped.at(x, y, 0) > 0.5) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) return {};
  return BBox::from_edges(s.label.class_id, static_cast<double>(x0) / cam.width, static_cast<double>(y0) / cam.height,
                          static_cast<double>(x1 + 1) / cam.width, static_cast<double>(y1 + 1) / cam.height);
}

bool trees_identical(const fs::path& a, const fs::path& b, std::size_t& files) {
  std::set<std::string> names_a, names_b;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) names_a.insert(fs::relative(e.path(), a).string());
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) names_b.insert(fs::relative(e.path(), b).string());
  }
  if (names_a != names_b) return false;
  files = names_a.size();
  for (const auto& n : names_a) {
    if (read_file_bytes(a / n) != read_file_bytes(b / n)) return false;
  }
  return true;
}

Outcome ac4_compositor() {
  CameraModel distorted;
  distorted.k1 = 0.1;
  const CameraModel plain;

  std::vector<SignInstance> signs;
  int k = 0;
  for (int side : {40, 56, 72, 96}) {
    signs.push_back(SignInstance::make(make_stop_sign(side), kStopClassId, "stop_" + std::to_string(k++)));
    signs.push_back(SignInstance::make(make_blue_sign(side), 1, "blue_" + std::to_string(k++)));
  }
  auto pool_for = [&](const CameraModel& cam) {
    std::vector<Background> pool;
    for (int i = 0; i < 6; ++i) {
      pool.push_back(Background::prepare(make_background(cam.width, cam.height, 100 + i), cam, "bg_" + std::to_string(i)));
    }
    return pool;
  };

  CompositeConfig cfg;
  cfg.seed = 20240601;
  auto min_iou = [&](const CameraModel& cam) {
    const auto pool = pool_for(cam);
    double worst = 1.0;
    for (int i = 0; i < 200; ++i) {
      const SignInstance& sign = signs[static_cast<std::size_t>(i) % signs.size()];
      const CompositeSample s = generate_sample(sign, pool, cam, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(i)),
                                                i >= static_cast<int>(signs.size()));
      worst = std::min(worst, iou(s.label, mask_oracle_box(s, cam)));
    }
    return worst;
  };
  const double worst_distorted = min_iou(distorted);
  const double worst_plain = min_iou(plain);

  const fs::path dir = scratch_dir("ac4");
  cfg.targets = {{kStopClassId, 100}, {1, 100}};
  const auto pool = pool_for(distorted);
  generate_dataset(signs, pool, distorted, cfg, dir / "a");
  generate_dataset(signs, pool, distorted, cfg, dir / "b");
  std::size_t files = 0;
  const bool same = trees_identical(dir / "a", dir / "b", files);
  const bool pass = worst_distorted >= 0.9 && worst_plain >= 0.99 && same && files == 401;
  return {pass, "min IoU " + fmt("%.4f", worst_distorted) + " (k1=0.1), " + fmt("%.4f", worst_plain) +
                    " (no distortion); two runs " + (same ? "byte-identical" : "DIFFER") + " over " +
                    std::to_string(files) + " files"};
}

// ---------------------------------------------------------------------------

Outcome ac5_gradients() {
  const ToyStack stack = make_toy_stack(11);
  const SceneObjective objective(stack.optimization_set, stack.placement, stack.detector);
  const StepContext ctx{objective, *stack.generator, BatchPolicy{}, 11};
  const double lambda = 0.1;
  const double h = 1e-5;
  Rng rng(77);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> z(stack.generator->latent_dim());
    for (double& v : z) v = rng.normal();
    const Evaluation ev = evaluate_latent(z, lambda, 0, ctx);
    for (std::size_t i = 0; i < z.size(); ++i) {
      std::vector<double> zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      const double fd = (evaluate_latent(zp, lambda, 0, ctx).record.l_total -
                         evaluate_latent(zm, lambda, 0, ctx).record.l_total) / (2.0 * h);
      const double rel = std::abs(ev.gradient[i] - fd) / std::max({std::abs(fd), std::abs(ev.gradient[i]), 1e-6});
      worst = std::max(worst, rel);
    }
  }

  // TV subgradient away from ties.
  Image patch(16, 16, 3);
  Rng prng(5);
  for (double& v : patch.data()) v = prng.uniform();
  const Image g = tv_loss_gradient(patch);
  double worst_tv = 0.0;
  int checked = 0;
  const double step = 1e-6;
  // Entries are integer multiples of one term's weight; exact zeros are scaled by it.
  const double unit = 1.0 / (3.0 * (15.0 * 16.0 + 16.0 * 15.0));
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = patch.at(x, y, c);
        bool near_tie = false;
        const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& d : nb) {
          const int nx = x + d[0], ny = y + d[1];
          if (nx >= 0 && ny >= 0 && nx < 16 && ny < 16 && std::abs(patch.at(nx, ny, c) - v) < 1e-4) near_tie = true;
        }
        if (near_tie) continue;
        Image p = patch, m = patch;
        p.at(x, y, c) += step;
        m.at(x, y, c) -= step;
        const double fd = (tv_loss(p) - tv_loss(m)) / (2.0 * step);
        const double gv = g.at(x, y, c);
        worst_tv = std::max(worst_tv, std::abs(gv - fd) / std::max({std::abs(fd), std::abs(gv), unit}));
        ++checked;
      }
    }
  }
  return {worst <= 1e-3 && worst_tv <= 1e-4 && checked > 500,
          "full chain max rel error " + fmt("%.2e", worst) + " over 10 latents; TV " + fmt("%.2e", worst_tv) + " over " +
              std::to_string(checked) + " entries"};
}

// ---------------------------------------------------------------------------

Outcome ac6_optimization() {
  const std::uint64_t seed = 1;
  const ToyStack stack = make_toy_stack(seed);
  const SceneObjective objective(stack.optimization_set, stack.placement, stack.detector);
  const SceneObjective held_out(stack.held_out, stack.placement, stack.detector);
  OptimizeConfig cfg;
  cfg.iterations = 201;  // iterate 0 plus 200 steps
  cfg.eta = 1.0;
  cfg.lambda_tv = 0.1;
  cfg.seed = seed;
  const OptimizeResult result = optimize(cfg, objective, *stack.generator);

  bool pass = true;
  double worst_ratio = 0.0, worst_drop = 1.0;
  double min_logged = 1.0;
  for (const auto& run : result.runs) {
    if (run.history.size() != 201) pass = false;
    worst_ratio = std::max(worst_ratio, run.history.back().l_total / run.history.front().l_total);
    const double before = held_out.mean_confidence(stack.generator->generate(stack.generator->initial_latent(run.label, seed)));
    const double after = held_out.mean_confidence(run.best.patch);
    worst_drop = std::min(worst_drop, before - after);
    for (const auto& r : run.history) min_logged = std::min(min_logged, r.mean_stop_conf);
  }
  pass = pass && worst_ratio <= 0.5 && worst_drop >= 0.15 && result.best.confidence <= min_logged;
  return {pass, "worst L_total ratio " + fmt("%.3f", worst_ratio) + ", worst held-out drop " + fmt("%.3f", worst_drop) +
                    ", P* conf " + fmt("%.4f", result.best.confidence) + " <= min logged " + fmt("%.4f", min_logged)};
}

// ---------------------------------------------------------------------------

Outcome ac7_protocol() {
  const fs::path dir = scratch_dir("ac7");
  const std::string opts_a = nlohmann::json{{"out", (dir / "a").string()}, {"seed", 9}, {"jobs", 1}}.dump();
  const std::string opts_b = nlohmann::json{{"out", (dir / "b").string()}, {"seed", 9}, {"jobs", 1}}.dump();
  run_evaluate(opts_a);
  run_evaluate(opts_b);
  const auto a = read_file_bytes(dir / "a" / "records.csv");
  const bool same = a == read_file_bytes(dir / "b" / "records.csv");

  const auto records = parse_records_csv(std::string(a.begin(), a.end()));
  std::set<std::string> types;
  std::set<std::tuple<double, std::string, std::string, std::string>> cells;
  int clean = 0, patched = 0, short_windows = 0;
  for (const auto& r : records) {
    if (r.confidences.size() != 150) ++short_windows;
    if (r.key.clean()) {
      ++clean;
    } else {
      ++patched;
      types.insert(r.key.patch_type);
    }
    cells.insert({r.key.distance, r.key.patch_type, r.key.size, r.key.placement});
  }
  const bool baselines = types.count("white") && types.count("black");
  const bool pass = records.size() == 230 && clean == 5 && patched == 225 && cells.size() == 230 && types.size() == 5 &&
                    baselines && short_windows == 0 && same;
  return {pass, std::to_string(records.size()) + " records (" + std::to_string(clean) + " clean + " +
                    std::to_string(patched) + " patched), " + std::to_string(types.size()) +
                    " patch types incl. white/black, 150-frame windows; rerun " + (same ? "byte-identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------

Outcome ac8_oracles() {
  // Random sweep records; the oracle walks every frame once.
  Rng rng(31337);
  std::vector<EvalRecord> records;
  const char* const slots[] = {"center", "upper", "lower"};
  for (double d : kDistances) {
    EvalRecord c;
    c.key = {d, kCleanType, kNoneField, kNoneField};
    for (int f = 0; f < 150; ++f) c.confidences.push_back(rng.uniform());
    records.push_back(c);
    for (const auto& t : kTypes) {
      for (const auto& s : kSizes) {
        for (const char* p : slots) {
          EvalRecord r;
          r.key = {d, t, s, p};
          for (int f = 0; f < 150; ++f) r.confidences.push_back(rng.uniform());
          records.push_back(r);
        }
      }
    }
  }
  std::shuffle(records.begin(), records.end(), std::mt19937_64(4));

  std::map<double, std::pair<double, long>> clean_acc;
  std::map<std::tuple<double, std::string, std::string, std::string>, std::pair<double, long>> cell_acc;
  for (const auto& r : records) {
    for (double c : r.confidences) {
      if (r.key.clean()) {
        clean_acc[r.key.distance].first += c;
        ++clean_acc[r.key.distance].second;
      } else {
        auto& a = cell_acc[{r.key.distance, r.key.size, r.key.patch_type, r.key.placement}];
        a.first += c;
        ++a.second;
      }
    }
  }
  auto oracle_delta = [&](double d, const std::string& size, const std::string& type) {
    const double cc = clean_acc[d].first / clean_acc[d].second;
    double sum = 0.0;
    int n = 0;
    for (const char* p : slots) {
      const auto& a = cell_acc[{d, size, type, p}];
      sum += a.first / a.second - cc;
      ++n;
    }
    return sum / n;
  };

  const Summary s = summarize(records);
  double worst = 0.0;
  std::size_t cells = 0;
  for (const auto& row : s.rows) {
    worst = std::max(worst, std::abs(row.clean_c - clean_acc[row.distance].first / clean_acc[row.distance].second));
    for (std::size_t t = 0; t < s.patch_types.size(); ++t) {
      worst = std::max(worst, std::abs(*row.delta[t] - oracle_delta(row.distance, row.size, s.patch_types[t])));
      ++cells;
    }
  }
  for (const auto& row : s.mean_over_sizes) {
    for (std::size_t t = 0; t < s.patch_types.size(); ++t) {
      double m = 0.0;
      for (const auto& size : kSizes) m += oracle_delta(row.distance, size, s.patch_types[t]);
      worst = std::max(worst, std::abs(*row.delta[t] - m / 3.0));
      ++cells;
    }
  }

  // Background selection against a brute-force argmin (ties: lowest index).
  Rng brng(99);
  int mismatches = 0;
  for (int draw = 0; draw < 100; ++draw) {
    const auto n = static_cast<std::size_t>(brng.uniform_int(1, 24));
    std::vector<Background> pool(n);
    for (auto& bg : pool) {
      bg.margb = static_cast<double>(brng.uniform_int(0, 40)) * 6.25;  // coarse grid to force ties
      bg.undistorted = true;
    }
    SignInstance sign;
    sign.margb = static_cast<double>(brng.uniform_int(0, 255));
    std::size_t expect = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(pool[i].margb - sign.margb) < std::abs(pool[expect].margb - sign.margb)) expect = i;
    }
    if (select_background_index(sign, pool) != expect || &select_background(sign, pool) != &pool[expect]) ++mismatches;
  }
  return {worst <= 1e-9 && cells == 100 && mismatches == 0,
          "summarize vs one-pass oracle max diff " + fmt("%.2e", worst) + " over " + std::to_string(cells) +
              " cells; select_background mismatches " + std::to_string(mismatches) + "/100"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    double budget_s;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria{
      {"AC1", "reference confidence table reproduced from frame fixtures", 10.0, ac1_reference_table},
      {"AC2", "pixel-coverage calibration at 0.30 m", 0.0, ac2_coverage},
      {"AC3", "camera distort/undistort round trip", 1.0, ac3_camera},
      {"AC4", "compositor label fidelity and dataset determinism", 120.0, ac4_compositor},
      {"AC5", "gradient correctness against finite differences", 0.0, ac5_gradients},
      {"AC6", "optimization efficacy on the toy stack", 120.0, ac6_optimization},
      {"AC7", "sweep protocol completeness and determinism", 0.0, ac7_protocol},
      {"AC8", "oracle equivalence for summarize and select_background", 0.0, ac8_oracles},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs > c.budget_s) {
      out.pass = false;
      out.detail += "; over the " + fmt("%.0f", c.budget_s) + " s budget";
    }
    std::printf("%s %s %s (%.2f s): %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, secs, out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass) ++failures;
  }
  std::error_code ec;
  fs::remove_all(fs::temp_directory_path() / ("napkit_acceptance_" + std::to_string(::getpid())), ec);
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
