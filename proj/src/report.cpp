#include "napkit/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "napkit/error.hpp"
#include "napkit/image_io.hpp"

namespace napkit {

namespace {

int size_rank(const std::string& size) {
  if (size == "small") return 0;
  if (size == "medium") return 1;
  if (size == "large") return 2;
  return 3;
}

double frame_mean(const EvalRecord& rec) {
  if (rec.confidences.empty()) return rec.mean;
  double sum = 0.0;
  for (double c : rec.confidences) sum += c;
  return sum / static_cast<double>(rec.confidences.size());
}

std::string fmt(const char* pattern, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string format_delta(double v) {
  std::string s = fmt("%+.3f", v);
  if (s == "-0.000") s = "+0.000";
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) return out;
    start = comma + 1;
  }
}

double parse_number(const std::string& s, std::size_t lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorKind::ParseError, "summary line " + std::to_string(lineno) + ": bad number \"" + s + "\"");
}

struct Trace {
  std::string type;
  std::string label;
  std::vector<std::pair<double, double>> points;  // (distance, mean C)
};

std::vector<Trace> collect_traces(std::span<const EvalRecord> records) {
  std::vector<Trace> traces;
  std::set<double> distances;
  for (const auto& rec : records) {
    if (rec.status != "ok") continue;
    distances.insert(rec.key.distance);
    const std::string label = rec.key.clean()
                                  ? std::string(kCleanType)
                                  : rec.key.patch_type + "/" + rec.key.size + "/" + rec.key.placement;
    auto it = std::find_if(traces.begin(), traces.end(), [&](const Trace& t) { return t.label == label; });
    if (it == traces.end()) {
      traces.push_back({rec.key.patch_type, label, {}});
      it = traces.end() - 1;
    }
    it->points.emplace_back(rec.key.distance, frame_mean(rec));
  }
  if (distances.size() < 2) fail(ErrorKind::InsufficientData, "plot needs at least two distances");
  for (auto& t : traces) {
    std::stable_sort(t.points.begin(), t.points.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
  }
  // Clean trace last so it is drawn on top.
  std::stable_partition(traces.begin(), traces.end(), [](const Trace& t) { return t.type != kCleanType; });
  return traces;
}

struct Rgb {
  int r, g, b;
};

constexpr Rgb kPalette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40},
                            {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {188, 189, 34}};

std::map<std::string, Rgb> type_colors(const std::vector<Trace>& traces) {
  std::map<std::string, Rgb> colors;
  std::size_t next = 0;
  for (const auto& t : traces) {
    if (t.type == kCleanType || colors.count(t.type)) continue;
    colors[t.type] = kPalette[next++ % std::size(kPalette)];
  }
  colors[kCleanType] = {0, 0, 0};
  return colors;
}

struct Frame {
  double x0, x1, y0, y1;  // plot area in pixels
  double dmin, dmax;

  double px(double d) const { return x0 + (d - dmin) / (dmax - dmin) * (x1 - x0); }
  double py(double c) const { return y1 - std::clamp(c, 0.0, 1.0) * (y1 - y0); }
};

Frame make_frame(const std::vector<Trace>& traces, double width, double height) {
  double dmin = 1e300, dmax = -1e300;
  for (const auto& t : traces) {
    for (const auto& [d, c] : t.points) {
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
  }
  return {60.0, width - 20.0, 20.0, height - 50.0, dmin, dmax};
}

void draw_line(Image& img, double xa, double ya, double xb, double yb, Rgb color, int thickness) {
  const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(xb - xa), std::abs(yb - ya)))));
  const int half = thickness / 2;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const int cx = static_cast<int>(std::lround(xa + t * (xb - xa)));
    const int cy = static_cast<int>(std::lround(ya + t * (yb - ya)));
    for (int dy = -half; dy <= half; ++dy) {
      for (int dx = -half; dx <= half; ++dx) {
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) continue;
        img.at(x, y, 0) = color.r / 255.0;
        img.at(x, y, 1) = color.g / 255.0;
        img.at(x, y, 2) = color.b / 255.0;
      }
    }
  }
}

}  // namespace

std::string display_name(const std::string& patch_type) {
  std::string out;
  bool upper_next = true;
  std::string rest = patch_type;
  if (rest.rfind("nap_", 0) == 0) {
    out = "NAP-";
    rest = rest.substr(4);
  }
  for (char ch : rest) {
    if (ch == '_') {
      out += ' ';
      upper_next = true;
      continue;
    }
    out += upper_next ? static_cast<char>(std::toupper(static_cast<unsigned char>(ch))) : ch;
    upper_next = false;
  }
  return out;
}

Summary summarize(std::span<const EvalRecord> records) {
  std::map<double, std::pair<double, int>> clean;  // distance -> (sum of means, count)
  std::vector<std::string> types;
  std::vector<std::string> sizes;
  std::set<double> distances;
  for (const auto& rec : records) {
    if (rec.status != "ok") continue;
    distances.insert(rec.key.distance);
    if (rec.key.clean()) {
      auto& [sum, n] = clean[rec.key.distance];
      sum += frame_mean(rec);
      ++n;
      continue;
    }
    if (std::find(types.begin(), types.end(), rec.key.patch_type) == types.end()) types.push_back(rec.key.patch_type);
    if (std::find(sizes.begin(), sizes.end(), rec.key.size) == sizes.end()) sizes.push_back(rec.key.size);
  }
  if (distances.empty()) fail(ErrorKind::InsufficientData, "no usable records to summarize");
  for (double d : distances) {
    if (!clean.count(d)) {
      fail(ErrorKind::MissingCleanBaseline, "no clean record at distance " + fmt("%.6g", d) + " m");
    }
  }
  std::stable_sort(sizes.begin(), sizes.end(),
                   [](const std::string& a, const std::string& b) { return size_rank(a) < size_rank(b); });

  // (size, distance, type) -> (sum of deltas, count) over placements.
  std::map<std::tuple<std::string, double, std::string>, std::pair<double, int>> acc;
  for (const auto& rec : records) {
    if (rec.status != "ok" || rec.key.clean()) continue;
    const auto& [sum, n] = clean[rec.key.distance];
    auto& [dsum, dn] = acc[{rec.key.size, rec.key.distance, rec.key.patch_type}];
    dsum += frame_mean(rec) - sum / n;
    ++dn;
  }

  Summary summary;
  summary.patch_types = types;
  for (const auto& size : sizes) {
    for (double d : distances) {
      SummaryRow row;
      row.size = size;
      row.distance = d;
      row.clean_c = clean[d].first / clean[d].second;
      for (const auto& t : types) {
        auto it = acc.find({size, d, t});
        if (it == acc.end()) {
          row.delta.emplace_back();
        } else {
          row.delta.emplace_back(it->second.first / it->second.second);
        }
      }
      summary.rows.push_back(std::move(row));
    }
  }
  if (sizes.empty()) {
    for (double d : distances) summary.rows.push_back({"none", d, clean[d].first / clean[d].second, {}});
  }
  for (double d : distances) {
    SummaryRow row;
    row.size = "mean";
    row.distance = d;
    row.clean_c = clean[d].first / clean[d].second;
    for (std::size_t k = 0; k < types.size(); ++k) {
      double sum = 0.0;
      int n = 0;
      for (const auto& r : summary.rows) {
        if (r.distance == d && k < r.delta.size() && r.delta[k]) {
          sum += *r.delta[k];
          ++n;
        }
      }
      if (n > 0) {
        row.delta.emplace_back(sum / n);
      } else {
        row.delta.emplace_back();
      }
    }
    summary.mean_over_sizes.push_back(std::move(row));
  }
  return summary;
}

std::string render_table(const Summary& summary, TableFormat format) {
  if (summary.rows.empty()) fail(ErrorKind::InsufficientData, "summary is empty");
  std::string out;
  if (format == TableFormat::Csv) {
    out = "size,distance_m,clean_C";
    for (const auto& t : summary.patch_types) out += ",dC_" + t;
    out += '\n';
    auto emit = [&](const SummaryRow& row) {
      out += row.size + "," + fmt("%.2f", row.distance) + "," + fmt("%.4f", row.clean_c);
      for (const auto& d : row.delta) out += "," + (d ? format_delta(*d) : std::string());
      out += '\n';
    };
    for (const auto& row : summary.rows) emit(row);
    for (const auto& row : summary.mean_over_sizes) emit(row);
    return out;
  }

  auto header = [&]() {
    std::string h = "| Size | Distance d (m) | Clean C |";
    std::string rule = "|---|---|---|";
    for (const auto& t : summary.patch_types) {
      h += " " + display_name(t) + " ΔC |";
      rule += "---|";
    }
    return h + "\n" + rule + "\n";
  };
  auto emit = [&](const SummaryRow& row, bool first_in_block) {
    out += "| " + (first_in_block ? display_name(row.size) : std::string()) + " | " + fmt("%.2f", row.distance) +
           " | " + fmt("%.4f", row.clean_c) + " |";
    for (const auto& d : row.delta) out += " " + (d ? format_delta(*d) : std::string("n/a")) + " |";
    out += '\n';
  };
  out += "## Confidence change by patch size and distance\n\n";
  out += "Clean C is the mean STOP confidence without a patch; ΔC = C_patch - C_clean at the same distance, "
         "averaged over placements.\n\n";
  out += header();
  for (std::size_t i = 0; i < summary.rows.size(); ++i) {
    emit(summary.rows[i], i == 0 || summary.rows[i].size != summary.rows[i - 1].size);
  }
  if (!summary.mean_over_sizes.empty()) {
    out += "\n## Mean over sizes\n\n";
    out += header();
    for (std::size_t i = 0; i < summary.mean_over_sizes.size(); ++i) emit(summary.mean_over_sizes[i], i == 0);
  }
  return out;
}

Summary parse_summary_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::ParseError, "summary file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto head = split_csv(line);
  if (head.size() < 3 || head[0] != "size" || head[1] != "distance_m" || head[2] != "clean_C") {
    fail(ErrorKind::ParseError, "unexpected summary header: " + line);
  }
  Summary summary;
  for (std::size_t i = 3; i < head.size(); ++i) {
    if (head[i].rfind("dC_", 0) != 0) fail(ErrorKind::ParseError, "unexpected summary column " + head[i]);
    summary.patch_types.push_back(head[i].substr(3));
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != head.size()) fail(ErrorKind::ParseError, "summary line " + std::to_string(lineno) + ": wrong field count");
    SummaryRow row;
    row.size = f[0];
    row.distance = parse_number(f[1], lineno);
    row.clean_c = parse_number(f[2], lineno);
    for (std::size_t i = 3; i < f.size(); ++i) {
      if (f[i].empty()) {
        row.delta.emplace_back();
      } else {
        row.delta.emplace_back(parse_number(f[i], lineno));
      }
    }
    (row.size == "mean" ? summary.mean_over_sizes : summary.rows).push_back(std::move(row));
  }
  return summary;
}

std::string plot_svg(std::span<const EvalRecord> records) {
  const auto traces = collect_traces(records);
  const auto colors = type_colors(traces);
  constexpr double W = 800, H = 500;
  const Frame fr = make_frame(traces, W, H);
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
  out += "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  out += "<g stroke=\"#444\" stroke-width=\"1\">\n";
  out += "<line x1=\"" + fmt("%.2f", fr.x0) + "\" y1=\"" + fmt("%.2f", fr.y1) + "\" x2=\"" + fmt("%.2f", fr.x1) +
         "\" y2=\"" + fmt("%.2f", fr.y1) + "\"/>\n";
  out += "<line x1=\"" + fmt("%.2f", fr.x0) + "\" y1=\"" + fmt("%.2f", fr.y0) + "\" x2=\"" + fmt("%.2f", fr.x0) +
         "\" y2=\"" + fmt("%.2f", fr.y1) + "\"/>\n";
  out += "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double c = k * 0.25;
    out += "<text x=\"" + fmt("%.2f", fr.x0 - 8) + "\" y=\"" + fmt("%.2f", fr.py(c) + 4) +
           "\" text-anchor=\"end\">" + fmt("%.2f", c) + "</text>\n";
  }
  std::set<double> ticks;
  for (const auto& t : traces) {
    for (const auto& p : t.points) ticks.insert(p.first);
  }
  for (double d : ticks) {
    out += "<text x=\"" + fmt("%.2f", fr.px(d)) + "\" y=\"" + fmt("%.2f", fr.y1 + 16) + "\" text-anchor=\"middle\">" +
           fmt("%.2f", d) + "</text>\n";
  }
  out += "<text x=\"" + fmt("%.2f", 0.5 * (fr.x0 + fr.x1)) + "\" y=\"" + fmt("%.2f", H - 12) +
         "\" text-anchor=\"middle\">distance d (m)</text>\n";
  out += "<text x=\"16\" y=\"" + fmt("%.2f", 0.5 * (fr.y0 + fr.y1)) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         fmt("%.2f", 0.5 * (fr.y0 + fr.y1)) + ")\">mean STOP confidence C</text>\n";
  out += "</g>\n";
  for (const auto& t : traces) {
    const Rgb c = colors.at(t.type);
    const bool is_clean = t.type == kCleanType;
    out += "<polyline data-trace=\"" + t.label + "\" fill=\"none\" stroke=\"rgb(" + std::to_string(c.r) + "," +
           std::to_string(c.g) + "," + std::to_string(c.b) + ")\" stroke-width=\"" + (is_clean ? "3" : "1") + "\"" +
           (is_clean ? "" : " stroke-opacity=\"0.6\"") + " points=\"";
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      if (i) out += ' ';
      out += fmt("%.2f", fr.px(t.points[i].first)) + "," + fmt("%.2f", fr.py(t.points[i].second));
    }
    out += "\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

Image plot_raster(std::span<const EvalRecord> records, int width, int height) {
  if (width < 100 || height < 100) fail(ErrorKind::InvalidArgument, "plot must be at least 100x100");
  const auto traces = collect_traces(records);
  const auto colors = type_colors(traces);
  const Frame fr = make_frame(traces, width, height);
  Image img(width, height, 3, 1.0);
  const Rgb axis{68, 68, 68};
  draw_line(img, fr.x0, fr.y1, fr.x1, fr.y1, axis, 1);
  draw_line(img, fr.x0, fr.y0, fr.x0, fr.y1, axis, 1);
  for (int k = 0; k <= 4; ++k) draw_line(img, fr.x0 - 5, fr.py(k * 0.25), fr.x0, fr.py(k * 0.25), axis, 1);
  for (const auto& t : traces) {
    const bool is_clean = t.type == kCleanType;
    for (std::size_t i = 1; i < t.points.size(); ++i) {
      draw_line(img, fr.px(t.points[i - 1].first), fr.py(t.points[i - 1].second), fr.px(t.points[i].first),
                fr.py(t.points[i].second), colors.at(t.type), is_clean ? 3 : 1);
    }
  }
  return img;
}

void plot_confidence_vs_distance(std::span<const EvalRecord> records, const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".png") {
    write_png(path, plot_raster(records));
  } else {
    write_text_file(path, plot_svg(records));
  }
}

}  // namespace napkit
