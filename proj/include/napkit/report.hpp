#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "napkit/evalsim.hpp"
#include "napkit/image.hpp"

namespace napkit {

struct SummaryRow {
  std::string size;
  double distance = 0.0;
  double clean_c = 0.0;
  std::vector<std::optional<double>> delta;  // aligned with Summary::patch_types
};

struct Summary {
  std::vector<std::string> patch_types;
  std::vector<SummaryRow> rows;             // size blocks, distances ascending
  std::vector<SummaryRow> mean_over_sizes;  // size == "mean"
};

/// Clean C per distance and placement-averaged delta C per (size, distance,
/// type), recomputed from the raw frames. Records with an error status are
/// ignored. Throws MissingCleanBaseline naming the first distance without a
/// clean record.
Summary summarize(std::span<const EvalRecord> records);

enum class TableFormat { Csv, Markdown };

std::string render_table(const Summary& summary, TableFormat format);
/// Reads the CSV written by render_table.
Summary parse_summary_csv(const std::string& text);

/// "Mean STOP confidence vs distance": one polyline per configuration, the
/// clean trace drawn black and thicker.
std::string plot_svg(std::span<const EvalRecord> records);
Image plot_raster(std::span<const EvalRecord> records, int width = 800, int height = 500);
/// Writes SVG or PNG depending on the extension. Throws InsufficientData with
/// fewer than two distances.
void plot_confidence_vs_distance(std::span<const EvalRecord> records, const std::filesystem::path& path);

/// Human-readable column title, e.g. "nap_peacock" -> "NAP-Peacock".
std::string display_name(const std::string& patch_type);

}  // namespace napkit
