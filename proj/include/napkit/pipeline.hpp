#pragma once

// Command-level entry points shared by the C API and the CLI. Each takes a
// JSON object of options and returns a JSON object describing what was
// written. Errors surface as napkit::Error.

#include <iosfwd>
#include <memory>
#include <string>

#include "napkit/adapters.hpp"

namespace napkit {

inline constexpr const char* kToolVersion = "0.3.0";

std::string run_compose(const std::string& options_json);
std::string run_attack(const std::string& options_json);
std::string run_evaluate(const std::string& options_json);
std::string run_report(const std::string& options_json);

/// Serves a detector over newline-delimited JSON until `in` closes.
void run_serve(const std::string& options_json, std::istream& in, std::ostream& out);

/// Builds a detector from a spec string: "toy", "constant:<c>" or
/// "external:<shell command>". The toy detector is fitted at width x height
/// from `seed`.
std::shared_ptr<const DetectorAdapter> make_detector(const std::string& spec, std::uint64_t seed, int width = 96,
                                                     int height = 72);

}  // namespace napkit
