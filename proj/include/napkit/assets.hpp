#pragma once

// Procedural stand-ins for real sign crops, platform frames and trained
// models, so every pipeline stage runs without external data.

#include <cstdint>
#include <memory>
#include <vector>

#include "napkit/adapters.hpp"
#include "napkit/image.hpp"
#include "napkit/optimizer.hpp"

namespace napkit {

/// Red octagon with a white rim and a white bar on a gray square.
Image make_stop_sign(int side);
/// Blue disc with a white arrow-like bar; a non-STOP distractor.
Image make_blue_sign(int side);
/// Smooth sky/ground gradient with seeded low-frequency blobs.
Image make_background(int width, int height, std::uint64_t seed);

/// Scenes with one STOP sign each; sign side drawn from
/// [min_side, max_side] x frame height.
std::vector<Scene> make_stop_scenes(std::size_t count, int width, int height, std::uint64_t seed,
                                    double min_side = 0.35, double max_side = 0.7);

/// Fits the toy detector on `count` seeded synthetic images, half with a
/// STOP sign and half without.
ToyDetectorParams fit_default_toy_detector(int width, int height, std::uint64_t seed, std::size_t count = 50);

struct ToyStackOptions {
  int width = 96;
  int height = 72;
  std::size_t optimization_scenes = 12;
  std::size_t held_out_scenes = 12;
  int patch_side = 16;
  std::size_t latent_dim = 16;
  ToyActivation activation = ToyActivation::Sigmoid;
  OverlayPlacement placement{Slot::Center, 0.8};
};

/// Seeded detector/generator/scene bundle used for end-to-end optimizer runs.
struct ToyStack {
  std::shared_ptr<const ToyDetector> detector;
  std::shared_ptr<const ToyGenerator> generator;
  std::vector<Scene> optimization_set;
  std::vector<Scene> held_out;
  OverlayPlacement placement;
};

ToyStack make_toy_stack(std::uint64_t seed, const ToyStackOptions& options = {});

}  // namespace napkit
