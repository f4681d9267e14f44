#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "napkit/adapters.hpp"
#include "napkit/assets.hpp"
#include "napkit/error.hpp"
#include "napkit/image_io.hpp"
#include "napkit/optimizer.hpp"
#include "napkit/rng.hpp"

using namespace napkit;

namespace {

// L_det = |P|^2 / 2, so dL/dP = P.
class QuadraticObjective final : public DetectionObjective {
 public:
  std::size_t set_size() const override { return 1; }
  bool supports_gradients() const override { return true; }
  LossGradient evaluate(const Image& patch, std::span<const std::size_t>) const override {
    LossGradient out{0.0, patch};
    for (double v : patch.data()) out.value += 0.5 * v * v;
    return out;
  }
};

ToyGenerator identity_generator() {
  std::vector<double> basis(16, 0.0);
  for (int i = 0; i < 4; ++i) basis[i * 4 + i] = 1.0;
  return ToyGenerator(ToyActivation::Linear, 2, 1, 4, basis);
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("one gradient step on a quadratic matches the closed form") {
    const QuadraticObjective obj;
    const ToyGenerator gen = identity_generator();
    const StepContext ctx{obj, gen};
    const LatentState s0 = init_state({1.0, 0.0, 0.0, 0.0}, 0.5, 0.0, ctx);
    REQUIRE(s0.history.size() == 1);
    CHECK(s0.history[0].l_total == doctest::Approx(0.5));
    const LatentState s1 = step(s0, ctx);
    CHECK(s1.z == std::vector<double>{0.5, 0.0, 0.0, 0.0});
    CHECK(s1.iteration == 1);
    CHECK(s1.history.size() == 2);
    CHECK(s1.history[1].l_total == doctest::Approx(0.125));
  }

  TEST_CASE("zero step size leaves the latent unchanged") {
    const QuadraticObjective obj;
    const ToyGenerator gen = identity_generator();
    const StepContext ctx{obj, gen};
    const LatentState s1 = step(init_state({0.3, -0.2, 0.7, 0.1}, 0.0, 0.1, ctx), ctx);
    CHECK(s1.z == std::vector<double>{0.3, -0.2, 0.7, 0.1});
  }

  TEST_CASE("total variation of a two-column ramp") {
    const std::vector<std::uint8_t> bytes{0, 255, 0, 255};
    const Image p = Image::from_bytes(2, 2, 1, bytes);
    CHECK(tv_loss(p) == doctest::Approx(0.5));
    CHECK(tv_loss(Image(5, 5, 3, 0.4)) == 0.0);
    const Image g = tv_loss_gradient(Image(3, 3, 1, 0.2));
    for (double v : g.data()) CHECK(v == 0.0);
  }

  TEST_CASE("lambda scales the total-variation term") {
    const QuadraticObjective obj;
    const ToyGenerator gen = identity_generator();
    const StepContext ctx{obj, gen};
    const std::vector<double> z{1.0, 0.0, 1.0, 0.0};
    const auto a = evaluate_latent(z, 0.0, 0, ctx).record;
    const auto b = evaluate_latent(z, 2.0, 0, ctx).record;
    CHECK(a.l_tv == doctest::Approx(0.5));
    CHECK(b.l_total - a.l_total == doctest::Approx(2.0 * 0.5));
  }

  TEST_CASE("patch side follows the size fraction of the shorter box side") {
    const BBox box = BBox::from_edges(kStopClassId, 100.0 / 640, 50.0 / 480, 400.0 / 640, 350.0 / 480);
    const PatchRegion r = patch_region(640, 480, box, {Slot::Center, 0.696});
    CHECK(r.side == 209);
    CHECK(r.left >= 100);
    CHECK(r.left + r.side <= 400);
    const PatchRegion up = patch_region(640, 480, box, {Slot::Upper, 0.3});
    const PatchRegion lo = patch_region(640, 480, box, {Slot::Lower, 0.3});
    CHECK(up.top < lo.top);
    const BBox tiny = BBox::from_edges(kStopClassId, 0.5, 0.5, 0.5 + 2.0 / 640, 0.5 + 2.0 / 480);
    try {
      patch_region(640, 480, tiny, {Slot::Center, 0.696});
      FAIL("expected BoxTooSmall");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::BoxTooSmall);
    }
  }

  TEST_CASE("overlay adjoint matches the overlay as a linear map") {
    const Image scene(40, 30, 3, 0.0);
    const BBox box = BBox::from_edges(kStopClassId, 0.2, 0.2, 0.8, 0.9);
    const OverlayPlacement place{Slot::Upper, 0.5};
    Rng rng(4);
    Image patch(8, 8, 3);
    for (double& v : patch.data()) v = rng.uniform();
    Image up(40, 30, 3);
    for (double& v : up.data()) v = rng.uniform(-1, 1);
    const Image fwd = overlay_patch(scene, box, patch, place);
    const Image adj = overlay_patch_adjoint(up, box, 8, place);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < fwd.size(); ++i) lhs += fwd.data()[i] * up.data()[i];
    for (std::size_t i = 0; i < patch.size(); ++i) rhs += patch.data()[i] * adj.data()[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }

  TEST_CASE("N iterations produce N history rows and a best candidate") {
    const ToyStack stack = make_toy_stack(5);
    const SceneObjective obj(stack.optimization_set, stack.placement, stack.detector);
    OptimizeConfig cfg;
    cfg.iterations = 10;
    cfg.init_labels = {"dog", "bear"};
    cfg.seed = 5;
    cfg.run_dir = fresh_dir("optimize");
    cfg.checkpoint_every = 4;
    cfg.candidate_every = 4;
    const OptimizeResult res = optimize(cfg, obj, *stack.generator);
    REQUIRE(res.runs.size() == 2);
    for (const auto& run : res.runs) {
      CHECK(run.history.size() == 10);
      CHECK(run.history.front().iteration == 0);
      CHECK(run.history.back().iteration == 9);
      CHECK(res.best.confidence <= run.best.confidence);
    }
    const std::string csv = loss_history_csv(res.runs[0].history);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
  }

  TEST_CASE("non-gradient detectors are rejected") {
    const ToyStack stack = make_toy_stack(6);
    class Opaque final : public DetectorAdapter {
     public:
      std::vector<Detection> detect(const Image&) const override { return {}; }
      DetectorInfo info() const override {
        DetectorInfo i;
        i.width = 96;
        i.height = 72;
        return i;
      }
    };
    const SceneObjective obj(stack.optimization_set, stack.placement, std::make_shared<Opaque>());
    OptimizeConfig cfg;
    cfg.iterations = 2;
    try {
      optimize(cfg, obj, *stack.generator);
      FAIL("expected NoGradientSupport");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::NoGradientSupport);
    }
  }

  TEST_CASE("update rule names round trip") {
    CHECK(parse_update_rule("adam") == UpdateRule::Adam);
    CHECK(to_string(parse_update_rule("gd")) == "gd");
    CHECK(parse_slot("lower") == Slot::Lower);
    CHECK_THROWS_AS(parse_slot("left"), Error);
  }
}
