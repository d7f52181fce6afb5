#include "psc/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "psc/detector.hpp"
#include "psc/grad_check.hpp"
#include "psc/losses.hpp"

namespace psc {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, scale);
  return t;
}

// Magnitudes in [lo, hi] with random sign; keeps inputs off kinks.
Tensor away_from_zero(Rng& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(lo, hi);
  return t;
}

// <out, R> for a fixed random R: every output coordinate reaches the loss
// with its own weight.
Tensor project(Tape& tape, const Tensor& out, const Tensor& weights) { return sum(tape, mul(tape, out, weights)); }

using Builder = std::function<Tensor(Tape&)>;

// Worst error of the scalar built by `f` with respect to each tensor in `wrt`.
double check_all(const Builder& f, const std::vector<Tensor>& wrt, std::size_t max_coords = 0, std::uint64_t seed = 0) {
  double worst = 0.0;
  for (const Tensor& x : wrt) {
    GradCheckOptions opt;
    opt.max_coords = max_coords;
    opt.seed = seed;
    worst = std::max(worst, grad_check([&f](Tape& tape, const Tensor&) { return f(tape); }, x, opt));
  }
  return worst;
}

// A projected single-output op: builds inputs, then checks each of them.
template <typename Make>
GradCheckCase projected(std::string name, Make make) {
  return {std::move(name), false, [make](std::uint64_t seed) {
            Rng rng(seed);
            auto [inputs, op] = make(rng);
            Tape probe = Tape::inference();
            const Tensor weights = random_tensor(rng, op(probe, inputs).shape());
            return check_all([&](Tape& t) { return project(t, op(t, inputs), weights); }, inputs);
          }};
}

using Inputs = std::vector<Tensor>;
using Op = std::function<Tensor(Tape&, const Inputs&)>;

PscConfig micro_psc() {
  PscConfig c;
  c.pooled = 3;
  c.feature_channels = 5;
  c.part_channels = 4;
  c.full_channels = 6;
  c.embed_dim = 6;
  return c;
}

std::vector<Tensor> leaves(const NamedTensors& named) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

// Zero-initialised biases put exact-zero pixels of a relu'd input right on
// the next relu's kink; finite differences need a generic point.
void randomize_biases(Rng& rng, const NamedTensors& named) {
  for (const auto& [name, t] : named) {
    if (name.size() < 5 || name.compare(name.size() - 5, 5, ".bias") != 0) continue;
    Tensor b = t;
    for (auto& v : b.data()) v = rng.normal(0.0, 0.1);
  }
}

std::vector<GradCheckCase> build_suite() {
  std::vector<GradCheckCase> s;

  s.push_back(projected("matmul", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {3, 4}), random_tensor(r, {4, 5})},
                     Op([](Tape& t, const Inputs& x) { return matmul(t, x[0], x[1]); })};
  }));
  s.push_back(projected("batched_matmul", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {2, 3, 4}), random_tensor(r, {2, 4, 5})},
                     Op([](Tape& t, const Inputs& x) { return batched_matmul(t, x[0], x[1]); })};
  }));
  s.push_back(projected("batched_matmul_transposed", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {2, 3, 4}), random_tensor(r, {2, 5, 4})},
                     Op([](Tape& t, const Inputs& x) { return batched_matmul(t, x[0], x[1], true); })};
  }));
  s.push_back(projected("fully_connected", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {2, 3, 4}), random_tensor(r, {4, 5}), random_tensor(r, {5})},
                     Op([](Tape& t, const Inputs& x) { return fully_connected(t, x[0], x[1], x[2]); })};
  }));
  s.push_back(projected("conv1x1", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {3, 4, 5}), random_tensor(r, {5, 2}), random_tensor(r, {2})},
                     Op([](Tape& t, const Inputs& x) { return conv1x1(t, x[0], x[1], x[2]); })};
  }));
  for (std::size_t stride : {1u, 2u}) {
    s.push_back(projected("conv2d_stride" + std::to_string(stride), [stride](Rng& r) {
      return std::pair{Inputs{random_tensor(r, {5, 6, 3}), random_tensor(r, {27, 4}), random_tensor(r, {4})},
                       Op([stride](Tape& t, const Inputs& x) { return conv2d(t, x[0], x[1], x[2], 3, stride, 1); })};
    }));
  }
  s.push_back(projected("relu", [](Rng& r) {
    return std::pair{Inputs{away_from_zero(r, {4, 5}, 0.05, 2.0)},
                     Op([](Tape& t, const Inputs& x) { return relu(t, x[0]); })};
  }));
  s.push_back(projected("sigmoid", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {4, 5}, 2.0)}, Op([](Tape& t, const Inputs& x) { return sigmoid(t, x[0]); })};
  }));
  s.push_back(projected("add", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {3, 4}), random_tensor(r, {3, 4})},
                     Op([](Tape& t, const Inputs& x) { return add(t, x[0], x[1]); })};
  }));
  s.push_back(projected("sub", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {3, 4}), random_tensor(r, {3, 4})},
                     Op([](Tape& t, const Inputs& x) { return sub(t, x[0], x[1]); })};
  }));
  s.push_back(projected("mul", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {3, 4}), random_tensor(r, {3, 4})},
                     Op([](Tape& t, const Inputs& x) { return mul(t, x[0], x[1]); })};
  }));
  s.push_back(projected("scale", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {3, 4})}, Op([](Tape& t, const Inputs& x) { return scale(t, x[0], -1.7); })};
  }));
  s.push_back(projected("softmax_rows", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {2, 3, 5}, 2.0)},
                     Op([](Tape& t, const Inputs& x) { return softmax_rows(t, x[0]); })};
  }));
  s.push_back(projected("l2_normalize_rows", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {4, 5})},
                     Op([](Tape& t, const Inputs& x) { return l2_normalize_rows(t, x[0]); })};
  }));
  s.push_back(projected("reshape", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {3, 4})}, Op([](Tape& t, const Inputs& x) { return reshape(t, x[0], {2, 6}); })};
  }));
  s.push_back(projected("stack", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {3, 4}), random_tensor(r, {3, 4}), random_tensor(r, {3, 4})},
                     Op([](Tape& t, const Inputs& x) { return stack(t, x, 1); })};
  }));
  s.push_back(projected("concat", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {2, 3, 2}), random_tensor(r, {2, 3, 4})},
                     Op([](Tape& t, const Inputs& x) { return concat(t, x); })};
  }));
  s.push_back(projected("slice", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {5, 3})}, Op([](Tape& t, const Inputs& x) { return slice(t, x[0], 1, 3); })};
  }));
  s.push_back(projected("gather_rows", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {5, 3})}, Op([](Tape& t, const Inputs& x) {
                       const std::size_t rows[] = {4, 0, 4, 2};
                       return gather_rows(t, x[0], rows);
                     })};
  }));
  s.push_back(projected("outer_sum", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {2, 4}), random_tensor(r, {2, 4}), random_tensor(r, {1})},
                     Op([](Tape& t, const Inputs& x) { return outer_sum(t, x[0], x[1], x[2]); })};
  }));
  s.push_back(projected("sum", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {3, 4})}, Op([](Tape& t, const Inputs& x) { return sum(t, x[0]); })};
  }));
  s.push_back(projected("mean", [](Rng& r) {
    return std::pair{Inputs{random_tensor(r, {3, 4})}, Op([](Tape& t, const Inputs& x) { return mean(t, x[0]); })};
  }));
  s.push_back(projected("roi_align", [](Rng& r) {
    const Box box{r.uniform(0.0, 4.0), r.uniform(0.0, 4.0), r.uniform(3.0, 8.0), r.uniform(3.0, 8.0)};
    return std::pair{Inputs{random_tensor(r, {6, 7, 3})}, Op([box](Tape& t, const Inputs& x) {
                       return roi_align(t, FeatureMap{x[0], 2.0}, box, 3);
                     })};
  }));
  s.push_back(projected("roi_align_batched", [](Rng& r) {
    std::vector<Box> boxes;
    for (int i = 0; i < 3; ++i) {
      boxes.push_back({r.uniform(-2.0, 6.0), r.uniform(-2.0, 6.0), r.uniform(3.0, 9.0), r.uniform(3.0, 9.0)});
    }
    return std::pair{Inputs{random_tensor(r, {6, 7, 3})}, Op([boxes](Tape& t, const Inputs& x) {
                       return roi_align(t, FeatureMap{x[0], 2.0}, boxes, 2);
                     })};
  }));
  s.push_back(projected("reduce_channels", [](Rng& r) {
    Linear l{random_tensor(r, {5, 3}), random_tensor(r, {3}, 0.1)};
    return std::pair{Inputs{random_tensor(r, {2, 3, 3, 5}), l.weight, l.bias}, Op([](Tape& t, const Inputs& x) {
                       return reduce_channels(t, x[0], Linear{x[1], x[2]});
                     })};
  }));

  s.push_back({"smooth_l1", false, [](std::uint64_t seed) {
                 Rng r(seed);
                 Tensor target = random_tensor(r, {3, 4});
                 Tensor t = away_from_zero(r, {3, 4}, 0.05, 2.0);
                 Tensor pred(target.shape());
                 for (std::size_t i = 0; i < pred.numel(); ++i) {
                   const double off = std::abs(std::abs(t[i]) - 1.0) < 0.05 ? 0.2 : 0.0;  // off the |t| = 1 seam
                   pred[i] = target[i] + t[i] + (t[i] > 0 ? off : -off);
                 }
                 return check_all([&](Tape& tape) { return smooth_l1(tape, pred, target); }, {pred});
               }});
  s.push_back({"cross_entropy", false, [](std::uint64_t seed) {
                 Rng r(seed);
                 Tensor logits = random_tensor(r, {5, 3}, 2.0);
                 std::vector<std::size_t> labels;
                 for (int i = 0; i < 5; ++i) labels.push_back(static_cast<std::size_t>(r.uniform_int(0, 2)));
                 return check_all([&](Tape& tape) { return cross_entropy(tape, logits, labels); }, {logits});
               }});

  // Pixel-level graph convolution of one region.
  s.push_back({"intra_adjacency", false, [](std::uint64_t seed) {
                 Rng r(seed);
                 IntraPartParams p = IntraPartParams::init(r, 6, 3, 5);
                 Tensor x = random_tensor(r, {3, 3, 6});
                 Tensor w = random_tensor(r, {9, 9});
                 return check_all([&](Tape& t) { return project(t, spatial_adjacency(t, x, p), w); },
                                  {x, p.theta.weight, p.theta.bias, p.phi.weight, p.phi.bias});
               }});
  s.push_back({"intra_forward", false, [](std::uint64_t seed) {
                 Rng r(seed);
                 IntraPartParams p = IntraPartParams::init(r, 6, 3, 5);
                 Tensor x = random_tensor(r, {2, 3, 3, 6});
                 Tensor w = random_tensor(r, {2, 5});
                 NamedTensors named;
                 p.collect(named, "p");
                 std::vector<Tensor> wrt = leaves(named);
                 wrt.push_back(x);
                 return check_all([&](Tape& t) { return project(t, intra_forward(t, x, p), w); }, wrt);
               }});

  // Part-level graph over the six region embeddings.
  s.push_back({"edge_attention", false, [](std::uint64_t seed) {
                 Rng r(seed);
                 InterPartParams p = InterPartParams::init(r, 5);
                 Tensor fi = random_tensor(r, {5}), fj = random_tensor(r, {5});
                 return check_all([&](Tape& t) { return edge_attention(t, fi, fj, p); },
                                  {fi, fj, p.attention.weight, p.attention.bias});
               }});
  s.push_back({"inter_adjacency", false, [](std::uint64_t seed) {
                 Rng r(seed);
                 InterPartParams p = InterPartParams::init(r, 5);
                 Tensor f = random_tensor(r, {kNumRegions, 5});
                 Tensor w = random_tensor(r, {kNumRegions, kNumRegions});
                 return check_all([&](Tape& t) { return project(t, build_adjacency(t, f, adjacency_template(), p), w); },
                                  {f, p.attention.weight, p.attention.bias});
               }});
  s.push_back({"inter_adjacency_batched", false, [](std::uint64_t seed) {
                 Rng r(seed);
                 InterPartParams p = InterPartParams::init(r, 5);
                 Tensor f = random_tensor(r, {2, kNumRegions, 5});
                 Tensor w = random_tensor(r, {2, kNumRegions, kNumRegions});
                 return check_all(
                     [&](Tape& t) { return project(t, build_adjacency_batched(t, f, adjacency_template(), p), w); },
                     {f, p.attention.weight, p.attention.bias});
               }});
  for (SmoothingSign sign : {SmoothingSign::Minus, SmoothingSign::Plus}) {
    s.push_back({"graph_propagate_" + std::string(to_string(sign)), false, [sign](std::uint64_t seed) {
                   Rng r(seed);
                   Tensor f = random_tensor(r, {2, kNumRegions, 4});
                   Tensor a = random_tensor(r, {2, kNumRegions, kNumRegions}, 0.4);
                   Tensor wp = random_tensor(r, {4, 4});
                   Tensor w = random_tensor(r, {2, kNumRegions, 4});
                   return check_all([&](Tape& t) { return project(t, graph_propagate(t, f, a, wp, sign), w); },
                                    {f, a, wp});
                 }});
  }
  s.push_back({"inter_forward", false, [](std::uint64_t seed) {
                 Rng r(seed);
                 InterPartParams p = InterPartParams::init(r, 5);
                 Tensor f = random_tensor(r, {2, kNumRegions, 5});
                 Tensor w = random_tensor(r, {2, 5});
                 NamedTensors named;
                 p.collect(named, "p");
                 std::vector<Tensor> wrt = leaves(named);
                 wrt.push_back(f);
                 return check_all([&](Tape& t) { return project(t, inter_forward(t, f, adjacency_template(), p), w); },
                                  wrt);
               }});

  // End-to-end enrichment of two proposals on a random feature map.
  s.push_back({"psc_module", false, [](std::uint64_t seed) {
                 Rng r(seed);
                 const PscConfig cfg = micro_psc();
                 PscParams p = PscParams::init(r, cfg);
                 FeatureMap map{random_tensor(r, {8, 10, cfg.feature_channels}), 4.0};
                 const std::vector<Box> boxes = {{r.uniform(0, 8), r.uniform(0, 6), r.uniform(14, 20), r.uniform(20, 26)},
                                                 {r.uniform(10, 18), r.uniform(0, 6), r.uniform(14, 20), r.uniform(20, 26)}};
                 Tensor w = random_tensor(r, {2, cfg.embed_dim});
                 NamedTensors named;
                 p.collect(named, "psc");
                 randomize_biases(r, named);
                 std::vector<Tensor> wrt = leaves(named);
                 wrt.push_back(map.values);
                 return check_all([&](Tape& t) { return project(t, psc_features(t, map, boxes, p, cfg), w); }, wrt, 8,
                                  seed);
               }});

  // Four-term objective on a micro image with two proposals.
  s.push_back({"detector_loss", true, [](std::uint64_t seed) {
                 Rng r(seed);
                 DetectorConfig cfg;
                 cfg.psc = micro_psc();
                 cfg.backbone_channels = {4, 4, 5, 5};
                 cfg.anchor_heights = {24.0, 36.0};
                 cfg.rpn_batch = 8;
                 cfg.jitter_per_gt = 1;
                 cfg.random_negatives = 1;
                 cfg.center_jitter = 0.02;
                 cfg.scale_min = 0.97;
                 cfg.scale_max = 1.03;
                 DetectorParams p = DetectorParams::init(r, cfg);
                 randomize_biases(r, p.named());
                 Scene scene;
                 scene.image = Tensor({40, 48, 3});
                 for (auto& v : scene.image.data()) v = r.uniform(0.0, 1.0);
                 Annotation a;
                 a.full = {r.uniform(4, 20), r.uniform(2, 8), 12, 30};
                 a.visible = a.full;
                 a.height = a.full.h;
                 scene.annotations.push_back(a);
                 const std::uint64_t sample_seed = seed * 7919 + 1;
                 return check_all(
                     [&](Tape& t) {
                       Rng sample(sample_seed);
                       return detector_loss(t, p, cfg, scene, sample).total;
                     },
                     p.parameters(), 4, seed);
               }});
  return s;
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

}  // namespace

const std::vector<GradCheckCase>& gradcheck_suite() {
  static const std::vector<GradCheckCase> suite = build_suite();
  return suite;
}

std::vector<GradCheckOutcome> run_gradcheck_suite(double tolerance, double pipeline_tolerance, std::size_t points) {
  std::vector<GradCheckOutcome> out;
  for (const auto& c : gradcheck_suite()) {
    GradCheckOutcome o{c.name, 0.0, c.pipeline ? pipeline_tolerance : tolerance, false};
    for (std::size_t k = 0; k < points; ++k) {
      const double e = c.run(mix_seed(name_hash(c.name), k));
      o.max_error = std::isfinite(e) ? std::max(o.max_error, e) : std::numeric_limits<double>::infinity();
    }
    o.passed = o.max_error < o.tolerance;
    out.push_back(o);
  }
  return out;
}

}  // namespace psc
