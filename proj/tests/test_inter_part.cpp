#include <doctest.h>

#include <cmath>

#include "psc/errors.hpp"
#include "psc/grad_check.hpp"
#include "psc/inter_part.hpp"
#include "test_util.hpp"

using namespace psc;
using psc::test::max_abs_diff;
using psc::test::random_tensor;

namespace {

InterPartParams random_params(Rng& rng, std::size_t d) {
  InterPartParams p = InterPartParams::init(rng, d);
  p.attention.bias = random_tensor(rng, {1}, 0.5);
  p.merge.bias = random_tensor(rng, p.merge.bias.shape(), 0.1);
  return p;
}

Tensor row(const Tensor& m, std::size_t i) {
  const std::size_t d = m.dim(1);
  Tensor r({d});
  for (std::size_t k = 0; k < d; ++k) r[k] = m[i * d + k];
  return r;
}

double attention_oracle(const Tensor& fi, const Tensor& fj, const InterPartParams& p) {
  const std::size_t d = fi.numel();
  double s = p.attention.bias[0];
  for (std::size_t k = 0; k < d; ++k) s += fi[k] * p.attention.weight[k] + fj[k] * p.attention.weight[d + k];
  return 1.0 / (1.0 + std::exp(-s));
}

// relu((I -/+ A) F W) by explicit loops over a single 6 x d node matrix.
Tensor propagate_oracle(const Tensor& f, const Tensor& a, const Tensor& w, double sign) {
  const std::size_t d = f.dim(1);
  Tensor out({6, d});
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<double> s(d);
    for (std::size_t k = 0; k < d; ++k) {
      double acc = f[i * d + k];
      for (std::size_t j = 0; j < 6; ++j) acc += sign * a[i * 6 + j] * f[j * d + k];
      s[k] = acc;
    }
    for (std::size_t o = 0; o < d; ++o) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += s[k] * w[k * d + o];
      out[i * d + o] = std::max(0.0, acc);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("edge attention range, zero case and direction") {
  Tape tape = Tape::inference();
  Rng rng(51);
  InterPartParams zero = InterPartParams::init(rng, 4);
  CHECK(edge_attention(tape, Tensor({4}), Tensor({4}), zero)[0] == 0.5);
  bool asymmetric = false;
  for (int t = 0; t < 20; ++t) {
    InterPartParams p = random_params(rng, 4);
    Tensor a = random_tensor(rng, {4}, 3.0), b = random_tensor(rng, {4}, 3.0);
    const double ab = edge_attention(tape, a, b, p)[0], ba = edge_attention(tape, b, a, p)[0];
    CHECK(ab > 0.0);
    CHECK(ab < 1.0);
    CHECK(ab == doctest::Approx(attention_oracle(a, b, p)).epsilon(1e-14));
    if (std::abs(ab - ba) > 1e-6) asymmetric = true;
  }
  CHECK(asymmetric);
  CHECK_THROWS_AS(edge_attention(tape, Tensor({3}), Tensor({4}), zero), DimensionError);
}

TEST_CASE("inter adjacency zero pattern, unit rows and attention range over 100 inputs") {
  Tape tape = Tape::inference();
  Rng rng(52);
  const PartGraph& g = adjacency_template();
  for (int trial = 0; trial < 100; ++trial) {
    InterPartParams p = random_params(rng, 5);
    Tensor f = random_tensor(rng, {6, 5}, 2.0);
    Tensor a = build_adjacency(tape, f, g, p);
    REQUIRE(a.shape() == Shape{6, 6});
    for (auto ki : kAllRegions) {
      const std::size_t i = index_of(ki);
      double norm = 0.0;
      std::size_t nonzero = 0;
      std::vector<double> raw;
      for (auto kj : kAllRegions) {
        const std::size_t j = index_of(kj);
        const double v = a[i * 6 + j];
        if (!g.edge(ki, kj)) {
          CHECK(v == 0.0);
          continue;
        }
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
        ++nonzero;
        norm += v * v;
        raw.push_back(attention_oracle(row(f, i), row(f, j), p));
      }
      CHECK(nonzero == g.degree(ki));
      CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-9);
      // Entries are the attentions divided by the row's L2 norm.
      double rn = 0.0;
      for (double r : raw) rn += r * r;
      std::size_t e = 0;
      for (auto kj : kAllRegions) {
        if (!g.edge(ki, kj)) continue;
        CHECK(a[i * 6 + index_of(kj)] == doctest::Approx(raw[e++] / std::sqrt(rn)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("a single-edge row normalises to exactly one") {
  Tape tape = Tape::inference();
  Rng rng(53);
  PartGraph g;
  g.connect(PartKind::Head, PartKind::Foot);
  InterPartParams p = random_params(rng, 3);
  Tensor a = build_adjacency(tape, random_tensor(rng, {6, 3}), g, p);
  CHECK(a[index_of(PartKind::Head) * 6 + index_of(PartKind::Foot)] == 1.0);
  CHECK(a[index_of(PartKind::Foot) * 6 + index_of(PartKind::Head)] == 1.0);
  double rest = 0.0;
  for (double v : a.data()) rest += v;
  CHECK(rest == 2.0);
}

TEST_CASE("batched adjacency equals the edge-by-edge construction") {
  Tape tape = Tape::inference();
  Rng rng(54);
  const PartGraph& g = adjacency_template();
  InterPartParams p = random_params(rng, 4);
  Tensor f = random_tensor(rng, {3, 6, 4});
  Tensor batched = build_adjacency_batched(tape, f, g, p);
  REQUIRE(batched.shape() == Shape{3, 6, 6});
  for (std::size_t n = 0; n < 3; ++n) {
    Tensor one = build_adjacency(tape, reshape(tape, slice(tape, f, n, 1), {6, 4}), g, p);
    for (std::size_t e = 0; e < 36; ++e) CHECK(batched[n * 36 + e] == doctest::Approx(one[e]).epsilon(1e-13));
  }
}

TEST_CASE("graph propagation matches explicit loops for both signs") {
  Tape tape = Tape::inference();
  Rng rng(55);
  InterPartParams p = random_params(rng, 4);
  Tensor f = random_tensor(rng, {6, 4});
  Tensor a = build_adjacency(tape, f, adjacency_template(), p);
  Tensor w = random_tensor(rng, {4, 4});
  Tensor f3 = reshape(tape, f, {1, 6, 4}), a3 = reshape(tape, a, {1, 6, 6});
  Tensor minus = graph_propagate(tape, f3, a3, w, SmoothingSign::Minus);
  Tensor plus = graph_propagate(tape, f3, a3, w, SmoothingSign::Plus);
  CHECK(max_abs_diff(minus, propagate_oracle(f, a, w, -1.0)) < 1e-12);
  CHECK(max_abs_diff(plus, propagate_oracle(f, a, w, 1.0)) < 1e-12);
  // Zero adjacency reduces to relu(F W).
  Tensor none = graph_propagate(tape, f3, Tensor({1, 6, 6}), w, SmoothingSign::Minus);
  CHECK(max_abs_diff(none, propagate_oracle(f, Tensor({6, 6}), w, -1.0)) < 1e-12);
}

TEST_CASE("a non-neighbour leaves a node's smoothed row unchanged") {
  Tape tape = Tape::inference();
  Rng rng(56);
  InterPartParams p = random_params(rng, 4);
  Tensor f = random_tensor(rng, {6, 4});
  Tensor a = build_adjacency(tape, f, adjacency_template(), p);
  Tensor perturbed = f.clone();
  for (std::size_t k = 0; k < 4; ++k) perturbed[index_of(PartKind::Foot) * 4 + k] += 1.0;
  // Adjacency held fixed, only the node features change.
  Tensor w = random_tensor(rng, {4, 4});
  Tensor before = graph_propagate(tape, reshape(tape, f, {1, 6, 4}), reshape(tape, a, {1, 6, 6}), w, SmoothingSign::Minus);
  Tensor after =
      graph_propagate(tape, reshape(tape, perturbed, {1, 6, 4}), reshape(tape, a, {1, 6, 6}), w, SmoothingSign::Minus);
  const std::size_t head = index_of(PartKind::Head);
  for (std::size_t k = 0; k < 4; ++k) CHECK(after[head * 4 + k] == before[head * 4 + k]);
}

TEST_CASE("inter_forward zero cases") {
  Tape tape = Tape::inference();
  Rng rng(57);
  InterPartParams p = random_params(rng, 4);
  Tensor f = random_tensor(rng, {6, 4});
  InterPartParams zero = p;
  zero.graph_weight = Tensor({4, 4});
  Tensor out = inter_forward(tape, f, adjacency_template(), zero);
  REQUIRE(out.shape() == Shape{4});
  for (std::size_t o = 0; o < 4; ++o) CHECK(out[o] == zero.merge.bias[o]);
  Tensor skip = inter_forward(tape, f, adjacency_template(), p, SmoothingSign::Minus, false);
  CHECK(max_abs_diff(skip, p.merge(tape, reshape(tape, f, {24}))) < 1e-12);
}

TEST_CASE("inter_forward matches the composed oracle and the batched form") {
  Tape tape = Tape::inference();
  Rng rng(58);
  InterPartParams p = random_params(rng, 3);
  Tensor f = random_tensor(rng, {2, 6, 3});
  Tensor batched = inter_forward(tape, f, adjacency_template(), p);
  REQUIRE(batched.shape() == Shape{2, 3});
  for (std::size_t n = 0; n < 2; ++n) {
    Tensor fn = reshape(tape, slice(tape, f, n, 1), {6, 3});
    Tensor a = build_adjacency(tape, fn, adjacency_template(), p);
    Tensor prop = propagate_oracle(fn, a, p.graph_weight, -1.0);
    for (std::size_t o = 0; o < 3; ++o) {
      double s = p.merge.bias[o];
      for (std::size_t i = 0; i < 18; ++i) s += prop[i] * p.merge.weight[i * 3 + o];
      CHECK(batched[n * 3 + o] == doctest::Approx(s).epsilon(1e-12));
    }
    Tensor single = inter_forward(tape, fn, adjacency_template(), p);
    for (std::size_t o = 0; o < 3; ++o) CHECK(single[o] == doctest::Approx(batched[n * 3 + o]).epsilon(1e-13));
  }
}

TEST_CASE("inter_forward gradients match finite differences") {
  Rng rng(59);
  InterPartParams p = random_params(rng, 4);
  p.graph_weight = random_tensor(rng, {4, 4}, 0.5);
  Tensor f = random_tensor(rng, {6, 4});
  Tensor w = random_tensor(rng, {4});
  for (SmoothingSign sign : {SmoothingSign::Minus, SmoothingSign::Plus}) {
    auto run = [&](Tape& t, const InterPartParams& q, const Tensor& x) {
      return sum(t, mul(t, inter_forward(t, x, adjacency_template(), q, sign), w));
    };
    CHECK(grad_check([&](Tape& t, const Tensor& x) { return run(t, p, x); }, f) < 1e-4);
    CHECK(grad_check(
              [&](Tape& t, const Tensor& x) {
                InterPartParams q = p;
                q.attention.weight = x;
                return run(t, q, f);
              },
              p.attention.weight) < 1e-4);
    CHECK(grad_check(
              [&](Tape& t, const Tensor& x) {
                InterPartParams q = p;
                q.graph_weight = x;
                return run(t, q, f);
              },
              p.graph_weight) < 1e-4);
  }
}

TEST_CASE("default width is 1024 and bad node shapes raise") {
  Tape tape = Tape::inference();
  Rng rng(60);
  InterPartParams p = InterPartParams::init(rng, PscConfig{}.embed_dim);
  CHECK(p.embed_dim() == 1024);
  CHECK(p.merge.weight.shape() == Shape{6 * 1024, 1024});
  CHECK(p.attention.weight.shape() == Shape{2 * 1024, 1});
  InterPartParams small = InterPartParams::init(rng, 3);
  CHECK_THROWS_AS(inter_forward(tape, Tensor({5, 3}), adjacency_template(), small), DimensionError);
}
