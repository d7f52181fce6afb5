#include "psc/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "psc/errors.hpp"

namespace psc {

double grad_check(const ScalarFn& f, Tensor x, const GradCheckOptions& options) {
  const bool had_flag = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();

  std::vector<double> analytic;
  {
    Tape tape;
    Tensor loss = f(tape, x);
    tape.backward(loss);
    auto g = x.grad();
    analytic.assign(g.begin(), g.end());
  }
  x.zero_grad();

  std::vector<std::size_t> coords(x.numel());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coords > 0 && options.max_coords < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  auto eval = [&] {
    Tape tape = Tape::inference();
    return f(tape, x).item();
  };

  double worst = 0.0;
  for (std::size_t i : coords) {
    const double saved = x[i];
    x[i] = saved + options.step;
    const double up = eval();
    x[i] = saved - options.step;
    const double down = eval();
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    if (!std::isfinite(err)) {
      worst = std::numeric_limits<double>::infinity();
      break;
    }
    worst = std::max(worst, err);
  }
  x.set_requires_grad(had_flag);
  return worst;
}

}  // namespace psc
