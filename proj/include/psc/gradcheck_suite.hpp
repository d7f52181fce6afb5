#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace psc {

// One registered finite-difference check. `run` draws fresh random inputs
// from the seed and returns the worst relative error over every input it
// differentiates.
struct GradCheckCase {
  std::string name;
  bool pipeline = false;  // full detector objective, checked at the looser tolerance
  std::function<double(std::uint64_t seed)> run;
};

const std::vector<GradCheckCase>& gradcheck_suite();

struct GradCheckOutcome {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Every case at `points` seeds; pipeline cases use pipeline_tolerance.
std::vector<GradCheckOutcome> run_gradcheck_suite(double tolerance, double pipeline_tolerance, std::size_t points = 10);

}  // namespace psc
