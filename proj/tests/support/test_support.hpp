#pragma once

#include "risplan/scene.hpp"

#include <random>

namespace risplan::testing {

inline Building box_building(double x0, double y0, double x1, double y1, double height) {
  return Building({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, height);
}

inline Box3 bounds(double lo, double hi, double zmax = 100.0) {
  Box3 b;
  b.min = Vec3(lo, lo, 0.0);
  b.max = Vec3(hi, hi, zmax);
  return b;
}

inline Scene open_scene(Vec3 bs = Vec3(0, 0, 10), std::vector<Building> buildings = {}) {
  return Scene(std::move(buildings), bs, bounds(-500, 500));
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

}  // namespace risplan::testing
