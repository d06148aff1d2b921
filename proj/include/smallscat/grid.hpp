#pragma once

#include <array>
#include <cstddef>

#include "smallscat/error.hpp"
#include "smallscat/geometry.hpp"

namespace smallscat {

struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 extent() const { return hi - lo; }
  double volume() const {
    Vec3 e = extent();
    return e.x() * e.y() * e.z();
  }
  bool contains(const Vec3& p) const {
    return p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() &&
           p.y() <= hi.y() && p.z() >= lo.z() && p.z() <= hi.z();
  }
  bool valid() const {
    return hi.x() > lo.x() && hi.y() > lo.y() && hi.z() > lo.z();
  }
};

/// Uniform cell grid over a box; cells are half-open along each axis except
/// the last cell, which absorbs the upper face.
struct Grid3 {
  Box box;
  std::array<int, 3> dims = {0, 0, 0};

  Grid3() = default;
  Grid3(const Box& b, std::array<int, 3> d) : box(b), dims(d) {
    if (!b.valid()) throw Error::validation("grid: region box is degenerate");
    if (d[0] < 1 || d[1] < 1 || d[2] < 1)
      throw Error::validation("grid: dimensions must be >= 1 per axis");
  }

  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  Vec3 spacing() const {
    Vec3 e = box.extent();
    return {e.x() / dims[0], e.y() / dims[1], e.z() / dims[2]};
  }
  double cell_volume() const {
    Vec3 h = spacing();
    return h.x() * h.y() * h.z();
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  std::array<int, 3> coords(std::size_t idx) const {
    int i = static_cast<int>(idx % dims[0]);
    int j = static_cast<int>((idx / dims[0]) % dims[1]);
    int k = static_cast<int>(idx / (static_cast<std::size_t>(dims[0]) * dims[1]));
    return {i, j, k};
  }
  Vec3 center(int i, int j, int k) const {
    Vec3 h = spacing();
    return box.lo + Vec3((i + 0.5) * h.x(), (j + 0.5) * h.y(), (k + 0.5) * h.z());
  }
  Vec3 center(std::size_t idx) const {
    auto c = coords(idx);
    return center(c[0], c[1], c[2]);
  }
  /// Cell containing p; throws when p lies outside the box.
  std::array<int, 3> locate(const Vec3& p) const {
    if (!box.contains(p))
      throw Error::validation("grid: point lies outside the region");
    Vec3 h = spacing();
    std::array<int, 3> c;
    for (int ax = 0; ax < 3; ++ax) {
      int i = static_cast<int>((p[ax] - box.lo[ax]) / h[ax]);
      c[ax] = std::min(i, dims[ax] - 1);
    }
    return c;
  }
};

}  // namespace smallscat
