#pragma once

#include <array>
#include <vector>

#include "z2spectra/geometry.hpp"

namespace z2s::detail {

/// Delaunay triangulation of points on the unit sphere, computed as their
/// convex hull by incremental insertion. Triangles are oriented outward
/// (det[a, b, c] > 0). Points must be distinct and not all on one hemisphere.
std::vector<std::array<int, 3>> spherical_delaunay(const std::vector<Vec3>& points);

}  // namespace z2s::detail
