#pragma once

#include <span>
#include <vector>

namespace cellomaps {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Signed shoelace area (positive for counter-clockwise in a y-up frame).
double signed_area(std::span<const Point2> polygon);

/// True when no two non-adjacent edges touch and no adjacent edges fold back.
bool is_simple(std::span<const Point2> polygon);

/// Sutherland-Hodgman clip against the axis-aligned box. The box is convex,
/// so the clipped area is exact even for concave subjects.
std::vector<Point2> clip_to_box(std::span<const Point2> polygon, double x0, double y0, double x1, double y1);

/// Area of polygon ∩ box.
double overlap_area(std::span<const Point2> polygon, double x0, double y0, double x1, double y1);

/// Even-odd rule.
bool contains(std::span<const Point2> polygon, Point2 p);

}  // namespace cellomaps
