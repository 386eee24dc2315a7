#include "cellomaps/polygon.hpp"

#include <algorithm>
#include <cmath>

namespace cellomaps {

double signed_area(std::span<const Point2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = polygon[i];
    const auto& b = polygon[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

namespace {

double cross(Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

bool on_segment(Point2 p, Point2 a, Point2 b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

int sign(double v) { return (v > 0) - (v < 0); }

bool segments_touch(Point2 a, Point2 b, Point2 c, Point2 d) {
  const int d1 = sign(cross(c, d, a)), d2 = sign(cross(c, d, b));
  const int d3 = sign(cross(a, b, c)), d4 = sign(cross(a, b, d));
  if (d1 != d2 && d3 != d4 && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0) return true;
  if (d1 == 0 && on_segment(a, c, d)) return true;
  if (d2 == 0 && on_segment(b, c, d)) return true;
  if (d3 == 0 && on_segment(c, a, b)) return true;
  if (d4 == 0 && on_segment(d, a, b)) return true;
  return false;
}

}  // namespace

bool is_simple(std::span<const Point2> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  if (std::abs(signed_area(polygon)) == 0.0) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = polygon[i], b = polygon[(i + 1) % n];
    if (a == b) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      const Point2 c = polygon[j], d = polygon[(j + 1) % n];
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) {
        // Shared vertex only: the edges must not overlap collinearly.
        const Point2 shared = j == i + 1 ? b : a;
        const Point2 p = j == i + 1 ? a : b;
        const Point2 q = j == i + 1 ? d : c;
        if (cross(shared, p, q) == 0.0 && (p.x - shared.x) * (q.x - shared.x) + (p.y - shared.y) * (q.y - shared.y) > 0) {
          return false;
        }
        continue;
      }
      if (segments_touch(a, b, c, d)) return false;
    }
  }
  return true;
}

std::vector<Point2> clip_to_box(std::span<const Point2> polygon, double x0, double y0, double x1, double y1) {
  std::vector<Point2> current(polygon.begin(), polygon.end());
  // Each edge of the box as (inside test, intersection) on one axis.
  auto clip = [&current](auto inside, auto intersect) {
    std::vector<Point2> out;
    const std::size_t n = current.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 cur = current[i];
      const Point2 prev = current[(i + n - 1) % n];
      const bool cur_in = inside(cur), prev_in = inside(prev);
      if (cur_in) {
        if (!prev_in) out.push_back(intersect(prev, cur));
        out.push_back(cur);
      } else if (prev_in) {
        out.push_back(intersect(prev, cur));
      }
    }
    current = std::move(out);
  };
  auto at_x = [](double x) {
    return [x](Point2 p, Point2 q) { return Point2{x, p.y + (q.y - p.y) * (x - p.x) / (q.x - p.x)}; };
  };
  auto at_y = [](double y) {
    return [y](Point2 p, Point2 q) { return Point2{p.x + (q.x - p.x) * (y - p.y) / (q.y - p.y), y}; };
  };
  clip([x0](Point2 p) { return p.x >= x0; }, at_x(x0));
  if (!current.empty()) clip([x1](Point2 p) { return p.x <= x1; }, at_x(x1));
  if (!current.empty()) clip([y0](Point2 p) { return p.y >= y0; }, at_y(y0));
  if (!current.empty()) clip([y1](Point2 p) { return p.y <= y1; }, at_y(y1));
  return current;
}

double overlap_area(std::span<const Point2> polygon, double x0, double y0, double x1, double y1) {
  const auto clipped = clip_to_box(polygon, x0, y0, x1, y1);
  return std::abs(signed_area(clipped));
}

bool contains(std::span<const Point2> polygon, Point2 p) {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = polygon[i], b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

}  // namespace cellomaps
