#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace planode {

using Vec2 = Eigen::Vector2d;

enum class Orientation { Counterclockwise, Clockwise };

// Simple closed polyline; the edge from the last vertex back to the first is
// implicit. Construction rejects fewer than 3 vertices and consecutive
// duplicates (including an explicit last==first closure).
class ClosedPolyline {
public:
    explicit ClosedPolyline(std::vector<Vec2> vertices);

    const std::vector<Vec2>& vertices() const { return vertices_; }
    std::size_t size() const { return vertices_.size(); }
    const Vec2& operator[](std::size_t i) const { return vertices_[i]; }

    // Edge i runs from vertex i to vertex (i+1) mod n.
    Vec2 edge(std::size_t i) const;

private:
    std::vector<Vec2> vertices_;
};

struct Circle {
    Vec2 center;
    double radius;

    Circle(const Vec2& c, double r) : center(c), radius(r) {
        if (!(r > 0.0)) throw std::invalid_argument("Circle: radius must be > 0");
    }
};

// Rotate v by +pi/2 (counterclockwise) or -pi/2 (clockwise).
Vec2 rotate_quarter(const Vec2& v, Orientation o);

// Shoelace area; positive iff the polyline winds counterclockwise.
double signed_area(const ClosedPolyline& p);

Orientation orientation_of(const ClosedPolyline& p);

double perimeter(const ClosedPolyline& p);

// Bounding-box diagonal, used to scale tolerance bands.
double bbox_diameter(const ClosedPolyline& p);

// Integral of the outward unit normal over the closed boundary, computed
// edge by edge as (unit normal) * (edge length). Telescopes to zero for any
// closed polyline up to floating-point roundoff.
Vec2 normal_integral(const ClosedPolyline& p);

// Closed form of the outward-normal integral over the circular arc
// theta in [th1, th2] (standard angular coordinate on the circle).
// Requires th1 < th2 <= th1 + 2*pi.
Vec2 arc_normal_integral(const Circle& c, double th1, double th2);

struct CircleHits {
    std::vector<double> params;  // sorted parameters in [0,1] along a->b
    bool tangent = false;        // discriminant within tolerance of zero
};

// Intersections of segment a->b with the circle boundary. Tangency is
// reported when |r^2 - dist(line,center)^2| <= 1e-12 * r^2.
CircleHits segment_circle_hits(const Vec2& a, const Vec2& b, const Circle& c);

struct MeetPoint {
    double seg_param;    // in [0,1] along a->b
    double path_param;   // segment index + local parameter along the path
    Vec2 point;
    bool at_path_vertex = false;
};

// First intersection of segment a->b with an open polyline path, measured
// from a. Ties in the segment parameter are broken toward the smallest path
// parameter. Exact vertex hits are flagged.
std::optional<MeetPoint> first_meet(const Vec2& a, const Vec2& b,
                                    std::span<const Vec2> path);

enum class Region { Inside, Outside, Boundary };

// Crossing-number classification with a boundary band of width `band`
// (default: 1e-9 * bbox diameter of p).
Region point_in_region(const ClosedPolyline& p, const Vec2& q, double band = -1.0);

// Segment sweep (uniform-grid broad phase) testing that no two non-adjacent
// edges intersect.
bool is_simple(const ClosedPolyline& p);

}  // namespace planode
