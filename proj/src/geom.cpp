#include "planode/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>

namespace planode {

namespace {

double cross(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

double point_segment_distance(const Vec2& q, const Vec2& a, const Vec2& b) {
    const Vec2 d = b - a;
    const double len2 = d.squaredNorm();
    if (len2 == 0.0) return (q - a).norm();
    const double t = std::clamp((q - a).dot(d) / len2, 0.0, 1.0);
    return (q - (a + t * d)).norm();
}

int orient_sign(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double v = cross(b - a, c - a);
    return (v > 0.0) - (v < 0.0);
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
           std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

// true iff closed segments [a,b] and [c,d] share at least one point
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const int d1 = orient_sign(c, d, a);
    const int d2 = orient_sign(c, d, b);
    const int d3 = orient_sign(a, b, c);
    const int d4 = orient_sign(a, b, d);
    if (d1 != d2 && d3 != d4) return true;
    if (d1 == 0 && on_segment(c, d, a)) return true;
    if (d2 == 0 && on_segment(c, d, b)) return true;
    if (d3 == 0 && on_segment(a, b, c)) return true;
    if (d4 == 0 && on_segment(a, b, d)) return true;
    return false;
}

}  // namespace

ClosedPolyline::ClosedPolyline(std::vector<Vec2> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 3)
        throw std::invalid_argument("ClosedPolyline: need at least 3 vertices");
    for (const Vec2& v : vertices_)
        if (!v.allFinite()) throw std::invalid_argument("ClosedPolyline: non-finite vertex");
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        if ((vertices_[(i + 1) % n] - vertices_[i]).squaredNorm() == 0.0)
            throw std::invalid_argument(
                "ClosedPolyline: consecutive duplicate vertices (closure is implicit)");
    }
}

Vec2 ClosedPolyline::edge(std::size_t i) const {
    return vertices_[(i + 1) % vertices_.size()] - vertices_[i];
}

Vec2 rotate_quarter(const Vec2& v, Orientation o) {
    if (o == Orientation::Counterclockwise) return Vec2(-v.y(), v.x());
    return Vec2(v.y(), -v.x());
}

double signed_area(const ClosedPolyline& p) {
    const auto& v = p.vertices();
    const std::size_t n = v.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += cross(v[i], v[(i + 1) % n]);
    return 0.5 * acc;
}

Orientation orientation_of(const ClosedPolyline& p) {
    const double a = signed_area(p);
    const double d = bbox_diameter(p);
    if (std::abs(a) <= 1e-14 * d * d)
        throw std::invalid_argument("orientation_of: degenerate polyline (zero area)");
    return a > 0.0 ? Orientation::Counterclockwise : Orientation::Clockwise;
}

double perimeter(const ClosedPolyline& p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += p.edge(i).norm();
    return acc;
}

double bbox_diameter(const ClosedPolyline& p) {
    Vec2 lo = p[0], hi = p[0];
    for (const Vec2& v : p.vertices()) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
}

Vec2 normal_integral(const ClosedPolyline& p) {
    // Outward normal pairing depends on traversal direction.
    const Orientation o = orientation_of(p);
    const Orientation rot =
        o == Orientation::Counterclockwise ? Orientation::Clockwise : Orientation::Counterclockwise;
    Vec2 acc = Vec2::Zero();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Vec2 e = p.edge(i);
        const double len = e.norm();
        acc += rotate_quarter(e / len, rot) * len;
    }
    return acc;
}

Vec2 arc_normal_integral(const Circle& c, double th1, double th2) {
    if (!(th1 < th2 && th2 <= th1 + 2.0 * M_PI + 1e-15))
        throw std::invalid_argument("arc_normal_integral: need th1 < th2 <= th1 + 2*pi");
    return c.radius * Vec2(std::sin(th2) - std::sin(th1), std::cos(th1) - std::cos(th2));
}

CircleHits segment_circle_hits(const Vec2& a, const Vec2& b, const Circle& c) {
    if ((b - a).squaredNorm() == 0.0)
        throw std::invalid_argument("segment_circle_hits: degenerate segment");
    CircleHits out;
    const Vec2 d = b - a;
    const Vec2 m = a - c.center;
    const double A = d.squaredNorm();
    const double B = 2.0 * m.dot(d);
    const double C = m.squaredNorm() - c.radius * c.radius;
    // (B^2 - 4AC)/(4A^2) = r^2 - dist(line, center)^2
    const double h2 = (B * B - 4.0 * A * C) / (4.0 * A * A);
    const double r2 = c.radius * c.radius;
    if (std::abs(h2) * A <= 1e-12 * r2 * A) {  // tangency band
        out.tangent = true;
        const double t = -B / (2.0 * A);
        if (t >= 0.0 && t <= 1.0) out.params.push_back(t);
        return out;
    }
    if (h2 < 0.0) return out;
    const double tc = -B / (2.0 * A);
    const double half = std::sqrt(h2) / std::sqrt(A);
    for (double t : {tc - half, tc + half})
        if (t >= 0.0 && t <= 1.0) out.params.push_back(t);
    std::sort(out.params.begin(), out.params.end());
    return out;
}

std::optional<MeetPoint> first_meet(const Vec2& a, const Vec2& b, std::span<const Vec2> path) {
    if ((b - a).squaredNorm() == 0.0)
        throw std::invalid_argument("first_meet: degenerate segment");
    if (path.size() < 2) throw std::invalid_argument("first_meet: path needs >= 1 segment");

    const Vec2 r = b - a;
    const double rlen2 = r.squaredNorm();
    std::optional<MeetPoint> best;
    const double t_tie = 1e-12;

    auto consider = [&](double t, double u, std::size_t j) {
        t = std::clamp(t, 0.0, 1.0);
        u = std::clamp(u, 0.0, 1.0);
        const double pp = static_cast<double>(j) + u;
        if (best && t > best->seg_param + t_tie) return;
        if (best && std::abs(t - best->seg_param) <= t_tie && pp >= best->path_param) return;
        MeetPoint m;
        m.seg_param = t;
        m.path_param = pp;
        m.point = a + t * r;
        m.at_path_vertex = u <= 1e-9 || u >= 1.0 - 1e-9;
        best = m;
    };

    for (std::size_t j = 0; j + 1 < path.size(); ++j) {
        const Vec2 q1 = path[j], q2 = path[j + 1];
        const Vec2 s = q2 - q1;
        const double denom = cross(r, s);
        const Vec2 qa = q1 - a;
        const double scale = std::sqrt(rlen2 * s.squaredNorm());
        if (std::abs(denom) > 1e-14 * scale) {
            const double t = cross(qa, s) / denom;
            const double u = cross(qa, r) / denom;
            const double et = 1e-12, eu = 1e-12;
            if (t >= -et && t <= 1.0 + et && u >= -eu && u <= 1.0 + eu) consider(t, u, j);
        } else if (std::abs(cross(qa, r)) <= 1e-12 * std::max(1.0, rlen2)) {
            // collinear overlap: earliest point of the path segment along a->b
            const double t1 = qa.dot(r) / rlen2;
            const double t2 = (q2 - a).dot(r) / rlen2;
            const double tlo = std::max(std::min(t1, t2), 0.0);
            const double thi = std::min(std::max(t1, t2), 1.0);
            if (tlo <= thi) {
                const double u = (std::abs(t2 - t1) < 1e-300)
                                     ? 0.0
                                     : std::clamp((tlo - t1) / (t2 - t1), 0.0, 1.0);
                consider(tlo, u, j);
            }
        }
    }
    return best;
}

Region point_in_region(const ClosedPolyline& p, const Vec2& q, double band) {
    if (band < 0.0) band = 1e-9 * bbox_diameter(p);
    const auto& v = p.vertices();
    const std::size_t n = v.size();

    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        dmin = std::min(dmin, point_segment_distance(q, v[i], v[(i + 1) % n]));
    if (dmin <= band) return Region::Boundary;

    bool inside = false;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& p1 = v[i];
        const Vec2& p2 = v[(i + 1) % n];
        if ((p1.y() > q.y()) != (p2.y() > q.y())) {
            const double xint = p1.x() + (q.y() - p1.y()) * (p2.x() - p1.x()) / (p2.y() - p1.y());
            if (q.x() < xint) inside = !inside;
        }
    }
    return inside ? Region::Inside : Region::Outside;
}

bool is_simple(const ClosedPolyline& p) {
    const auto& v = p.vertices();
    const std::size_t n = v.size();

    Vec2 lo = v[0], hi = v[0];
    double len_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lo = lo.cwiseMin(v[i]);
        hi = hi.cwiseMax(v[i]);
        len_sum += p.edge(i).norm();
    }
    const double cell = std::max(len_sum / static_cast<double>(n), 1e-12 * (hi - lo).norm());
    const double inv = 1.0 / cell;

    auto cell_key = [&](long cx, long cy) {
        return (static_cast<unsigned long long>(static_cast<unsigned long>(cx)) << 32) ^
               static_cast<unsigned long>(cy);
    };

    std::unordered_map<unsigned long long, std::vector<std::size_t>> grid;
    grid.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = v[i];
        const Vec2& b = v[(i + 1) % n];
        const long x0 = static_cast<long>(std::floor((std::min(a.x(), b.x()) - lo.x()) * inv));
        const long x1 = static_cast<long>(std::floor((std::max(a.x(), b.x()) - lo.x()) * inv));
        const long y0 = static_cast<long>(std::floor((std::min(a.y(), b.y()) - lo.y()) * inv));
        const long y1 = static_cast<long>(std::floor((std::max(a.y(), b.y()) - lo.y()) * inv));
        for (long cx = x0; cx <= x1; ++cx)
            for (long cy = y0; cy <= y1; ++cy) grid[cell_key(cx, cy)].push_back(i);
    }

    std::unordered_set<unsigned long long> tested;
    for (const auto& [key, edges] : grid) {
        (void)key;
        for (std::size_t ii = 0; ii < edges.size(); ++ii) {
            for (std::size_t jj = ii + 1; jj < edges.size(); ++jj) {
                std::size_t i = edges[ii], j = edges[jj];
                if (i > j) std::swap(i, j);
                if (j == i + 1 || (i == 0 && j == n - 1)) continue;  // adjacent share a vertex
                if (!tested.insert(static_cast<unsigned long long>(i) * n + j).second) continue;
                if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) return false;
            }
        }
    }
    return true;
}

}  // namespace planode
