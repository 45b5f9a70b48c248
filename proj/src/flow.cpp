#include "planode/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

namespace planode {

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct Hermite {
    double t0, h;
    Vec2 x0, x1, m0, m1;

    Vec2 value(double t) const {
        const double s = (t - t0) / h;
        const double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * x0 + (s3 - 2 * s2 + s) * h * m0 + (-2 * s3 + 3 * s2) * x1 +
               (s3 - s2) * h * m1;
    }
    Vec2 deriv(double t) const {
        const double s = (t - t0) / h;
        const double s2 = s * s;
        return (6 * s2 - 6 * s) / h * (x0 - x1) + (3 * s2 - 4 * s + 1) * m0 + (3 * s2 - 2 * s) * m1;
    }
    // certified bound on |x'(t)| over the interval
    double speed_bound() const {
        return 1.5 * (x1 - x0).norm() / h + m0.norm() + m1.norm();
    }
};

Hermite segment(const Knot& k0, const Knot& k1) {
    return Hermite{k0.t, k1.t - k0.t, k0.x, k1.x, k0.dx, k1.dx};
}

}  // namespace

std::size_t Trajectory::locate(double t) const {
    const double slack = 1e-9 * std::max(1.0, std::abs(t_end()));
    if (t < t_begin() - slack || t > t_end() + slack) {
        std::ostringstream os;
        os << "sample time " << t << " outside [" << t_begin() << ", " << t_end() << "]";
        throw std::invalid_argument(os.str());
    }
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                               [](double v, const Knot& k) { return v < k.t; });
    std::size_t i = static_cast<std::size_t>(it - knots_.begin());
    if (i == 0) return 0;
    if (i >= knots_.size()) return knots_.size() - 2;
    return i - 1;
}

Vec2 Trajectory::sample(double t) const {
    const std::size_t i = locate(t);
    return segment(knots_[i], knots_[i + 1]).value(t);
}

Vec2 Trajectory::derivative(double t) const {
    const std::size_t i = locate(t);
    return segment(knots_[i], knots_[i + 1]).deriv(t);
}

void Trajectory::run_to(double t_target) {
    const double rtol = tol_, atol = tol_;
    double t = knots_.back().t;
    Vec2 y = knots_.back().x;
    Vec2 k1 = knots_.back().dx;  // FSAL
    double h = h_next_;
    if (h <= 0.0) {
        h = 0.01 * (1.0 + y.norm()) / (1.0 + k1.norm());
    }

    while (t < t_target) {
        h = std::min(h, t_target - t);
        if (h < 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
            std::ostringstream os;
            os << "step-size underflow at t=" << t << ", x=(" << y.x() << ", " << y.y() << ")";
            throw FlowError(os.str());
        }

        const Vec2 k2 = field_(y + h * (a21 * k1));
        const Vec2 k3 = field_(y + h * (a31 * k1 + a32 * k2));
        const Vec2 k4 = field_(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vec2 k5 = field_(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vec2 k6 = field_(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        const Vec2 ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Vec2 k7 = field_(ynew);
        field_evals_ += 6;

        const Vec2 errv =
            h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double err = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            const double q = errv[i] / sc;
            err += q * q;
        }
        err = std::sqrt(0.5 * err);

        if (err > 1.0) {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            continue;
        }

        // midpoint defect of the cubic Hermite interpolant
        const Hermite H{t, h, y, ynew, k1, k7};
        const double tm = t + 0.5 * h;
        const Vec2 Hm = H.value(tm);
        const Vec2 fm = field_(Hm);
        ++field_evals_;
        const double defect =
            h * (H.deriv(tm) - fm).norm() / (10.0 * tol_ * (1.0 + Hm.norm()));
        if (defect > 1.0) {
            h *= std::clamp(0.9 * std::pow(defect, -0.25), 0.25, 0.9);
            continue;
        }

        t += h;
        y = ynew;
        k1 = k7;
        knots_.push_back({t, y, k1});
        ++accepted_steps_;

        const double fac_err = err > 1e-30 ? 0.9 * std::pow(err, -0.2) : 5.0;
        const double fac_def = defect > 1e-30 ? 0.9 * std::pow(defect, -0.25) : 5.0;
        h *= std::clamp(std::min(fac_err, fac_def), 0.2, 5.0);
    }
    h_next_ = h;
}

void Trajectory::extend_to(double t_new) {
    if (!(t_new > t_end()))
        throw std::invalid_argument("extend_to: t_new must exceed current t_end");
    run_to(t_new);
}

Trajectory integrate(const Field& f, const Vec2& x0, double t_end, double tol) {
    if (!(tol >= 1e-13 && tol <= 1e-3))
        throw std::invalid_argument("integrate: tol must lie in [1e-13, 1e-3]");
    if (!(t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be > 0");
    if (!x0.allFinite()) throw std::invalid_argument("integrate: non-finite x0");
    Trajectory traj(f, tol);
    traj.knots_.push_back({0.0, x0, f(x0)});
    ++traj.field_evals_;
    traj.run_to(t_end);
    return traj;
}

Trajectory Trajectory::from_knots(const Field& f, const std::vector<double>& t,
                                  const std::vector<Vec2>& x, double tol) {
    if (t.size() != x.size() || t.size() < 2)
        throw std::invalid_argument("from_knots: need >= 2 samples with matching lengths");
    Trajectory traj(f, tol);
    traj.knots_.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i > 0 && !(t[i] > t[i - 1]))
            throw std::invalid_argument("from_knots: times must be strictly increasing");
        traj.knots_.push_back({t[i], x[i], f(x[i])});
    }
    traj.field_evals_ += t.size();
    return traj;
}

namespace {

// Certified scan of g(t) = |x(t) - center| - r over one Hermite segment.
// Reports sign-change brackets and near-tangential (grazing) contacts.
struct CrossingSink {
    std::function<void(double, double)> bracket;  // [ta, tb] with sign change
    std::function<void(double)> graze;            // |g| dipped below band without crossing
};

void scan_segment(const Hermite& H, const Vec2& center, double r, double band, double ta,
                  double ga, double tb, double gb, const CrossingSink& sink, int depth) {
    if (ga == 0.0) ga = std::copysign(1e-300, gb == 0.0 ? 1.0 : -gb);
    if ((ga > 0.0) != (gb > 0.0)) {
        sink.bracket(ta, tb);
        return;
    }
    const double vb = H.speed_bound();
    const double w = tb - ta;
    // |g| is vb-Lipschitz on the segment
    if (ga > 0.0 && 0.5 * (ga + gb - vb * w) > 0.0) return;
    if (ga < 0.0 && 0.5 * (ga + gb + vb * w) < 0.0) return;
    const double floor_w = std::max(1e-13, 1e-12 * std::max(1.0, std::abs(tb)));
    if (w < floor_w || depth > 60) {
        if (std::min(std::abs(ga), std::abs(gb)) <= band) sink.graze(0.5 * (ta + tb));
        return;
    }
    const double tm = 0.5 * (ta + tb);
    const double gm = (H.value(tm) - center).norm() - r;
    scan_segment(H, center, r, band, ta, ga, tm, gm, sink, depth + 1);
    scan_segment(H, center, r, band, tm, gm, tb, gb, sink, depth + 1);
}

// Scan the knot intervals of traj clipped to [t_lo, t_hi].
void scan_range(const Trajectory& traj, const Circle& c, double t_lo, double t_hi, double band,
                const CrossingSink& sink) {
    const auto& ks = traj.knots();
    auto it = std::upper_bound(ks.begin(), ks.end(), t_lo,
                               [](double v, const Knot& k) { return v < k.t; });
    std::size_t first = it == ks.begin() ? 0 : static_cast<std::size_t>(it - ks.begin()) - 1;
    for (std::size_t i = first; i + 1 < ks.size(); ++i) {
        const Knot& k0 = ks[i];
        const Knot& k1 = ks[i + 1];
        if (k0.t >= t_hi) break;
        if (k1.t <= t_lo) continue;
        const double d0 = (k0.x - c.center).norm() - c.radius;
        const double d1 = (k1.x - c.center).norm() - c.radius;
        const double h = k1.t - k0.t;
        // knot-level prune using endpoint distances and the speed bound
        if ((d0 > 0.0) == (d1 > 0.0)) {
            const double vb = 1.5 * (k1.x - k0.x).norm() / h + k0.dx.norm() + k1.dx.norm();
            if (d0 > 0.0 && 0.5 * (d0 + d1 - vb * h) > band) continue;
            if (d0 < 0.0 && 0.5 * (d0 + d1 + vb * h) < -band) continue;
        }
        const Hermite H = segment(k0, k1);
        const double ta = std::max(t_lo, k0.t);
        const double tb = std::min(t_hi, k1.t);
        if (!(tb > ta)) continue;
        const double ga = (H.value(ta) - c.center).norm() - c.radius;
        const double gb = (H.value(tb) - c.center).norm() - c.radius;
        // eight base subintervals keep brackets well separated
        const int nsub = 8;
        double prev_t = ta, prev_g = ga;
        for (int j = 1; j <= nsub; ++j) {
            const double tj = j == nsub ? tb : ta + (tb - ta) * j / nsub;
            const double gj =
                j == nsub ? gb : (H.value(tj) - c.center).norm() - c.radius;
            scan_segment(H, c.center, c.radius, band, prev_t, prev_g, tj, gj, sink, 0);
            prev_t = tj;
            prev_g = gj;
        }
    }
}

double refine_crossing(const Trajectory& traj, const Circle& c, double ta, double tb) {
    auto g = [&](double t) { return (traj.sample(t) - c.center).norm() - c.radius; };
    double ga = g(ta), gb = g(tb);
    const double g_target = std::max(1e-11 * c.radius,
                                     8.0 * std::numeric_limits<double>::epsilon() *
                                         (c.center.norm() + c.radius + 1.0));
    for (int it = 0; it < 100; ++it) {
        double tm;
        if (std::abs(gb - ga) > 1e-300) {
            tm = tb - gb * (tb - ta) / (gb - ga);  // secant
            if (!(tm > ta && tm < tb)) tm = 0.5 * (ta + tb);
        } else {
            tm = 0.5 * (ta + tb);
        }
        const double gm = g(tm);
        if (std::abs(gm) <= g_target ||
            tb - ta < 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(tb))) {
            return tm;
        }
        if ((gm > 0.0) == (ga > 0.0)) {
            ta = tm;
            ga = gm;
        } else {
            tb = tm;
            gb = gm;
        }
    }
    return 0.5 * (ta + tb);
}

}  // namespace

double ResidenceIntervals::total_measure() const {
    double acc = 0.0;
    for (const auto& iv : intervals) acc += iv.t_exit - iv.t_enter;
    return acc;
}

std::optional<double> first_circle_hit(Trajectory& traj, const Circle& c, double t_after,
                                       double t_max) {
    if (!(t_max > t_after)) return std::nullopt;
    if (traj.t_end() < t_after) traj.extend_to(t_after);
    const double g0 = (traj.sample(t_after) - c.center).norm() - c.radius;
    if (std::abs(g0) <= 1e-12 * std::max(1.0, c.radius))
        throw std::invalid_argument("first_circle_hit: start point lies on the circle");
    // a contact is a meeting once it is within dense-output resolution
    const double band = 10.0 * traj.tol() * (1.0 + c.center.norm() + c.radius);

    double scanned = t_after;
    while (true) {
        const double hi = std::min(traj.t_end(), t_max);
        if (hi > scanned) {
            std::optional<std::pair<double, double>> found;
            bool stop = false;
            CrossingSink sink{
                [&](double ta, double tb) {
                    if (!stop) {
                        found = {ta, tb};
                        stop = true;
                    }
                },
                [&](double t) {
                    // tangential contact counts as a meeting
                    if (!stop) {
                        found = {t, t};
                        stop = true;
                    }
                }};
            // scan in chunks so an early hit short-circuits cheaply
            const auto& ks = traj.knots();
            double lo = scanned;
            while (lo < hi && !stop) {
                double chunk_hi = hi;
                auto it = std::upper_bound(ks.begin(), ks.end(), lo,
                                           [](double v, const Knot& k) { return v < k.t; });
                std::size_t idx = static_cast<std::size_t>(it - ks.begin());
                idx = std::min(idx + 256, ks.size() - 1);
                chunk_hi = std::min(hi, ks[idx].t);
                if (!(chunk_hi > lo)) chunk_hi = hi;
                scan_range(traj, c, lo, chunk_hi, band, sink);
                if (found) break;
                lo = chunk_hi;
            }
            if (found) {
                if (found->first == found->second) return found->first;
                return refine_crossing(traj, c, found->first, found->second);
            }
            scanned = hi;
        }
        if (scanned >= t_max) return std::nullopt;
        const double t_new = std::min(t_max, std::max(traj.t_end() + 1.0, 1.5 * traj.t_end()));
        traj.extend_to(t_new);
    }
}

ResidenceIntervals residence(const Trajectory& traj, const Circle& c, double t_lo, double t_hi) {
    if (!(t_hi <= traj.t_end() + 1e-9 * std::max(1.0, traj.t_end())))
        throw std::invalid_argument("residence: t_hi exceeds trajectory end");
    if (!(t_lo < t_hi)) throw std::invalid_argument("residence: need t_lo < t_hi");

    ResidenceIntervals out{c, {}, false, {}};
    std::vector<std::pair<double, double>> brackets;
    CrossingSink sink{[&](double ta, double tb) { brackets.emplace_back(ta, tb); },
                      [&](double t) {
                          out.grazing = true;
                          out.grazing_times.push_back(t);
                      }};
    // wider band: near-tangencies are flagged so callers can re-randomize r
    const double band = std::max(1e-7 * std::max(c.radius, 1e-6),
                                 10.0 * traj.tol() * (1.0 + c.center.norm() + c.radius));
    scan_range(traj, c, t_lo, t_hi, band, sink);

    std::vector<double> times;
    times.reserve(brackets.size());
    for (const auto& [ta, tb] : brackets) times.push_back(refine_crossing(traj, c, ta, tb));
    std::sort(times.begin(), times.end());

    bool inside = (traj.sample(t_lo) - c.center).norm() < c.radius;
    double start = t_lo;
    bool start_truncated = inside;
    for (double tc : times) {
        if (inside) {
            out.intervals.push_back({start, tc, start_truncated, false});
            inside = false;
        } else {
            start = tc;
            start_truncated = false;
            inside = true;
        }
    }
    if (inside) out.intervals.push_back({start, t_hi, start_truncated, true});
    return out;
}

ResidenceIntervals residence(const Trajectory& traj, const Circle& c, double t_hi) {
    return residence(traj, c, traj.t_begin(), t_hi);
}

std::optional<double> recurrence_probe(Trajectory& traj, const Vec2& y0, double delta, double s,
                                       double t_max) {
    if (!(delta > 0.0)) throw std::invalid_argument("recurrence_probe: delta must be > 0");
    if (traj.t_end() < s) traj.extend_to(s);
    if ((traj.sample(s) - y0).norm() < delta) return s;
    return first_circle_hit(traj, Circle(y0, delta), s, t_max);
}

void write_csv(const Trajectory& traj, std::ostream& os) {
    os << "t,x,y,fx,fy\n";
    char buf[160];
    for (const Knot& k : traj.knots()) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", k.t, k.x.x(), k.x.y(),
                      k.dx.x(), k.dx.y());
        os << buf;
    }
}

}  // namespace planode
