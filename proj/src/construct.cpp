#include "planode/construct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace planode {

namespace {

double dist_to(const Trajectory& traj, const Vec2& ref, double t) {
    return (traj.sample(t) - ref).norm();
}

// Golden-section polish of an extremum of t -> |x(t) - ref| inside [lo, hi].
double refine_extremum(const Trajectory& traj, const Vec2& ref, double lo, double hi,
                       bool maximize) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = dist_to(traj, ref, c);
    double fd = dist_to(traj, ref, d);
    for (int it = 0; it < 80 && (b - a) > 1e-13 * std::max(1.0, std::abs(b)); ++it) {
        const bool pick_c = maximize ? (fc > fd) : (fc < fd);
        if (pick_c) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = dist_to(traj, ref, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = dist_to(traj, ref, d);
        }
    }
    return 0.5 * (a + b);
}

// Extremal |x(t) - ref| over [t_lo, t_hi]: knot states plus subsamples,
// then a local golden-section polish around the best bracket.
double extremal_distance(const Trajectory& traj, const Vec2& ref, double t_lo, double t_hi,
                         bool maximize) {
    const auto& ks = traj.knots();
    double best_t = t_lo;
    double best = dist_to(traj, ref, t_lo);
    auto update = [&](double t, double v) {
        if (maximize ? v > best : v < best) {
            best = v;
            best_t = t;
        }
    };
    update(t_hi, dist_to(traj, ref, t_hi));
    auto it = std::upper_bound(ks.begin(), ks.end(), t_lo,
                               [](double v, const Knot& k) { return v < k.t; });
    std::size_t first = it == ks.begin() ? 0 : static_cast<std::size_t>(it - ks.begin()) - 1;
    for (std::size_t i = first; i + 1 < ks.size() && ks[i].t < t_hi; ++i) {
        const double a = std::max(ks[i].t, t_lo);
        const double b = std::min(ks[i + 1].t, t_hi);
        if (!(b > a)) continue;
        for (int j = 0; j <= 4; ++j) {
            const double t = a + (b - a) * j / 4.0;
            update(t, dist_to(traj, ref, t));
        }
    }
    // polish inside the knot intervals bracketing the best sample
    auto bit = std::upper_bound(ks.begin(), ks.end(), best_t,
                                [](double v, const Knot& k) { return v < k.t; });
    std::size_t bi = bit == ks.begin() ? 0 : static_cast<std::size_t>(bit - ks.begin()) - 1;
    const double lo = std::max(t_lo, ks[bi > 0 ? bi - 1 : 0].t);
    const double hi = std::min(t_hi, ks[std::min(bi + 2, ks.size() - 1)].t);
    if (hi > lo) {
        const double t = refine_extremum(traj, ref, lo, hi, maximize);
        update(t, dist_to(traj, ref, t));
    }
    return best;
}

}  // namespace

std::string to_string(ConstructionStatus s) {
    switch (s) {
        case ConstructionStatus::Running: return "running";
        case ConstructionStatus::Periodic: return "periodic";
        case ConstructionStatus::BudgetExhausted: return "budget_exhausted";
        case ConstructionStatus::NotRecurrent: return "not_recurrent";
    }
    return "unknown";
}

std::optional<double> choose_D(const Trajectory& traj, double t_probe) {
    if (traj.t_end() < t_probe - 1e-9 * std::max(1.0, t_probe))
        throw std::invalid_argument("choose_D: trajectory not explored to t_probe");
    const Vec2 x0 = traj.knots().front().x;
    const double max_dist =
        extremal_distance(traj, x0, traj.t_begin(), std::min(t_probe, traj.t_end()), true);
    const double thr = std::max(1e-12, 100.0 * traj.tol() * (1.0 + x0.norm()));
    if (max_dist <= thr) return std::nullopt;  // singleton suspected
    return 0.9 * max_dist / 3.0;
}

double next_delta(const ConstructionTrace& trace, const Trajectory& traj) {
    if (trace.delta.empty() || trace.t_hit.empty())
        throw std::invalid_argument("next_delta: stage 0 (D, t_0) missing");
    const double prev = trace.delta.back();
    const double t0 = trace.t_hit.front();
    const double t_last = trace.t_hit.back();
    double min_dist = prev;
    if (t_last > t0) {
        min_dist = std::min(min_dist, extremal_distance(traj, trace.x0, t0, t_last, false));
    }
    // strict versions of both step constraints
    return 0.5 * (1.0 - 1e-9) * std::min(prev, min_dist);
}

PeriodicityResult detect_periodicity(const ConstructionTrace& trace, double eps_t, double eps_x) {
    if (trace.stages() < 2)
        throw std::invalid_argument("detect_periodicity: need at least 2 completed stages");
    PeriodicityResult out;
    const std::size_t k = trace.t_hit.size() - 1;  // last stage index
    auto ok = [&](std::size_t i) {
        return trace.t_hit[i] - trace.t_hit[i - 1] <= eps_t && trace.delta[i] <= eps_x;
    };
    if (!(ok(k) && ok(k - 1))) return out;
    const double dk = trace.delta[k], dk1 = trace.delta[k - 1];
    const double tk = trace.t_hit[k], tk1 = trace.t_hit[k - 1];
    out.periodic = true;
    out.t_star = (dk1 > dk) ? tk + dk * (tk - tk1) / (dk1 - dk) : tk;
    return out;
}

std::pair<std::vector<double>, std::vector<Vec2>> sample_arc(const Trajectory& traj, double t_lo,
                                                             double t_hi, double delta) {
    const Vec2 x0 = traj.knots().front().x;
    std::vector<double> times;

    const auto& ks = traj.knots();
    auto it = std::upper_bound(ks.begin(), ks.end(), t_lo,
                               [](double v, const Knot& k) { return v < k.t; });
    std::size_t first = it == ks.begin() ? 0 : static_cast<std::size_t>(it - ks.begin()) - 1;
    for (std::size_t i = first; i + 1 < ks.size() && ks[i].t < t_hi; ++i) {
        const double a = std::max(ks[i].t, t_lo);
        const double b = std::min(ks[i + 1].t, t_hi);
        if (!(b > a)) continue;
        const double h = ks[i + 1].t - ks[i].t;
        const int nsub = std::max(1, static_cast<int>(std::ceil((b - a) / (h / 8.0))));
        for (int j = 0; j < nsub; ++j) times.push_back(a + (b - a) * j / nsub);
    }
    times.push_back(t_hi);

    // refine to delta/4 spatial resolution where the arc nears x(0)
    const ResidenceIntervals near = residence(traj, Circle(x0, 4.0 * delta),
                                              std::max(t_lo, traj.t_begin()),
                                              std::min(t_hi, traj.t_end()));
    std::vector<double> fine;
    for (const auto& iv : near.intervals) {
        const double speed = std::max(1e-12, traj.derivative(0.5 * (iv.t_enter + iv.t_exit)).norm());
        const double dt = std::max(1e-13, (delta / 4.0) / speed);
        for (double t = iv.t_enter; t < iv.t_exit; t += dt) fine.push_back(t);
        fine.push_back(iv.t_exit);
    }
    times.insert(times.end(), fine.begin(), fine.end());
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end(),
                            [&](double a, double b) {
                                return b - a < 1e-14 * std::max(1.0, std::abs(b));
                            }),
                times.end());
    if (times.back() < t_hi) times.push_back(t_hi);

    std::vector<Vec2> pts;
    pts.reserve(times.size());
    std::vector<double> kept;
    kept.reserve(times.size());
    for (double t : times) {
        const Vec2 p = traj.sample(t);
        if (!pts.empty() && (p - pts.back()).squaredNorm() == 0.0) continue;
        pts.push_back(p);
        kept.push_back(t);
    }
    return {std::move(kept), std::move(pts)};
}

namespace {

// Refine the chord meeting time: root of the signed cross-distance of x(s)
// from the chord line a->b, bracketed near the polyline estimate.
double refine_meet(const Trajectory& traj, const Vec2& a, const Vec2& b, double s_lo, double s_hi,
                   double s_guess) {
    auto chi = [&](double s) {
        const Vec2 r = b - a;
        const Vec2 q = traj.sample(s) - a;
        return r.x() * q.y() - r.y() * q.x();
    };
    double lo = s_lo, hi = s_hi;
    double flo = chi(lo), fhi = chi(hi);
    if ((flo > 0.0) == (fhi > 0.0)) return s_guess;  // no clean bracket; keep estimate
    for (int i = 0; i < 80; ++i) {
        double mid;
        if (std::abs(fhi - flo) > 1e-300) {
            mid = hi - fhi * (hi - lo) / (fhi - flo);
            if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
        } else {
            mid = 0.5 * (lo + hi);
        }
        const double fm = chi(mid);
        if (std::abs(fm) <= 1e-14 * (1.0 + (b - a).squaredNorm()) ||
            hi - lo < 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(hi)))
            return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    return 0.5 * (lo + hi);
}

JordanCurve make_curve(const Trajectory& traj, double s_meet, double t_hit, double delta,
                       bool fallback) {
    auto [times, pts] = sample_arc(traj, s_meet, t_hit, delta);
    if (pts.size() < 3) throw ConstructError("curve sampling produced a degenerate polyline");
    JordanCurve c{s_meet, t_hit, std::move(times), ClosedPolyline(std::move(pts)),
                  Orientation::Counterclockwise, fallback};
    c.orient = orientation_of(c.polyline);
    return c;
}

}  // namespace

ConstructionResult run_construction(const Field& f, const Vec2& x0, int i_max, double budget) {
    ConstructionConfig cfg;
    cfg.i_max = i_max;
    cfg.budget = budget;
    return run_construction(f, x0, cfg);
}

ConstructionResult run_construction(const Field& f, const Vec2& x0,
                                    const ConstructionConfig& cfg) {
    if (cfg.i_max < 1) throw std::invalid_argument("run_construction: i_max must be >= 1");
    const double tol_eff =
        std::clamp(std::min(cfg.tol, 1e-4 * cfg.eps_x), 1e-13, 1e-3);

    ConstructionResult res{ConstructionTrace{}, integrate(f, x0, cfg.t_probe, tol_eff)};
    ConstructionTrace& trace = res.trace;
    Trajectory& traj = res.trajectory;
    trace.x0 = x0;

    const auto D = choose_D(traj, cfg.t_probe);
    if (!D) {
        trace.status = ConstructionStatus::NotRecurrent;
        trace.note = "singleton_suspected";
        return res;
    }
    trace.D = *D;
    trace.delta.push_back(*D);

    const auto t0 = first_circle_hit(traj, Circle(x0, *D), 0.0, cfg.t_max);
    if (!t0) {
        trace.status = ConstructionStatus::NotRecurrent;
        trace.note = "initial exit from B(x(0), D) not found before t_max";
        return res;
    }
    trace.t_hit.push_back(*t0);

    const double resolution = 1e3 * tol_eff * (1.0 + x0.norm());
    for (int i = 1; i <= cfg.i_max; ++i) {
        const double delta_i = next_delta(trace, traj);
        if (delta_i < resolution) {
            trace.status = ConstructionStatus::BudgetExhausted;
            trace.note = "delta below dense-output resolution";
            return res;
        }
        std::optional<double> t_i;
        try {
            t_i = first_circle_hit(traj, Circle(x0, delta_i), *t0, cfg.t_max);
        } catch (const FlowError& e) {
            trace.status = ConstructionStatus::NotRecurrent;
            trace.note = std::string("integration failed: ") + e.what();
            return res;
        }
        if (!t_i) {
            trace.status = ConstructionStatus::NotRecurrent;
            std::ostringstream os;
            os << "hitting-time timeout at stage " << i << " (delta=" << delta_i << ")";
            trace.note = os.str();
            return res;
        }

        // step 3: follow the chord from x(t_i) toward x(0) until first
        // meeting x([0, t_0])
        const Vec2 a = traj.sample(*t_i);
        const Vec2 b = x0;
        auto [path_times, path_pts] = sample_arc(traj, 0.0, *t0, delta_i);
        const auto meet = first_meet(a, b, path_pts);
        double s_i = 0.0;
        bool fallback = false;
        if (!meet) {
            // cannot happen: x(0) itself lies on the path; keep the safe exit
            fallback = true;
        } else {
            const std::size_t j = std::min(static_cast<std::size_t>(meet->path_param),
                                           path_times.size() - 2);
            const double u = meet->path_param - static_cast<double>(j);
            const double s_est = path_times[j] + u * (path_times[j + 1] - path_times[j]);
            if ((meet->point - x0).norm() <= 1e-9 * (1.0 + x0.norm())) {
                fallback = true;  // terminate the chord at x(0)
                s_i = 0.0;
            } else {
                const double lo = path_times[j > 0 ? j - 1 : 0];
                const double hi = path_times[std::min(j + 2, path_times.size() - 1)];
                s_i = refine_meet(traj, a, b, lo, hi, s_est);
                s_i = std::clamp(s_i, 0.0, *t0);
            }
        }

        JordanCurve curve = make_curve(traj, s_i, *t_i, delta_i, fallback);
        if (!is_simple(curve.polyline)) {
            std::ostringstream os;
            os << "stage " << i << " curve failed the simplicity sweep";
            throw ConstructError(os.str());
        }

        trace.delta.push_back(delta_i);
        trace.t_hit.push_back(*t_i);
        trace.s_meet.push_back(s_i);
        trace.curves.push_back(std::move(curve));

        if (trace.stages() >= 2) {
            const PeriodicityResult pr = detect_periodicity(trace, cfg.eps_t, cfg.eps_x);
            if (pr.periodic) {
                trace.status = ConstructionStatus::Periodic;
                trace.t_star = pr.t_star;
                return res;
            }
        }
        if (traj.t_end() > cfg.budget) {
            trace.status = ConstructionStatus::BudgetExhausted;
            trace.note = "integration budget exhausted";
            return res;
        }
    }
    trace.status = ConstructionStatus::BudgetExhausted;
    trace.note = "stage budget (i_max) exhausted";
    return res;
}

nlohmann::json trace_to_json(const ConstructionTrace& trace, const Field& field) {
    nlohmann::json j;
    j["schema"] = "planode-trace-v1";
    j["field"] = {{"signature", field.signature()}, {"hash", field.hash()}};
    j["x0"] = {trace.x0.x(), trace.x0.y()};
    j["D"] = trace.D;
    j["delta"] = trace.delta;
    j["t_hit"] = trace.t_hit;
    j["s_meet"] = trace.s_meet;
    j["status"] = to_string(trace.status);
    if (trace.status == ConstructionStatus::Periodic) j["t_star"] = trace.t_star;
    if (!trace.note.empty()) j["note"] = trace.note;
    j["curves"] = nlohmann::json::array();
    for (const JordanCurve& c : trace.curves) {
        nlohmann::json jc;
        jc["s_meet"] = c.s_meet;
        jc["t_hit"] = c.t_hit;
        jc["chord_fallback"] = c.chord_fallback;
        jc["orientation"] = c.orient == Orientation::Counterclockwise ? "ccw" : "cw";
        std::vector<double> xs, ys;
        xs.reserve(c.polyline.size());
        ys.reserve(c.polyline.size());
        for (const Vec2& p : c.polyline.vertices()) {
            xs.push_back(p.x());
            ys.push_back(p.y());
        }
        jc["t"] = c.times;
        jc["x"] = xs;
        jc["y"] = ys;
        j["curves"].push_back(std::move(jc));
    }
    return j;
}

ConstructionTrace trace_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("schema", "") != "planode-trace-v1")
        throw std::runtime_error("trace schema mismatch: expected planode-trace-v1");
    ConstructionTrace trace;
    try {
        const auto& x0 = j.at("x0");
        trace.x0 = Vec2(x0.at(0).get<double>(), x0.at(1).get<double>());
        trace.D = j.at("D").get<double>();
        trace.delta = j.at("delta").get<std::vector<double>>();
        trace.t_hit = j.at("t_hit").get<std::vector<double>>();
        trace.s_meet = j.at("s_meet").get<std::vector<double>>();
        const std::string st = j.at("status").get<std::string>();
        if (st == "periodic") {
            trace.status = ConstructionStatus::Periodic;
            trace.t_star = j.at("t_star").get<double>();
        } else if (st == "budget_exhausted") {
            trace.status = ConstructionStatus::BudgetExhausted;
        } else if (st == "not_recurrent") {
            trace.status = ConstructionStatus::NotRecurrent;
        } else if (st == "running") {
            trace.status = ConstructionStatus::Running;
        } else {
            throw std::runtime_error("unknown trace status '" + st + "'");
        }
        trace.note = j.value("note", "");
        for (const auto& jc : j.at("curves")) {
            auto times = jc.at("t").get<std::vector<double>>();
            const auto xs = jc.at("x").get<std::vector<double>>();
            const auto ys = jc.at("y").get<std::vector<double>>();
            if (xs.size() != ys.size() || xs.size() != times.size())
                throw std::runtime_error("curve arrays have mismatched lengths");
            std::vector<Vec2> pts;
            pts.reserve(xs.size());
            for (std::size_t i = 0; i < xs.size(); ++i) pts.emplace_back(xs[i], ys[i]);
            trace.curves.push_back(JordanCurve{
                jc.at("s_meet").get<double>(), jc.at("t_hit").get<double>(), std::move(times),
                ClosedPolyline(std::move(pts)),
                jc.at("orientation").get<std::string>() == "ccw" ? Orientation::Counterclockwise
                                                                 : Orientation::Clockwise,
                jc.at("chord_fallback").get<bool>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("trace schema error: ") + e.what());
    }
    return trace;
}

}  // namespace planode
