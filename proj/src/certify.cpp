#include "planode/certify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace planode {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

std::string fmt_vec(const Vec2& v) {
    std::ostringstream os;
    os << "(" << v.x() << ", " << v.y() << ")";
    return os.str();
}

}  // namespace

BallWindow make_window(const Circle& c, const Vec2& x0, double D) {
    return BallWindow{c, (c.center - x0).norm() > 2.0 * D && c.radius < D};
}

std::string to_string(CertificateReport::Kind k) {
    switch (k) {
        case CertificateReport::Kind::NormalIntegral: return "normal_integral";
        case CertificateReport::Kind::CrossingFiniteness: return "crossing_finiteness";
        case CertificateReport::Kind::FluxBound: return "flux_bound";
        case CertificateReport::Kind::DivergenceCrosscheck: return "divergence_crosscheck";
        case CertificateReport::Kind::Equilibrium: return "equilibrium";
        case CertificateReport::Kind::Classification: return "classification";
    }
    return "unknown";
}

nlohmann::json report_to_json(const CertificateReport& r) {
    nlohmann::json j;
    j["kind"] = to_string(r.kind);
    j["pass"] = r.pass;
    j["measured"] = r.measured;
    j["tolerance"] = r.tolerance;
    j["context"] = r.context;
    return j;
}

Vec2 flux_integral(const Trajectory& traj, const BallWindow& w, double t_lo, double t_hi) {
    const ResidenceIntervals res = residence(traj, w.circle, t_lo, t_hi);
    if (res.grazing)
        throw GrazingError("flux_integral: grazing contact, re-randomize the window radius");
    Vec2 acc = Vec2::Zero();
    for (const auto& iv : res.intervals)
        acc += traj.sample(iv.t_exit) - traj.sample(iv.t_enter);
    return acc;
}

Vec2 flux_integral(const Trajectory& traj, const BallWindow& w, double t_hi) {
    return flux_integral(traj, w, traj.t_begin(), t_hi);
}

CertificateReport flux_bound_certificate(const ConstructionTrace& trace, const Trajectory& traj,
                                         const BallWindow& w) {
    if (!w.separation_ok)
        throw std::invalid_argument("flux_bound_certificate: window violates separation");
    if (trace.stages() < 1)
        throw std::invalid_argument("flux_bound_certificate: trace has no completed stage");

    const double r0 = w.circle.radius;
    const double t_last = trace.t_hit.back();
    const ResidenceIntervals res = residence(traj, w.circle, traj.t_begin(), t_last);
    if (res.grazing)
        throw GrazingError("flux_bound_certificate: grazing contact on the window boundary");

    // displacement and root-refinement error budget per interval
    std::vector<Vec2> disp;
    double budget = 0.0;
    for (const auto& iv : res.intervals) {
        disp.push_back(traj.sample(iv.t_exit) - traj.sample(iv.t_enter));
        budget += 2.0e-11 * r0 * 2.0;
    }
    const double tol = 1e-6 + budget;
    const double bound = kTwoPi * r0;

    CertificateReport rep;
    rep.kind = CertificateReport::Kind::FluxBound;
    rep.tolerance = tol;
    rep.pass = true;
    nlohmann::json stages = nlohmann::json::array();
    double worst = 0.0;
    int worst_stage = 0;
    for (std::size_t i = 1; i < trace.t_hit.size(); ++i) {
        const double ti = trace.t_hit[i];
        Vec2 acc = Vec2::Zero();
        for (std::size_t k = 0; k < res.intervals.size(); ++k) {
            if (res.intervals[k].t_exit <= ti) acc += disp[k];
        }
        const double fnorm = acc.norm();
        stages.push_back({{"stage", i}, {"flux_norm", fnorm}});
        if (fnorm > worst) {
            worst = fnorm;
            worst_stage = static_cast<int>(i);
        }
        if (fnorm > bound + tol) rep.pass = false;
    }
    rep.measured["max_flux_norm"] = worst;
    rep.measured["bound"] = bound;
    rep.measured["worst_stage"] = worst_stage;
    rep.context["stages"] = stages;
    rep.context["window"] = {{"center", {w.circle.center.x(), w.circle.center.y()}},
                             {"radius", r0}};
    rep.context["stage_count"] = trace.stages();
    return rep;
}

CertificateReport divergence_crosscheck(const JordanCurve& curve, const BallWindow& w,
                                        const Trajectory& traj) {
    if (!w.separation_ok)
        throw std::invalid_argument("divergence_crosscheck: window violates separation");
    const Circle& c = w.circle;
    const double r0 = c.radius;

    // trajectory side: rotated displacement sums over in-window pieces
    const ResidenceIntervals res = residence(traj, c, curve.s_meet, curve.t_hit);
    if (res.grazing)
        throw GrazingError("divergence_crosscheck: grazing contact on the window boundary");
    Vec2 disp = Vec2::Zero();
    for (const auto& iv : res.intervals) {
        if (iv.truncated_start || iv.truncated_end)
            throw std::invalid_argument(
                "divergence_crosscheck: curve endpoints inside the window (separation broken)");
        disp += traj.sample(iv.t_exit) - traj.sample(iv.t_enter);
    }
    const Orientation rot = curve.orient == Orientation::Counterclockwise
                                ? Orientation::Clockwise
                                : Orientation::Counterclockwise;
    const Vec2 lhs = rotate_quarter(disp, rot);

    // arc side: closed-form normal integrals over the circle arcs interior
    // to the curve, arcs classified by their midpoints
    const auto& verts = curve.polyline.vertices();
    const std::size_t n = verts.size();
    std::vector<double> angles;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = verts[i];
        const Vec2& b = verts[(i + 1) % n];
        const CircleHits hits = segment_circle_hits(a, b, c);
        if (hits.tangent && !hits.params.empty())
            throw AmbiguousArcError("divergence_crosscheck: polyline edge tangent to the window");
        for (double t : hits.params) {
            const Vec2 p = a + t * (b - a) - c.center;
            angles.push_back(std::atan2(p.y(), p.x()));
        }
    }
    std::sort(angles.begin(), angles.end());
    angles.erase(std::unique(angles.begin(), angles.end(),
                             [](double a, double b) { return b - a < 1e-12; }),
                 angles.end());
    if (angles.size() >= 2 &&
        (angles.back() - angles.front()) > kTwoPi - 1e-12)
        angles.pop_back();

    auto classify_angle = [&](double th) {
        const Vec2 p = c.center + r0 * Vec2(std::cos(th), std::sin(th));
        return point_in_region(curve.polyline, p);
    };

    Vec2 arc_side = Vec2::Zero();
    if (angles.empty()) {
        const Region rg = classify_angle(0.0);
        if (rg == Region::Boundary)
            throw AmbiguousArcError("divergence_crosscheck: window boundary hugs the curve");
        // interior or exterior full circle integrates to zero either way
    } else {
        for (std::size_t i = 0; i < angles.size(); ++i) {
            const double th1 = angles[i];
            const double th2 = i + 1 < angles.size() ? angles[i + 1] : angles.front() + kTwoPi;
            if (th2 - th1 < 1e-12) continue;
            const Region rg = classify_angle(0.5 * (th1 + th2));
            if (rg == Region::Boundary)
                throw AmbiguousArcError(
                    "divergence_crosscheck: ambiguous arc classification, need finer sampling");
            if (rg == Region::Inside) arc_side += arc_normal_integral(c, th1, th2);
        }
    }

    // Lemma-zero-int identity on (curve interior) intersect (window):
    // trajectory side plus radial arc side must cancel.
    const Vec2 rhs = -arc_side;
    const double mismatch = (lhs - rhs).norm();
    const double tol = 1e-5 * (1.0 + r0);

    CertificateReport rep;
    rep.kind = CertificateReport::Kind::DivergenceCrosscheck;
    rep.pass = mismatch <= tol;
    rep.tolerance = tol;
    rep.measured["lhs_x"] = lhs.x();
    rep.measured["lhs_y"] = lhs.y();
    rep.measured["rhs_x"] = rhs.x();
    rep.measured["rhs_y"] = rhs.y();
    rep.measured["mismatch"] = mismatch;
    rep.measured["arc_count"] = static_cast<double>(angles.size());
    rep.context["window"] = {{"center", {c.center.x(), c.center.y()}}, {"radius", r0}};
    rep.context["curve_span"] = {curve.s_meet, curve.t_hit};
    return rep;
}

CrossingCount crossing_finiteness(const Trajectory& traj, const Vec2& y0, double r0, double t_hi,
                                  int retries, std::mt19937_64& rng) {
    if (!(r0 > 0.0)) throw std::invalid_argument("crossing_finiteness: r0 must be > 0");
    double r = r0;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        const ResidenceIntervals res = residence(traj, Circle(y0, r), traj.t_begin(), t_hi);
        if (!res.grazing) {
            int count = 0;
            for (const auto& iv : res.intervals)
                count += 2 - (iv.truncated_start ? 1 : 0) - (iv.truncated_end ? 1 : 0);
            return CrossingCount{count, r, attempt};
        }
        std::uniform_real_distribution<double> u(-0.05, 0.05);
        r = r0 * (1.0 + u(rng));
    }
    throw GrazingError("crossing_finiteness: retries exhausted (pathological window)");
}

CertificateReport equilibrium_certificate(const Field& f, const Vec2& y0,
                                          const std::vector<double>& radii) {
    if (radii.empty()) throw std::invalid_argument("equilibrium_certificate: radii empty");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] > 0.0))
            throw std::invalid_argument("equilibrium_certificate: radii must be positive");
        if (i > 0 && !(radii[i] < radii[i - 1]))
            throw std::invalid_argument("equilibrium_certificate: radii must strictly decrease");
    }

    constexpr int kDiskSamples = 256;
    constexpr int kRingSamples = 32;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));

    CertificateReport rep;
    rep.kind = CertificateReport::Kind::Equilibrium;
    rep.tolerance = 0.1;  // relative slack on the min|f| ratio trend

    bool contain_all = true;
    std::vector<double> mins;
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        const double r = radii[ri];
        std::vector<Vec2> samples;
        samples.reserve(kDiskSamples + kRingSamples);
        for (int k = 0; k < kDiskSamples; ++k) {
            const double rad = r * std::sqrt((k + 0.5) / kDiskSamples);
            const double th = k * golden;
            samples.push_back(y0 + rad * Vec2(std::cos(th), std::sin(th)));
        }
        for (int k = 0; k < kRingSamples; ++k) {
            const double th = kTwoPi * k / kRingSamples;
            samples.push_back(y0 + r * Vec2(std::cos(th), std::sin(th)));
        }

        double min_f = std::numeric_limits<double>::infinity();
        std::vector<double> angles;
        angles.reserve(samples.size());
        bool exact_zero = false;
        for (const Vec2& p : samples) {
            const Vec2 v = f(p);
            const double nv = v.norm();
            min_f = std::min(min_f, nv);
            if (nv == 0.0) {
                exact_zero = true;
                continue;
            }
            angles.push_back(std::atan2(v.y(), v.x()));
        }
        bool contained = exact_zero;
        if (!contained && !angles.empty()) {
            std::sort(angles.begin(), angles.end());
            double max_gap = angles.front() + kTwoPi - angles.back();
            for (std::size_t k = 1; k < angles.size(); ++k)
                max_gap = std::max(max_gap, angles[k] - angles[k - 1]);
            contained = max_gap < M_PI;
        }
        contain_all = contain_all && contained;
        mins.push_back(min_f);
        rep.measured["contained_r" + std::to_string(ri)] = contained ? 1.0 : 0.0;
        rep.measured["min_f_r" + std::to_string(ri)] = min_f;
    }

    bool trend_ok = true;
    for (std::size_t i = 1; i < radii.size(); ++i) {
        const double rr = radii[i] / radii[i - 1];
        if (mins[i] <= 1e-12 && mins[i - 1] <= 1e-12) continue;  // already at a zero
        if (mins[i - 1] <= 0.0) {
            trend_ok = false;
            continue;
        }
        const double mr = mins[i] / mins[i - 1];
        rep.measured["min_ratio_" + std::to_string(i)] = mr;
        if (std::abs(mr - rr) > 0.1 * rr) trend_ok = false;
    }

    rep.pass = contain_all && trend_ok;
    rep.measured["containment_all"] = contain_all ? 1.0 : 0.0;
    rep.measured["trend_ok"] = trend_ok ? 1.0 : 0.0;
    rep.context["y0"] = {y0.x(), y0.y()};
    rep.context["radii"] = radii;
    return rep;
}

std::string to_string(Classification::Kind k) {
    switch (k) {
        case Classification::Kind::Equilibrium: return "equilibrium";
        case Classification::Kind::PeriodicOrbit: return "periodic_orbit";
        case Classification::Kind::Undecided: return "undecided";
    }
    return "unknown";
}

ClassifyResult classify(const Field& f, const Vec2& x0, const ClassifyConfig& cfg) {
    ClassifyResult out;

    // (a) direct equilibrium at the start point
    if (f(x0).norm() <= cfg.tol_eq) {
        out.classification.kind = Classification::Kind::Equilibrium;
        out.classification.equilibrium_point = x0;
        out.classification.path = "a";
        out.seed_point = x0;
        return out;
    }

    // (b) seed onto the candidate minimal set, then run the construction
    const double tol = std::clamp(cfg.construction.tol, 1e-13, 1e-3);
    Trajectory pre = integrate(f, x0, cfg.t_pre, tol);
    out.seed_point = pre.knots().back().x;

    ConstructionResult cres = run_construction(f, out.seed_point, cfg.construction);
    out.trace = std::move(cres.trace);

    if (out.trace.status == ConstructionStatus::Periodic) {
        out.classification.kind = Classification::Kind::PeriodicOrbit;
        out.classification.period = out.trace.t_star;
        out.classification.path = "b";
        out.trajectory = std::move(cres.trajectory);
        return out;
    }

    if (out.trace.status == ConstructionStatus::NotRecurrent) {
        // (c) equilibrium certificate at the field minimizer along the tail
        const Trajectory& traj = cres.trajectory;
        const auto& ks = traj.knots();
        const double span = traj.t_end() - traj.t_begin();
        const double tail_lo = traj.t_end() - std::max(0.25 * span, std::min(span, 10.0));
        Vec2 y_min = ks.back().x;
        double best = ks.back().dx.norm();
        for (const Knot& k : ks) {
            if (k.t < tail_lo) continue;
            const double v = k.dx.norm();
            if (v < best) {
                best = v;
                y_min = k.x;
            }
        }
        out.equilibrium_report = equilibrium_certificate(f, y_min, cfg.eq_radii);
        out.trajectory = std::move(cres.trajectory);
        if (out.equilibrium_report->pass) {
            out.classification.kind = Classification::Kind::Equilibrium;
            out.classification.equilibrium_point = y_min;
            out.classification.path = "c";
            out.classification.diagnostics = out.trace.note;
        } else {
            out.classification.kind = Classification::Kind::Undecided;
            out.classification.path = "c";
            out.classification.diagnostics =
                "not recurrent (" + out.trace.note + ") and the convex-hull certificate failed at " +
                fmt_vec(y_min);
        }
        return out;
    }

    // (d) budget exhausted without a verdict
    out.classification.kind = Classification::Kind::Undecided;
    out.classification.path = "d";
    out.classification.diagnostics = "construction stopped: " + out.trace.note;
    out.trajectory = std::move(cres.trajectory);
    return out;
}

}  // namespace planode
