#pragma once

#include "planode/construct.hpp"
#include "planode/field.hpp"
#include "planode/flow.hpp"
#include "planode/geom.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace planode {

// Residence scan met a near-tangential contact; the caller should
// re-randomize the window radius and retry.
class GrazingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An arc midpoint fell inside the polyline boundary band; classification
// refused, finer sampling required.
class AmbiguousArcError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The ball B(y0, r0) of the certificate argument. Separation holds when
// |y0 - x(0)| > 2D and r0 < D, which keeps every construction chord out of
// the window.
struct BallWindow {
    Circle circle;
    bool separation_ok = false;
};

BallWindow make_window(const Circle& c, const Vec2& x0, double D);

struct CertificateReport {
    enum class Kind {
        NormalIntegral,
        CrossingFiniteness,
        FluxBound,
        DivergenceCrosscheck,
        Equilibrium,
        Classification
    };
    Kind kind;
    bool pass = false;
    std::map<std::string, double> measured;
    double tolerance = 0.0;
    nlohmann::json context;
};

std::string to_string(CertificateReport::Kind k);
nlohmann::json report_to_json(const CertificateReport& r);

// Sum over residence intervals of x(t_exit) - x(t_enter): the field integral
// over {t in [t_lo, t_hi] : x(t) in B} by the fundamental theorem, with no
// quadrature error. Truncated intervals use the truncation endpoint state.
Vec2 flux_integral(const Trajectory& traj, const BallWindow& w, double t_lo, double t_hi);
Vec2 flux_integral(const Trajectory& traj, const BallWindow& w, double t_hi);

// For every completed stage i, |flux up to t_i| <= 2*pi*r0 + tol.
CertificateReport flux_bound_certificate(const ConstructionTrace& trace, const Trajectory& traj,
                                         const BallWindow& w);

// Two independent evaluations of the same boundary integral over the curve
// interior intersected with the window: trajectory-side rotated displacement
// sums against closed-form arc integrals of the window circle.
CertificateReport divergence_crosscheck(const JordanCurve& curve, const BallWindow& w,
                                        const Trajectory& traj);

struct CrossingCount {
    int count = 0;
    double radius = 0.0;
    int retries_used = 0;
};

// Count root-isolated crossings of |x(t) - y0| = r0 on [0, t_hi]; grazing
// contacts perturb r0 by a seeded uniform draw in +-5% and retry.
CrossingCount crossing_finiteness(const Trajectory& traj, const Vec2& y0, double r0, double t_hi,
                                  int retries, std::mt19937_64& rng);

// Samples the field on a deterministic low-discrepancy subset of each closed
// ball and tests whether 0 lies in the convex hull of the sampled vectors
// (angular span), plus the decreasing-radius trend of min |f|.
CertificateReport equilibrium_certificate(const Field& f, const Vec2& y0,
                                          const std::vector<double>& radii);

struct ClassifyConfig {
    ConstructionConfig construction;
    double tol_eq = 1e-9;
    double t_pre = 50.0;
    std::vector<double> eq_radii = {0.1, 0.05, 0.025};
};

struct Classification {
    enum class Kind { Equilibrium, PeriodicOrbit, Undecided };
    Kind kind = Kind::Undecided;
    Vec2 equilibrium_point = Vec2::Zero();
    double period = std::numeric_limits<double>::quiet_NaN();
    std::string path;  // pipeline branch that decided: "a", "b", "c", or "d"
    std::string diagnostics;
};

std::string to_string(Classification::Kind k);

struct ClassifyResult {
    Classification classification;
    ConstructionTrace trace;
    std::optional<Trajectory> trajectory;  // seeded trajectory driving the trace
    Vec2 seed_point = Vec2::Zero();
    std::optional<CertificateReport> equilibrium_report;
};

// (a) direct equilibrium test at x0; (b) transient seeding plus the
// shrinking-ball construction; (c) convex-hull certificate at the field
// minimizer along the tail when not recurrent; (d) undecided otherwise.
ClassifyResult classify(const Field& f, const Vec2& x0, const ClassifyConfig& cfg);

}  // namespace planode
