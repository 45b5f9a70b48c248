#pragma once

#include "planode/flow.hpp"
#include "planode/geom.hpp"

#include <json.hpp>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace planode {

class ConstructError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Trajectory arc over [s_meet, t_hit] closed by the chord from x(t_hit) back
// to x(s_meet). Vertices are dense samples of the arc; the implicit closing
// edge of the polyline is the chord.
struct JordanCurve {
    double s_meet = 0.0;
    double t_hit = 0.0;
    std::vector<double> times;  // sample times; front()==s_meet, back()==t_hit
    ClosedPolyline polyline;
    Orientation orient = Orientation::Counterclockwise;
    bool chord_fallback = false;  // chord terminated at x(0)

    Vec2 chord_from() const { return polyline.vertices().back(); }
    Vec2 chord_to() const { return polyline.vertices().front(); }
};

enum class ConstructionStatus { Running, Periodic, BudgetExhausted, NotRecurrent };

std::string to_string(ConstructionStatus s);

struct ConstructionTrace {
    Vec2 x0 = Vec2::Zero();
    double D = 0.0;
    std::vector<double> delta;   // delta_0 .. delta_k (delta_0 == D)
    std::vector<double> t_hit;   // t_0 .. t_k
    std::vector<double> s_meet;  // s_1 .. s_k
    std::vector<JordanCurve> curves;
    ConstructionStatus status = ConstructionStatus::Running;
    double t_star = std::numeric_limits<double>::quiet_NaN();
    std::string note;

    int stages() const { return static_cast<int>(curves.size()); }
};

struct ConstructionConfig {
    int i_max = 8;
    double budget = 1e4;   // max total integrated time units
    double t_max = 1e4;    // cap for each hitting-time search
    double t_probe = 50.0;
    double eps_t = 1e-4;
    double eps_x = 1e-7;
    double tol = 1e-10;    // integrator tolerance (tightened to resolve eps_x)
};

// D = 0.9 * (max_{t<=t_probe} |x(t) - x(0)|) / 3. Returns nullopt when the
// observed set looks like a singleton.
std::optional<double> choose_D(const Trajectory& traj, double t_probe);

// delta_i = (1/2) * min(delta_{i-1}, min_{[t_0, t_{i-1}]} |x(t) - x(0)|),
// shrunk by a hair so the strict inequalities hold.
double next_delta(const ConstructionTrace& trace, const Trajectory& traj);

struct ConstructionResult {
    ConstructionTrace trace;
    Trajectory trajectory;
};

ConstructionResult run_construction(const Field& f, const Vec2& x0, const ConstructionConfig& cfg);
ConstructionResult run_construction(const Field& f, const Vec2& x0, int i_max, double budget);

struct PeriodicityResult {
    bool periodic = false;
    double t_star = std::numeric_limits<double>::quiet_NaN();
};

// Periodic when t_i - t_{i-1} <= eps_t and |x(t_i) - x(0)| <= eps_x for two
// consecutive stages; t_star extrapolated by one secant step of the distance.
PeriodicityResult detect_periodicity(const ConstructionTrace& trace, double eps_t, double eps_x);

// Dense samples of x([t_lo, t_hi]); spacing <= local step / 8, refined to
// delta/4 resolution where the arc comes within a few delta of x(0).
std::pair<std::vector<double>, std::vector<Vec2>> sample_arc(const Trajectory& traj, double t_lo,
                                                             double t_hi, double delta);

nlohmann::json trace_to_json(const ConstructionTrace& trace, const Field& field);
ConstructionTrace trace_from_json(const nlohmann::json& j);

}  // namespace planode
