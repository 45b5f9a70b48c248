#pragma once

#include "planode/field.hpp"
#include "planode/geom.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace planode {

class FlowError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Knot {
    double t;
    Vec2 x;
    Vec2 dx;  // = field(x)
};

// Numerical solution with cubic Hermite dense output between accepted steps.
// Append-only: extension never touches existing knots, so concurrent reads
// stay valid while one writer extends.
class Trajectory {
public:
    const Field& field() const { return field_; }
    double tol() const { return tol_; }
    double t_begin() const { return knots_.front().t; }
    double t_end() const { return knots_.back().t; }
    const std::vector<Knot>& knots() const { return knots_; }

    Vec2 sample(double t) const;
    Vec2 derivative(double t) const;

    // Continue integration to t_new > t_end() at the same tolerance.
    void extend_to(double t_new);

    std::uint64_t field_evals() const { return field_evals_; }
    std::uint64_t accepted_steps() const { return accepted_steps_; }

    // Rebuild a trajectory from stored samples; knot derivatives are
    // recomputed from the field. Times must be strictly increasing.
    static Trajectory from_knots(const Field& f, const std::vector<double>& t,
                                 const std::vector<Vec2>& x, double tol);

    friend Trajectory integrate(const Field& f, const Vec2& x0, double t_end, double tol);

private:
    Trajectory(Field f, double tol) : field_(std::move(f)), tol_(tol) {}
    void run_to(double t_target);
    std::size_t locate(double t) const;

    Field field_;
    double tol_;
    std::vector<Knot> knots_;
    double h_next_ = 0.0;
    std::uint64_t field_evals_ = 0;
    std::uint64_t accepted_steps_ = 0;
};

// Adaptive Dormand-Prince 5(4) with local error per step <= tol and a
// midpoint defect check on the dense output (h*defect <= 10*tol*scale).
// tol must lie in [1e-13, 1e-3].
Trajectory integrate(const Field& f, const Vec2& x0, double t_end, double tol);

inline void extend(Trajectory& traj, double t_new) { traj.extend_to(t_new); }

struct ResidenceInterval {
    double t_enter;
    double t_exit;
    bool truncated_start = false;
    bool truncated_end = false;
};

struct ResidenceIntervals {
    Circle window;
    std::vector<ResidenceInterval> intervals;
    bool grazing = false;               // near-tangential contact detected
    std::vector<double> grazing_times;  // where |dist - r| dipped below the band

    double total_measure() const;
};

// First t > t_after with |x(t) - c.center| = c.radius, or nullopt if none
// before t_max. Auto-extends the trajectory. x(t_after) must be strictly
// off the circle.
std::optional<double> first_circle_hit(Trajectory& traj, const Circle& c, double t_after,
                                       double t_max);

// All maximal intervals of {t in [t_lo, t_hi] : x(t) inside c}, endpoint
// times root-refined. Requires t_hi <= traj.t_end().
ResidenceIntervals residence(const Trajectory& traj, const Circle& c, double t_lo, double t_hi);
ResidenceIntervals residence(const Trajectory& traj, const Circle& c, double t_hi);

// First t > s with |x(t) - y0| < delta (entry time root-refined; returns s
// itself when already inside), or nullopt before t_max. Auto-extends.
std::optional<double> recurrence_probe(Trajectory& traj, const Vec2& y0, double delta, double s,
                                       double t_max);

// CSV dump: header t,x,y,fx,fy, one row per knot, 17 significant digits.
void write_csv(const Trajectory& traj, std::ostream& os);

}  // namespace planode
