// Projected gradient ascent with Armijo backtracking, shared by the antenna
// and power-allocation subproblems.

#pragma once

#include <Eigen/Dense>

#include <cmath>

namespace pinch {

struct AscentOptions {
  double initial_step = 1.0;
  double shrink = 0.5;
  double armijo_c = 1e-4;
  int max_halvings = 50;
  int max_steps = 200;
  double tolerance = 1e-6;
  // Next trial step after a step accepted without any halving.
  double growth = 2.0;
};

template <typename Point>
struct AscentResult {
  Point x;
  double value = 0.0;
  int steps = 0;
  bool converged = false;
};

inline double inner_product(double a, double b) { return a * b; }
inline double squared_norm(double a) { return a * a; }
inline double inner_product(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); }
inline double squared_norm(const Eigen::VectorXd& a) { return a.squaredNorm(); }

// Accepts x+ = P(x + t g) once f(x+) >= f(x) + c g.(x+ - x). Because g.(x+ - x)
// is non-negative for a projection onto a convex set, accepted steps never
// decrease f. Stops when an accepted step changes f by less than the
// tolerance, when no step length is acceptable, or after max_steps.
template <typename Point, typename Objective, typename Gradient, typename Projection>
AscentResult<Point> projected_gradient_ascent(Point x, Objective&& f, Gradient&& grad, Projection&& project,
                                              const AscentOptions& opt) {
  double fx = f(x);
  double trial = opt.initial_step;
  for (int steps = 0; steps < opt.max_steps; ++steps) {
    const Point g = grad(x);
    double step = trial;
    Point candidate = x;
    double fc = fx;
    bool accepted = false;
    int halvings = 0;
    for (; halvings <= opt.max_halvings; ++halvings) {
      candidate = project(Point(x + step * g));
      const Point d = candidate - x;
      if (squared_norm(d) == 0.0) break;
      fc = f(candidate);
      if (fc >= fx + opt.armijo_c * inner_product(g, d)) {
        accepted = true;
        break;
      }
      step *= opt.shrink;
    }
    if (!accepted) return {x, fx, steps, true};
    const double delta = fc - fx;
    x = candidate;
    fx = fc;
    trial = halvings == 0 ? step * opt.growth : step;
    if (std::abs(delta) < opt.tolerance) return {x, fx, steps + 1, true};
  }
  return {x, fx, opt.max_steps, false};
}

}  // namespace pinch
