#pragma once

#include <variant>
#include <vector>

#include "riskfield/geometry.hpp"
#include "riskfield/population.hpp"

namespace riskfield {

/// Circular high-risk areas: shared radius, one circle per centre.
struct CircleSpec {
    std::vector<Point> centres;
    double radius = 0.0;
};

struct FlatSurface {
    double lambda0 = 0.0; // per-person risk over the study period
};

/// lambda0 * (1 + alpha * 1{inside any circle}), alpha = c - 1.
struct StepSurface {
    double lambda0 = 0.0;
    double alpha = 0.0;
    CircleSpec circles;
};

/// lambda0 + beta * max_l exp(-|s - x_l|^2 / (2 gamma^2)).
struct SmoothSurface {
    double lambda0 = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    CircleSpec circles;
};

using RiskSurface = std::variant<FlatSurface, StepSurface, SmoothSurface>;

enum class SurfaceShape { flat, step, smooth };

double step_risk_at(const StepSurface& surface, Point s);
double smooth_risk_at(const SmoothSurface& surface, Point s);
double flat_risk_at(const FlatSurface& surface, Point s);
double risk_at(const RiskSurface& surface, Point s);

/// Maximum risk the surface can attain (used for validity checks).
double max_risk(const RiskSurface& surface);

/// Gaussian length-scale such that a disc of radius r holds 80% of the mass
/// of an isotropic planar Gaussian over an infinite area. Solved by bisection
/// to 1e-10 residual.
double solve_gamma(double r);

/// Solves the surface parameters against a concrete population so that the
/// expected total case count equals k * n_ref, and (for the smooth shape) the
/// expected excess matches the step surface with the same (c, r).
RiskSurface solve_surface_parameters(const PopulationGrid& pop, const CircleSpec& circles,
                                     double c, double k, double n_ref,
                                     SurfaceShape shape);

/// Sum over populated cells of count * risk(centroid).
double expected_cases(const RiskSurface& surface, const PopulationGrid& pop);

} // namespace riskfield
