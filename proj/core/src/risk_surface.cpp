#include "riskfield/risk_surface.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace riskfield {

double step_risk_at(const StepSurface& surface, Point s) {
    for (const auto& x : surface.circles.centres) {
        if (distance(s, x) <= surface.circles.radius) {
            return surface.lambda0 * (1.0 + surface.alpha); // closed disc
        }
    }
    return surface.lambda0;
}

double smooth_risk_at(const SmoothSurface& surface, Point s) {
    double bump = 0.0;
    for (const auto& x : surface.circles.centres) {
        const double d = distance(s, x);
        bump = std::max(bump, std::exp(-d * d / (2.0 * surface.gamma * surface.gamma)));
    }
    return surface.lambda0 + surface.beta * bump;
}

double flat_risk_at(const FlatSurface& surface, Point) { return surface.lambda0; }

double risk_at(const RiskSurface& surface, Point s) {
    return std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, FlatSurface>) {
                return flat_risk_at(v, s);
            } else if constexpr (std::is_same_v<T, StepSurface>) {
                return step_risk_at(v, s);
            } else {
                return smooth_risk_at(v, s);
            }
        },
        surface);
}

double max_risk(const RiskSurface& surface) {
    if (const auto* f = std::get_if<FlatSurface>(&surface)) return f->lambda0;
    if (const auto* st = std::get_if<StepSurface>(&surface)) {
        return st->lambda0 * (1.0 + st->alpha);
    }
    const auto& sm = std::get<SmoothSurface>(surface);
    return sm.lambda0 + sm.beta;
}

double solve_gamma(double r) {
    if (r <= 0.0) throw ConfigError("solve_gamma: radius must be positive");
    // Mass of an isotropic Gaussian inside a disc of radius r is
    // 1 - exp(-r^2 / (2 gamma^2)); bisect on gamma for mass = 0.8.
    auto mass = [r](double gamma) { return 1.0 - std::exp(-r * r / (2.0 * gamma * gamma)); };
    double lo = 1e-6 * r, hi = 10.0 * r; // mass(lo) ~ 1, mass(hi) ~ 0; decreasing in gamma
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mass(mid) > 0.8) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (std::abs(mass(mid) - 0.8) < 1e-14) break;
    }
    return 0.5 * (lo + hi);
}

namespace {

void check_circles(const CircleSpec& circles, const Window& window) {
    if (circles.centres.empty()) throw ConfigError("surface: need at least one circle centre");
    if (circles.radius <= 0.0) throw ConfigError("surface: radius must be positive");
    for (const auto& x : circles.centres) {
        if (!window.contains(x)) throw ConfigError("surface: circle centre outside window");
    }
}

void check_valid_risk(const RiskSurface& surface, const PopulationGrid& pop) {
    // expected risk must stay below 1 at every populated cell
    for (int r = 0; r < pop.nrows; ++r) {
        for (int c = 0; c < pop.ncols; ++c) {
            if (pop.at(r, c) == 0) continue;
            if (risk_at(surface, pop.centroid(r, c)) >= 1.0) {
                throw ConfigError("surface: risk >= 1 at a populated cell");
            }
        }
    }
}

} // namespace

RiskSurface solve_surface_parameters(const PopulationGrid& pop, const CircleSpec& circles,
                                     double c, double k, double n_ref,
                                     SurfaceShape shape) {
    if (n_ref <= 0.0) throw ConfigError("surface: n_ref must be positive");
    if (k <= 0.0) throw ConfigError("surface: k must be positive");
    const double target = k * n_ref;
    if (pop.total <= 0) throw ConfigError("surface: population is empty");

    if (shape == SurfaceShape::flat) {
        FlatSurface flat{target / static_cast<double>(pop.total)};
        RiskSurface s = flat;
        check_valid_risk(s, pop);
        return s;
    }

    if (!(c > 1.0)) throw ConfigError("surface: risk ratio c must exceed 1");
    check_circles(circles, pop.window);

    // Step baseline: lambda0 * (P_out + c * P_in) = k * n_ref.
    double pop_in = 0.0;
    for (int r = 0; r < pop.nrows; ++r) {
        for (int cc = 0; cc < pop.ncols; ++cc) {
            const std::int64_t cnt = pop.at(r, cc);
            if (cnt == 0) continue;
            const Point p = pop.centroid(r, cc);
            for (const auto& x : circles.centres) {
                if (distance(p, x) <= circles.radius) {
                    pop_in += static_cast<double>(cnt);
                    break;
                }
            }
        }
    }
    const double pop_total = static_cast<double>(pop.total);
    const double lambda0_step = target / (pop_total + (c - 1.0) * pop_in);

    if (shape == SurfaceShape::step) {
        StepSurface step{lambda0_step, c - 1.0, circles};
        RiskSurface s = step;
        check_valid_risk(s, pop);
        return s;
    }

    // Smooth: gamma from the 80%-mass constraint, then beta so the expected
    // excess equals the step excess, then lambda0 so the total equals k*n_ref.
    const double gamma = solve_gamma(circles.radius);
    double bump_mass = 0.0; // sum over persons of max_l exp(-d^2 / 2 gamma^2)
    for (int r = 0; r < pop.nrows; ++r) {
        for (int cc = 0; cc < pop.ncols; ++cc) {
            const std::int64_t cnt = pop.at(r, cc);
            if (cnt == 0) continue;
            const Point p = pop.centroid(r, cc);
            double bump = 0.0;
            for (const auto& x : circles.centres) {
                const double d = distance(p, x);
                bump = std::max(bump, std::exp(-d * d / (2.0 * gamma * gamma)));
            }
            bump_mass += static_cast<double>(cnt) * bump;
        }
    }
    const double step_excess = (c - 1.0) * lambda0_step * pop_in;
    if (bump_mass <= 0.0) {
        throw ConfigError("surface: smooth bump mass vanishes on the populated cells");
    }
    const double beta = step_excess / bump_mass;
    const double lambda0_smooth = (target - beta * bump_mass) / pop_total;
    if (lambda0_smooth <= 0.0) {
        throw ConfigError("surface: smooth baseline is non-positive (excess exceeds total)");
    }
    SmoothSurface smooth{lambda0_smooth, beta, gamma, circles};
    RiskSurface s = smooth;
    check_valid_risk(s, pop);
    return s;
}

double expected_cases(const RiskSurface& surface, const PopulationGrid& pop) {
    double total = 0.0;
    for (int r = 0; r < pop.nrows; ++r) {
        for (int c = 0; c < pop.ncols; ++c) {
            const std::int64_t cnt = pop.at(r, c);
            if (cnt == 0) continue;
            total += static_cast<double>(cnt) * risk_at(surface, pop.centroid(r, c));
        }
    }
    return total;
}

} // namespace riskfield
