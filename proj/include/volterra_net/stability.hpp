#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "volterra_net/experiments.hpp"
#include "volterra_net/sve_solver.hpp"

namespace vnet {

/// Which ingredient of the SVE is shifted by a constant epsilon.
enum class PerturbationChannel { Drift, Diffusion, Kernel, G };

std::string_view to_string(PerturbationChannel channel);
PerturbationChannel parse_channel(std::string_view name);

struct PerturbationPlan {
    SveProblem base;
    InitialLaw law;
    PerturbationChannel channel;
    std::vector<double> epsilons;  // ascending; 0 allowed as a coupling check
    double p = 2.0;
    std::size_t n_mc = 10000;
    TimeGrid grid;

    void validate() const;
};

/// The one-dimensional OU benchmark with sqrt|x| replaced by (x^2 + delta^2)^(1/4).
SveProblem lipschitz_ou_surrogate(double delta = 0.05);
/// Drift-shift scan on the Lipschitz OU surrogate, p = 2, eps from 0.01 to 0.3.
PerturbationPlan default_stability_plan(PerturbationChannel channel = PerturbationChannel::Drift);

struct StabilityPoint {
    double epsilon;
    double abscissa;  // epsilon expressed in the norm of the perturbed ingredient
    double distance;  // max over nodes of the Monte-Carlo mean of |X_t - X~_t|^p
    double running_slope;  // fit over all points up to this one; NaN until 2 are available
};

struct StabilityResult {
    std::vector<StabilityPoint> points;
    double slope = 0.0;
    double slope_stderr = 0.0;  // batch-means over 10 Monte-Carlo sub-samples
    double intercept = 0.0;
    double constant = 0.0;  // mean of D / abscissa^p over the two smallest positive eps
    double xi_moment = 0.0;  // Monte-Carlo mean of |xi|^p over the coupled samples
};

StabilityResult stability_scan(const PerturbationPlan& plan, std::uint64_t seed);

/// Least-squares line through (x, y); returns {slope, intercept}.
std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y);

void write_stability_csv(const StabilityResult& result, const std::filesystem::path& file);

}  // namespace vnet
