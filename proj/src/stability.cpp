#include "volterra_net/stability.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "volterra_net/errors.hpp"
#include "volterra_net/parallel.hpp"

namespace vnet {

namespace {

constexpr std::uint64_t kXiChannel = 1;
constexpr std::uint64_t kNoiseChannel = 2;
constexpr std::size_t kBatches = 10;
constexpr std::size_t kChunk = 128;

SveProblem perturbed(const SveProblem& base, PerturbationChannel channel, double eps) {
    SveProblem out = base;
    switch (channel) {
        case PerturbationChannel::Drift: out.mu = base.mu.shifted(eps); break;
        case PerturbationChannel::Diffusion: out.sigma = base.sigma.shifted(eps); break;
        case PerturbationChannel::Kernel:
            out.k_mu = base.k_mu.shifted(eps);
            out.k_sigma = base.k_sigma.shifted(eps);
            break;
        case PerturbationChannel::G: out.g = base.g.shifted(eps); break;
    }
    return out;
}

double abscissa(const PerturbationPlan& plan, double eps) {
    if (plan.channel != PerturbationChannel::Kernel) return eps;
    // A constant shift has L^{2q~} norm eps * T^{1/(2q~)} with 1/q~ = 1 - 2/p.
    return eps * std::pow(plan.grid.horizon(), (1.0 - 2.0 / plan.p) / 2.0);
}

double norm_pow(std::span<const double> a, std::span<const double> b, double p) {
    double sq = 0.0;
    for (std::size_t r = 0; r < a.size(); ++r) sq += (a[r] - b[r]) * (a[r] - b[r]);
    return std::pow(std::sqrt(sq), p);
}

struct Chunk {
    std::size_t batch;
    std::size_t begin;
    std::size_t end;
};

std::vector<Chunk> make_chunks(std::size_t n) {
    std::vector<Chunk> chunks;
    for (std::size_t b = 0; b < kBatches; ++b) {
        const std::size_t lo = b * n / kBatches;
        const std::size_t hi = (b + 1) * n / kBatches;
        for (std::size_t s = lo; s < hi; s += kChunk) chunks.push_back({b, s, std::min(hi, s + kChunk)});
    }
    return chunks;
}

// Fit over the usable points (eps > 0, D finite and positive); NaN slope when fewer than 2.
std::pair<double, double> fit_usable(const std::vector<double>& x, const std::vector<double>& d) {
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k] > 0.0 && std::isfinite(d[k]) && d[k] > 0.0) {
            lx.push_back(std::log(x[k]));
            ly.push_back(std::log(d[k]));
        }
    }
    if (lx.size() < 2) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    return fit_line(lx, ly);
}

}  // namespace

std::string_view to_string(PerturbationChannel channel) {
    switch (channel) {
        case PerturbationChannel::Drift: return "drift";
        case PerturbationChannel::Diffusion: return "diffusion";
        case PerturbationChannel::Kernel: return "kernel";
        case PerturbationChannel::G: return "g";
    }
    return "?";
}

PerturbationChannel parse_channel(std::string_view name) {
    if (name == "drift") return PerturbationChannel::Drift;
    if (name == "diffusion") return PerturbationChannel::Diffusion;
    if (name == "kernel") return PerturbationChannel::Kernel;
    if (name == "g") return PerturbationChannel::G;
    throw Error(ErrorKind::ValidationError, "unknown perturbation channel '" + std::string(name) + "'");
}

void PerturbationPlan::validate() const {
    base.validate();
    if (law.mean.size() != base.d) throw Error(ErrorKind::DimMismatch, "initial law has wrong dimension");
    if (!(p >= 2.0)) throw Error(ErrorKind::ValidationError, "stability scan requires p >= 2");
    if (n_mc < 1000) throw Error(ErrorKind::ValidationError, "stability scan requires n_mc >= 1000");
    if (epsilons.empty()) throw Error(ErrorKind::ValidationError, "epsilon list is empty");
    if (!std::is_sorted(epsilons.begin(), epsilons.end()))
        throw Error(ErrorKind::ValidationError, "epsilon list must be sorted ascending");
    double lo = 0.0;
    for (double e : epsilons) {
        if (!(e >= 0.0) || !std::isfinite(e))
            throw Error(ErrorKind::ValidationError, "epsilons must be finite and non-negative");
        if (e > 0.0 && lo == 0.0) lo = e;
    }
    if (lo == 0.0 || std::log10(epsilons.back() / lo) < 1.5 - 1e-12)
        throw Error(ErrorKind::ValidationError, "positive epsilons must span at least 1.5 decades");
}

SveProblem lipschitz_ou_surrogate(double delta) {
    return SveProblem{1,
                      1,
                      TimeFn::exp_decay(1.0),
                      Kernel::exponential(1.0),
                      Kernel::exponential(1.0),
                      CoefficientFn::identity_drift(1),
                      CoefficientFn::smooth_sqrt_diffusion(1, delta)};
}

PerturbationPlan default_stability_plan(PerturbationChannel channel) {
    std::vector<double> eps;
    for (int k = 0; k < 8; ++k) eps.push_back(0.01 * std::pow(10.0, 1.5 * k / 7.0));
    return PerturbationPlan{lipschitz_ou_surrogate(0.05), InitialLaw::normal({2.0}, 0.2), channel, eps, 2.0, 10000,
                            make_uniform_grid(5.0, 0.1)};
}

std::pair<double, double> fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error(ErrorKind::DegenerateFit, "need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (!(sxx > 0.0)) throw Error(ErrorKind::DegenerateFit, "abscissae are all equal");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

StabilityResult stability_scan(const PerturbationPlan& plan, std::uint64_t seed) {
    plan.validate();
    const std::size_t n_eps = plan.epsilons.size();
    const std::size_t nodes = plan.grid.n_nodes();
    const std::size_t d = plan.base.d;

    std::vector<SveProblem> problems;
    problems.reserve(n_eps);
    for (double e : plan.epsilons) problems.push_back(perturbed(plan.base, plan.channel, e));

    // Per chunk: sums of |X - X~|^p for each (eps, node), and of |xi|^p.
    const auto chunks = make_chunks(plan.n_mc);
    std::vector<std::vector<double>> sums(chunks.size());
    std::vector<double> xi_sums(chunks.size(), 0.0);

    parallel_for(chunks.size(), [&](std::size_t c) {
        std::vector<double> acc(n_eps * nodes, 0.0);
        double xi_acc = 0.0;
        for (std::size_t i = chunks[c].begin; i < chunks[c].end; ++i) {
            auto xi_engine = make_engine(seed, i, kXiChannel);
            auto noise_engine = make_engine(seed, i, kNoiseChannel);
            const std::vector<double> xi = plan.law.sample(xi_engine);
            const BrownianPath noise = sample_brownian(plan.grid, plan.base.m, noise_engine);
            const std::vector<double> zero(d, 0.0);
            xi_acc += norm_pow(xi, zero, plan.p);
            const SamplePath base = euler_maruyama(plan.base, xi, noise);
            for (std::size_t e = 0; e < n_eps; ++e) {
                const SamplePath other = euler_maruyama(problems[e], xi, noise);
                for (std::size_t t = 0; t < nodes; ++t) acc[e * nodes + t] += norm_pow(base.at(t), other.at(t), plan.p);
            }
        }
        sums[c] = std::move(acc);
        xi_sums[c] = xi_acc;
    });

    // Fixed-order reduction into the full estimate and the per-batch estimates.
    std::vector<double> total(n_eps * nodes, 0.0);
    std::vector<std::vector<double>> batch_total(kBatches, std::vector<double>(n_eps * nodes, 0.0));
    std::vector<std::size_t> batch_count(kBatches, 0);
    double xi_total = 0.0;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
        for (std::size_t k = 0; k < total.size(); ++k) {
            total[k] += sums[c][k];
            batch_total[chunks[c].batch][k] += sums[c][k];
        }
        batch_count[chunks[c].batch] += chunks[c].end - chunks[c].begin;
        xi_total += xi_sums[c];
    }

    auto sup_mean = [&](const std::vector<double>& s, std::size_t count, std::size_t e) {
        double best = 0.0;
        for (std::size_t t = 0; t < nodes; ++t) best = std::max(best, s[e * nodes + t] / static_cast<double>(count));
        return best;
    };

    StabilityResult result;
    result.xi_moment = xi_total / static_cast<double>(plan.n_mc);
    std::vector<double> xs, ds;
    for (std::size_t e = 0; e < n_eps; ++e) {
        const double x = abscissa(plan, plan.epsilons[e]);
        const double dist = sup_mean(total, plan.n_mc, e);
        xs.push_back(x);
        ds.push_back(dist);
        result.points.push_back({plan.epsilons[e], x, dist, fit_usable(xs, ds).first});
    }

    std::size_t usable = 0;
    for (std::size_t e = 0; e < n_eps; ++e)
        if (xs[e] > 0.0 && std::isfinite(ds[e]) && ds[e] > 0.0) ++usable;
    if (usable < 3) throw Error(ErrorKind::DegenerateFit, "fewer than 3 finite positive D values");

    const auto [slope, intercept] = fit_usable(xs, ds);
    result.slope = slope;
    result.intercept = intercept;

    std::vector<double> batch_slopes;
    for (std::size_t b = 0; b < kBatches; ++b) {
        std::vector<double> bd;
        for (std::size_t e = 0; e < n_eps; ++e) bd.push_back(sup_mean(batch_total[b], batch_count[b], e));
        const double s = fit_usable(xs, bd).first;
        if (std::isfinite(s)) batch_slopes.push_back(s);
    }
    if (batch_slopes.size() >= 2) {
        double mean = 0.0;
        for (double s : batch_slopes) mean += s;
        mean /= static_cast<double>(batch_slopes.size());
        double var = 0.0;
        for (double s : batch_slopes) var += (s - mean) * (s - mean);
        var /= static_cast<double>(batch_slopes.size() - 1);
        result.slope_stderr = std::sqrt(var / static_cast<double>(batch_slopes.size()));
    }

    std::vector<double> ratios;
    for (std::size_t e = 0; e < n_eps && ratios.size() < 2; ++e)
        if (xs[e] > 0.0 && ds[e] > 0.0) ratios.push_back(ds[e] / std::pow(xs[e], plan.p));
    result.constant = (ratios[0] + ratios[1]) / 2.0;
    return result;
}

void write_stability_csv(const StabilityResult& result, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw Error(ErrorKind::IoError, "cannot open " + file.string() + " for writing");
    out << "epsilon,D,slope_running\n" << std::setprecision(17);
    for (const auto& pt : result.points) {
        out << pt.epsilon << ',' << pt.distance << ',';
        if (std::isfinite(pt.running_slope))
            out << pt.running_slope;
        else
            out << "nan";
        out << '\n';
    }
    if (!out) throw Error(ErrorKind::IoError, "failed writing " + file.string());
}

}  // namespace vnet
