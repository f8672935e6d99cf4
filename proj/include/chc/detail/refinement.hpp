#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "chc/errors.hpp"
#include "chc/noise.hpp"
#include "chc/rng.hpp"

namespace chc::detail {

// Advances `integ` across one noise interval. When the candidate state is
// rejected (grid sup-norm outside the admissible band) the interval is split
// in two with a Brownian bridge, so the path of W is preserved; after
// max_depth halvings a StiffEvent is raised.
//
// Integrator must provide:
//   bool try_step(std::span<const double> dw, double dt);
//   void commit(std::span<const double> dw, double dt);
//   double candidate_sup() const;
template <class Integrator>
void advance_refined(Integrator& integ, const CovarianceSpec& cov, const CounterRng& rng,
                     std::span<const double> dw, double dt, std::uint64_t step, std::uint32_t node,
                     int depth, int max_depth, double t0, std::size_t& refinements) {
    if (integ.try_step(dw, dt)) {
        integ.commit(dw, dt);
        return;
    }
    if (depth >= max_depth)
        throw StiffEvent("stiff event at t=" + std::to_string(t0) + ": grid sup-norm " +
                             std::to_string(integ.candidate_sup()) + " after " +
                             std::to_string(depth) + " halvings",
                         t0, integ.candidate_sup());
    ++refinements;
    const std::size_t modes = dw.size();
    std::vector<double> first(modes, 0.0);
    std::vector<double> second(modes, 0.0);
    for (std::size_t k = 1; k < modes; ++k) {
        if (cov[k] == 0.0) continue;
        const double xi = rng.normal(RngDomain::Bridge, step, node, static_cast<std::uint32_t>(k));
        first[k] = 0.5 * dw[k] + 0.5 * std::sqrt(cov[k] * dt) * xi;
        second[k] = dw[k] - first[k];
    }
    const double half = 0.5 * dt;
    advance_refined(integ, cov, rng, std::span<const double>(first), half, step, 2 * node, depth + 1,
                    max_depth, t0, refinements);
    advance_refined(integ, cov, rng, std::span<const double>(second), half, step, 2 * node + 1,
                    depth + 1, max_depth, t0 + half, refinements);
}

}  // namespace chc::detail
