#pragma once

// Variance-exploding SDE dQ = sigma^t dw with zero drift. Its perturbation
// kernel after time t is N(q0, lambda(t) I) with
//     lambda(t) = (sigma^(2t) - 1) / (2 ln sigma) = integral_0^t sigma^(2s) ds,
// and lambda(T) is also the variance of the sampling prior.

#include <cstddef>

#include "scorepa/matrix.hpp"
#include "scorepa/rng.hpp"

namespace scorepa {

struct DiffusionSchedule {
    double sigma = 25.0;
    double T = 1.0;

    /// Throws ConfigError unless sigma > 1 and T > 0.
    void validate() const;

    /// Squared diffusion coefficient g(t)^2 = sigma^(2t).
    double g2(double t) const;
    /// Perturbation variance; throws RangeError for t outside [0, T].
    double lambda(double t) const;
    double stddev(double t) const;
    double prior_variance() const { return lambda(T); }
};

/// Free-function spelling used throughout the samplers and trainer.
inline double lambda_of(const DiffusionSchedule& s, double t) { return s.lambda(t); }

struct Perturbed {
    PoseSet qt;
    Matrix z;  // the standard-normal draw, so qt = q0 + sqrt(lambda(t)) z
};

/// q(t) = q0 + sqrt(lambda(t)) z with z ~ N(0, I) over all 6N coordinates.
Perturbed perturb(const DiffusionSchedule& schedule, const PoseSet& q0, double t, NoiseSource& noise);

/// Draw from N(0, lambda(T) I) with n_parts rows.
PoseSet prior_sample(const DiffusionSchedule& schedule, std::size_t n_parts, NoiseSource& noise);

}  // namespace scorepa
