#include "scorepa/diffusion.hpp"

#include <cmath>
#include <sstream>

#include "scorepa/error.hpp"

namespace scorepa {

void DiffusionSchedule::validate() const {
    if (!(sigma > 1.0) || !std::isfinite(sigma)) throw ConfigError("schedule", "sigma must be > 1");
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("schedule", "T must be > 0");
}

double DiffusionSchedule::g2(double t) const { return std::pow(sigma, 2.0 * t); }

double DiffusionSchedule::lambda(double t) const {
    if (!(t >= 0.0 && t <= T)) {
        std::ostringstream os;
        os << "time " << t << " outside [0, " << T << "]";
        throw RangeError("lambda", os.str());
    }
    // expm1 keeps full relative precision for small t.
    return std::expm1(2.0 * t * std::log(sigma)) / (2.0 * std::log(sigma));
}

double DiffusionSchedule::stddev(double t) const { return std::sqrt(lambda(t)); }

Perturbed perturb(const DiffusionSchedule& schedule, const PoseSet& q0, double t, NoiseSource& noise) {
    if (!q0.all_finite()) throw InputError("perturb", "q0 contains non-finite values");
    const double sd = schedule.stddev(t);
    Perturbed out{q0, noise.normal_matrix(q0.rows(), q0.cols())};
    for (std::size_t i = 0; i < q0.size(); ++i) out.qt[i] += sd * out.z[i];
    return out;
}

PoseSet prior_sample(const DiffusionSchedule& schedule, std::size_t n_parts, NoiseSource& noise) {
    if (n_parts == 0) throw InputError("prior_sample", "n_parts must be >= 1");
    const double sd = schedule.stddev(schedule.T);
    PoseSet q = noise.normal_matrix(n_parts, kPoseDim);
    for (auto& v : q.values()) v *= sd;
    return q;
}

}  // namespace scorepa
