#pragma once

// SCD, PA, CA and the diversity scores under the minimum-matching protocol.
//
// DS   = 1/k^2 sum_{i,j} Dist(i, j)
// QDS  = 1/k^2 sum_{i,j} Dist(i, j) [CA_i > tau_q] [CA_j > tau_q]
// WQDS = 1/k^2 sum_{i,j} Dist(i, j) CA_i CA_j
// Sums run over all ordered pairs, the diagonal included; Dist is the SCD.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scorepa/dataset.hpp"
#include "scorepa/geometry.hpp"

namespace scorepa {

struct MetricThresholds {
    double pa = 0.01;
    double ca = 0.05;
    double q = 0.5;
};

double scd(const AssembledShape& pred, const AssembledShape& gt);

/// Fraction of parts whose posed cloud is within tau of its GT-posed cloud.
double part_accuracy(const PoseSet& pred, const PoseSet& gt, const std::vector<Cloud>& parts, double tau = 0.01);

/// Fraction of contacts still connected; nullopt for an empty contact list.
std::optional<double> connectivity_accuracy(const PoseSet& pred, const PoseSet& gt,
                                            const std::vector<Contact>& contacts, double tau = 0.05);

/// Reassigns predicted poses among geometrically identical parts so that the
/// summed part chamfer to GT is smallest (exhaustive within each class).
/// Poses of singleton classes are returned unchanged.
PoseSet match_equivalent_parts(const PoseSet& pred, const AssemblyInstance& inst);

/// k x k matrix of SCD between every ordered pair (symmetric, zero diagonal).
Matrix pairwise_scd(const std::vector<AssembledShape>& shapes);
double ds(const Matrix& dist);
double qds(const Matrix& dist, const std::vector<double>& ca, double tau_q = 0.5);
double wqds(const Matrix& dist, const std::vector<double>& ca);
double ds(const std::vector<AssembledShape>& shapes);

struct InstanceMetrics {
    std::string id;
    double scd = 0.0;
    double pa = 0.0;
    std::optional<double> ca;
    double ds = 0.0;
    double qds = 0.0;
    double wqds = 0.0;
    std::size_t best_sample = 0;
};

struct MetricsReport {
    double scd = 0.0, pa = 0.0, ca = 0.0, ds = 0.0, qds = 0.0, wqds = 0.0;
    std::size_t instances = 0;
    std::size_t ca_excluded = 0;
    std::size_t samples_per_instance = 0;
    double mean_sample_seconds = 0.0;
    std::vector<InstanceMetrics> per_instance;
    nlohmann::json config;  // echoed sampler / evaluation settings

    /// include_timing=false gives a byte-stable document for a fixed seed.
    nlohmann::json to_json(bool include_timing = true) const;
    /// Aligned table: SCD, PA, CA, QDS x1e-5, WQDS x1e-4.
    std::string table(const std::string& label) const;
};

struct EvalOptions {
    std::size_t k = 10;
    MetricThresholds thresholds;
    /// Match interchangeable parts before PA and CA.
    bool match_equivalent = true;
    /// Report the best PA and CA over the k samples instead of those of the
    /// SCD-minimizing sample.
    bool per_metric_best = false;
};

/// Draws sample `index` (0..k-1) for an instance.
using PoseSampler = std::function<PoseSet(const AssemblyInstance&, std::size_t index)>;

MetricsReport mmd_evaluate(const std::vector<AssemblyInstance>& data, const PoseSampler& sampler,
                           const EvalOptions& options);

/// Scores a precomputed set of k samples for one instance.
InstanceMetrics evaluate_instance(const AssemblyInstance& inst, const std::vector<PoseSet>& samples,
                                  const EvalOptions& options);

}  // namespace scorepa
