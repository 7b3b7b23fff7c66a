#include "scorepa/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "scorepa/error.hpp"

namespace scorepa {

double scd(const AssembledShape& pred, const AssembledShape& gt) { return chamfer(pred.shape, gt.shape); }

double part_accuracy(const PoseSet& pred, const PoseSet& gt, const std::vector<Cloud>& parts, double tau) {
    if (pred.rows() != parts.size() || gt.rows() != parts.size())
        throw ContractError("part_accuracy", "pose sets and parts disagree in length");
    if (parts.empty()) throw ContractError("part_accuracy", "no parts");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < parts.size(); ++i)
        if (chamfer(apply_pose(parts[i], pred.row(i)), apply_pose(parts[i], gt.row(i))) < tau) ++ok;
    return static_cast<double>(ok) / static_cast<double>(parts.size());
}

std::optional<double> connectivity_accuracy(const PoseSet& pred, const PoseSet& gt,
                                            const std::vector<Contact>& contacts, double tau) {
    if (contacts.empty()) return std::nullopt;
    if (!pred.same_shape(gt)) throw ContractError("connectivity_accuracy", "pose set shapes differ");
    std::size_t ok = 0;
    for (const auto& c : contacts) {
        if (c.i >= gt.rows() || c.j >= gt.rows()) throw ContractError("connectivity_accuracy", "bad contact index");
        const auto ai = to_world(pred.row(c.i), to_local(gt.row(c.i), c.point));
        const auto aj = to_world(pred.row(c.j), to_local(gt.row(c.j), c.point));
        const double d2 = (ai[0] - aj[0]) * (ai[0] - aj[0]) + (ai[1] - aj[1]) * (ai[1] - aj[1]) +
                          (ai[2] - aj[2]) * (ai[2] - aj[2]);
        if (d2 < tau * tau) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(contacts.size());
}

PoseSet match_equivalent_parts(const PoseSet& pred, const AssemblyInstance& inst) {
    PoseSet out = pred;
    for (const auto& cls : inst.equivalence_classes) {
        const std::size_t m = cls.size();
        if (m < 2) continue;
        if (m > 8) throw ContractError("match_equivalent_parts", "equivalence class too large for exhaustive matching");
        const Cloud& part = inst.parts[cls.front()];
        std::vector<Cloud> gt_posed, pred_posed;
        for (auto i : cls) {
            gt_posed.push_back(apply_pose(part, inst.gt_poses.row(i)));
            pred_posed.push_back(apply_pose(part, pred.row(i)));
        }
        // cost[a][b]: prediction a placed at GT slot b.
        std::vector<double> cost(m * m);
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) cost[a * m + b] = chamfer(pred_posed[a], gt_posed[b]);
        std::vector<std::size_t> perm(m), best;
        std::iota(perm.begin(), perm.end(), 0);
        double best_cost = std::numeric_limits<double>::infinity();
        do {
            double c = 0.0;
            for (std::size_t b = 0; b < m; ++b) c += cost[perm[b] * m + b];
            if (c < best_cost) {
                best_cost = c;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        for (std::size_t b = 0; b < m; ++b)
            for (std::size_t k = 0; k < kPoseDim; ++k) out(cls[b], k) = pred(cls[best[b]], k);
    }
    return out;
}

Matrix pairwise_scd(const std::vector<AssembledShape>& shapes) {
    const std::size_t k = shapes.size();
    Matrix d(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) d(i, j) = d(j, i) = scd(shapes[i], shapes[j]);
    return d;
}

double ds(const Matrix& dist) {
    const std::size_t k = dist.rows();
    if (k == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) s += dist(i, j);
    return s / static_cast<double>(k * k);
}

double qds(const Matrix& dist, const std::vector<double>& ca, double tau_q) {
    const std::size_t k = dist.rows();
    if (ca.size() != k) throw ContractError("qds", "need one CA value per shape");
    if (k == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            s += dist(i, j) * ((ca[i] > tau_q ? 1.0 : 0.0) * (ca[j] > tau_q ? 1.0 : 0.0));
    return s / static_cast<double>(k * k);
}

double wqds(const Matrix& dist, const std::vector<double>& ca) {
    const std::size_t k = dist.rows();
    if (ca.size() != k) throw ContractError("wqds", "need one CA value per shape");
    if (k == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) s += dist(i, j) * (ca[i] * ca[j]);
    return s / static_cast<double>(k * k);
}

double ds(const std::vector<AssembledShape>& shapes) { return ds(pairwise_scd(shapes)); }

InstanceMetrics evaluate_instance(const AssemblyInstance& inst, const std::vector<PoseSet>& samples,
                                  const EvalOptions& opt) {
    if (samples.empty()) throw ContractError("evaluate", "no samples");
    const AssembledShape gt = assemble(inst.parts, inst.gt_poses);
    std::vector<AssembledShape> shapes;
    std::vector<double> scds, pas, cas;
    std::vector<std::optional<double>> ca_raw;
    for (const auto& q : samples) {
        shapes.push_back(assemble(inst.parts, q));
        scds.push_back(scd(shapes.back(), gt));
        const PoseSet matched = opt.match_equivalent ? match_equivalent_parts(q, inst) : q;
        pas.push_back(part_accuracy(matched, inst.gt_poses, inst.parts, opt.thresholds.pa));
        ca_raw.push_back(connectivity_accuracy(matched, inst.gt_poses, inst.contacts, opt.thresholds.ca));
        // No contacts: nothing can be disconnected, so diversity is not gated.
        cas.push_back(ca_raw.back().value_or(1.0));
    }
    InstanceMetrics m;
    m.id = inst.id;
    m.best_sample = static_cast<std::size_t>(std::min_element(scds.begin(), scds.end()) - scds.begin());
    m.scd = scds[m.best_sample];
    if (opt.per_metric_best) {
        m.pa = *std::max_element(pas.begin(), pas.end());
        if (ca_raw.front()) m.ca = *std::max_element(cas.begin(), cas.end());
    } else {
        m.pa = pas[m.best_sample];
        m.ca = ca_raw[m.best_sample];
    }
    const Matrix dist = pairwise_scd(shapes);
    m.ds = ds(dist);
    m.qds = qds(dist, cas, opt.thresholds.q);
    m.wqds = wqds(dist, cas);
    return m;
}

MetricsReport mmd_evaluate(const std::vector<AssemblyInstance>& data, const PoseSampler& sampler,
                           const EvalOptions& opt) {
    if (data.empty()) throw InputError("evaluate", "empty dataset");
    if (opt.k == 0) throw ConfigError("evaluate", "samples per instance must be >= 1");
    MetricsReport r;
    r.samples_per_instance = opt.k;
    double seconds = 0.0;
    std::size_t with_ca = 0;
    for (const auto& inst : data) {
        std::vector<PoseSet> samples;
        for (std::size_t s = 0; s < opt.k; ++s) {
            const auto t0 = std::chrono::steady_clock::now();
            samples.push_back(sampler(inst, s));
            seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        InstanceMetrics m = evaluate_instance(inst, samples, opt);
        r.scd += m.scd;
        r.pa += m.pa;
        if (m.ca) {
            r.ca += *m.ca;
            ++with_ca;
        } else {
            ++r.ca_excluded;
        }
        r.ds += m.ds;
        r.qds += m.qds;
        r.wqds += m.wqds;
        r.per_instance.push_back(std::move(m));
    }
    const double n = static_cast<double>(data.size());
    r.instances = data.size();
    r.scd /= n;
    r.pa /= n;
    r.ca = with_ca ? r.ca / static_cast<double>(with_ca) : 0.0;
    r.ds /= n;
    r.qds /= n;
    r.wqds /= n;
    r.mean_sample_seconds = seconds / (n * static_cast<double>(opt.k));
    r.config = {{"k", opt.k},
                {"tau_pa", opt.thresholds.pa},
                {"tau_ca", opt.thresholds.ca},
                {"tau_q", opt.thresholds.q},
                {"match_equivalent", opt.match_equivalent},
                {"per_metric_best", opt.per_metric_best}};
    return r;
}

nlohmann::json MetricsReport::to_json(bool include_timing) const {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& m : per_instance) {
        nlohmann::json j = {{"id", m.id},  {"scd", m.scd}, {"pa", m.pa},     {"ds", m.ds},
                            {"qds", m.qds}, {"wqds", m.wqds}, {"best_sample", m.best_sample}};
        j["ca"] = m.ca ? nlohmann::json(*m.ca) : nlohmann::json(nullptr);
        per.push_back(std::move(j));
    }
    nlohmann::json j = {{"scd", scd},
                        {"pa", pa},
                        {"ca", ca},
                        {"ds", ds},
                        {"qds", qds},
                        {"wqds", wqds},
                        {"instances", instances},
                        {"ca_excluded", ca_excluded},
                        {"samples_per_instance", samples_per_instance},
                        {"evaluation", config},
                        {"per_instance", std::move(per)}};
    if (include_timing) j["mean_sample_seconds"] = mean_sample_seconds;
    return j;
}

std::string MetricsReport::table(const std::string& label) const {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %10s %8s %8s %12s %12s\n", "method", "SCD", "PA", "CA", "QDS(x1e-5)",
                  "WQDS(x1e-4)");
    os << buf;
    std::snprintf(buf, sizeof buf, "%-16s %10.5f %8.4f %8.4f %12.4f %12.4f\n", label.c_str(), scd, pa, ca,
                  qds / 1e-5, wqds / 1e-4);
    os << buf;
    return os.str();
}

}  // namespace scorepa
