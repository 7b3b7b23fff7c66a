#include "scorepa/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "scorepa/checkpoint.hpp"
#include "scorepa/error.hpp"

namespace scorepa {

using nlohmann::json;

json provenance(const ExperimentConfig& cfg) {
    return {{"code_version", SCOREPA_VERSION}, {"config", cfg.to_json()}};
}

namespace {

// FNV-1a; stable across platforms, used to derive per-instance noise streams.
std::uint64_t stable_hash(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

NoiseSource chain_noise(std::uint64_t seed, const std::string& id, std::size_t sample) {
    return NoiseSource::derive(seed ^ stable_hash(id), sample);
}

void canonicalize(PoseSet& q) {
    for (std::size_t i = 0; i < q.rows(); ++i)
        for (std::size_t k = 3; k < kPoseDim; ++k) q(i, k) = canonical_angle(q(i, k));
}

std::vector<AssemblyInstance> eval_data(const ExperimentConfig& cfg) {
    auto data = load_dataset(cfg.eval_dataset.empty() ? cfg.dataset : cfg.eval_dataset);
    if (cfg.eval_instances > 0 && cfg.eval_instances < data.size()) data.resize(cfg.eval_instances);
    return data;
}

std::ofstream open_out(const std::filesystem::path& p) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("output", "cannot write " + p.string());
    return out;
}

// Samples for a trained model; part features are cached per instance.
PoseSampler model_sampler(ScoreModel& model, SamplerKind kind, const SamplerConfig& scfg, std::uint64_t seed) {
    auto cache_id = std::make_shared<std::string>();
    auto field = std::make_shared<ScoreField>();
    return [&model, kind, scfg, seed, cache_id, field](const AssemblyInstance& inst, std::size_t s) {
        if (*cache_id != inst.id || !*field) {
            *field = bind_model(model, inst.parts);
            *cache_id = inst.id;
        }
        NoiseSource noise = chain_noise(seed, inst.id, s);
        PoseSet q = run_sampler(kind, *field, inst.n_parts(), scfg, noise);
        canonicalize(q);
        return q;
    };
}

}  // namespace

ScoreModel load_model(const std::filesystem::path& checkpoint) {
    const Checkpoint ck = load_checkpoint(checkpoint);
    json header;
    try {
        header = json::parse(ck.header_json);
    } catch (const json::parse_error& e) {
        throw ParseError("checkpoint", std::string("header is not JSON: ") + e.what());
    }
    ScoreModel model = ScoreModel::from_header(header);
    restore(ck, model.params());
    return model;
}

void run_gen_data(const ExperimentConfig& cfg) {
    const auto data = generate(cfg.category, cfg.instances, cfg.data_seed, cfg.jitter);
    if (cfg.dataset.has_parent_path()) std::filesystem::create_directories(cfg.dataset.parent_path());
    save_dataset(cfg.dataset, data, provenance(cfg));
}

TrainResult run_train(const ExperimentConfig& cfg) {
    const auto data = load_dataset(cfg.dataset);
    ScoreModel model(cfg.model, cfg.schedule, cfg.init_seed);
    TrainConfig tc = cfg.train;
    tc.schedule = cfg.schedule;
    tc.seed = cfg.seed;
    tc.out_dir = cfg.out;
    TrainHooks hooks;
    hooks.header_extra = provenance(cfg);
    hooks.on_epoch = [&](std::size_t epoch, double loss) {
        if (epoch == 1 || epoch % 10 == 0 || epoch == tc.epochs)
            std::fprintf(stderr, "epoch %zu/%zu loss %.6f\n", epoch, tc.epochs, loss);
    };
    TrainResult r = train(model, data, tc, hooks);
    if (!cfg.checkpoint.empty()) {
        const auto src = cfg.out / "model.spa";
        if (std::filesystem::absolute(src) != std::filesystem::absolute(cfg.checkpoint)) {
            if (cfg.checkpoint.has_parent_path()) std::filesystem::create_directories(cfg.checkpoint.parent_path());
            std::filesystem::copy_file(src, cfg.checkpoint, std::filesystem::copy_options::overwrite_existing);
        }
    }
    return r;
}

void run_sample(const ExperimentConfig& cfg) {
    const auto data = eval_data(cfg);
    ScoreModel model = load_model(cfg.checkpoint);
    const SamplerConfig scfg = cfg.sampler_config();
    PoseSampler sampler = model_sampler(model, cfg.sampler, scfg, cfg.seed);
    auto out = open_out(cfg.out / "samples.jsonl");
    out << json{{"header", provenance(cfg)}}.dump() << '\n';
    for (const auto& inst : data) {
        for (std::size_t s = 0; s < cfg.samples_per_instance; ++s) {
            const auto t0 = std::chrono::steady_clock::now();
            const PoseSet q = sampler(inst, s);
            const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            out << sample_record(inst.id, s, cfg.sampler, scfg, q, sec).dump() << '\n';
        }
    }
}

std::vector<std::pair<std::string, std::vector<PoseSet>>> load_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("samples", "cannot open " + path.string());
    std::vector<std::pair<std::string, std::vector<PoseSet>>> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (line.empty()) continue;
        const std::string where = "samples line " + std::to_string(no);
        try {
            const json j = json::parse(line);
            if (j.contains("header")) continue;
            const auto id = j.at("instance").get<std::string>();
            const auto rows = j.at("poses").get<std::vector<std::vector<double>>>();
            PoseSet q(rows.size(), kPoseDim);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (rows[i].size() != kPoseDim) throw ParseError(where, "pose rows need 6 values");
                for (std::size_t k = 0; k < kPoseDim; ++k) q(i, k) = rows[i][k];
            }
            if (out.empty() || out.back().first != id) out.push_back({id, {}});
            out.back().second.push_back(std::move(q));
        } catch (const json::exception& e) {
            throw ParseError(where, e.what());
        }
    }
    return out;
}

MetricsReport run_eval(const ExperimentConfig& cfg) {
    const auto data = eval_data(cfg);
    EvalOptions opt = cfg.eval;
    opt.k = cfg.eval_samples;
    MetricsReport report;
    std::string label;
    if (cfg.eval_source == "model") {
        ScoreModel model = load_model(cfg.checkpoint);
        report = mmd_evaluate(data, model_sampler(model, cfg.sampler, cfg.sampler_config(), cfg.seed), opt);
        label = std::string(sampler_name(cfg.sampler)) + "-" + std::to_string(cfg.steps);
    } else {
        const bool permuted = cfg.eval_source == "gt-oracle-permuted";
        const std::uint64_t seed = cfg.seed;
        report = mmd_evaluate(
            data,
            [permuted, seed](const AssemblyInstance& inst, std::size_t s) {
                PoseSet q = inst.gt_poses;
                if (!permuted) return q;
                NoiseSource noise = chain_noise(seed, inst.id, s);
                for (const auto& cls : inst.equivalence_classes) {
                    std::vector<std::size_t> p = cls;
                    for (std::size_t k = p.size(); k > 1; --k) std::swap(p[k - 1], p[noise.index(k)]);
                    for (std::size_t a = 0; a < cls.size(); ++a)
                        for (std::size_t c = 0; c < kPoseDim; ++c) q(cls[a], c) = inst.gt_poses(p[a], c);
                }
                return q;
            },
            opt);
        label = cfg.eval_source;
    }
    report.config["sampler"] = cfg.sampler_config().to_json();
    report.config["sampler"]["name"] = sampler_name(cfg.sampler);
    json doc = report.to_json();
    doc["provenance"] = provenance(cfg);
    open_out(cfg.out / "metrics.json") << doc.dump(2) << '\n';
    open_out(cfg.out / "metrics.txt") << "# scorepa " << SCOREPA_VERSION << "\n" << report.table(label);
    return report;
}

// ------------------------------------------------------------------ bench

std::vector<PoseSet> interchangeable_gt_modes(const AssemblyInstance& inst) {
    std::vector<PoseSet> modes = {inst.gt_poses};
    for (const auto& cls : inst.equivalence_classes) {
        if (cls.size() < 2) continue;
        std::vector<PoseSet> next;
        std::vector<std::size_t> perm(cls.size());
        std::iota(perm.begin(), perm.end(), 0);
        do {
            for (const auto& m : modes) {
                PoseSet q = m;
                for (std::size_t a = 0; a < cls.size(); ++a)
                    for (std::size_t c = 0; c < kPoseDim; ++c) q(cls[a], c) = m(cls[perm[a]], c);
                next.push_back(std::move(q));
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        modes = std::move(next);
    }
    return modes;
}

ScoreField interchangeable_gt_field(const AssemblyInstance& inst, double s, const DiffusionSchedule& schedule) {
    const auto modes = interchangeable_gt_modes(inst);
    return mixture_field(modes, std::vector<double>(modes.size(), 1.0), s, schedule);
}

std::vector<BenchRow> run_bench(const ExperimentConfig& cfg) {
    auto data = load_dataset(cfg.dataset);
    if (cfg.bench_instances > 0 && cfg.bench_instances < data.size()) data.resize(cfg.bench_instances);
    std::unique_ptr<ScoreModel> model;
    if (cfg.bench_field == "model") model = std::make_unique<ScoreModel>(load_model(cfg.checkpoint));
    std::vector<ScoreField> fields;
    for (const auto& inst : data)
        fields.push_back(model ? bind_model(*model, inst.parts)
                               : interchangeable_gt_field(inst, cfg.bench_mode_width, cfg.schedule));

    EvalOptions opt = cfg.eval;
    opt.k = cfg.bench_samples;
    SamplerConfig base = cfg.sampling;
    base.schedule = cfg.schedule;
    std::vector<BenchRow> rows;
    for (SamplerKind kind : {SamplerKind::pc, SamplerKind::fpc, SamplerKind::fpc_no_decay}) {
        for (std::size_t steps : cfg.bench_steps) {
            const SamplerConfig sc = with_total_steps(base, kind, steps);
            BenchRow row{kind, steps, 0, 0, 0, 0, 0, 0, 0};
            double seconds = 0.0;
            std::size_t evals = 0, with_ca = 0;
            for (std::size_t d = 0; d < data.size(); ++d) {
                std::vector<PoseSet> samples;
                for (std::size_t s = 0; s < opt.k; ++s) {
                    NoiseSource noise = chain_noise(cfg.seed, data[d].id, s);
                    SamplerStats stats;
                    const auto t0 = std::chrono::steady_clock::now();
                    PoseSet q = run_sampler(kind, fields[d], data[d].n_parts(), sc, noise, &stats);
                    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                    evals += stats.field_evals;
                    canonicalize(q);
                    samples.push_back(std::move(q));
                }
                const InstanceMetrics m = evaluate_instance(data[d], samples, opt);
                row.scd += m.scd;
                row.pa += m.pa;
                if (m.ca) {
                    row.ca += *m.ca;
                    ++with_ca;
                }
                row.qds += m.qds;
                row.wqds += m.wqds;
            }
            const double n = static_cast<double>(data.size());
            const double total = n * static_cast<double>(opt.k);
            row.scd /= n;
            row.pa /= n;
            row.ca = with_ca ? row.ca / static_cast<double>(with_ca) : 0.0;
            row.qds /= n;
            row.wqds /= n;
            row.mean_seconds = seconds / total;
            row.field_evals = static_cast<std::size_t>(static_cast<double>(evals) / total);
            std::fprintf(stderr, "bench %-13s steps %4zu  scd %.6f pa %.4f\n",
                         std::string(sampler_name(kind)).c_str(), steps, row.scd, row.pa);
            rows.push_back(row);
        }
    }

    auto out = open_out(cfg.out / "bench.csv");
    out << "# scorepa " << SCOREPA_VERSION << "\n# config " << provenance(cfg)["config"].dump() << "\n";
    out << "sampler,steps,scd,pa,ca,qds,wqds,field_evals,mean_seconds\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,%.6g\n",
                      std::string(sampler_name(r.sampler)).c_str(), r.steps, r.scd, r.pa, r.ca, r.qds, r.wqds,
                      r.field_evals, r.mean_seconds);
        out << buf;
    }
    return rows;
}

void run_export_ply(const ExperimentConfig& cfg) {
    const auto data = load_dataset(cfg.dataset);
    if (cfg.ply_instance >= data.size())
        throw ConfigError("export-ply", "ply_instance " + std::to_string(cfg.ply_instance) + " out of range");
    const AssemblyInstance& inst = data[cfg.ply_instance];
    const std::vector<std::string> comments = {std::string("scorepa ") + SCOREPA_VERSION,
                                               "instance " + inst.id,
                                               "config " + provenance(cfg)["config"].dump()};
    auto gt = open_out(cfg.out / (inst.id + "_gt.ply"));
    write_ply(gt, assemble(inst.parts, inst.gt_poses), comments);
    if (cfg.samples.empty()) return;
    for (const auto& [id, poses] : load_samples(cfg.samples)) {
        if (id != inst.id) continue;
        for (std::size_t s = 0; s < poses.size(); ++s) {
            if (poses[s].rows() != inst.n_parts()) throw InputError("export-ply", "sample does not match instance");
            auto os = open_out(cfg.out / (inst.id + "_sample" + std::to_string(s) + ".ply"));
            write_ply(os, assemble(inst.parts, poses[s]), comments);
        }
    }
}

}  // namespace scorepa
