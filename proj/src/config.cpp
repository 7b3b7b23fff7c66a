#include "scorepa/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "scorepa/error.hpp"

namespace scorepa {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("config", key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

double to_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config", key + ": expected a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config", key + ": expected true or false, got '" + v + "'");
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_u64(key, trim(item)));
    if (out.empty()) throw ConfigError("config", key + ": empty list");
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& v)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_u64(k, v); }},
        {"sigma", [](auto& c, auto& k, auto& v) { c.schedule.sigma = to_real(k, v); }},
        {"T", [](auto& c, auto& k, auto& v) { c.schedule.T = to_real(k, v); }},
        {"category", [](auto& c, auto&, auto& v) {
             try {
                 c.category = parse_category(v);
             } catch (const InputError& e) {
                 throw ConfigError("config", e.what());
             }
         }},
        {"instances", [](auto& c, auto& k, auto& v) { c.instances = to_u64(k, v); }},
        {"data_seed", [](auto& c, auto& k, auto& v) { c.data_seed = to_u64(k, v); }},
        {"jitter", [](auto& c, auto& k, auto& v) { c.jitter = to_real(k, v); }},
        {"dataset", [](auto& c, auto&, auto& v) { c.dataset = v; }},
        {"eval_dataset", [](auto& c, auto&, auto& v) { c.eval_dataset = v; }},
        {"eval_instances", [](auto& c, auto& k, auto& v) { c.eval_instances = to_u64(k, v); }},
        {"point_feat_dim", [](auto& c, auto& k, auto& v) { c.model.point_feat_dim = to_u64(k, v); }},
        {"hidden_dim", [](auto& c, auto& k, auto& v) { c.model.hidden_dim = to_u64(k, v); }},
        {"time_embed_dim", [](auto& c, auto& k, auto& v) { c.model.time_embed_dim = to_u64(k, v); }},
        {"fourier_scale", [](auto& c, auto& k, auto& v) { c.model.fourier_scale = to_real(k, v); }},
        {"message_rounds", [](auto& c, auto& k, auto& v) { c.model.message_rounds = to_u64(k, v); }},
        {"output_scaling", [](auto& c, auto& k, auto& v) { c.model.output_scaling = to_bool(k, v); }},
        {"input_scaling", [](auto& c, auto& k, auto& v) { c.model.input_scaling = to_bool(k, v); }},
        {"sigma_data", [](auto& c, auto& k, auto& v) { c.model.sigma_data = to_real(k, v); }},
        {"residual", [](auto& c, auto& k, auto& v) { c.model.residual = to_bool(k, v); }},
        {"init_seed", [](auto& c, auto& k, auto& v) { c.init_seed = to_u64(k, v); }},
        {"epochs", [](auto& c, auto& k, auto& v) { c.train.epochs = to_u64(k, v); }},
        {"batch_size", [](auto& c, auto& k, auto& v) { c.train.batch_size = to_u64(k, v); }},
        {"lr", [](auto& c, auto& k, auto& v) { c.train.lr = to_real(k, v); }},
        {"t_min", [](auto& c, auto& k, auto& v) { c.train.t_min = to_real(k, v); }},
        {"time_draws", [](auto& c, auto& k, auto& v) { c.train.time_draws = to_u64(k, v); }},
        {"checkpoint_every", [](auto& c, auto& k, auto& v) { c.train.checkpoint_every = to_u64(k, v); }},
        {"checkpoint", [](auto& c, auto&, auto& v) { c.checkpoint = v; }},
        {"sampler", [](auto& c, auto&, auto& v) { c.sampler = parse_sampler(v); }},
        {"steps", [](auto& c, auto& k, auto& v) { c.steps = to_u64(k, v); }},
        {"corrector_steps", [](auto& c, auto& k, auto& v) { c.sampling.corrector_steps = to_u64(k, v); }},
        {"final_corrector_steps",
         [](auto& c, auto& k, auto& v) { c.sampling.final_corrector_steps = to_u64(k, v); }},
        {"snr", [](auto& c, auto& k, auto& v) { c.sampling.snr = to_real(k, v); }},
        {"decay_exponent", [](auto& c, auto& k, auto& v) { c.sampling.decay_exponent = to_real(k, v); }},
        {"squared_snr", [](auto& c, auto& k, auto& v) { c.sampling.squared_snr = to_bool(k, v); }},
        {"samples_per_instance", [](auto& c, auto& k, auto& v) { c.samples_per_instance = to_u64(k, v); }},
        {"eval_samples", [](auto& c, auto& k, auto& v) { c.eval_samples = to_u64(k, v); }},
        {"tau_pa", [](auto& c, auto& k, auto& v) { c.eval.thresholds.pa = to_real(k, v); }},
        {"tau_ca", [](auto& c, auto& k, auto& v) { c.eval.thresholds.ca = to_real(k, v); }},
        {"tau_q", [](auto& c, auto& k, auto& v) { c.eval.thresholds.q = to_real(k, v); }},
        {"match_equivalent", [](auto& c, auto& k, auto& v) { c.eval.match_equivalent = to_bool(k, v); }},
        {"per_metric_best", [](auto& c, auto& k, auto& v) { c.eval.per_metric_best = to_bool(k, v); }},
        {"eval_source", [](auto& c, auto&, auto& v) { c.eval_source = v; }},
        {"bench_steps", [](auto& c, auto& k, auto& v) { c.bench_steps = to_list(k, v); }},
        {"bench_field", [](auto& c, auto&, auto& v) { c.bench_field = v; }},
        {"bench_instances", [](auto& c, auto& k, auto& v) { c.bench_instances = to_u64(k, v); }},
        {"bench_samples", [](auto& c, auto& k, auto& v) { c.bench_samples = to_u64(k, v); }},
        {"bench_mode_width", [](auto& c, auto& k, auto& v) { c.bench_mode_width = to_real(k, v); }},
        {"ply_instance", [](auto& c, auto& k, auto& v) { c.ply_instance = to_u64(k, v); }},
        {"samples", [](auto& c, auto&, auto& v) { c.samples = v; }},
        {"out", [](auto& c, auto&, auto& v) { c.out = v; }},
    };
    return table;
}

}  // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const auto& t = setters();
    auto it = t.find(key);
    if (it == t.end()) throw ConfigError("config", "unknown key '" + key + "'");
    if (value.empty()) throw ConfigError("config", key + ": empty value");
    it->second(cfg, key, value);
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig cfg) {
    std::istringstream in(text);
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config", "line " + std::to_string(no) + ": expected 'key = value'");
        try {
            set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("config", "line " + std::to_string(no) + ": " + e.what());
        }
    }
    cfg.source_text += text;
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

SamplerConfig ExperimentConfig::sampler_config() const {
    SamplerConfig s = sampling;
    s.schedule = schedule;
    return with_total_steps(s, sampler, steps);
}

void ExperimentConfig::validate() const {
    schedule.validate();
    model.validate();
    TrainConfig t = train;
    t.schedule = schedule;
    t.validate();
    if (instances == 0) throw ConfigError("config", "instances must be >= 1");
    if (!(jitter >= 0.0)) throw ConfigError("config", "jitter must be >= 0");
    if (samples_per_instance == 0 || eval_samples == 0 || bench_samples == 0)
        throw ConfigError("config", "sample counts must be >= 1");
    sampler_config().validate(sampler);
    for (auto s : bench_steps)
        for (auto k : {SamplerKind::pc, SamplerKind::fpc})
            with_total_steps(sampling, k, s).validate(k);
    if (eval_source != "model" && eval_source != "gt-oracle" && eval_source != "gt-oracle-permuted")
        throw ConfigError("config", "eval_source must be model, gt-oracle or gt-oracle-permuted");
    if (bench_field != "analytic" && bench_field != "model")
        throw ConfigError("config", "bench_field must be analytic or model");
    if (!(bench_mode_width >= 0.0)) throw ConfigError("config", "bench_mode_width must be >= 0");
}

nlohmann::json ExperimentConfig::to_json() const {
    TrainConfig t = train;
    return {{"seed", seed},
            {"schedule", {{"sigma", schedule.sigma}, {"T", schedule.T}}},
            {"data",
             {{"category", category_name(category)},
              {"instances", instances},
              {"data_seed", data_seed},
              {"jitter", jitter},
              {"dataset", dataset.string()},
              {"eval_dataset", eval_dataset.string()},
              {"eval_instances", eval_instances}}},
            {"model", model.to_json()},
            {"init_seed", init_seed},
            {"train", t.to_json()},
            {"checkpoint", checkpoint.string()},
            {"sampler", sampler_name(sampler)},
            {"steps", steps},
            {"sampling", sampler_config().to_json()},
            {"samples_per_instance", samples_per_instance},
            {"eval_samples", eval_samples},
            {"eval",
             {{"tau_pa", eval.thresholds.pa},
              {"tau_ca", eval.thresholds.ca},
              {"tau_q", eval.thresholds.q},
              {"match_equivalent", eval.match_equivalent},
              {"per_metric_best", eval.per_metric_best},
              {"source", eval_source}}},
            {"bench",
             {{"steps", bench_steps},
              {"field", bench_field},
              {"instances", bench_instances},
              {"samples", bench_samples},
              {"mode_width", bench_mode_width}}},
            {"out", out.string()},
            {"source_text", source_text}};
}

}  // namespace scorepa
