#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "scorepa/config.hpp"
#include "scorepa/error.hpp"

using namespace scorepa;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config(text).validate();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("defaults validate and match the documented values") {
    const ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.schedule.sigma == 25.0);
    CHECK(c.schedule.T == 1.0);
    CHECK(c.sampler == SamplerKind::fpc);
    CHECK(c.steps == 200);
    CHECK(c.samples_per_instance == 4);
    CHECK(c.eval_samples == 10);
    CHECK(c.instances == 256);
    CHECK(c.bench_steps.front() == 100);
    CHECK(c.bench_steps.back() == 550);
    CHECK(c.sampler_config().n_steps == 150);
    CHECK(c.sampler_config().final_corrector_steps == 50);
}

TEST_CASE("key = value grammar") {
    const auto c = parse_config(
        "# experiment\n"
        "\n"
        "  seed = 42   # trailing comment\n"
        "sigma=30\n"
        "category = chair\n"
        "bench_steps = 100, 200 ,300\n"
        "squared_snr = false\n"
        "residual = no\n"
        "sigma_data = 0.2\n"
        "time_draws = 8\n"
        "lr = 2.5e-4\n"
        "dataset = data/x.jsonl\n"
        "sampler = pc\n"
        "steps = 300\n");
    CHECK(c.seed == 42);
    CHECK(c.schedule.sigma == 30.0);
    CHECK(c.category == Category::chair);
    CHECK(c.bench_steps == std::vector<std::size_t>{100, 200, 300});
    CHECK_FALSE(c.sampling.squared_snr);
    CHECK_FALSE(c.model.residual);
    CHECK(c.model.sigma_data == 0.2);
    CHECK(c.train.time_draws == 8);
    CHECK(c.train.lr == 2.5e-4);
    CHECK(c.dataset == "data/x.jsonl");
    CHECK(c.sampler_config().n_steps == 300);
    CHECK(c.source_text.find("seed = 42") != std::string::npos);
}

TEST_CASE("later assignments and base configs") {
    ExperimentConfig base;
    base.seed = 5;
    auto c = parse_config("epochs = 3\nepochs = 4\n", base);
    CHECK(c.seed == 5);
    CHECK(c.train.epochs == 4);
    set_config_value(c, "steps", "250");
    CHECK(c.steps == 250);
}

TEST_CASE("errors name the line and the key") {
    CHECK(error_of("seed = 1\nfoo = 2\n").find("line 2") != std::string::npos);
    CHECK(error_of("foo = 2\n").find("unknown key 'foo'") != std::string::npos);
    CHECK(error_of("seed 1\n").find("line 1") != std::string::npos);
    CHECK(error_of("seed = -1\n").find("seed") != std::string::npos);
    CHECK(error_of("seed = 1.5\n").find("seed") != std::string::npos);
    CHECK(error_of("lr = fast\n").find("lr") != std::string::npos);
    CHECK(error_of("residual = maybe\n").find("residual") != std::string::npos);
    CHECK(error_of("seed =\n").find("empty") != std::string::npos);
    CHECK(!error_of("category = sofa\n").empty());
    CHECK(!error_of("sampler = ddim\n").empty());
    CHECK(!error_of("bench_steps = 100,,200\n").empty());
}

TEST_CASE("invalid values are rejected by validate") {
    for (const char* bad : {"sigma = 1", "sigma = 0.5", "T = 0", "instances = 0", "batch_size = 0", "t_min = 0",
                            "t_min = 1", "lr = 0", "jitter = -1", "samples_per_instance = 0", "eval_samples = 0",
                            "eval_source = oracle", "bench_field = both", "hidden_dim = 0", "sampler = fpc\nsteps = 50",
                            "bench_steps = 40", "snr = -1", "decay_exponent = -1"}) {
        INFO(bad);
        CHECK_FALSE(error_of(bad).empty());
    }
    CHECK(error_of("decay_exponent = 0").empty());
    CHECK(error_of("eval_source = gt-oracle-permuted").empty());
}

TEST_CASE("to_json echoes the resolved config") {
    auto c = parse_config("seed = 9\nsampler = fpc-no-decay\nsteps = 300\n");
    const auto j = c.to_json();
    CHECK(j["seed"] == 9);
    CHECK(j["sampler"] == "fpc-no-decay");
    CHECK(j["steps"] == 300);
    CHECK(j["schedule"]["sigma"] == 25.0);
    CHECK(j["model"].contains("residual"));
    CHECK(j["source_text"].get<std::string>().find("seed = 9") != std::string::npos);
    CHECK(j.dump() == parse_config("seed = 9\nsampler = fpc-no-decay\nsteps = 300\n").to_json().dump());
}

TEST_CASE("load_config reads files") {
    const auto p = std::filesystem::temp_directory_path() / "scorepa_test_config.cfg";
    {
        std::ofstream out(p);
        out << "seed = 3\nepochs = 7\n";
    }
    const auto c = load_config(p);
    CHECK(c.seed == 3);
    CHECK(c.train.epochs == 7);
    std::filesystem::remove(p);
    CHECK_THROWS_AS(load_config(p), ConfigError);
}
