#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "scorepa/checkpoint.hpp"
#include "scorepa/error.hpp"

using namespace scorepa;

namespace {

nn::ParamStore make_store(std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::normal_distribution<double> d;
    nn::ParamStore ps;
    for (auto [name, r, c] : {std::tuple{"a/W", 3, 4}, {"a/b", 1, 4}, {"z", 2, 2}, {"frozen", 1, 5}}) {
        nn::Tensor t(r, c);
        for (auto& v : t.values()) v = d(g);
        ps.add(name, t, std::string(name) != "frozen");
    }
    return ps;
}

}  // namespace

TEST_CASE("checkpoint layout starts with magic and version") {
    auto ps = make_store(1);
    const std::string bytes = encode_checkpoint(snapshot(ps, "{\"k\":1}"));
    REQUIRE(bytes.size() > 8);
    CHECK(bytes.substr(0, 4) == "SPA1");
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + 4, 4);  // little-endian host
    CHECK(v == kCheckpointVersion);
}

TEST_CASE("round trip is bit exact including Adam state") {
    auto ps = make_store(2);
    ps.zero_grads();
    for (auto& [_, p] : ps.params()) p.grad.fill(0.25);
    nn::AdamConfig cfg;
    nn::adam_step(ps, cfg);
    nn::adam_step(ps, cfg);
    const Checkpoint c = snapshot(ps, "{\"x\":\"y\"}");
    const std::string bytes = encode_checkpoint(c);
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back.header_json == c.header_json);
    CHECK(back.params == c.params);
    CHECK(back.moments == c.moments);
    CHECK(back.adam_step == 2);
    CHECK(encode_checkpoint(back) == bytes);

    auto other = make_store(3);
    restore(back, other);
    for (auto& [path, p] : ps.params()) CHECK(other.at(path).value == p.value);
    CHECK(other.step == 2);
    CHECK(other.first_moment == ps.first_moment);
    CHECK(other.second_moment == ps.second_moment);

    const auto path = std::filesystem::temp_directory_path() / "scorepa_ckpt_test.spa";
    save_checkpoint(path, c);
    CHECK(encode_checkpoint(load_checkpoint(path)) == bytes);
    std::filesystem::remove(path);
}

TEST_CASE("malformed checkpoints are rejected") {
    auto ps = make_store(4);
    const std::string bytes = encode_checkpoint(snapshot(ps, "{}"));
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), ParseError);
    std::string ver = bytes;
    ver[4] = 9;
    CHECK_THROWS_AS(decode_checkpoint(ver), VersionError);
    for (std::size_t cut : {std::size_t(3), std::size_t(10), bytes.size() / 2, bytes.size() - 1})
        CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, cut)), ParseError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), ParseError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/none.spa"), Error);
}

TEST_CASE("restore rejects missing parameters and shape mismatches") {
    auto ps = make_store(5);
    Checkpoint c = snapshot(ps, "{}");
    auto missing = c;
    missing.params.erase("z");
    auto dst = make_store(6);
    CHECK_THROWS_AS(restore(missing, dst), ParseError);
    auto wrong = c;
    wrong.params["z"] = nn::Tensor(3, 3);
    CHECK_THROWS_AS(restore(wrong, dst), ParseError);
}
