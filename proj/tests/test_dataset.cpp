#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "scorepa/base64.hpp"
#include "scorepa/dataset.hpp"
#include "scorepa/error.hpp"
#include "scorepa/metrics.hpp"

using namespace scorepa;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("scorepa_ds_" + name); }

std::vector<std::array<double, 3>> multiset(const Cloud& c) {
    std::vector<std::array<double, 3>> v;
    for (std::size_t i = 0; i < c.rows(); ++i) v.push_back({c(i, 0), c(i, 1), c(i, 2)});
    std::sort(v.begin(), v.end());
    return v;
}

double min_dist_to(const Cloud& c, const std::array<double, 3>& p) {
    double best = INFINITY;
    for (std::size_t i = 0; i < c.rows(); ++i) {
        double d = 0;
        for (int k = 0; k < 3; ++k) d += (c(i, k) - p[k]) * (c(i, k) - p[k]);
        best = std::min(best, d);
    }
    return std::sqrt(best);
}

}  // namespace

TEST_CASE("categories") {
    CHECK(parse_category("table") == Category::table);
    CHECK(parse_category("chair") == Category::chair);
    CHECK(parse_category("lamp") == Category::lamp);
    CHECK(category_name(Category::lamp) == "lamp");
    CHECK_THROWS_AS(parse_category("sofa"), InputError);
    CHECK_THROWS_AS(generate(Category::table, 0, 1), InputError);
}

TEST_CASE("generation is deterministic and prefix-stable") {
    auto a = generate(Category::table, 5, 42);
    auto b = generate(Category::table, 5, 42);
    CHECK(a == b);
    auto c = generate(Category::table, 3, 42);
    for (int k = 0; k < 3; ++k) CHECK(a[k] == c[k]);
    auto d = generate(Category::table, 5, 43);
    CHECK(!(a[0] == d[0]));
    CHECK(a[3].id == "table-000003");
    auto j1 = generate(Category::chair, 2, 1, 0.002), j2 = generate(Category::chair, 2, 1, 0.002);
    CHECK(j1 == j2);
}

TEST_CASE("generated instances satisfy the structural invariants") {
    for (auto cat : {Category::table, Category::chair, Category::lamp}) {
        auto data = generate(cat, 20, 7);
        for (const auto& inst : data) {
            CHECK_NOTHROW(validate_instance(inst));
            const std::size_t n = inst.n_parts();
            CHECK(n >= 2);
            CHECK(n <= 8);
            CHECK(n == (cat == Category::table ? 5u : cat == Category::chair ? 6u : 3u));
            for (const auto& p : inst.parts) CHECK_NOTHROW(check_part_cloud(p, "test"));
            // unit cube centred at the origin
            auto shape = assemble(inst.parts, inst.gt_poses);
            for (double v : shape.shape.values()) CHECK(std::abs(v) <= 0.5 + 1e-12);
            // classes partition the parts; members have identical clouds
            std::vector<int> hits(n, 0);
            for (const auto& cls : inst.equivalence_classes) {
                CHECK(std::is_sorted(cls.begin(), cls.end()));
                for (auto i : cls) ++hits[i];
                for (auto i : cls) CHECK(chamfer(inst.parts[i], inst.parts[cls[0]]) < 1e-9);
            }
            CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
            for (std::size_t c = 1; c < inst.equivalence_classes.size(); ++c)
                CHECK(inst.equivalence_classes[c - 1][0] < inst.equivalence_classes[c][0]);
            // contacts lie on both GT-posed parts
            CHECK(!inst.contacts.empty());
            for (const auto& c : inst.contacts) {
                CHECK(c.i != c.j);
                CHECK(min_dist_to(shape.parts[c.i], c.point) < 0.05);
                CHECK(min_dist_to(shape.parts[c.j], c.point) < 0.05);
            }
        }
    }
}

TEST_CASE("tables have four interchangeable legs") {
    auto inst = generate(Category::table, 1, 3)[0];
    std::size_t legs = 0;
    for (const auto& c : inst.equivalence_classes) legs = std::max(legs, c.size());
    CHECK(legs == 4);
    auto leg_class = *std::find_if(inst.equivalence_classes.begin(), inst.equivalence_classes.end(),
                                   [](const auto& c) { return c.size() == 4; });
    // every assignment of GT leg poses to legs reproduces the shape
    std::vector<std::size_t> p = {0, 1, 2, 3};
    const auto gt = assemble(inst.parts, inst.gt_poses);
    int count = 0;
    do {
        PoseSet q = inst.gt_poses;
        for (int k = 0; k < 4; ++k)
            for (int c = 0; c < 6; ++c) q(leg_class[k], c) = inst.gt_poses(leg_class[p[k]], c);
        CHECK(scd(assemble(inst.parts, q), gt) < 1e-9);
        ++count;
    } while (std::next_permutation(p.begin(), p.end()));
    CHECK(count == 24);
}

TEST_CASE("ground truth scores PA = CA = 1") {
    for (auto cat : {Category::table, Category::chair, Category::lamp})
        for (const auto& inst : generate(cat, 5, 11)) {
            CHECK(part_accuracy(inst.gt_poses, inst.gt_poses, inst.parts) == 1.0);
            CHECK(connectivity_accuracy(inst.gt_poses, inst.gt_poses, inst.contacts).value() == 1.0);
        }
}

TEST_CASE("save and load round trip 100 instances bit exactly") {
    std::vector<AssemblyInstance> data;
    for (auto cat : {Category::table, Category::chair, Category::lamp}) {
        auto d = generate(cat, cat == Category::lamp ? 34 : 33, 5, 0.003);
        data.insert(data.end(), d.begin(), d.end());
    }
    REQUIRE(data.size() == 100);
    const auto path = tmp("rt.jsonl");
    save_dataset(path, data, nlohmann::json{{"note", "x"}});
    auto back = load_dataset(path);
    CHECK(back == data);
    std::ifstream in(path);
    std::string first;
    std::getline(in, first);
    CHECK(nlohmann::json::parse(first).contains("header"));
    std::getline(in, first);
    auto j = nlohmann::json::parse(first);
    CHECK(j["euler"] == std::string(kEulerConvention));
    CHECK(j["version"] == kDatasetFormatVersion);
    CHECK(j["points_per_part"] == kPointsPerPart);
    fs::remove(path);
}

TEST_CASE("version and truncation errors name the line") {
    auto data = generate(Category::table, 3, 1);
    const auto path = tmp("bad.jsonl");
    save_dataset(path, data);
    std::string all;
    {
        std::ifstream in(path);
        all.assign(std::istreambuf_iterator<char>(in), {});
    }
    {
        std::ofstream out(path, std::ios::trunc);
        out << all.substr(0, all.size() - 200);
    }
    try {
        load_dataset(path);
        FAIL("expected ParseError");
    } catch (const VersionError&) {
        FAIL("wrong error kind");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    auto line = instance_to_json_line(data[0]);
    auto j = nlohmann::json::parse(line);
    j["version"] = 99;
    {
        std::ofstream out(path, std::ios::trunc);
        out << line << '\n' << j.dump() << '\n';
    }
    try {
        load_dataset(path);
        FAIL("expected VersionError");
    } catch (const VersionError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(load_dataset(tmp("does_not_exist.jsonl")), ParseError);
    fs::remove(path);

    auto k = nlohmann::json::parse(line);
    k["euler"] = "intrinsic-zyx";
    CHECK_THROWS_AS(instance_from_json_line(k.dump(), 1), ParseError);
    auto m = nlohmann::json::parse(line);
    m.erase("gt_poses");
    CHECK_THROWS_AS(instance_from_json_line(m.dump(), 1), ParseError);
}

TEST_CASE("base64 round trip and errors") {
    CHECK(base64_encode("foobar") == "Zm9vYmFy");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK(base64_decode("Zm9vYg==") == "foob");
    std::vector<double> v = {0.0, -1.5, 1e-300, 3.141592653589793};
    CHECK(decode_f64(encode_f64(v)) == v);
    CHECK_THROWS_AS(base64_decode("Zm9v!"), ParseError);
    CHECK_THROWS_AS(base64_decode("Zm9"), ParseError);
}

TEST_CASE("permutation augmentation") {
    auto inst = generate(Category::chair, 1, 9)[0];
    std::vector<std::size_t> id(inst.n_parts());
    std::iota(id.begin(), id.end(), 0);
    CHECK(permute_parts(inst, id) == inst);
    CHECK_THROWS_AS(permute_parts(inst, {0, 0, 1, 2, 3, 4}), ContractError);

    NoiseSource noise(4);
    const auto gt = assemble(inst.parts, inst.gt_poses);
    for (int k = 0; k < 20; ++k) {
        auto p = canonical_permutation_augment(inst, noise);
        CHECK_NOTHROW(validate_instance(p));
        CHECK(multiset(assemble(p.parts, p.gt_poses).shape) == multiset(gt.shape));
        auto ps = assemble(p.parts, p.gt_poses);
        for (const auto& c : p.contacts) {
            CHECK(min_dist_to(ps.parts[c.i], c.point) < 0.05);
            CHECK(min_dist_to(ps.parts[c.j], c.point) < 0.05);
        }
        CHECK(connectivity_accuracy(p.gt_poses, p.gt_poses, p.contacts).value() == 1.0);
        for (const auto& cls : p.equivalence_classes) CHECK(std::is_sorted(cls.begin(), cls.end()));
    }
    // explicit permutation: new[k] = old[perm[k]]
    std::vector<std::size_t> perm = {5, 4, 3, 2, 1, 0};
    auto r = permute_parts(inst, perm);
    for (std::size_t k = 0; k < perm.size(); ++k) {
        CHECK(r.parts[k] == inst.parts[perm[k]]);
        for (int c = 0; c < 6; ++c) CHECK(r.gt_poses(k, c) == inst.gt_poses(perm[k], c));
    }
}
