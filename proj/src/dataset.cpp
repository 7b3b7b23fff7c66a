#include "scorepa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "scorepa/base64.hpp"
#include "scorepa/error.hpp"

namespace scorepa {

using json = nlohmann::json;

std::string_view category_name(Category c) {
    switch (c) {
        case Category::table: return "table";
        case Category::chair: return "chair";
        case Category::lamp: return "lamp";
    }
    return "?";
}

Category parse_category(std::string_view name) {
    if (name == "table") return Category::table;
    if (name == "chair") return Category::chair;
    if (name == "lamp") return Category::lamp;
    throw InputError("dataset", "unknown category '" + std::string(name) + "'");
}

namespace {

using Vec3 = std::array<double, 3>;

// Surface samplers in the part's geometric frame (centred on the primitive).
Cloud sample_box(double sx, double sy, double sz, double jitter, NoiseSource& rng) {
    const double axy = sx * sy, axz = sx * sz, ayz = sy * sz;
    const double total = 2 * (axy + axz + ayz);
    Cloud c(kPointsPerPart, 3);
    for (std::size_t i = 0; i < kPointsPerPart; ++i) {
        const double pick = rng.uniform(0.0, total);
        const double u = rng.uniform(-0.5, 0.5), v = rng.uniform(-0.5, 0.5);
        const double side = rng.uniform(0.0, 1.0) < 0.5 ? -0.5 : 0.5;
        double x, y, z;
        if (pick < 2 * axy) {
            x = u * sx, y = v * sy, z = side * sz;
        } else if (pick < 2 * (axy + axz)) {
            x = u * sx, y = side * sy, z = v * sz;
        } else {
            x = side * sx, y = u * sy, z = v * sz;
        }
        c(i, 0) = x + jitter * rng.normal();
        c(i, 1) = y + jitter * rng.normal();
        c(i, 2) = z + jitter * rng.normal();
    }
    return c;
}

Cloud sample_cylinder(double r, double h, double jitter, NoiseSource& rng) {
    const double lateral = 2 * std::numbers::pi * r * h, cap = std::numbers::pi * r * r;
    Cloud c(kPointsPerPart, 3);
    for (std::size_t i = 0; i < kPointsPerPart; ++i) {
        const double pick = rng.uniform(0.0, lateral + 2 * cap);
        const double a = rng.uniform(0.0, 2 * std::numbers::pi);
        double rad, z;
        if (pick < lateral) {
            rad = r;
            z = rng.uniform(-0.5, 0.5) * h;
        } else {
            rad = r * std::sqrt(rng.uniform(0.0, 1.0));
            z = pick < lateral + cap ? -0.5 * h : 0.5 * h;
        }
        c(i, 0) = rad * std::cos(a) + jitter * rng.normal();
        c(i, 1) = rad * std::sin(a) + jitter * rng.normal();
        c(i, 2) = z + jitter * rng.normal();
    }
    return c;
}

struct Placed {
    Cloud geom;   // points in the primitive's frame
    Vec3 half{};  // half extents of the primitive's bounding box in that frame
    Vec3 centre{};
    Vec3 euler{};
};

class Builder {
public:
    std::size_t add(const Cloud& geom, Vec3 half, Vec3 centre, Vec3 euler = {0, 0, 0}) {
        parts_.push_back({geom, half, centre, euler});
        return parts_.size() - 1;
    }
    void contact(std::size_t i, std::size_t j, Vec3 p) { contacts_.push_back({i, j, p}); }
    void same(std::vector<std::size_t> cls) { classes_.push_back(std::move(cls)); }

    AssemblyInstance finish(std::string id, Category cat) {
        // Centre the shape's bounding box at the origin.
        Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
        for (const auto& p : parts_) {
            const Mat3 R = rotation_matrix(p.euler[0], p.euler[1], p.euler[2]);
            for (int k = 0; k < 3; ++k) {
                const double reach = std::abs(R[3 * k]) * p.half[0] + std::abs(R[3 * k + 1]) * p.half[1] +
                                     std::abs(R[3 * k + 2]) * p.half[2];
                lo[k] = std::min(lo[k], p.centre[k] - reach);
                hi[k] = std::max(hi[k], p.centre[k] + reach);
            }
        }
        Vec3 shift;
        for (int k = 0; k < 3; ++k) shift[k] = -0.5 * (lo[k] + hi[k]);

        AssemblyInstance inst;
        inst.id = std::move(id);
        inst.category = cat;
        inst.gt_poses = PoseSet(parts_.size(), kPoseDim);
        for (std::size_t n = 0; n < parts_.size(); ++n) {
            const auto& p = parts_[n];
            Cloud local = p.geom;
            Vec3 m{0, 0, 0};
            for (std::size_t i = 0; i < local.rows(); ++i)
                for (int k = 0; k < 3; ++k) m[k] += local(i, k);
            for (auto& v : m) v /= static_cast<double>(local.rows());
            for (std::size_t i = 0; i < local.rows(); ++i)
                for (int k = 0; k < 3; ++k) local(i, k) -= m[k];
            // world = R (local + m) + centre = R local + (R m + centre)
            const Mat3 R = rotation_matrix(p.euler[0], p.euler[1], p.euler[2]);
            for (int k = 0; k < 3; ++k) {
                inst.gt_poses(n, k) =
                    p.centre[k] + shift[k] + (R[3 * k] * m[0] + R[3 * k + 1] * m[1] + R[3 * k + 2] * m[2]);
                inst.gt_poses(n, 3 + k) = canonical_angle(p.euler[k]);
            }
            inst.parts.push_back(std::move(local));
        }
        for (auto c : contacts_) {
            for (int k = 0; k < 3; ++k) c.point[k] += shift[k];
            inst.contacts.push_back(c);
        }
        // Bit-identical clouds share a class; everything else is a singleton.
        std::vector<bool> seen(parts_.size(), false);
        for (auto& cls : classes_)
            for (auto i : cls) seen[i] = true;
        for (std::size_t i = 0; i < parts_.size(); ++i)
            if (!seen[i]) classes_.push_back({i});
        for (auto& cls : classes_) std::sort(cls.begin(), cls.end());
        std::sort(classes_.begin(), classes_.end());
        inst.equivalence_classes = classes_;
        return inst;
    }

private:
    std::vector<Placed> parts_;
    std::vector<Contact> contacts_;
    std::vector<std::vector<std::size_t>> classes_;
};

// Four legs of side a and height h under a W x D slab whose underside is at z = top.
// Legs are inset by half their width from the slab edge.
void add_legs(Builder& b, std::size_t slab, double W, double D, double a, double h, double top,
              double jitter, NoiseSource& rng) {
    const Cloud leg = sample_box(a, a, h, jitter, rng);
    const double lx = 0.5 * W - a, ly = 0.5 * D - a;
    std::vector<std::size_t> cls;
    for (double sy : {-1.0, 1.0})
        for (double sx : {-1.0, 1.0}) {
            const std::size_t k = b.add(leg, {0.5 * a, 0.5 * a, 0.5 * h}, {sx * lx, sy * ly, top - 0.5 * h});
            b.contact(slab, k, {sx * lx, sy * ly, top});
            cls.push_back(k);
        }
    b.same(cls);
}

AssemblyInstance make_table(std::string id, double jitter, NoiseSource& rng) {
    const double W = rng.uniform(0.60, 0.95), D = rng.uniform(0.40, 0.80), th = rng.uniform(0.03, 0.07);
    const double H = rng.uniform(0.35, 0.70), a = rng.uniform(0.04, 0.09);
    Builder b;
    const auto top = b.add(sample_box(W, D, th, jitter, rng), {0.5 * W, 0.5 * D, 0.5 * th}, {0, 0, H + 0.5 * th});
    add_legs(b, top, W, D, a, H, H, jitter, rng);
    return b.finish(std::move(id), Category::table);
}

AssemblyInstance make_chair(std::string id, double jitter, NoiseSource& rng) {
    const double W = rng.uniform(0.45, 0.70), D = rng.uniform(0.45, 0.70), th = rng.uniform(0.04, 0.08);
    const double H = rng.uniform(0.30, 0.45), a = rng.uniform(0.035, 0.07);
    const double Hb = rng.uniform(0.30, 0.42), tb = rng.uniform(0.03, 0.06), tilt = rng.uniform(0.0, 0.3);
    Builder b;
    const auto seat = b.add(sample_box(W, D, th, jitter, rng), {0.5 * W, 0.5 * D, 0.5 * th}, {0, 0, H + 0.5 * th});
    add_legs(b, seat, W, D, a, H, H, jitter, rng);
    // The back's bottom-centre sits on the rear of the seat top; rotating about
    // +x by tilt leans it towards -y.
    const Vec3 foot{0.0, -0.5 * D + 0.5 * tb, H + th};
    const double c = std::cos(tilt), s = std::sin(tilt);
    const Vec3 centre{foot[0], foot[1] - 0.5 * Hb * s, foot[2] + 0.5 * Hb * c};
    const auto back = b.add(sample_box(W, tb, Hb, jitter, rng), {0.5 * W, 0.5 * tb, 0.5 * Hb}, centre, {tilt, 0, 0});
    b.contact(seat, back, foot);
    return b.finish(std::move(id), Category::chair);
}

AssemblyInstance make_lamp(std::string id, double jitter, NoiseSource& rng) {
    const double rb = rng.uniform(0.12, 0.25), hb = rng.uniform(0.03, 0.07);
    const double rp = rng.uniform(0.012, 0.03), hp = rng.uniform(0.30, 0.55);
    const double rs = rng.uniform(0.10, 0.25), hs = rng.uniform(0.12, 0.25);
    Builder b;
    const auto base = b.add(sample_cylinder(rb, hb, jitter, rng), {rb, rb, 0.5 * hb}, {0, 0, 0.5 * hb});
    const auto pole = b.add(sample_cylinder(rp, hp, jitter, rng), {rp, rp, 0.5 * hp}, {0, 0, hb + 0.5 * hp});
    const auto shade =
        b.add(sample_cylinder(rs, hs, jitter, rng), {rs, rs, 0.5 * hs}, {0, 0, hb + hp + 0.5 * hs});
    b.contact(base, pole, {0, 0, hb});
    b.contact(pole, shade, {0, 0, hb + hp});
    return b.finish(std::move(id), Category::lamp);
}

}  // namespace

std::vector<AssemblyInstance> generate(Category category, std::size_t count, std::uint64_t seed, double jitter) {
    if (count == 0) throw InputError("dataset", "count must be >= 1");
    if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw InputError("dataset", "jitter must be >= 0");
    std::vector<AssemblyInstance> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        NoiseSource rng = NoiseSource::derive(seed, k);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s-%06zu", std::string(category_name(category)).c_str(), k);
        switch (category) {
            case Category::table: out.push_back(make_table(buf, jitter, rng)); break;
            case Category::chair: out.push_back(make_chair(buf, jitter, rng)); break;
            case Category::lamp: out.push_back(make_lamp(buf, jitter, rng)); break;
        }
    }
    return out;
}

void validate_instance(const AssemblyInstance& inst) {
    const std::string who = "instance " + inst.id;
    const std::size_t n = inst.parts.size();
    if (n < 2 || n > 8) throw InputError(who, "part count must be in [2, 8]");
    if (inst.gt_poses.rows() != n || inst.gt_poses.cols() != kPoseDim)
        throw InputError(who, "gt_poses shape does not match the part count");
    if (!inst.gt_poses.all_finite()) throw InputError(who, "gt_poses contain non-finite values");
    for (const auto& p : inst.parts) check_part_cloud(p, who);
    std::vector<int> hits(n, 0);
    for (const auto& cls : inst.equivalence_classes) {
        for (auto i : cls) {
            if (i >= n) throw InputError(who, "equivalence class index out of range");
            ++hits[i];
            if (inst.parts[i] != inst.parts[cls.front()] && chamfer(inst.parts[i], inst.parts[cls.front()]) >= 1e-9)
                throw InputError(who, "equivalence class groups parts with different geometry");
        }
    }
    for (int h : hits)
        if (h != 1) throw InputError(who, "equivalence classes do not partition the parts");
    for (const auto& c : inst.contacts)
        if (c.i >= n || c.j >= n || c.i == c.j) throw InputError(who, "contact references invalid parts");
}

// ------------------------------------------------------------------ file format

std::string instance_to_json_line(const AssemblyInstance& inst) {
    json j;
    j["format"] = kDatasetFormat;
    j["version"] = kDatasetFormatVersion;
    j["euler"] = kEulerConvention;
    j["id"] = inst.id;
    j["category"] = category_name(inst.category);
    j["points_per_part"] = kPointsPerPart;
    json parts = json::array();
    for (const auto& p : inst.parts) parts.push_back(encode_f64(p.values()));
    j["parts"] = std::move(parts);
    j["gt_poses"] = encode_f64(inst.gt_poses.values());
    json contacts = json::array();
    for (const auto& c : inst.contacts)
        contacts.push_back({{"i", c.i}, {"j", c.j}, {"point", encode_f64({c.point[0], c.point[1], c.point[2]})}});
    j["contacts"] = std::move(contacts);
    j["equivalence_classes"] = inst.equivalence_classes;
    return j.dump();
}

namespace {

// Checks the format tag and version; returns false for a header line.
bool check_line_kind(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("format") || !j["format"].is_string() ||
        j["format"].get<std::string>() != kDatasetFormat)
        throw ParseError(where, "not a scorepa dataset line");
    if (!j.contains("version") || !j["version"].is_number_integer())
        throw ParseError(where, "missing format version");
    const int version = j["version"].get<int>();
    if (version != kDatasetFormatVersion)
        throw VersionError(where, "unsupported format version " + std::to_string(version) + " (expected " +
                                      std::to_string(kDatasetFormatVersion) + ")");
    return !j.contains("header");
}

json parse_line(const std::string& line, const std::string& where) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(where, std::string("malformed or truncated JSON (") + e.what() + ")");
    }
}

AssemblyInstance instance_from_json(const json& j, const std::string& where) {
    try {
        if (j.at("euler").get<std::string>() != kEulerConvention)
            throw ParseError(where, "unsupported Euler convention " + j.at("euler").get<std::string>());
        const auto ppp = j.at("points_per_part").get<std::size_t>();
        AssemblyInstance inst;
        inst.id = j.at("id").get<std::string>();
        inst.category = parse_category(j.at("category").get<std::string>());
        for (const auto& p : j.at("parts")) {
            auto v = decode_f64(p.get<std::string>());
            if (v.size() != ppp * 3) throw ParseError(where, "part buffer has wrong length");
            inst.parts.emplace_back(ppp, 3, std::move(v));
        }
        auto poses = decode_f64(j.at("gt_poses").get<std::string>());
        if (poses.size() != inst.parts.size() * kPoseDim) throw ParseError(where, "gt_poses buffer has wrong length");
        inst.gt_poses = PoseSet(inst.parts.size(), kPoseDim, std::move(poses));
        for (const auto& c : j.at("contacts")) {
            auto pt = decode_f64(c.at("point").get<std::string>());
            if (pt.size() != 3) throw ParseError(where, "contact point must have 3 coordinates");
            inst.contacts.push_back({c.at("i").get<std::size_t>(), c.at("j").get<std::size_t>(), {pt[0], pt[1], pt[2]}});
        }
        inst.equivalence_classes = j.at("equivalence_classes").get<std::vector<std::vector<std::size_t>>>();
        return inst;
    } catch (const json::exception& e) {
        throw ParseError(where, std::string("missing or mistyped field (") + e.what() + ")");
    } catch (const InputError& e) {
        throw ParseError(where, e.what());
    } catch (const ParseError& e) {
        if (e.stage() == where) throw;
        throw ParseError(where, e.what());
    }
}

}  // namespace

AssemblyInstance instance_from_json_line(const std::string& line, std::size_t line_no) {
    const std::string where = "dataset line " + std::to_string(line_no);
    const json j = parse_line(line, where);
    if (!check_line_kind(j, where)) throw ParseError(where, "header line where an instance was expected");
    return instance_from_json(j, where);
}

void save_dataset(const std::filesystem::path& path, const std::vector<AssemblyInstance>& instances,
                  const json& meta) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("dataset", "cannot open " + path.string() + " for writing");
    if (!meta.is_null())
        out << json{{"format", kDatasetFormat}, {"version", kDatasetFormatVersion}, {"header", meta}}.dump() << '\n';
    for (const auto& inst : instances) out << instance_to_json_line(inst) << '\n';
    if (!out) throw Error("dataset", "write failed for " + path.string());
}

std::vector<AssemblyInstance> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("dataset", "cannot open " + path.string());
    std::vector<AssemblyInstance> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (line.empty()) continue;
        const std::string where = "dataset line " + std::to_string(no);
        const json j = parse_line(line, where);
        if (!check_line_kind(j, where)) continue;
        out.push_back(instance_from_json(j, where));
        try {
            validate_instance(out.back());
        } catch (const InputError& e) {
            throw ParseError("dataset line " + std::to_string(no), e.what());
        }
    }
    if (out.empty()) throw ParseError("dataset", path.string() + " contains no instances");
    return out;
}

// ------------------------------------------------------------------ permutation

AssemblyInstance permute_parts(const AssemblyInstance& inst, const std::vector<std::size_t>& perm) {
    const std::size_t n = inst.parts.size();
    if (perm.size() != n) throw ContractError("permute_parts", "permutation length mismatch");
    std::vector<std::size_t> inv(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        if (perm[k] >= n || inv[perm[k]] != n) throw ContractError("permute_parts", "not a permutation");
        inv[perm[k]] = k;
    }
    AssemblyInstance out;
    out.id = inst.id;
    out.category = inst.category;
    out.gt_poses = PoseSet(n, kPoseDim);
    for (std::size_t k = 0; k < n; ++k) {
        out.parts.push_back(inst.parts[perm[k]]);
        for (std::size_t c = 0; c < kPoseDim; ++c) out.gt_poses(k, c) = inst.gt_poses(perm[k], c);
    }
    for (auto c : inst.contacts) {
        c.i = inv[c.i];
        c.j = inv[c.j];
        out.contacts.push_back(c);
    }
    for (auto cls : inst.equivalence_classes) {
        for (auto& i : cls) i = inv[i];
        std::sort(cls.begin(), cls.end());
        out.equivalence_classes.push_back(std::move(cls));
    }
    std::sort(out.equivalence_classes.begin(), out.equivalence_classes.end());
    return out;
}

AssemblyInstance canonical_permutation_augment(const AssemblyInstance& inst, NoiseSource& noise) {
    std::vector<std::size_t> perm(inst.parts.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[noise.index(k)]);
    return permute_parts(inst, perm);
}

}  // namespace scorepa
