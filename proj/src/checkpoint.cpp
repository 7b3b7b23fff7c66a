#include "scorepa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "scorepa/error.hpp"

namespace scorepa {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

namespace {

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

class Writer {
public:
    template <class T>
    void put(T v) {
        v = to_little(v);
        const auto* p = reinterpret_cast<const char*>(&v);
        out_.append(p, sizeof(T));
    }
    void bytes(const std::string& s) { out_.append(s); }
    void record(const std::string& path, const nn::Tensor& t) {
        put<std::uint32_t>(static_cast<std::uint32_t>(path.size()));
        bytes(path);
        put<std::uint32_t>(2);
        put<std::uint64_t>(t.rows());
        put<std::uint64_t>(t.cols());
        for (double v : t.values()) put<double>(v);
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(const std::string& in) : in_(in) {}
    template <class T>
    T get(const char* what) {
        need(sizeof(T), what);
        T v;
        std::memcpy(&v, in_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return to_little(v);
    }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::pair<std::string, nn::Tensor> record() {
        const auto len = get<std::uint32_t>("record path length");
        std::string path = bytes(len, "record path");
        const auto rank = get<std::uint32_t>("record rank");
        if (rank == 0 || rank > 2) throw ParseError("checkpoint", "record " + path + " has unsupported rank");
        std::uint64_t rows = 1, cols = get<std::uint64_t>("record dims");
        if (rank == 2) {
            rows = cols;
            cols = get<std::uint64_t>("record dims");
        }
        if (rows * cols > (in_.size() - pos_) / sizeof(double))
            throw ParseError("checkpoint", "record " + path + " is truncated");
        nn::Tensor t(rows, cols);
        for (auto& v : t.values()) v = get<double>("record data");
        return {std::move(path), std::move(t)};
    }
    bool at_end() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n, const char* what) {
        if (in_.size() - pos_ < n) throw ParseError("checkpoint", std::string("truncated while reading ") + what);
    }
    const std::string& in_;
    std::size_t pos_ = 0;
};

}  // namespace

Checkpoint snapshot(const nn::ParamStore& store, std::string header_json) {
    Checkpoint c;
    c.header_json = std::move(header_json);
    for (const auto& [path, p] : store.params()) c.params.emplace(path, p.value);
    c.adam_step = store.step;
    for (const auto& [path, m] : store.first_moment) c.moments.emplace("m/" + path, m);
    for (const auto& [path, v] : store.second_moment) c.moments.emplace("v/" + path, v);
    return c;
}

void restore(const Checkpoint& ckpt, nn::ParamStore& store) {
    for (auto& [path, p] : store.params()) {
        auto it = ckpt.params.find(path);
        if (it == ckpt.params.end()) throw ParseError("checkpoint", "missing parameter " + path);
        if (!it->second.same_shape(p.value)) throw ParseError("checkpoint", "shape mismatch for parameter " + path);
        p.value = it->second;
    }
    store.step = ckpt.adam_step;
    store.first_moment.clear();
    store.second_moment.clear();
    for (const auto& [key, t] : ckpt.moments) {
        const std::string param = key.substr(2);
        if (!store.contains(param)) throw ParseError("checkpoint", "moment for unknown parameter " + param);
        if (key.rfind("m/", 0) == 0) store.first_moment[param] = t;
        else if (key.rfind("v/", 0) == 0) store.second_moment[param] = t;
        else throw ParseError("checkpoint", "unrecognized optimizer record " + key);
    }
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes("SPA1");
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.header_json.size()));
    w.bytes(ckpt.header_json);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& [path, t] : ckpt.params) w.record(path, t);
    w.put<std::uint64_t>(ckpt.adam_step);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.moments.size()));
    for (const auto& [path, t] : ckpt.moments) w.record(path, t);
    return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    Reader r(bytes);
    if (r.bytes(4, "magic") != "SPA1") throw ParseError("checkpoint", "bad magic (expected SPA1)");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion)
        throw VersionError("checkpoint", "unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.header_json = r.bytes(r.get<std::uint32_t>("header length"), "header");
    const auto np = r.get<std::uint32_t>("parameter count");
    for (std::uint32_t i = 0; i < np; ++i) c.params.insert(r.record());
    c.adam_step = r.get<std::uint64_t>("adam step");
    const auto nm = r.get<std::uint32_t>("moment count");
    for (std::uint32_t i = 0; i < nm; ++i) c.moments.insert(r.record());
    if (!r.at_end()) throw ParseError("checkpoint", "trailing bytes after optimizer state");
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("checkpoint", "cannot open " + path.string() + " for writing");
    const std::string bytes = encode_checkpoint(ckpt);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("checkpoint", "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("checkpoint", "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return decode_checkpoint(ss.str());
}

}  // namespace scorepa
