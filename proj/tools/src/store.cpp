#include "z2cli/store.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <type_traits>

#include <openssl/evp.h>

#include "z2spectra/errors.hpp"

namespace z2cli {

namespace fs = std::filesystem;
using z2s::Error;
using z2s::ErrorCode;

namespace {

constexpr char kMagic[4] = {'Z', '2', 'S', '1'};

std::string digest(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::IoError, "SHA-256 failed");
    }
    return std::string(reinterpret_cast<const char*>(md), len);
}

class Writer {
public:
    template <typename T>
    void pod(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    template <typename T>
    void vec(const std::vector<T>& v) {
        pod<std::uint64_t>(v.size());
        for (const auto& x : v) pod(x);
    }
    void vec3s(const std::vector<z2s::Vec3>& v) {
        pod<std::uint64_t>(v.size());
        for (const auto& x : v) {
            pod(x.x());
            pod(x.y());
            pod(x.z());
        }
    }
    void matrix(const Eigen::MatrixXd& m) {
        pod<std::int64_t>(m.rows());
        pod<std::int64_t>(m.cols());
        out_.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size()));
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(const std::string& s) : s_(s) {}

    template <typename T>
    T pod() {
        static_assert(std::is_trivially_copyable_v<T>);
        need(sizeof(T));
        T v;
        std::memcpy(&v, s_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    template <typename T>
    std::vector<T> vec() {
        const auto n = pod<std::uint64_t>();
        need(n * sizeof(T));
        std::vector<T> v(n);
        for (auto& x : v) x = pod<T>();
        return v;
    }
    std::vector<z2s::Vec3> vec3s() {
        const auto n = pod<std::uint64_t>();
        need(n * 3 * sizeof(double));
        std::vector<z2s::Vec3> v(n);
        for (auto& x : v) {
            const double a = pod<double>(), b = pod<double>(), c = pod<double>();
            x = z2s::Vec3(a, b, c);
        }
        return v;
    }
    Eigen::MatrixXd matrix() {
        const auto r = pod<std::int64_t>(), c = pod<std::int64_t>();
        if (r < 0 || c < 0) throw Error(ErrorCode::CorruptStore, "negative matrix size");
        need(static_cast<std::size_t>(r * c) * sizeof(double));
        Eigen::MatrixXd m(r, c);
        std::memcpy(m.data(), s_.data() + pos_, sizeof(double) * static_cast<std::size_t>(r * c));
        pos_ += sizeof(double) * static_cast<std::size_t>(r * c);
        return m;
    }
    void finish() const {
        if (pos_ != s_.size()) throw Error(ErrorCode::CorruptStore, "trailing bytes in artifact");
    }

private:
    void need(std::size_t n) const {
        if (n > s_.size() - pos_) throw Error(ErrorCode::CorruptStore, "truncated artifact");
    }
    const std::string& s_;
    std::size_t pos_ = 0;
};

std::string hex(const std::string& raw) {
    static const char* d = "0123456789abcdef";
    std::string out;
    for (unsigned char c : raw) {
        out.push_back(d[c >> 4]);
        out.push_back(d[c & 15]);
    }
    return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) { return hex(digest(bytes)); }

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {}

std::string SessionStore::make_key(const std::vector<std::string>& parts) {
    std::string joined;
    for (const auto& p : parts) {
        joined += p;
        joined.push_back('\n');
    }
    return sha256_hex(joined);
}

fs::path SessionStore::entry(const std::string& key, const std::string& name) const {
    if (key.size() < 2) throw Error(ErrorCode::InputError, "store key too short");
    return root_ / key.substr(0, 2) / key / name;
}

void SessionStore::save(const std::string& key, const std::string& name, const std::string& payload) const {
    const fs::path path = entry(key, name);
    try {
        if (load(key, name)) return;
    } catch (const Error&) {
        // A damaged entry is never overwritten in place; fall through and replace it atomically.
    }
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
    std::string blob(kMagic, 4);
    blob += digest(payload);
    const std::uint64_t n = payload.size();
    blob.append(reinterpret_cast<const char*>(&n), sizeof n);
    blob += payload;

    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    }
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::optional<std::string> SessionStore::load(const std::string& key, const std::string& name) const {
    const fs::path path = entry(key, name);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string blob = buf.str();
    constexpr std::size_t header = 4 + 32 + sizeof(std::uint64_t);
    if (blob.size() < header || std::memcmp(blob.data(), kMagic, 4) != 0) {
        throw Error(ErrorCode::CorruptStore, "bad header in " + path.string());
    }
    std::uint64_t n = 0;
    std::memcpy(&n, blob.data() + 36, sizeof n);
    if (n != blob.size() - header) throw Error(ErrorCode::CorruptStore, "length mismatch in " + path.string());
    std::string payload = blob.substr(header);
    if (digest(payload) != blob.substr(4, 32)) throw Error(ErrorCode::CorruptStore, "hash mismatch in " + path.string());
    return payload;
}

std::string hash_configuration(const z2s::Configuration& p) {
    Writer w;
    w.vec3s(p.points());
    w.pod(p.separation_floor());
    w.pod<std::uint8_t>(p.is_calibration() ? 1 : 0);
    return sha256_hex(w.take());
}

std::string hash_mesh_params(const z2s::MeshParams& m, int refinement) {
    Writer w;
    w.pod(m.h_target);
    w.pod(m.grading_exponent);
    w.vec(m.annuli_radii);
    w.pod(m.rings);
    w.pod(m.grading_radius);
    w.pod(m.max_aspect);
    w.pod(refinement);
    return sha256_hex(w.take());
}

std::string hash_cuts(const z2s::CutSystem& c) {
    Writer w;
    w.pod<std::uint64_t>(c.arcs.size());
    for (const auto& a : c.arcs) {
        w.pod(a.a);
        w.pod(a.b);
        w.vec3s(a.polyline);
    }
    return sha256_hex(w.take());
}

std::string hash_window_request(const z2s::SolverOptions& s, double center, double half_width, int k_max) {
    Writer w;
    w.pod(s.tol);
    w.pod(s.max_iterations);
    w.pod(s.seed);
    w.pod(center);
    w.pod(half_width);
    w.pod(k_max);
    return sha256_hex(w.take());
}

std::string encode_mesh(const z2s::TwistedMesh& m) {
    Writer w;
    w.vec3s(m.vertices);
    w.vec(m.triangles);
    w.vec(m.sigma);
    w.vec3s(m.anchors);
    w.vec(m.neighbors);
    w.vec(m.branch_vertices);
    w.vec(m.annuli_radii);
    w.pod<std::uint64_t>(m.cuts.arcs.size());
    for (const auto& a : m.cuts.arcs) {
        w.pod(a.a);
        w.pod(a.b);
        w.vec3s(a.polyline);
    }
    w.pod(m.h_nominal);
    w.pod(m.refinement_level);
    return w.take();
}

z2s::TwistedMesh decode_mesh(const std::string& bytes) {
    Reader r(bytes);
    z2s::TwistedMesh m;
    m.vertices = r.vec3s();
    m.triangles = r.vec<std::array<int, 3>>();
    m.sigma = r.vec<std::array<std::int8_t, 3>>();
    m.anchors = r.vec3s();
    m.neighbors = r.vec<std::array<int, 3>>();
    m.branch_vertices = r.vec<int>();
    m.annuli_radii = r.vec<double>();
    const auto arcs = r.pod<std::uint64_t>();
    if (arcs > bytes.size()) throw Error(ErrorCode::CorruptStore, "implausible arc count");
    for (std::uint64_t k = 0; k < arcs; ++k) {
        z2s::CutArc a;
        a.a = r.pod<int>();
        a.b = r.pod<int>();
        a.polyline = r.vec3s();
        m.cuts.arcs.push_back(std::move(a));
    }
    m.h_nominal = r.pod<double>();
    m.refinement_level = r.pod<int>();
    r.finish();
    return m;
}

std::string encode_window(const z2s::SpectralWindow& win) {
    Writer w;
    w.pod(win.center);
    w.pod(win.half_width);
    w.vec(win.values);
    w.matrix(win.vectors);
    w.vec(win.residuals);
    w.pod(win.certified_count);
    w.pod<std::uint8_t>(win.truncated ? 1 : 0);
    w.pod(win.iterations);
    return w.take();
}

z2s::SpectralWindow decode_window(const std::string& bytes) {
    Reader r(bytes);
    z2s::SpectralWindow w;
    w.center = r.pod<double>();
    w.half_width = r.pod<double>();
    w.values = r.vec<double>();
    w.vectors = r.matrix();
    w.residuals = r.vec<double>();
    w.certified_count = r.pod<int>();
    w.truncated = r.pod<std::uint8_t>() != 0;
    w.iterations = r.pod<int>();
    r.finish();
    return w;
}

}  // namespace z2cli
