#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "z2spectra/laplace.hpp"
#include "z2spectra/mesh.hpp"

namespace z2cli {

std::string sha256_hex(std::string_view bytes);

/// Content-addressed, append-only artifact store. Entries live at
/// <root>/<key[0:2]>/<key>/<name> with a magic tag, a SHA-256 of the payload
/// and the payload length in front of the payload. Writes go to a temporary
/// file first and are renamed into place.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root);

    /// Key from the hashes of the inputs that determine an artifact.
    static std::string make_key(const std::vector<std::string>& parts);

    /// No-op when a valid entry already exists.
    void save(const std::string& key, const std::string& name, const std::string& payload) const;

    /// std::nullopt means "not cached"; a damaged entry throws CorruptStore.
    std::optional<std::string> load(const std::string& key, const std::string& name) const;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path entry(const std::string& key, const std::string& name) const;
    std::filesystem::path root_;
};

std::string hash_configuration(const z2s::Configuration& p);
std::string hash_mesh_params(const z2s::MeshParams& m, int refinement);
std::string hash_cuts(const z2s::CutSystem& c);
std::string hash_window_request(const z2s::SolverOptions& s, double center, double half_width, int k_max);

std::string encode_mesh(const z2s::TwistedMesh& m);
z2s::TwistedMesh decode_mesh(const std::string& bytes);
std::string encode_window(const z2s::SpectralWindow& w);
z2s::SpectralWindow decode_window(const std::string& bytes);

}  // namespace z2cli
