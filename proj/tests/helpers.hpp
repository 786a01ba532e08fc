#pragma once

// Shared test fixtures: scratch directories and hand-built annotations.

#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "caplab/corpus.hpp"

namespace caplab::testing {

// Unique scratch directory, removed (with contents) on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        const auto base = std::filesystem::temp_directory_path();
        std::random_device rd;
        for (int attempt = 0; attempt < 64; ++attempt) {
            auto candidate = base / ("caplab_test_" + std::to_string(rd()));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path = std::move(candidate);
                return;
            }
        }
        throw std::runtime_error("could not create a scratch directory");
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw std::runtime_error("write failed for " + path);
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return body;
}

inline Phrase tok(TokenSeq tokens) { return Phrase(std::move(tokens)); }
inline Phrase txt(std::string text) { return Phrase(std::move(text)); }

inline ToyAnnotation make_toy(std::string id, ToyRole role, std::vector<Phrase> low,
                              std::vector<Phrase> medium, std::vector<Phrase> high) {
    ToyAnnotation toy;
    toy.canonical_id = std::move(id);
    toy.role = role;
    toy.names_at(PrecisionLevel::Low) = std::move(low);
    toy.names_at(PrecisionLevel::Medium) = std::move(medium);
    toy.names_at(PrecisionLevel::High) = std::move(high);
    return toy;
}

}  // namespace caplab::testing
