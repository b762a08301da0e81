#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vwa/errors.hpp"
#include "vwa/tensor.hpp"

namespace vwa {

// Binary tensor format: magic "VWT1", u32 rank, rank x u64 dims,
// little-endian f64 payload, row-major.

static_assert(std::endian::native == std::endian::little, "VWT1 writer assumes a little-endian host");

inline void write_tensor(std::ostream& os, const Tensor& t) {
    os.write("VWT1", 4);
    const std::uint32_t rank = static_cast<std::uint32_t>(t.rank());
    os.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
    for (std::size_t d = 0; d < t.rank(); ++d) {
        const std::uint64_t dim = t.dim(d);
        os.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
    }
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!os) throw IoError("failed writing tensor stream");
}

inline void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    write_tensor(f, t);
}

inline Tensor read_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "VWT1", 4) != 0) throw IoError("bad tensor magic");
    std::uint32_t rank = 0;
    is.read(reinterpret_cast<char*>(&rank), sizeof(rank));
    if (!is || rank == 0 || rank > 16) throw IoError("bad tensor rank");
    Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d) {
        std::uint64_t dim = 0;
        is.read(reinterpret_cast<char*>(&dim), sizeof(dim));
        if (!is || dim == 0) throw IoError("bad tensor dim");
        shape[d] = static_cast<std::size_t>(dim);
    }
    std::vector<double> data(shape_numel(shape));
    is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!is) throw IoError("truncated tensor payload");
    return Tensor(std::move(shape), std::move(data));
}

inline Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    return read_tensor(f);
}

// Named tensor collection on disk: one VWT1 file per map plus manifest.json
// listing map names and shapes.
inline void save_tensor_set(const std::filesystem::path& dir, const std::map<std::string, Tensor>& maps) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& [name, t] : maps) {
        const std::string file = name + ".vwt";
        save_tensor(dir / file, t);
        manifest.push_back({{"name", name}, {"file", file}, {"shape", t.shape()}});
    }
    std::ofstream f(dir / "manifest.json");
    if (!f) throw IoError("cannot write manifest in " + dir.string());
    f << manifest.dump(2) << "\n";
}

inline std::map<std::string, Tensor> load_tensor_set(const std::filesystem::path& dir) {
    std::ifstream f(dir / "manifest.json");
    if (!f) throw IoError("cannot open manifest in " + dir.string());
    nlohmann::json manifest = nlohmann::json::parse(f);
    std::map<std::string, Tensor> maps;
    for (const auto& entry : manifest) {
        Tensor t = load_tensor(dir / entry.at("file").get<std::string>());
        const Shape expect = entry.at("shape").get<Shape>();
        if (t.shape() != expect)
            throw IoError("manifest shape mismatch for " + entry.at("name").get<std::string>());
        maps.emplace(entry.at("name").get<std::string>(), std::move(t));
    }
    return maps;
}

}  // namespace vwa
