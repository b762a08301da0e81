#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "vwa/tensor_io.hpp"

using namespace vwa;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir() {
    fs::path p = fs::temp_directory_path() / ("vwa_io_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
}
}  // namespace

TEST_CASE("tensor round-trips through the binary format") {
    std::mt19937_64 rng(41);
    Tensor t = random_uniform({3, 5, 2}, -10, 10, rng);
    std::stringstream ss;
    write_tensor(ss, t);
    Tensor back = read_tensor(ss);
    REQUIRE(back.shape() == t.shape());
    REQUIRE(max_abs_diff(back, t) == 0.0);
}

TEST_CASE("header layout is exactly magic, rank, dims, payload") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    std::stringstream ss;
    write_tensor(ss, t);
    const std::string bytes = ss.str();
    REQUIRE(bytes.size() == 4 + 4 + 2 * 8 + 6 * 8);
    REQUIRE(bytes.substr(0, 4) == "VWT1");
    REQUIRE(static_cast<unsigned char>(bytes[4]) == 2);  // rank, little endian
    REQUIRE(static_cast<unsigned char>(bytes[8]) == 2);  // first dim
    REQUIRE(static_cast<unsigned char>(bytes[16]) == 3);
}

TEST_CASE("corrupt streams are rejected") {
    std::stringstream bad_magic("XXXX");
    REQUIRE_THROWS_AS(read_tensor(bad_magic), IoError);

    Tensor t({2, 2});
    std::stringstream ss;
    write_tensor(ss, t);
    std::string bytes = ss.str();
    bytes.resize(bytes.size() - 8);  // drop one payload value
    std::stringstream truncated(bytes);
    REQUIRE_THROWS_AS(read_tensor(truncated), IoError);
}

TEST_CASE("tensor set with manifest round-trips") {
    const fs::path dir = temp_dir();
    std::mt19937_64 rng(43);
    std::map<std::string, Tensor> maps;
    maps.emplace("query_weight", random_uniform({4, 4}, -1, 1, rng));
    maps.emplace("query_bias", random_uniform({4}, -1, 1, rng));
    save_tensor_set(dir / "weights", maps);
    REQUIRE(fs::exists(dir / "weights" / "manifest.json"));
    REQUIRE(fs::exists(dir / "weights" / "query_weight.vwt"));

    auto back = load_tensor_set(dir / "weights");
    REQUIRE(back.size() == 2);
    REQUIRE(max_abs_diff(back.at("query_weight"), maps.at("query_weight")) == 0.0);
    REQUIRE(max_abs_diff(back.at("query_bias"), maps.at("query_bias")) == 0.0);
    fs::remove_all(dir);
}

TEST_CASE("saving twice yields byte-identical files") {
    const fs::path dir = temp_dir();
    std::mt19937_64 rng(47);
    Tensor t = random_uniform({8, 8}, -1, 1, rng);
    save_tensor(dir / "a.vwt", t);
    save_tensor(dir / "b.vwt", t);
    std::ifstream fa(dir / "a.vwt", std::ios::binary), fb(dir / "b.vwt", std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    REQUIRE(sa.str() == sb.str());
    fs::remove_all(dir);
}
