#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <sstream>

#include "fasttcm/rng.hpp"
#include "fasttcm/serialize.hpp"

using namespace ftcm;

TEST_CASE("tensor binary roundtrip is exact") {
    Rng rng(101);
    Tensor t = Tensor::uninitialized({3, 4, 2});
    for (size_t i = 0; i < t.size(); ++i) t.at(i) = rng.normal();
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    write_tensor(ss, t);
    const Tensor back = read_tensor(ss);
    REQUIRE(back.shape() == t.shape());
    for (size_t i = 0; i < t.size(); ++i) CHECK(back.at(i) == t.at(i));
}

TEST_CASE("tensor format layout: magic, version, rank, extents") {
    const Tensor t = Tensor::from_data({2}, {1.0, -1.0});
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    write_tensor(ss, t);
    const std::string bytes = ss.str();
    REQUIRE(bytes.size() == 4 + 4 + 4 + 8 + 2 * 8);
    CHECK(bytes.substr(0, 4) == "FTCM");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1); // version LE
    CHECK(static_cast<unsigned char>(bytes[8]) == 1); // rank LE
    CHECK(static_cast<unsigned char>(bytes[12]) == 2); // extent LE
}

TEST_CASE("bad magic reports byte offset") {
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    ss << "NOPE";
    CHECK_THROWS_AS(read_tensor(ss), IoError);
}

TEST_CASE("truncated payload is an IoError") {
    const Tensor t = Tensor::from_data({4}, {1, 2, 3, 4});
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    write_tensor(ss, t);
    const std::string full = ss.str();
    std::stringstream cut(full.substr(0, full.size() - 5),
                          std::ios::in | std::ios::binary);
    CHECK_THROWS_AS(read_tensor(cut), IoError);
}

TEST_CASE("rank-0 scalar roundtrip") {
    const Tensor s = Tensor::scalar(42.5);
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    write_tensor(ss, s);
    const Tensor back = read_tensor(ss);
    CHECK(back.rank() == 0);
    CHECK(back.item() == 42.5);
}

TEST_CASE("container sections roundtrip") {
    NamedTensors items;
    items.emplace_back("alpha", Tensor::from_data({2}, {1, 2}));
    items.emplace_back("beta.gamma", Tensor::scalar(7));
    std::vector<ContainerSection> sections;
    sections.push_back({"weights", pack_named_tensors(items)});
    sections.push_back({"config_hash", pack_string("deadbeef")});

    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    write_container(ss, sections);
    const auto back = read_container(ss);
    REQUIRE(back.size() == 2);
    CHECK(unpack_string(find_section(back, "config_hash").payload) == "deadbeef");
    const auto records = unpack_named_tensors(find_section(back, "weights").payload);
    REQUIRE(records.size() == 2);
    CHECK(records[0].first == "alpha");
    CHECK(records[0].second.at(1) == 2.0);
    CHECK(records[1].first == "beta.gamma");
    CHECK_THROWS_AS(find_section(back, "missing"), IoError);
}
