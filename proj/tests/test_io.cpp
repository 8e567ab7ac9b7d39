#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "netsub/io.hpp"

using namespace netsub;

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("environment JSON round trip") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 5; ++k) {
        const Environment env = fixture::random_game(rng, 6, 4, 0.3);
        const json j = environment_to_json(env);
        const Environment back = environment_from_json(json::parse(j.dump()));
        CHECK(environment_to_json(back) == j);
        REQUIRE(back.agent_count() == env.agent_count());
        CHECK(back.horizon() == env.horizon());
        for (std::size_t l = 0; l < env.graph().link_count(); ++l)
            for (Month t = 1; t <= env.horizon(); ++t)
                CHECK(back.link_utility(l, t) == doctest::Approx(env.link_utility(l, t)).epsilon(1e-12));
        for (AgentId a = 0; a < env.agent_count(); ++a) {
            CHECK(back.eta(a) == env.eta(a));
            CHECK(back.fixed_date(a) == env.fixed_date(a));
        }
    }
    CHECK_THROWS(environment_from_json(json::object()));
}

TEST_CASE("profile CSV round trip keeps Never") {
    AdoptionProfile p(4);
    p[0] = 1;
    p[2] = 5;
    std::stringstream ss;
    write_profile_csv(ss, p);
    CHECK(read_profile_csv(ss) == p);
    std::istringstream bad("agent,tau\n0,x\n");
    CHECK_THROWS(read_profile_csv(bad));
}

TEST_CASE("records, towers and catalog CSV round trips") {
    std::vector<TransactionRecord> r{{1199145600, 7, 1, 2, 3, 4, 61.5}, {1199145700, 8, 2, 1, 4, 3, 0.0}};
    std::stringstream rs;
    write_records_csv(rs, r);
    CHECK(read_records_csv(rs) == r);
    std::istringstream iso("t,h,i,j,l_i,l_j,d\n2008-01-01T00:00:00Z,7,1,2,3,4,61.5\n");
    CHECK(read_records_csv(iso).at(0) == r[0]);
    std::istringstream self("t,h,i,j,l_i,l_j,d\n0,7,1,1,3,4,1\n");
    CHECK_THROWS(read_records_csv(self));

    std::vector<Tower> towers{{1, -1.9, 30.1, true}, {2, -2.0, 29.9, false}};
    std::stringstream ts;
    write_towers_csv(ts, towers);
    const auto tb = read_towers_csv(ts);
    REQUIRE(tb.size() == 2);
    CHECK(tb.at(1).rural);
    CHECK(tb.at(2).lon == doctest::Approx(29.9));

    const std::unordered_map<HandsetId, ModelId> cat{{5, 9}, {6, 10}};
    std::stringstream cs;
    write_catalog_csv(cs, cat);
    CHECK(read_catalog_csv(cs) == cat);
}

TEST_CASE("files") {
    const auto dir = std::filesystem::temp_directory_path() / "netsub_test_io";
    std::filesystem::create_directories(dir);
    write_file(dir / "a.txt", "abc");
    CHECK(read_file(dir / "a.txt") == "abc");
    CHECK(sha256_file(dir / "a.txt") == sha256_hex("abc"));
    CHECK_THROWS_AS(read_file(dir / "missing.txt"), IoError);
    std::filesystem::remove_all(dir);
    CHECK(split_csv("a,,b") == std::vector<std::string>{"a", "", "b"});
}
