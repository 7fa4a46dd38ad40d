#include "segtraj/toml.hpp"

#include <doctest.h>

using namespace segtraj;

TEST_SUITE("toml") {

TEST_CASE("sections flatten into dotted keys") {
    const auto t = toml::parse("top = 1\n[run]\nseed = 42\nout = \"dir\"\n[data]\nseed = 7\n");
    CHECK(toml::get_int(t, "top", 0) == 1);
    CHECK(toml::get_int(t, "run.seed", 0) == 42);
    CHECK(toml::get_string(t, "run.out", "") == "dir");
    CHECK(toml::get_int(t, "data.seed", 0) == 7);
}

TEST_CASE("value kinds") {
    const auto t = toml::parse("s = \"a#b\"\ni = -3\nf = 2.5\ne = 1e-3\nb = true\n"
                               "arr = [1, 2.5, 3]\n");
    CHECK(toml::get_string(t, "s", "") == "a#b");
    CHECK(toml::get_int(t, "i", 0) == -3);
    CHECK(toml::get_real(t, "f", 0) == 2.5);
    CHECK(toml::get_real(t, "e", 0) == 1e-3);
    CHECK(toml::get_bool(t, "b", false));
    const auto arr = toml::get_real_array(t, "arr");
    REQUIRE(arr.size() == 3);
    CHECK(arr[1] == 2.5);
}

TEST_CASE("comments and blank lines are ignored") {
    const auto t = toml::parse("# header\n\nkey = 5 # trailing\n");
    CHECK(toml::get_int(t, "key", 0) == 5);
}

TEST_CASE("string escapes") {
    const auto t = toml::parse("s = \"a\\\"b\\n\\\\c\"\n");
    CHECK(toml::get_string(t, "s", "") == "a\"b\n\\c");
}

TEST_CASE("missing keys fall back, wrong types throw") {
    const auto t = toml::parse("n = 3\n");
    CHECK(toml::get_int(t, "absent", 9) == 9);
    CHECK(toml::get_real(t, "n", 0.0) == 3.0);  // ints widen to real
    CHECK_THROWS_AS(toml::get_string(t, "n", ""), ConfigError);
    CHECK_THROWS_AS(toml::get_bool(t, "n", false), ConfigError);
}

TEST_CASE("parse errors") {
    CHECK_THROWS_AS(toml::parse("no equals sign\n"), ConfigError);
    CHECK_THROWS_AS(toml::parse("[unclosed\nk = 1\n"), ConfigError);
    CHECK_THROWS_AS(toml::parse("k = \"unterminated\n"), ConfigError);
    CHECK_THROWS_AS(toml::parse("k = [1, 2\n"), ConfigError);
    CHECK_THROWS_AS(toml::parse("k = what\n"), ConfigError);
    CHECK_THROWS_AS(toml::parse("k = 1\nk = 2\n"), ConfigError);
    CHECK_THROWS_AS(toml::parse("bad key = 1\n"), ConfigError);
}

TEST_CASE("missing file") {
    CHECK_THROWS_AS(toml::parse_file("/nonexistent/config.toml"), ConfigError);
}

}
