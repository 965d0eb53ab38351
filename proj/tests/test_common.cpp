#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "refix/common.hpp"

using namespace refix;

TEST_CASE("fnv1a64 matches the reference constants", "[common]") {
    // Offset basis and a few published digests of the 64-bit FNV-1a function.
    CHECK(fnv1a64("") == 14695981039346656037ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("hex64 is zero-padded and lowercase", "[common]") {
    CHECK(hex64(0) == "0000000000000000");
    CHECK(hex64(0xdeadbeefull) == "00000000deadbeef");
    CHECK(content_hash("a") == "af63dc4c8601ec8c");
}

TEST_CASE("split_lines handles newline shapes", "[common]") {
    CHECK(split_lines("") == std::vector<std::string>{});
    CHECK(split_lines("a") == std::vector<std::string>{"a"});
    CHECK(split_lines("a\n") == std::vector<std::string>{"a"});
    CHECK(split_lines("a\nb") == std::vector<std::string>{"a", "b"});
    CHECK(split_lines("a\n\nb\n") == std::vector<std::string>{"a", "", "b"});
    CHECK(split_lines("\n") == std::vector<std::string>{""});
}

TEST_CASE("strip helpers", "[common]") {
    CHECK(rstrip("x  \t") == "x");
    CHECK(strip("  x ") == "x");
    CHECK(is_blank("  \t "));
    CHECK_FALSE(is_blank(" . "));
    CHECK(lowercase("AbC") == "abc");
}

TEST_CASE("atomic_write_file round-trips and replaces", "[common]") {
    auto path = std::filesystem::temp_directory_path() /
                ("refix-common-" + std::to_string(::getpid()) + ".txt");
    atomic_write_file(path, "one\n");
    CHECK(read_text_file(path) == "one\n");
    atomic_write_file(path, "two\n");
    CHECK(read_text_file(path) == "two\n");
    std::filesystem::remove(path);
}

TEST_CASE("read_text_file reports missing files", "[common]") {
    try {
        read_text_file("/nonexistent/refix-nope.txt");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::data);
    }
}
