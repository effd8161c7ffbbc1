#include "clpt/config.hpp"
#include "clpt/csv.hpp"
#include "clpt/experiments.hpp"

#include <doctest.h>

#include <filesystem>

using namespace clpt;
namespace fs = std::filesystem;

TEST_CASE("empty config gives defaults and asks for a preset") {
    const auto r = validate_config("");
    CHECK_FALSE(r.ok());
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].message.find("preset is required") != std::string::npos);
    CHECK(r.config.problem == "1q");
    CHECK(r.config.L == 64);
    CHECK(r.config.N == 200);
}

TEST_CASE("negative beta is a range error naming the field and line") {
    const auto r = validate_config("[run]\npreset = lmc-qsl\n\n[lmc]\nbeta = -1\n");
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].message.find("lmc.beta") == 0);
    CHECK(r.errors[0].line == 5);
}

TEST_CASE("unknown keys warn with the nearest valid key") {
    const auto r = validate_config("[run]\npreset = lmc-qsl\n[lmc]\nsigmma = 0.01\n");
    CHECK(r.ok());
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].line == 4);
    CHECK(r.warnings[0].message.find("'lmc.sigma'") != std::string::npos);
}

TEST_CASE("zero runs are rejected") {
    const auto r = validate_config("[run]\npreset = phase-diagram-sd\n[sd]\nruns = 0\n");
    CHECK_FALSE(r.ok());
    CHECK(r.errors[0].message.find("sd.runs") == 0);
}

TEST_CASE("errors are aggregated with line numbers") {
    const auto r = validate_config("[run]\npreset = nope\n[protocol]\nL = abc\nN = 1\nnot a pair\n");
    CHECK(r.errors.size() == 4);
    const auto text = format_diagnostics(r.errors, "error");
    CHECK(text.find("line 4") != std::string::npos);
    CHECK(text.find("line 6") != std::string::npos);
}

TEST_CASE("canonical text round trips") {
    auto r = validate_config("[run]\npreset = lmc-qsl\nproblem = 2q\n[lmc]\nbeta = 1e4, 1e5, 1e6\n[grid]\nT_list = 2.4, 2.6\n");
    REQUIRE(r.ok());
    const auto again = validate_config(r.config.to_text());
    REQUIRE(again.ok());
    CHECK(again.warnings.empty());
    CHECK(again.config.to_text() == r.config.to_text());
    CHECK(again.config.betas == std::vector<double>{1e4, 1e5, 1e6});
    CHECK(again.config.durations() == std::vector<double>{2.4, 2.6});
}

TEST_CASE("preset override and names") {
    const auto r = validate_config("", "stability-trace");
    CHECK(r.ok());
    CHECK(preset_names().size() == 8);
    CHECK(nearest_key("T_mn") == "grid.T_min");
}

TEST_CASE("stability-trace preset reproduces T_c and is deterministic") {
    auto r = validate_config("[run]\npreset = stability-trace\n[grid]\nT_min = 0.5\nT_max = 3.0\nT_points = 30\n");
    REQUIRE(r.ok());
    const auto a = run_preset(r.config);
    const auto b = run_preset(r.config);
    CHECK(a.files() == b.files());
    const std::string& tr = a.files().at("transitions.csv");
    const auto pos = tr.find("T_c,");
    REQUIRE(pos != std::string::npos);
    const double T_c = std::stod(tr.substr(pos + 4));
    CHECK(std::abs(T_c - 0.98) < 0.05);
}

TEST_CASE("outputs are never silently overwritten") {
    const fs::path dir = fs::temp_directory_path() / "clpt_test_outputs";
    fs::remove_all(dir);
    auto r = validate_config("[run]\npreset = stability-trace\n[grid]\nT_points = 4\n");
    REQUIRE(r.ok());
    OutputSet out;
    out.add("a.csv", "x\n1\n");
    out.commit(dir, r.config);
    CHECK_NOTHROW(out.commit(dir, r.config));   // identical rerun
    const std::string manifest = read_text(dir / "manifest.json");
    CHECK(manifest.find(sha256_hex("x\n1\n")) != std::string::npos);
    OutputSet changed;
    changed.add("a.csv", "x\n2\n");
    CHECK_THROWS_AS(changed.commit(dir, r.config), OutputError);
    CHECK(read_text(dir / "a.csv") == "x\n1\n");
    fs::remove_all(dir);
}
