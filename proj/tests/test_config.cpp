#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

#include "weylab/config.hpp"

using namespace weylab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const json& j) {
    fs::create_directories("cfgtest");
    std::string path = "cfgtest/" + name;
    std::ofstream os(path);
    os << j.dump(2);
    return path;
}

json tiny_solve() {
    return json{{"command", "solve"},
                {"seed", 11},
                {"grid", {{"D", 1}, {"N", 64}, {"L", 8.0}}},
                {"problem",
                 {{"mass", 1.0},
                  {"V", "x1^2/2"},
                  {"growth", {{"kind", "A22"}, {"M", 0.001}, {"delta", 1.0}}}}},
                {"initial", {{"type", "gaussian"}, {"width", 1.0}}},
                {"evolve", {{"dt", 0.002}, {"T", 0.1}, {"stride", 10}}},
                {"output", {{"dir", "cfgtest/out"}}}};
}

}  // namespace

TEST_CASE("validate accepts the bundled configs") {
    for (const auto& name :
         {"harmonic_solve.json", "damped_solve.json", "parametrix_scan.json", "commutator_scan.json",
          "assumptions_exp.json", "sensitivity_quadratic.json", "two_particle.json",
          "quantize_check.json"}) {
        std::string path = std::string("../configs/") + name;
        if (!fs::exists(path)) path = std::string("configs/") + name;
        REQUIRE_MESSAGE(fs::exists(path), "bundled config missing: ", name);
        auto diags = validate_config(path);
        for (const auto& d : diags) MESSAGE(name, ": ", d);
        CHECK(diags.empty());
    }
}

TEST_CASE("bundled harmonic config runs conservatively and exits 0") {
    std::string path = "../configs/harmonic_solve.json";
    if (!fs::exists(path)) path = "configs/harmonic_solve.json";
    REQUIRE(fs::exists(path));
    CHECK(run_config(path, "cfgtest/out_bundled") == 0);
    std::ifstream is("cfgtest/out_bundled/report.json");
    json rep;
    is >> rep;
    CHECK(rep["pass"].get<bool>());
    CHECK(std::abs(rep["evolution"]["max_growth_ratio"].get<double>() - 1.0) <= 1e-8);
}

TEST_CASE("validate reports named diagnostics") {
    json bad = tiny_solve();
    bad["grid"]["N"] = 63;
    auto d1 = validate_config(write_temp("odd.json", bad));
    REQUIRE(!d1.empty());
    bool found = false;
    for (const auto& m : d1) found = found || m.find("grid.N") != std::string::npos;
    CHECK(found);

    json unk = tiny_solve();
    unk["grid"]["M"] = 3;
    auto d2 = validate_config(write_temp("unknown.json", unk));
    found = false;
    for (const auto& m : d2) found = found || m.find("unknown field 'M'") != std::string::npos;
    CHECK(found);

    json unb = tiny_solve();
    unb["problem"]["V"] = "rho*x1^2";  // rho unbound without a sensitivity block
    auto d3 = validate_config(write_temp("unbound.json", unb));
    found = false;
    for (const auto& m : d3) found = found || m.find("unbound variable") != std::string::npos;
    CHECK(!found);  // rho is reserved for the family parameter

    json trueunb = tiny_solve();
    trueunb["problem"]["V"] = "gamma*x1^2";
    auto d4 = validate_config(write_temp("unbound2.json", trueunb));
    found = false;
    for (const auto& m : d4) found = found || m.find("unbound variable 'gamma'") != std::string::npos;
    CHECK(found);

    json badexpr = tiny_solve();
    badexpr["problem"]["V"] = "sin(x1";
    auto d5 = validate_config(write_temp("badexpr.json", badexpr));
    CHECK(!d5.empty());
}

TEST_CASE("run writes reports and returns the verdict status") {
    std::string path = write_temp("run.json", tiny_solve());
    int status = run_config(path);
    CHECK(status == 0);
    REQUIRE(fs::exists("cfgtest/out/report.json"));
    REQUIRE(fs::exists("cfgtest/out/series.csv"));
    std::ifstream is("cfgtest/out/report.json");
    json rep;
    is >> rep;
    CHECK(rep["pass"].get<bool>());
    CHECK(rep["command"] == "solve");
    CHECK(rep["evolution"]["growth_bound_ok"].get<bool>());
}

TEST_CASE("identical config and seed give byte-identical reports") {
    json cfg = tiny_solve();
    cfg["output"]["dir"] = "cfgtest/outa";
    std::string pa = write_temp("runa.json", cfg);
    cfg["output"]["dir"] = "cfgtest/outb";
    std::string pb = write_temp("runb.json", cfg);
    CHECK(run_config(pa) == 0);
    CHECK(run_config(pb) == 0);
    std::ifstream fa("cfgtest/outa/report.json"), fb("cfgtest/outb/report.json");
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
}

TEST_CASE("failing verdicts yield a nonzero status") {
    // the exponential potential fails the growth checker
    json cfg{{"command", "assumptions"},
             {"seed", 1},
             {"grid", {{"D", 1}, {"N", 64}, {"L", 6.0}}},
             {"problem",
              {{"mass", 1.0},
               {"V", "exp(x1^2)"},
               {"growth", {{"kind", "A22"}, {"M", 1.0}, {"delta", 1.0}}}}},
             {"assumptions", {{"box_x", {6.0}}, {"box_xi", 6.0}, {"samples", 2000}}},
             {"output", {{"dir", "cfgtest/outfail"}}}};
    std::string path = write_temp("fail.json", cfg);
    CHECK(run_config(path) == 1);
    std::ifstream is("cfgtest/outfail/report.json");
    json rep;
    is >> rep;
    CHECK(!rep["pass"].get<bool>());
    bool named = false;
    for (const auto& c : rep["assumptions"]["clauses"])
        if (!c["pass"].get<bool>()) named = true;
    CHECK(named);
}

TEST_CASE("parse errors yield status 2") {
    std::ofstream os("cfgtest/broken.json");
    os << "{ not json";
    os.close();
    CHECK(run_config("cfgtest/broken.json") == 2);
    CHECK(run_config("cfgtest/missing-file.json") == 2);
}
