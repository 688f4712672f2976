#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("eimnet_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args) {
    const std::string cmd = std::string("\"") + EIMNET_CLI + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path edited_config(const fs::path& dir, const std::string& from, const std::string& to) {
    std::string text = slurp(EIMNET_TESTCASE);
    const auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, from.size(), to);
    const fs::path p = dir / "system.yaml";
    std::ofstream(p) << text;
    return p;
}

std::string config_arg() { return std::string("--config \"") + EIMNET_TESTCASE + "\""; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("build writes sweeps and is reproducible") {
    const fs::path a = scratch("build_a"), b = scratch("build_b");
    REQUIRE(run("build " + config_arg() + " --grid-points 20 --out " + a.string()) == 0);
    REQUIRE(run("build " + config_arg() + " --grid-points 20 --out " + b.string()) == 0);
    for (const char* name : {"operating_point.csv", "nodes.csv", "znet.csv", "ycon.csv", "eim_SEC.csv", "eim_REC.csv"}) {
        INFO(name);
        REQUIRE(fs::exists(a / name));
        CHECK(slurp(a / name) == slurp(b / name));
    }
    std::istringstream rec(slurp(a / "eim_REC.csv"));
    std::string line;
    std::getline(rec, line);
    CHECK(line.rfind("freq_hz,Y_11_re,Y_11_im", 0) == 0);
    // PLL converter: the sync-dc entry (row 1, column 4) is exactly zero
    std::size_t col = 0, k = 0;
    {
        std::istringstream hs(line);
        std::string h;
        while (std::getline(hs, h, ',')) {
            if (h == "Y_14_re") col = k;
            ++k;
        }
    }
    REQUIRE(col > 0);
    int rows = 0;
    while (std::getline(rec, line)) {
        std::istringstream cs(line);
        std::string cell;
        for (std::size_t c = 0; c <= col + 1; ++c) std::getline(cs, cell, ',');
        CHECK(std::stod(cell) == 0.0);
        ++rows;
    }
    CHECK(rows == 20);
}

TEST_CASE("analyze finds the Case I mode") {
    const fs::path o = scratch("analyze");
    REQUIRE(run("analyze " + config_arg() + " --case case1 --out " + o.string()) == 0);
    std::istringstream modes(slurp(o / "modes.csv"));
    std::string header, first;
    std::getline(modes, header);
    REQUIRE(std::getline(modes, first));
    CHECK(first.back() == '1');
    CHECK(fs::exists(o / "node_pf.csv"));
    CHECK(fs::exists(o / "z_validation.csv"));
}

TEST_CASE("configuration errors exit with 2") {
    const fs::path d = scratch("config");
    CHECK(run("build --config " + edited_config(d, "inertia_s: 1.3,", "inertia_s: 1.3, bogus: 1,").string()) == 2);
    CHECK(run("build --config " + (d / "missing.yaml").string()) == 2);
    CHECK(run("analyze " + config_arg() + " --increment 0.5") == 2);
    CHECK(run("build " + config_arg() + " --case nosuchcase") == 2);
    CHECK(run("build " + config_arg() + " --freq-min 100 --freq-max 10") == 2);
    CHECK(run("frobnicate " + config_arg()) == 2);
}

TEST_CASE("numerical failure exits with 4") {
    const fs::path d = scratch("numerical");
    CHECK(run("build --config " + edited_config(d, "p_pu: 0.82", "p_pu: 1e6").string()) == 4);
}

TEST_CASE("oracle exit codes") {
    CHECK(run("oracle " + config_arg() + " --case case2 --out " + scratch("oracle_ok").string()) == 0);
    const fs::path d = scratch("oracle_short");
    CHECK(run("oracle --config " + edited_config(d, "t_end: 12", "t_end: 0.5").string() + " --case case1") == 3);
}

TEST_CASE("single-converter scan") {
    const fs::path o = scratch("scan");
    REQUIRE(run("scan " + config_arg() +
                " --converter REC --freq-min 100 --freq-max 200 --grid-points 2 --out " + o.string()) == 0);
    CHECK(fs::exists(o / "scan_REC.csv"));
    CHECK_FALSE(fs::exists(o / "scan_SEC.csv"));
    std::istringstream s(slurp(o / "scan_REC.csv"));
    std::string line;
    int rows = -1;
    while (std::getline(s, line)) ++rows;
    CHECK(rows == 2);
    CHECK(run("scan " + config_arg() + " --converter XYZ --grid-points 2") == 2);
}

}
