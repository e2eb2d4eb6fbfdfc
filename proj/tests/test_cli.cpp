#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <catch_amalgamated.hpp>

#include "mqbqr/config.hpp"

namespace fs = std::filesystem;
using namespace mqbqr;

namespace {

const fs::path kTmp = MQBQR_TEST_TMP;
const fs::path kPresets = MQBQR_TEST_PRESETS;

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CliResult cli(const std::string& args, const std::string& env = "") {
    fs::create_directories(kTmp);
    const fs::path out = kTmp / "stdout.txt", err = kTmp / "stderr.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + std::string(MQBQR_CLI_PATH) + "\" " + args +
                            " > \"" + out.string() + "\" 2> \"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, slurp(out), slurp(err)};
}

fs::path write_config(const std::string& name, const std::string& body) {
    fs::create_directories(kTmp);
    const fs::path p = kTmp / name;
    std::ofstream(p, std::ios::binary) << body;
    return p;
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

}  // namespace

TEST_CASE("validate shipped presets", "[cli]") {
    for (const char* name : {"table2_pv.json", "table3_sim.json", "table4_hw.json"}) {
        const auto r = cli("validate \"" + (kPresets / name).string() + "\"");
        INFO(name << ": " << r.err);
        CHECK(r.code == 0);
        CHECK(r.out == "ok\n");
    }
}

TEST_CASE("validate reports field paths", "[cli]") {
    SECTION("duty out of range") {
        const auto p = write_config("bad_duty.json", R"({"schema": 1, "params": {"D": 1.2}, "simulate": {}})");
        const auto r = cli("validate \"" + p.string() + "\"");
        CHECK(r.code == 1);
        CHECK(r.err.find("params.D") != std::string::npos);
    }
    SECTION("two scenario blocks") {
        const auto p = write_config("two.json", R"({"schema": 1, "simulate": {}, "compare": {"D": 0.5}})");
        const auto r = cli("validate \"" + p.string() + "\"");
        CHECK(r.code == 1);
        CHECK(r.err.find("exactly one scenario") != std::string::npos);
    }
    SECTION("no scenario block") {
        const auto p = write_config("none.json", R"({"schema": 1})");
        CHECK(cli("validate \"" + p.string() + "\"").code == 1);
    }
    SECTION("unknown and mistyped keys") {
        const auto p = write_config("unknown.json",
                                    R"({"schema": 1, "colour": 3, "params": {"L1": "big"}, "compare": {"D": 0.5}})");
        const auto issues = config::validate(p);
        std::set<std::string> paths;
        for (const auto& i : issues) paths.insert(i.path);
        CHECK(paths.count("colour"));
        CHECK(paths.count("params.L1"));
    }
    SECTION("parse error carries line and column") {
        const auto p = write_config("broken.json", "{\n  \"schema\": 1,\n  \"params\": {,\n}\n");
        const auto r = cli("validate \"" + p.string() + "\"");
        CHECK(r.code == 1);
        CHECK(r.err.find("line 3, column") != std::string::npos);
    }
    SECTION("unreadable file") {
        CHECK(cli("validate \"" + (kTmp / "missing.json").string() + "\"").code == 1);
    }
    SECTION("wrong schema version") {
        const auto p = write_config("schema.json", R"({"schema": 2, "compare": {"D": 0.5}})");
        const auto issues = config::validate(p);
        REQUIRE(issues.size() == 1);
        CHECK(issues[0].path == "schema");
    }
    SECTION("missing preset") {
        const auto p = write_config("nopreset.json", R"({"schema": 1, "preset": "nothing_here", "compare": {}})");
        const auto issues = config::validate(p);
        REQUIRE_FALSE(issues.empty());
        CHECK(issues[0].path == "preset");
    }
    SECTION("scenario field paths") {
        const auto p = write_config("scen.json", R"({"schema": 1, "bode": {"f_min": -1, "input": "speed"}})");
        std::set<std::string> paths;
        for (const auto& i : config::validate(p)) paths.insert(i.path);
        CHECK(paths == std::set<std::string>{"bode.f_min", "bode.input"});
    }
}

TEST_CASE("run simulate preset", "[cli]") {
    const fs::path dir = kTmp / "sim";
    fs::remove_all(dir);
    const auto r = cli("run \"" + (kPresets / "table3_sim.json").string() + "\"", "MQBQR_OUTPUT_DIR=\"" + dir.string() + "\"");
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto listed = lines(r.out);
    CHECK(listed.size() == 5);
    for (const auto& f : listed) {
        CHECK(fs::exists(f));
        CHECK(fs::path(f).parent_path() == dir);
    }
    for (const auto& e : fs::directory_iterator(dir))
        CHECK(std::find(listed.begin(), listed.end(), e.path().string()) != listed.end());
    const auto wave = csv::parse(slurp(dir / "waveform.csv"));
    CHECK(wave[0] == std::vector<std::string>{"t", "iL1", "iL2", "iL3", "iL4", "vC1", "vC2", "vCo", "I_Q", "phase"});
    CHECK(wave.size() == 131);
    const auto meas = csv::parse(slurp(dir / "measurements.csv"));
    CHECK(meas[0] == std::vector<std::string>{"quantity", "value", "unit"});
    CHECK(meas[1][0] == "avg_Vo");
    const auto sw = csv::parse(slurp(dir / "sweep.csv"));
    CHECK(sw.size() == 5);
}

TEST_CASE("run compare scenario", "[cli]") {
    const fs::path dir = kTmp / "cmp";
    fs::remove_all(dir);
    const auto p = write_config("compare.json", R"({"schema": 1, "output_dir": "cmp", "compare": {"D": 0.5}})");
    const auto r = cli("run \"" + p.string() + "\"");
    REQUIRE(r.code == 0);
    const auto rows = csv::parse(slurp(dir / "comparison.csv"));
    CHECK(rows.size() == 8);
    CHECK(fs::exists(dir / "comparison.md"));
}

TEST_CASE("run losses preset", "[cli]") {
    const fs::path dir = kTmp / "loss";
    fs::remove_all(dir);
    const auto r = cli("run \"" + (kPresets / "table4_hw.json").string() + "\"", "MQBQR_OUTPUT_DIR=\"" + dir.string() + "\"");
    REQUIRE(r.code == 0);
    const auto rows = csv::parse(slurp(dir / "losses.csv"));
    CHECK(rows.back() == std::vector<std::string>{"total", "7.03", "100"});
    const auto eff = csv::parse(slurp(dir / "efficiency.csv"));
    bool found = false;
    for (const auto& row : eff)
        if (row[0] == "efficiency_reference") {
            found = true;
            CHECK(std::abs(std::stod(row[1]) - 96.56) < 0.05);
        }
    CHECK(found);
}

TEST_CASE("run design, stress and bode scenarios", "[cli]") {
    for (const char* body : {
             R"({"schema": 1, "output_dir": "misc", "preset": "table2_pv"})",
             R"({"schema": 1, "output_dir": "misc", "stress": {"D": 0.5, "Io": 1}})",
             R"({"schema": 1, "output_dir": "misc", "params": {"parasitics": {"RL_copper": 2}}, "bode": {"points": 20}})",
         }) {
        const auto p = write_config("misc.json", body);
        const auto r = cli("run \"" + p.string() + "\"");
        INFO(body << "\n" << r.err);
        CHECK(r.code == 0);
        CHECK_FALSE(lines(r.out).empty());
    }
    const auto stress = csv::parse(slurp(kTmp / "misc" / "stress.csv"));
    bool found = false;
    for (const auto& row : stress)
        if (row[0] == "I_Q") {
            found = true;
            CHECK(row[1] == "3.5");
        }
    CHECK(found);
}

TEST_CASE("numerical failure exit code", "[cli]") {
    const auto p = write_config("ideal.json", R"({"schema": 1, "output_dir": "ideal", "simulate": {}})");
    const auto r = cli("run \"" + p.string() + "\"");
    CHECK(r.code == 2);
    CHECK(r.err.find("spectral radius 1") != std::string::npos);
    const auto v = write_config("bad.json", R"({"schema": 1, "params": {"R": 0}, "simulate": {}})");
    CHECK(cli("run \"" + v.string() + "\"").code == 1);
}

TEST_CASE("identical config and seed give identical files", "[cli]") {
    const std::string body = R"({
  "schema": 1, "seed": 9, "csv_precision": 17,
  "params": {"parasitics": {"RL_copper": 2}},
  "train": {"samples_per_scenario": 200, "epochs": 20,
            "scenarios": [{"Vref": 52, "horizon": 0.05}, {"Vref": 50, "horizon": 0.05, "start_duty": 0.4}]}
})";
    const auto p = write_config("train.json", body);
    std::map<std::string, std::string> first;
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = kTmp / ("det" + std::to_string(run));
        fs::remove_all(dir);
        const auto r = cli("run \"" + p.string() + "\"", "MQBQR_OUTPUT_DIR=\"" + dir.string() + "\"");
        REQUIRE(r.code == 0);
        for (const auto& e : fs::directory_iterator(dir)) {
            const std::string name = e.path().filename().string();
            if (run == 0) first[name] = slurp(e.path());
            else CHECK(first.at(name) == slurp(e.path()));
        }
    }
    CHECK(first.size() == 3);
}
