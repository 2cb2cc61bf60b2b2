#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "philab/cli.hpp"
#include "philab/scenario_io.hpp"

using namespace philab;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(name = "mini"

[source]
type = "lc_filter"
v_source_v = 680
l_f_h = 100e-6
r_f_ohm = 0.1
c_f_f = 0.1e-3

[[load]]
model = "reduced_order"
v_nom_v = 680
p_o_w = 40e3
c_i_f = 1e-6

[phil]
tau1_s = 5e-6
tau2_s = 5e-6
interface_cutoff_hz = 15e3

[solver]
dt_s = 1e-6
t_end_s = 0.01
)";

std::string replace(std::string text, const std::string& from, const std::string& to) {
    const auto at = text.find(from);
    if (at == std::string::npos) throw std::logic_error("fixture edit missed: " + from);
    return text.replace(at, from.size(), to);
}

ErrorCode parse_error_code(const std::string& text, std::size_t* line = nullptr) {
    try {
        (void)parse_scenario_text(text);
    } catch (const ParseError& e) {
        if (line) *line = e.line();
        return e.code();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::ConfigError;
}

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "philab");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("philab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST(Parse, BundledTableOne) {
    const Scenario s = load_scenario("test1_40kw");
    const auto& lc = std::get<LcFilterParams>(s.source);
    EXPECT_EQ(lc.v_source_v, 680.0);
    EXPECT_EQ(lc.l_f_h, 100e-6);
    EXPECT_EQ(lc.c_f_f, 0.1e-3);
    EXPECT_EQ(lc.r_f_ohm, 0.1);
    ASSERT_EQ(s.loads.size(), 1u);
    const auto& inv = std::get<AvgInverterParams>(s.loads[0]);
    EXPECT_EQ(inv.c_i_f, 1e-6);
    EXPECT_EQ(inv.l_o_h, 510e-6);
    EXPECT_EQ(inv.r_o_ohm, 0.07);
    EXPECT_EQ(inv.p_ref_w, 40e3);
    EXPECT_EQ(s.phil.tau1_s, 5e-6);
    EXPECT_EQ(s.phil.tau2_s, 5e-6);
    EXPECT_EQ(s.phil.interface_cutoff_hz, 15e3);
}

TEST(Parse, BundledTableTwo) {
    const Scenario s = load_scenario("test2");
    const auto& b = std::get<BoostParams>(s.source);
    EXPECT_EQ(b.l_h, 50e-6);
    EXPECT_EQ(b.r_l_ohm, 1e-9);
    EXPECT_EQ(b.c_o_f, 47e-6);
    EXPECT_EQ(b.r_co_ohm, 10e-3);
    EXPECT_EQ(b.switching_frequency_hz, 200e3);
    EXPECT_EQ(s.loads.size(), 2u);
}

TEST(Parse, AllBundledValidateAndRoundTrip) {
    const auto names = bundled_scenario_names();
    for (const char* want : {"test1_40kw", "test1_80kw", "test2", "bench5"}) {
        EXPECT_NE(std::find(names.begin(), names.end(), want), names.end()) << want;
    }
    for (auto name : names) {
        const Scenario s = load_scenario(name);
        EXPECT_NO_THROW(validate(s));
        EXPECT_EQ(parse_scenario_text(emit_scenario(s)), s) << name;
    }
}

TEST(Parse, RandomRoundTrip) {
    std::mt19937_64 rng(20261015);
    for (int i = 0; i < 300; ++i) {
        const Scenario s = oracle::random_scenario(rng);
        ASSERT_NO_THROW(validate(s)) << emit_scenario(s);
        const std::string text = emit_scenario(s);
        EXPECT_EQ(parse_scenario_text(text), s) << text;
        EXPECT_EQ(emit_scenario(parse_scenario_text(text)), text);
    }
}

TEST(Parse, Errors) {
    EXPECT_NO_THROW((void)parse_scenario_text(kMinimal));
    std::size_t line = 0;
    EXPECT_EQ(parse_error_code(replace(kMinimal, "c_f_f = 0.1e-3", "c_f_f = 0.1e-3\nbogus_h = 1"), &line),
              ErrorCode::ParseError);
    EXPECT_EQ(line, 9u);
    EXPECT_EQ(parse_error_code(replace(kMinimal, "r_f_ohm = 0.1", "r_f_ohm = 0.1 ohm"), &line), ErrorCode::ParseError);
    EXPECT_EQ(line, 7u);
    EXPECT_EQ(parse_error_code(replace(kMinimal, "[phil]", "[amplifier]")), ErrorCode::ParseError);
    EXPECT_EQ(parse_error_code(replace(kMinimal, "p_o_w = 40e3", "p_o_w = 40e3\np_o_w = 41e3")),
              ErrorCode::ParseError);
    EXPECT_EQ(parse_error_code(replace(kMinimal, "l_f_h = 100e-6\n", "")), ErrorCode::ValidationError);
    EXPECT_EQ(parse_error_code(replace(kMinimal, "[solver]\ndt_s = 1e-6\nt_end_s = 0.01\n", "")),
              ErrorCode::ValidationError);
    // non-integer delay ratio
    EXPECT_EQ(parse_error_code(replace(replace(kMinimal, "tau1_s = 5e-6", "tau1_s = 3e-6"), "dt_s = 1e-6", "dt_s = 2e-6")),
              ErrorCode::ValidationError);
    EXPECT_EQ(parse_error_code(replace(kMinimal, "p_o_w = 40e3", "p_o_w = 0")), ErrorCode::ValidationError);
}

TEST(Parse, MissingFile) {
    try {
        (void)load_scenario("/nonexistent/dir/x.phil");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }
}

TEST(Parse, FileBeatsBundledName) {
    const fs::path dir = scratch("file_wins");
    const fs::path f = dir / "test1_40kw";
    std::ofstream(f) << kMinimal;
    EXPECT_EQ(load_scenario(f.string()).name, "mini");
    EXPECT_EQ(load_scenario("test1_40kw").name, "test1_40kw");
}

TEST(TraceCsv, HeaderDecimationAndFlags) {
    Trace tr(1e-6, 2, 0);
    for (int k = 0; k < 5; ++k) {
        tr.t_s.push_back(k * 1e-6);
        tr.v_dc_bus_v.push_back(680.0 + k);
        tr.i_bus_a.push_back(1.5);
        tr.i_load_a[0].push_back(0.5);
        tr.i_load_a[1].push_back(1.0);
        tr.p_ref_w[0].push_back(1e3);
        tr.p_ref_w[1].push_back(2e3);
        tr.flags.push_back(k == 4 ? (kFlagDiv | kFlagSat) : k == 2 ? kFlagSat : 0);
    }
    std::ostringstream os;
    write_trace_csv(os, tr, 2);
    EXPECT_EQ(os.str(), "t_s,v_dc_bus_V,i_bus_A,i_load0_A,i_load1_A,p_ref0_W,p_ref1_W,flags\n"
                        "0,680,1.5,0.5,1,1000,2000,\n"
                        "2e-06,682,1.5,0.5,1,1000,2000,sat\n"
                        "4e-06,684,1.5,0.5,1,1000,2000,div;sat\n");
}

TEST(Cli, ExitCodesAndOutputs) {
    const fs::path out = scratch("cli");
    EXPECT_EQ(cli({"analyze", "--scenario", "test1_40kw", "--out", (out / "a").string()}), 0);
    EXPECT_EQ(cli({"analyze", "--scenario", "test1_80kw", "--out", (out / "b").string()}), 2);
    for (const char* f : {"report.txt", "report.kv", "open_loop_bode.csv", "open_loop_nyquist.csv", "z_source.csv",
                          "z_load.csv"}) {
        EXPECT_TRUE(fs::exists(out / "a" / f)) << f;
    }
    std::ifstream kv(out / "b" / "report.kv");
    const std::string body((std::istreambuf_iterator<char>(kv)), std::istreambuf_iterator<char>());
    EXPECT_NE(body.find("verdict=Unstable\n"), std::string::npos);

    EXPECT_EQ(cli({"simulate", "--scenario", "/nonexistent.phil", "--out", out.string()}), 1);
    EXPECT_EQ(cli({"simulate", "--scenario", "test1_40kw", "--decimate", "100", "--out", (out / "s").string()}), 0);
    EXPECT_TRUE(fs::exists(out / "s" / "trace.csv"));
    std::ifstream cls(out / "s" / "classification.txt");
    const std::string c((std::istreambuf_iterator<char>(cls)), std::istreambuf_iterator<char>());
    EXPECT_NE(c.find("classification: Stable\n"), std::string::npos);

    EXPECT_EQ(cli({"frobnicate"}), 1);
    EXPECT_EQ(cli({}), 1);
    EXPECT_EQ(cli({"analyze"}), 1);
    EXPECT_EQ(cli({"impedance", "--scenario", "test1_40kw", "--load", "3"}), 1);
    EXPECT_EQ(cli({"bench", "--scenario-a", "bench5", "--scenario-b", "test2", "--steps", "100000"}), 1);
}

TEST(Cli, OutDirFromEnvironment) {
    const fs::path out = scratch("env");
    ::setenv("PHILAB_OUT", out.string().c_str(), 1);
    const int rc = cli({"simulate", "--scenario", "test1_40kw", "--decimate", "1000"});
    ::unsetenv("PHILAB_OUT");
    EXPECT_EQ(rc, 0);
    EXPECT_TRUE(fs::exists(out / "trace.csv"));
}
