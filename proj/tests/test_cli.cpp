#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int status{-1};
    std::string out;
};

Outcome sim(const std::string& args)
{
    const fs::path log = fs::temp_directory_path() / ("bicopter_cli_" + std::to_string(::getpid()) + ".log");
    const std::string cmd = std::string(BICOPTER_SIM_PATH) + " " + args + " > " + log.string() + " 2>&1";
    Outcome o;
    const int raw = std::system(cmd.c_str());
    o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    o.out = ss.str();
    fs::remove(log);
    return o;
}

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("bicopter_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Cli, PresetsListsAll)
{
    const Outcome o = sim("presets");
    EXPECT_EQ(o.status, 0);
    for (const char* name : {"testbed-8kn", "testbed-9kn", "testbed-10kn", "flight-indoor"}) {
        EXPECT_NE(o.out.find(name), std::string::npos) << name;
    }
}

TEST(Cli, TuneByCharacteristicAndDamping)
{
    Outcome o = sim("tune --axis roll --char 331 1950");
    EXPECT_EQ(o.status, 0);
    EXPECT_NE(o.out.find("K_p=1.005"), std::string::npos) << o.out;
    EXPECT_NE(o.out.find("K_d=0.170"), std::string::npos) << o.out;
    EXPECT_NE(o.out.find("-325"), std::string::npos) << o.out;

    o = sim("tune --axis pitch --zeta 1 --wn 10");
    EXPECT_EQ(o.status, 0) << o.out;
    EXPECT_NE(o.out.find("s^2+20s+100"), std::string::npos) << o.out;
}

TEST(Cli, UsageErrorsExitTwo)
{
    EXPECT_EQ(sim("").status, 2);
    EXPECT_EQ(sim("fly").status, 2);
    EXPECT_EQ(sim("presets --bogus").status, 2);
    EXPECT_EQ(sim("tune --axis roll").status, 2);
    EXPECT_EQ(sim("tune --axis roll --char 331 1950 --zeta 1").status, 2);
    EXPECT_EQ(sim("tune --axis roll --char -1 2").status, 2);
    EXPECT_EQ(sim("serve --port 1 no-such-scenario.json").status, 2);
}

TEST(Cli, BadScenarioExitsTwo)
{
    const Outcome missing = sim("run /nonexistent/scenario.json");
    EXPECT_EQ(missing.status, 2);
    EXPECT_NE(missing.out.find("cannot open"), std::string::npos) << missing.out;

    const fs::path bad = scratch("bad.json");
    std::ofstream(bad) << R"({"version": 1, "dt": -1})";
    EXPECT_EQ(sim("run " + bad.string()).status, 2);
    std::ofstream(bad) << R"({"version": 1, "colour": "red"})";
    EXPECT_EQ(sim("run " + bad.string()).status, 2);
}

TEST(Cli, DivergenceExitsThree)
{
    const fs::path f = scratch("diverge.json");
    std::ofstream(f) << R"({"version": 1, "mode": "freeflight", "duration": 1.0,
                           "initial": {"velocity": [1e308, 0, 0]}})";
    const Outcome o = sim("run " + f.string());
    EXPECT_EQ(o.status, 3) << o.out;
    EXPECT_NE(o.out.find("diverged"), std::string::npos) << o.out;
}

TEST(Cli, RunWritesCsvAndReport)
{
    const fs::path csv = scratch("run.csv"), report = scratch("run.json");
    const std::string scenario = std::string(BICOPTER_SCENARIO_DIR) + "/roll-recovery.json";
    const Outcome o = sim("run " + scenario + " --out " + csv.string() + " --report " + report.string());
    ASSERT_EQ(o.status, 0) << o.out;
    const std::string text = slurp(csv);
    EXPECT_EQ(text.rfind("k,t,phi_true", 0), 0u);
    EXPECT_NE(slurp(report).find("\"roll\""), std::string::npos);

    const fs::path again = scratch("again.csv");
    ASSERT_EQ(sim("run " + scenario + " --out " + again.string()).status, 0);
    EXPECT_EQ(slurp(again), text);
}
