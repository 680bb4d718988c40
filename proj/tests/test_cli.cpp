#include <bioage/calibration.hpp>
#include <bioage/cli/csv.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

using namespace bioage;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
};

// Runs the CLI through the shell; stderr is discarded.
Outcome invoke(const std::string& args, const std::string& env = "")
{
    const std::string cmd = env + (env.empty() ? "" : " ") + BIOAGE_CLI_PATH + std::string(" ") + args + " 2>/dev/null";
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p)
        return {-1, ""};
    std::string out;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0)
        out.append(buf.data(), n);
    const int status = ::pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::vector<std::vector<std::string>> parse(const std::string& text)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ','))
            cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

class Scratch : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("bioage_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

    fs::path dir_;
};

} // namespace

TEST(Cli, ErlTableParsesAndIsMonotone)
{
    const Outcome r = invoke("table erl -o -");
    ASSERT_EQ(r.code, 0);
    const auto rows = parse(r.out);
    ASSERT_EQ(rows.size(), 12u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"b_age", "c60", "c65", "c70", "c75", "c80", "c85", "c90", "c95"}));
    EXPECT_EQ(rows[1][0], "45");
    EXPECT_EQ(rows[3][1], "27.50");
    for (std::size_t col = 1; col < 9; ++col)
        for (std::size_t i = 2; i < rows.size(); ++i)
            EXPECT_LT(std::stod(rows[i][col]), std::stod(rows[i - 1][col])) << i << "," << col;
}

TEST(Cli, SpendingTableIncreasesInBiologicalAge)
{
    const Outcome r = invoke("table spending -o -");
    ASSERT_EQ(r.code, 0);
    const auto rows = parse(r.out);
    ASSERT_EQ(rows.size(), 12u);
    EXPECT_EQ(rows[0][0], "b_age");
    for (std::size_t col = 1; col < 9; ++col)
        for (std::size_t i = 2; i < rows.size(); ++i)
            EXPECT_GT(std::stod(rows[i][col]), std::stod(rows[i - 1][col])) << i << "," << col;
}

TEST_F(Scratch, TableWritesIntoOutputDirectory)
{
    ASSERT_EQ(invoke("table erl --out_dir " + dir_.string()).code, 0);
    EXPECT_TRUE(fs::exists(path("table_erl.csv")));
    std::ifstream f(path("table_erl.csv"));
    const std::string file((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    EXPECT_EQ(invoke("table erl -o -").out, file);
}

TEST(Cli, SimulateIsByteIdenticalAcrossThreadCounts)
{
    const Outcome a = invoke("simulate --n_paths 1500 --threads 1 -o -");
    const Outcome b = invoke("simulate --n_paths 1500 --threads 3 -o -");
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    const auto rows = parse(a.out);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"estimand", "value", "std_error", "n_paths", "seed"}));
    EXPECT_EQ(rows[1][0], "erl_60_60");
    EXPECT_EQ(rows[1][3], "1500");
    EXPECT_EQ(rows[1][4], "20240601");
    EXPECT_NE(a.out, invoke("simulate --n_paths 1500 --seed 7 -o -").out);
}

TEST_F(Scratch, SimulateWritesPathRecords)
{
    ASSERT_EQ(invoke("simulate --n_paths 500 --paths 3 --out_dir " + dir_.string()).code, 0);
    const auto rows = bioage::cli::read_csv(path("paths.csv"));
    ASSERT_GT(rows.size(), 3u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"path", "t", "b_age", "death_time"}));
    EXPECT_TRUE(fs::exists(path("simulate.csv")));
}

TEST(Cli, QueriesMatchTable)
{
    const Outcome e = invoke("erl-query --c_age 60 --b_age 55");
    ASSERT_EQ(e.code, 0);
    const auto rows = parse(e.out);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_NEAR(std::stod(rows[1][2]), 27.50, 0.005);
    const Outcome s = invoke("spend-query --c_age 85 --b_age 85");
    ASSERT_EQ(s.code, 0);
    EXPECT_GT(std::stod(parse(s.out)[1][3]), 0.0);
}

TEST_F(Scratch, ConfigFileEnvironmentAndFlagPrecedence)
{
    write("low.ini", "sigma = 0.0\n");
    write("bad.ini", "sigmaa = 0.1\n");
    const std::string direct = invoke("erl-query --c_age 70 --b_age 75 --sigma 0.0").out;
    const std::string canonical = invoke("erl-query --c_age 70 --b_age 75").out;
    ASSERT_NE(direct, canonical);
    EXPECT_EQ(invoke("erl-query --c_age 70 --b_age 75 --config " + path("low.ini")).out, direct);
    EXPECT_EQ(invoke("erl-query --c_age 70 --b_age 75", "BIOAGE_CONFIG=" + path("low.ini")).out, direct);
    // flag beats file
    EXPECT_EQ(invoke("erl-query --c_age 70 --b_age 75 --sigma 0.3 --config " + path("low.ini")).out, canonical);
    EXPECT_EQ(invoke("erl-query --c_age 70 --b_age 75 --config " + path("bad.ini")).code, 2);
}

TEST(Cli, BandStartsWithZeroWidth)
{
    const Outcome r = invoke("band --t_step 25 --t_max 25 -o -");
    ASSERT_EQ(r.code, 0);
    const auto rows = parse(r.out);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0][0], "t");
    const std::size_t lo = 2, hi = 4;
    EXPECT_EQ(rows[0][lo], "b_q05");
    EXPECT_EQ(rows[0][hi], "b_q95");
    EXPECT_EQ(rows[1][lo], rows[1][hi]);
    EXPECT_GT(std::stod(rows[2][hi]) - std::stod(rows[2][lo]), 3.0);
    EXPECT_LT(std::stod(rows[2][lo]), 85.0);
}

TEST(Cli, ExitCodes)
{
    EXPECT_EQ(invoke("").code, 2);
    EXPECT_EQ(invoke("--help").code, 0);
    EXPECT_EQ(invoke("table nonsense").code, 2);
    EXPECT_EQ(invoke("erl-query --c_age 70 --b_age 75 --sigma -1").code, 2);
    EXPECT_EQ(invoke("erl-query --c_age 70 --b_age 75 --lambdaT 0.001").code, 2);
    EXPECT_EQ(invoke("table --gamma 0.1 --r 2 -o -").code, 3);
    // every path dies long before t=25
    EXPECT_EQ(invoke("simulate --lambda0 5000 --lambdaT 1e6 --n_paths 500 -o -").code, 1);
}

TEST_F(Scratch, CalibrateExitCodes)
{
    write("one_row.csv", "c_age,rate_lo,rate_hi\n60,0.05,0.06\n");
    EXPECT_EQ(invoke("calibrate --ci_file " + path("one_row.csv") + " -o -").code, 2);
    EXPECT_EQ(invoke("calibrate --ci_file " + path("missing.csv") + " -o -").code, 2);

    const CalibrationSetup s;
    const auto [first, second] = synthesize_cis(s, 0.3, 60.0, 60.0, 2.0, 85.0);
    std::ostringstream ci;
    ci.precision(17);
    ci << "c_age,rate_lo,rate_hi\n"
       << first.c_age << ',' << first.rate_lo << ',' << first.rate_hi << '\n'
       << second.c_age << ',' << second.rate_lo << ',' << second.rate_hi << '\n';
    write("ci.csv", ci.str());
    EXPECT_EQ(invoke("calibrate --ci_file " + path("ci.csv") + " --sigma_hi 0.1 --tol 0.01 -o -").code, 4);

    const Outcome ok = invoke("calibrate --ci_file " + path("ci.csv") + " --tol 0.01 -o -");
    ASSERT_EQ(ok.code, 0);
    const auto rows = parse(ok.out);
    ASSERT_GT(rows.size(), 1u);
    EXPECT_EQ(rows[1][0], "sigma_hat");
    EXPECT_NEAR(std::stod(rows[1][1]), 0.3, 0.02);
}

TEST(Cli, ApproxAgreesWithPdeAtLowVolatility)
{
    const Outcome r = invoke("approx --sigma 0.01 --t_step 10 -o -");
    ASSERT_EQ(r.code, 0);
    const auto rows = parse(r.out);
    ASSERT_GT(rows.size(), 3u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "c_age", "b_age", "spend_approx", "spend_pde"}));
    for (std::size_t i = 1; i < rows.size(); ++i)
        EXPECT_NEAR(std::stod(rows[i][3]), std::stod(rows[i][4]), 0.05) << rows[i][0];
}
