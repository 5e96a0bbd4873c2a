#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "sharecast/csv.hpp"
#include "sharecast/evaluation.hpp"
#include "sharecast/experiments.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SHARECAST_FIXTURE_DIR;
const std::string kCli = SHARECAST_CLI_PATH;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sharecast_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = "\"" + kCli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string data_flag() { return "--data-dir \"" + kFixtures.string() + "\""; }

}  // namespace

TEST(Cli, CleanFixtureSeasonIsStable) {
    const auto out = scratch("clean");
    ASSERT_EQ(run("clean --season 2016-17 --kind per-game " + data_flag() + " --out \"" +
                      out.string() + "\"",
                  out / "stdout.txt"),
              0)
        << slurp(out / "stdout.txt");
    const auto csv_path = out / "cleaned_2016-17_per-game.csv";
    ASSERT_TRUE(fs::exists(csv_path));
    std::ifstream in(csv_path);
    const auto table = sharecast::csv::read(in);
    EXPECT_EQ(table.rows.size(), 443u);
    const auto first = slurp(csv_path);
    ASSERT_EQ(run("clean --season 2016-17 --kind per-game " + data_flag() + " --out \"" +
                      out.string() + "\"",
                  out / "stdout2.txt"),
              0);
    EXPECT_EQ(slurp(csv_path), first);
}

TEST(Cli, MissingPayrollExitsWithTwo) {
    const auto out = scratch("missing");
    const auto data = out / "data";
    fs::create_directories(data);
    fs::copy(kFixtures / "2017-18", data / "2017-18", fs::copy_options::recursive);
    fs::remove(data / "2017-18" / "payrolls.csv");
    const int code = run("clean --season 2017-18 --data-dir \"" + data.string() + "\" --out \"" +
                             out.string() + "\"",
                         out / "stdout.txt");
    EXPECT_EQ(code, 2);
    EXPECT_NE(slurp(out / "stdout.txt").find("payrolls.csv"), std::string::npos);
}

TEST(Cli, BadFlagExitsWithTwo) {
    const auto out = scratch("badflag");
    EXPECT_EQ(run("regress --k notanumber", out / "stdout.txt"), 2);
}

TEST(Cli, RegressSmokeRun) {
    const auto out = scratch("regress");
    ASSERT_EQ(run("regress --season 2016-17 --kind advanced --k 5 --reps 2 --trees 20 --n-lambda 20 "
                  "--inner-k 5 --seed 7 " +
                      data_flag() + " --out \"" + out.string() + "\"",
                  out / "stdout.txt"),
              0)
        << slurp(out / "stdout.txt");
    for (const char* mode : {"with", "without"}) {
        const auto p = out / (std::string("regress_2016-17_advanced_") + mode + "_lasso.json");
        ASSERT_TRUE(fs::exists(p)) << p;
        const auto j = nlohmann::json::parse(slurp(p));
        EXPECT_EQ(j["seed"].get<std::uint64_t>(), 7u);
        EXPECT_TRUE(j.contains("config_hash"));
        EXPECT_TRUE(j.contains("run_config_hash"));
        EXPECT_EQ(j["n"].get<int>(), 443);
    }
    const auto md = slurp(out / "regress_report.md");
    EXPECT_NE(md.find("With LASSO"), std::string::npos);
    EXPECT_NE(md.find("Without LASSO"), std::string::npos);
    EXPECT_NE(md.find("seed 7"), std::string::npos);
}

TEST(Cli, ClassifySmokeRun) {
    const auto out = scratch("classify");
    ASSERT_EQ(run("classify --season 2017-18 --kind per-36 --lasso-only --k 5 --reps 2 --trees 20 "
                  "--n-lambda 20 --inner-k 5 " +
                      data_flag() + " --out \"" + out.string() + "\"",
                  out / "stdout.txt"),
              0)
        << slurp(out / "stdout.txt");
    const auto j = nlohmann::json::parse(slurp(out / "classify_2017-18_per-36_with_lasso.json"));
    for (const auto& h : j["hyperparameters"]) {
        const double a = h["auc"]["mean"].get<double>();
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
    }
    EXPECT_NE(slurp(out / "classify_report.md").find("Class counts"), std::string::npos);
}

TEST(Cli, ValidateReportsBothMetrics) {
    const auto out = scratch("validate");
    ASSERT_EQ(run("validate --season 2016-17 --season 2017-18 --kind per-game --trees 30 " +
                      data_flag() + " --out \"" + out.string() + "\"",
                  out / "stdout.txt"),
              0)
        << slurp(out / "stdout.txt");
    const auto j = nlohmann::json::parse(slurp(out / "validate.json"));
    ASSERT_EQ(j["results"].size(), 1u);
    EXPECT_TRUE(j["results"][0].contains("pve"));
    EXPECT_TRUE(j["results"][0].contains("pcc"));
}

TEST(Cli, DemoWithCustomLevels) {
    const auto out = scratch("demo");
    ASSERT_EQ(run("demo-overfit --levels 1 3 5 --n 120 --p 6 --out \"" + out.string() + "\"",
                  out / "stdout.txt"),
              0)
        << slurp(out / "stdout.txt");
    std::ifstream in(out / "demo_overfit.csv");
    const auto r = sharecast::read_demo_csv(in);
    EXPECT_EQ(r.levels, (std::vector<std::size_t>{1, 3, 5}));
    EXPECT_EQ(r.internal_pcc.size(), 3u);
    EXPECT_EQ(r.external_pve.size(), 3u);
}

TEST(Cli, DensityPerSeason) {
    const auto out = scratch("density");
    ASSERT_EQ(run("density --season 2016-17 --season 2017-18 --season 2018-19 " + data_flag() +
                      " --out \"" + out.string() + "\"",
                  out / "stdout.txt"),
              0)
        << slurp(out / "stdout.txt");
    for (const char* s : {"2016-17", "2017-18", "2018-19"}) {
        std::ifstream in(out / (std::string("density_") + s + ".csv"));
        const auto t = sharecast::csv::read(in);
        sharecast::DensityCurve c;
        for (const auto& row : t.rows) {
            c.grid.push_back(*sharecast::csv::parse_number(row.cells[0]));
            c.density.push_back(*sharecast::csv::parse_number(row.cells[1]));
        }
        EXPECT_NEAR(sharecast::integrate(c), 1.0, 1e-3) << s;
    }
}

TEST(Cli, EmptySeasonIsAnError) {
    const auto out = scratch("empty");
    const auto dir = out / "data" / "2016-17";
    fs::create_directories(dir);
    for (const auto& entry : fs::directory_iterator(kFixtures / "2016-17")) {
        std::ifstream in(entry.path());
        std::string header;
        std::getline(in, header);
        std::ofstream(dir / entry.path().filename()) << header << "\n";
    }
    const int code = run("density --season 2016-17 --data-dir \"" + (out / "data").string() +
                             "\" --out \"" + out.string() + "\"",
                         out / "stdout.txt");
    EXPECT_EQ(code, 2) << slurp(out / "stdout.txt");
}
