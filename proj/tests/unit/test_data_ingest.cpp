#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sharecast/data_ingest.hpp"

using namespace sharecast;
namespace fs = std::filesystem;

namespace {

std::vector<RawStatRow> stats(const std::string& text, StatKind kind = StatKind::PerGame,
                              const std::string& season = "2016-17") {
    std::istringstream in(text);
    return parse_stats_csv(in, kind, season);
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

PlayerSeasonRecord record(const std::string& name, const std::string& team, double salary,
                          int games = 50) {
    PlayerSeasonRecord r;
    r.player_name = name;
    r.season = "2016-17";
    r.team = team;
    r.salary_usd = salary;
    r.games = games;
    return r;
}

fs::path fixture(const std::string& season, const std::string& file) {
    return fs::path(SHARECAST_FIXTURE_DIR) / season / file;
}

}  // namespace

TEST(CsvReader, QuotesBomCommentsAndMultilineFields) {
    std::istringstream in("\xEF\xBB\xBF# exported\nPlayer,Note\n\"Doe, J.\",\"two\nlines\"\n\n\"say \"\"hi\"\"\",x\n");
    const auto t = csv::read(in);
    ASSERT_EQ(t.header, (std::vector<std::string>{"Player", "Note"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0].cells[0], "Doe, J.");
    EXPECT_EQ(t.rows[0].cells[1], "two\nlines");
    EXPECT_EQ(t.rows[1].cells[0], "say \"hi\"");
}

TEST(CsvReader, FieldCountMismatchIsAnError) {
    std::istringstream in("a,b\n1,2,3\n");
    EXPECT_THROW(csv::read(in), InputError);
}

TEST(ParseStats, MapsFieldsDirectly) {
    const auto rows = stats("Player,Tm,G,GS,MP,PTS\nA. Player,BOS,70,70,32.1,14.0\n");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].player_name, "A. Player");
    EXPECT_EQ(rows[0].team, "BOS");
    EXPECT_EQ(rows[0].games, 70);
    EXPECT_EQ(rows[0].games_started, 70);
    EXPECT_DOUBLE_EQ(rows[0].minutes, 32.1);
    ASSERT_EQ(rows[0].features.size(), 1u);
    EXPECT_EQ(rows[0].features[0].name, "PTS");
    EXPECT_EQ(rows[0].features[0].value, 14.0);
}

TEST(ParseStats, EmptyCellIsNull) {
    const auto rows = stats("Player,Tm,G,MP,3P%,PTS\nA. Player,BOS,70,32.1,,14.0\n");
    ASSERT_EQ(rows[0].features.size(), 2u);
    EXPECT_EQ(rows[0].features[0].name, "3P%");
    EXPECT_FALSE(rows[0].features[0].value.has_value());
}

TEST(ParseStats, NonNumericCellNamesColumnAndLine) {
    EXPECT_EQ(error_of([] { stats("Player,Tm,G,GS,MP,PTS\nA. Player,BOS,seventy,70,32.1,14.0\n"); }),
              "non-numeric value in column G, line 2");
}

TEST(ParseStats, MissingMandatoryColumnNamed) {
    EXPECT_NE(error_of([] { stats("Player,Tm,GS,MP\nA,BOS,1,2\n"); }).find("column G"),
              std::string::npos);
    EXPECT_NE(error_of([] { stats("Player,G,MP\nA,1,2\n"); }).find("column Tm"), std::string::npos);
    EXPECT_NE(error_of([] { stats("Tm,G,MP\nBOS,1,2\n"); }).find("column Player"), std::string::npos);
    EXPECT_NE(error_of([] { stats("Player,Tm,G\nA,BOS,1\n"); }).find("column MP"), std::string::npos);
}

TEST(ParseStats, RowInvariants) {
    EXPECT_THROW(stats("Player,Tm,G,GS,MP\nA,BOS,10,11,5\n"), InputError);
    EXPECT_THROW(stats("Player,Tm,G,MP,FG%\nA,BOS,10,5,1.2\n"), InputError);
    EXPECT_THROW(stats("Player,Tm,G,MP,TS%\nA,BOS,10,5,-0.1\n", StatKind::Advanced), InputError);
    EXPECT_NO_THROW(stats("Player,Tm,G,MP,FG%\nA,BOS,10,5,1.0\n"));
}

TEST(ParseStats, KindSpecificColumns) {
    EXPECT_NO_THROW(stats("Player,Tm,G,MP,eFG%\nA,BOS,10,5,0.5\n", StatKind::PerGame));
    EXPECT_THROW(stats("Player,Tm,G,MP,eFG%\nA,BOS,10,5,0.5\n", StatKind::Per36), InputError);
    EXPECT_NO_THROW(stats("Player,Tm,G,MP,ORtg,DRtg\nA,BOS,10,5,110,105\n", StatKind::Per100));
    EXPECT_THROW(stats("Player,Tm,G,MP,ORtg\nA,BOS,10,5,110\n", StatKind::Advanced), InputError);
}

TEST(ParseStatKind, RoundTrip) {
    for (auto k : kAllStatKinds) EXPECT_EQ(parse_stat_kind(to_string(k)), k);
    EXPECT_THROW(parse_stat_kind("per-48"), InputError);
}

TEST(NormalizeName, FoldsDiacriticsCaseAndSpacing) {
    EXPECT_EQ(normalize_name("Nikola Jokić"), normalize_name("nikola  jokic"));
    EXPECT_EQ(normalize_name("Tomáš Satoranský"), "tomas satoransky");
    EXPECT_EQ(normalize_name("Ersan İlyasova"), "ersan ilyasova");
    EXPECT_EQ(normalize_name("Dennis Schröder"), "dennis schroder");
    EXPECT_NE(normalize_name("Tim Hardaway Jr."), normalize_name("Tim Hardaway"));
}

TEST(ParseOthers, SalaryPayrollExperience) {
    std::istringstream sal("Player,Tm,Salary\nA,bos,100\nB,BOS,0\nC,NYK,\n");
    const auto s = parse_salary_csv(sal, "2016-17");
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].team, "BOS");

    std::istringstream pay("Tm,Payroll\nBOS,100\nBOS,200\n");
    EXPECT_THROW(parse_payroll_csv(pay, "2016-17"), InputError);
    std::istringstream pay0("Tm,Payroll\nBOS,0\n");
    EXPECT_THROW(parse_payroll_csv(pay0, "2016-17"), InputError);

    std::istringstream exp("Player,EXP\nA,26\n");
    EXPECT_THROW(parse_experience_csv(exp, "2016-17"), InputError);
    std::istringstream exp2("Player,EXP\nA,-1\n");
    EXPECT_THROW(parse_experience_csv(exp2, "2016-17"), InputError);
}

namespace {

struct Sources {
    std::vector<RawStatRow> stats;
    std::vector<SalaryRow> salaries;
    std::vector<PayrollRow> payrolls;
    std::vector<ExperienceRow> experience;

    std::vector<PlayerSeasonRecord> merge(CleaningLog* log = nullptr) const {
        return merge_sources(stats, salaries, payrolls, experience, "2016-17", log);
    }
};

Sources three_players() {
    Sources s;
    s.stats = stats(
        "Player,Tm,G,MP,PTS\n"
        "Ann,BOS,70,30,20\n"
        "Bea,NYK,60,25,15\n"
        "Cid,BOS,50,20,10\n");
    s.salaries = {{"Ann", "2016-17", "BOS", 10}, {"Bea", "2016-17", "NYK", 20},
                  {"Cid", "2016-17", "BOS", 30}};
    s.payrolls = {{"BOS", "2016-17", 100}, {"NYK", "2016-17", 100}};
    s.experience = {{"Ann", "2016-17", 3}, {"Bea", "2016-17", 4}, {"Cid", "2016-17", 5}};
    return s;
}

}  // namespace

TEST(MergeSources, AllPresentGivesAllRecords) {
    const auto recs = three_players().merge();
    ASSERT_EQ(recs.size(), 3u);
    EXPECT_EQ(recs[0].player_name, "Ann");
    EXPECT_EQ(recs[1].experience_years, 4);
    EXPECT_EQ(recs[2].payroll_usd, 100);
}

TEST(MergeSources, TeamSwitchKeepsSalaryTeamRow) {
    Sources s;
    s.stats = stats(
        "Player,Tm,G,MP,PTS\n"
        "Dan,TOT,60,30,20\n"
        "Dan,CLE,20,30,11\n"
        "Dan,BOS,40,30,22\n");
    s.salaries = {{"Dan", "2016-17", "BOS", 10}};
    s.payrolls = {{"BOS", "2016-17", 100}};
    s.experience = {{"Dan", "2016-17", 2}};
    CleaningLog log;
    const auto recs = s.merge(&log);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].team, "BOS");
    EXPECT_EQ(recs[0].games, 40);
    EXPECT_EQ(recs[0].features[0].value, 22.0);
    EXPECT_EQ(log.tot_rows_discarded, 1u);
    EXPECT_EQ(log.team_switch_rows_discarded, 1u);
}

TEST(MergeSources, IntersectionRule) {
    auto s = three_players();
    s.salaries.erase(s.salaries.begin() + 1);  // Bea has no salary
    s.experience.erase(s.experience.begin() + 2);  // Cid has no experience
    CleaningLog log;
    const auto recs = s.merge(&log);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].player_name, "Ann");
    EXPECT_EQ(log.dropped_no_salary, 1u);
    EXPECT_EQ(log.dropped_no_experience, 1u);
}

TEST(MergeSources, ErrorsListTeamsAndDuplicates) {
    auto s = three_players();
    s.payrolls.pop_back();
    EXPECT_NE(error_of([&] { s.merge(); }).find("NYK"), std::string::npos);

    auto d = three_players();
    d.salaries.push_back({"ann", "2016-17", "BOS", 5});
    EXPECT_THROW(d.merge(), InputError);
}

TEST(MergeSources, OtherSeasonsIgnoredAndAccentsMatched) {
    Sources s;
    s.stats = stats("Season,Player,Tm,G,MP\n2015-16,Old,BOS,50,10\n2016-17,Nikola Jokić,DEN,70,30\n");
    s.salaries = {{"Nikola Jokic", "2016-17", "DEN", 5}};
    s.payrolls = {{"DEN", "2016-17", 100}};
    s.experience = {{"Nikola Jokic", "2016-17", 2}};
    CleaningLog log;
    const auto recs = s.merge(&log);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(log.other_season_rows, 1u);
}

TEST(Clean, StrictlyLessThanRule) {
    std::vector<PlayerSeasonRecord> r{record("a", "X", 1, 5), record("b", "X", 1, 10),
                                      record("c", "X", 1, 82)};
    const auto out = clean(r);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].games, 10);
    EXPECT_EQ(out[1].games, 82);
    EXPECT_EQ(clean(r, 0).size(), 3u);
    EXPECT_EQ(clean(clean(r)).size(), clean(r).size());
}

TEST(SalaryShares, CorrectionBranch) {
    std::vector<PlayerSeasonRecord> r{record("a", "T", 60), record("b", "T", 50), record("c", "T", 40)};
    CleaningLog log;
    const auto out = compute_salary_shares(r, {{"T", "2016-17", 100}}, &log);
    EXPECT_DOUBLE_EQ(out[0].effective_payroll, 150);
    EXPECT_DOUBLE_EQ(out[0].salary_share, 0.4);
    EXPECT_DOUBLE_EQ(out[1].salary_share, 50.0 / 150.0);
    EXPECT_DOUBLE_EQ(out[2].salary_share, 40.0 / 150.0);
    EXPECT_EQ(out[0].payroll_usd, 100);
    EXPECT_EQ(log.payroll_corrected_teams, std::vector<std::string>{"T"});
}

TEST(SalaryShares, NoCorrectionBranch) {
    std::vector<PlayerSeasonRecord> r{record("a", "T", 60), record("b", "T", 50), record("c", "T", 40)};
    CleaningLog log;
    const auto out = compute_salary_shares(r, {{"T", "2016-17", 200}}, &log);
    EXPECT_DOUBLE_EQ(out[0].salary_share, 0.30);
    EXPECT_DOUBLE_EQ(out[1].salary_share, 0.25);
    EXPECT_DOUBLE_EQ(out[2].salary_share, 0.20);
    EXPECT_TRUE(log.payroll_corrected_teams.empty());
}

TEST(SalaryShares, SingleTopEarner) {
    std::vector<PlayerSeasonRecord> r{record("h", "HOU", 29.18)};
    const auto out = compute_salary_shares(r, {{"HOU", "2016-17", 100}});
    EXPECT_DOUBLE_EQ(out[0].salary_share, 0.2918);
    EXPECT_EQ(out[0].share_class, ShareClass::High);
}

TEST(ShareClass, LeftClosedBands) {
    EXPECT_EQ(label_share_class(0.0499), ShareClass::Low);
    EXPECT_EQ(label_share_class(0.05), ShareClass::High);
    EXPECT_EQ(label_share_class(0.2918), ShareClass::High);
    EXPECT_THROW(label_share_class(0.0), InputError);
    EXPECT_THROW(label_share_class(1.0), InputError);
}

TEST(DesignMatrix, ColumnOrderAndNulls) {
    auto s = three_players();
    s.stats = stats("Player,Tm,Age,G,GS,MP,3P%,PTS\nAnn,BOS,25,70,60,30,,20\nBea,NYK,30,60,10,25,0.4,15\nCid,BOS,22,50,0,20,0.3,10\n");
    auto recs = compute_salary_shares(s.merge(), s.payrolls);
    const auto d = build_design_matrix(recs, "per-game");
    EXPECT_EQ(d.feature_names,
              (std::vector<std::string>{"EXP", "Age", "G", "GS", "MP", "3P%", "PTS"}));
    EXPECT_EQ(d.rows(), 3u);
    EXPECT_TRUE(std::isnan(d.X(0, 5)));
    EXPECT_DOUBLE_EQ(d.y[0], 0.1);
    const auto no_age = build_design_matrix(recs, "per-game", {Task::Classification, false});
    EXPECT_EQ(no_age.cols(), 6u);
    EXPECT_EQ(no_age.y[0], 1.0);

    std::vector<PlayerSeasonRecord> one(recs.begin(), recs.begin() + 1);
    EXPECT_EQ(build_design_matrix(one, "per-game").rows(), 1u);
    EXPECT_THROW(build_design_matrix({}, "per-game"), InputError);
}

TEST(CleanedCsv, RoundTrip) {
    auto s = three_players();
    auto recs = compute_salary_shares(s.merge(), s.payrolls);
    std::ostringstream out;
    write_cleaned_csv(out, recs, {"test"});
    std::istringstream in(out.str());
    const auto back = read_cleaned_csv(in);
    ASSERT_EQ(back.size(), recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_EQ(back[i].player_name, recs[i].player_name);
        EXPECT_EQ(back[i].salary_share, recs[i].salary_share);
        EXPECT_EQ(back[i].features.size(), recs[i].features.size());
    }
    std::ostringstream again;
    write_cleaned_csv(again, back, {"test"});
    EXPECT_EQ(again.str(), out.str());
}

// The engineered fixture season: 450 merged, 7 short seasons, one payroll
// correction.
TEST(Fixture, EngineeredSeasonCounts) {
    const std::string season = "2016-17";
    std::ifstream sal(fixture(season, "salaries.csv")), pay(fixture(season, "payrolls.csv")),
        exp(fixture(season, "experience.csv"));
    const auto salaries = parse_salary_csv(sal, season);
    const auto payrolls = parse_payroll_csv(pay, season);
    const auto experience = parse_experience_csv(exp, season);
    for (auto [kind, file] : {std::pair{StatKind::PerGame, "per_game.csv"},
                              std::pair{StatKind::Per36, "per_36.csv"},
                              std::pair{StatKind::Per100, "per_100.csv"},
                              std::pair{StatKind::Advanced, "advanced.csv"}}) {
        std::ifstream st(fixture(season, file));
        const auto rows = parse_stats_csv(st, kind, season);
        CleaningLog log;
        auto merged = merge_sources(rows, salaries, payrolls, experience, season, &log);
        EXPECT_EQ(merged.size(), 450u) << file;
        auto cleaned = clean(merged, 10, &log);
        EXPECT_EQ(cleaned.size(), 443u) << file;
        const auto shares = compute_salary_shares(cleaned, payrolls, &log);
        EXPECT_EQ(log.payroll_corrected_teams, std::vector<std::string>{"CHO"}) << file;
        std::map<std::string, double> sums;
        for (const auto& r : shares) sums[r.team] += r.salary_share;
        for (const auto& [team, sum] : sums) EXPECT_LE(sum, 1.0 + 1e-12) << team;
        EXPECT_GT(log.tot_rows_discarded, 0u);
        EXPECT_EQ(log.other_season_rows, 3u);
        const auto d = build_design_matrix(shares, to_string(kind));
        EXPECT_EQ(d.rows(), 443u);
    }
}
