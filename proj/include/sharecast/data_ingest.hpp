#pragma once

// Reading the per-season CSV snapshots (player statistics, salaries, team
// payrolls, experience), merging them into one record per player-season,
// the cleaning rules, and salary-share construction.

#include <algorithm>
#include <cctype>
#include <iterator>
#include <limits>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sharecast/csv.hpp"
#include "sharecast/dataset.hpp"
#include "sharecast/error.hpp"

namespace sharecast {

enum class StatKind { PerGame, Per36, Per100, Advanced };

inline constexpr StatKind kAllStatKinds[] = {StatKind::PerGame, StatKind::Per36,
                                             StatKind::Per100, StatKind::Advanced};

inline std::string to_string(StatKind k) {
    switch (k) {
        case StatKind::PerGame: return "per-game";
        case StatKind::Per36: return "per-36";
        case StatKind::Per100: return "per-100";
        case StatKind::Advanced: return "advanced";
    }
    return "?";
}

inline std::string display_name(StatKind k) {
    switch (k) {
        case StatKind::PerGame: return "Per game";
        case StatKind::Per36: return "Per 36 minutes";
        case StatKind::Per100: return "Per 100 possessions";
        case StatKind::Advanced: return "Advanced statistics";
    }
    return "?";
}

inline StatKind parse_stat_kind(std::string_view s) {
    for (auto k : kAllStatKinds)
        if (to_string(k) == s) return k;
    throw InputError("unknown statistics kind '" + std::string(s) +
                     "' (expected per-game, per-36, per-100 or advanced)");
}

struct Feature {
    std::string name;
    std::optional<double> value;

    bool operator==(const Feature&) const = default;
};

struct RawStatRow {
    std::string player_name;
    std::string season;
    std::string team;
    std::string position;
    std::optional<int> age;
    int games = 0;
    int games_started = 0;
    double minutes = 0.0;
    std::vector<Feature> features;  // CSV column order
    std::size_t line = 0;
};

struct SalaryRow {
    std::string player_name;
    std::string season;
    std::string team;
    double salary_usd = 0.0;
};

struct PayrollRow {
    std::string team;
    std::string season;
    double payroll_usd = 0.0;
};

struct ExperienceRow {
    std::string player_name;
    std::string season;
    int experience_years = 0;
};

enum class ShareClass { Low = 0, High = 1 };

inline constexpr double kShareClassThreshold = 0.05;
inline constexpr int kMaxExperienceYears = 25;

struct PlayerSeasonRecord {
    std::string player_name;
    std::string season;
    std::string team;
    std::string position;
    std::optional<int> age;
    int experience_years = 0;
    int games = 0;
    int games_started = 0;
    double minutes = 0.0;
    std::vector<Feature> features;
    double salary_usd = 0.0;
    double payroll_usd = 0.0;        // as reported
    double effective_payroll = 0.0;  // after the over-commitment correction
    double salary_share = 0.0;
    ShareClass share_class = ShareClass::Low;
};

/// Counts per cleaning rule, written next to the cleaned CSV.
struct CleaningLog {
    std::string season;
    std::size_t stat_rows = 0;
    std::size_t other_season_rows = 0;
    std::size_t tot_rows_discarded = 0;
    std::size_t team_switch_rows_discarded = 0;
    std::size_t dropped_no_salary = 0;
    std::size_t dropped_no_experience = 0;
    std::size_t dropped_team_mismatch = 0;
    std::size_t salary_without_stats = 0;
    std::size_t merged = 0;
    std::size_t dropped_min_games = 0;
    std::size_t cleaned = 0;
    std::vector<std::string> payroll_corrected_teams;

    std::string to_text() const {
        std::ostringstream o;
        o << "season: " << season << "\n"
          << "stat rows read: " << stat_rows << "\n"
          << "rows from other seasons ignored: " << other_season_rows << "\n"
          << "TOT aggregate rows discarded: " << tot_rows_discarded << "\n"
          << "team-switch rows discarded (team differs from salary team): "
          << team_switch_rows_discarded << "\n"
          << "players dropped, no salary: " << dropped_no_salary << "\n"
          << "players dropped, no experience: " << dropped_no_experience << "\n"
          << "players dropped, no stat row for salary team: " << dropped_team_mismatch << "\n"
          << "salary rows without statistics: " << salary_without_stats << "\n"
          << "merged records: " << merged << "\n"
          << "dropped, fewer than minimum games: " << dropped_min_games << "\n"
          << "cleaned records: " << cleaned << "\n"
          << "teams with payroll replaced by salary sum: " << payroll_corrected_teams.size();
        for (std::size_t i = 0; i < payroll_corrected_teams.size(); ++i)
            o << (i == 0 ? " (" : ", ") << payroll_corrected_teams[i]
              << (i + 1 == payroll_corrected_teams.size() ? ")" : "");
        o << "\n";
        return o.str();
    }
};

// ---------------------------------------------------------------------------
// Name handling

namespace detail {

using namespace std::string_view_literals;

// ASCII base letters for U+00C0..U+017F ('\0' = drop the code point).
inline constexpr std::string_view kLatin1Fold =
    "AAAAAAACEEEEIIIIDNOOOOO\0OUUUUYTs"   // C0..DF
    "aaaaaaaceeeeiiiidnooooo\0ouuuuyty"sv;  // E0..FF
inline constexpr std::string_view kLatinExtAFold =
    "AaAaAaCcCcCcCcDdDdEeEeEeEeEeGgGgGgGgHhHhIiIiIiIiIiIiJjKkkLlLlLlLlLlNnNnNnnNnOoOoOoOoRrRrRrSsSsSsSsTtTtTtUuUuUuUuUuUuWwYyYZzZzZzs"sv;

inline char fold_codepoint(char32_t cp) {
    if (cp >= 0xC0 && cp <= 0xFF) return kLatin1Fold[cp - 0xC0];
    if (cp >= 0x100 && cp <= 0x17F) return kLatinExtAFold[cp - 0x100];
    return '\0';
}

inline std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace detail

/// Join key for player names: lowercase ASCII, Latin diacritics folded to
/// their base letter, runs of whitespace collapsed. Suffixes such as
/// "Jr." or "III" are kept, so "Tim Hardaway Jr." and "Tim Hardaway" stay
/// distinct players.
inline std::string normalize_name(std::string_view name) {
    std::string out;
    bool pending_space = false;
    for (std::size_t i = 0; i < name.size();) {
        const auto c = static_cast<unsigned char>(name[i]);
        char ascii = 0;
        std::size_t len = 1;
        if (c < 0x80) {
            ascii = static_cast<char>(c);
        } else if ((c & 0xE0) == 0xC0 && i + 1 < name.size()) {
            const char32_t cp = (static_cast<char32_t>(c & 0x1F) << 6) |
                                (static_cast<unsigned char>(name[i + 1]) & 0x3F);
            ascii = detail::fold_codepoint(cp);
            len = 2;
        } else {
            len = (c & 0xF0) == 0xE0 ? 3 : (c & 0xF8) == 0xF0 ? 4 : 1;
        }
        i += len;
        if (ascii == 0) continue;
        if (ascii == ' ' || ascii == '\t') {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(ascii)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline bool is_identity_column(std::string_view h) {
    return h == "Rk" || h == "Player" || h == "Pos" || h == "Age" || h == "Tm" ||
           h == "Team" || h == "G" || h == "GS" || h == "MP" || h == "Season" ||
           h == "Player-additional";
}

inline bool is_shooting_percentage(std::string_view h) {
    return h == "FG%" || h == "3P%" || h == "2P%" || h == "eFG%" || h == "FT%" || h == "TS%";
}

struct CellReader {
    const csv::Table& table;
    const csv::Row* row = nullptr;

    std::optional<double> number(std::size_t col) const {
        try {
            return csv::parse_number(row->cells[col]);
        } catch (const std::invalid_argument&) {
            throw InputError("non-numeric value in column " + table.header[col] + ", line " +
                             std::to_string(row->line));
        }
    }

    int integer(std::size_t col, bool required) const {
        const auto v = number(col);
        if (!v) {
            if (required)
                throw InputError("missing value in column " + table.header[col] + ", line " +
                                 std::to_string(row->line));
            return 0;
        }
        if (*v != std::floor(*v))
            throw InputError("non-integer value in column " + table.header[col] + ", line " +
                             std::to_string(row->line));
        return static_cast<int>(*v);
    }

    std::string text(std::optional<std::size_t> col) const {
        return col ? row->cells[*col] : std::string();
    }
};

inline std::size_t require_column(const csv::Table& t, std::string_view name,
                                  std::string_view alt = {}) {
    if (auto c = t.find(name)) return *c;
    if (!alt.empty())
        if (auto c = t.find(alt)) return *c;
    throw InputError("missing mandatory column " + std::string(name));
}

inline std::string row_season(const csv::Table& t, const csv::Row& r, std::string_view fallback) {
    if (auto c = t.find("Season"); c && !r.cells[*c].empty()) return r.cells[*c];
    return std::string(fallback);
}

}  // namespace detail

/// One RawStatRow per data line. Empty cells become nulls; every numeric
/// column other than the identity columns (Rk, Player, Pos, Age, Tm, G, GS,
/// MP) is kept as a feature in header order. Columns with an empty header
/// (spacer columns in some exports) are skipped.
inline std::vector<RawStatRow> parse_stats_csv(std::istream& in, StatKind kind,
                                               std::string_view season = {}) {
    const auto table = csv::read(in);
    const auto c_player = detail::require_column(table, "Player");
    const auto c_team = detail::require_column(table, "Tm", "Team");
    const auto c_games = detail::require_column(table, "G");
    const auto c_minutes = detail::require_column(table, "MP");
    const auto c_gs = table.find("GS");
    const auto c_pos = table.find("Pos");
    const auto c_age = table.find("Age");

    std::vector<std::size_t> feature_cols;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        const auto& h = table.header[j];
        if (h.empty() || detail::is_identity_column(h)) continue;
        if (h == "eFG%" && kind != StatKind::PerGame)
            throw InputError("column eFG% only belongs to per-game statistics, found in " +
                             to_string(kind));
        if ((h == "ORtg" || h == "DRtg") && kind != StatKind::Per100)
            throw InputError("column " + h + " only belongs to per-100 statistics, found in " +
                             to_string(kind));
        feature_cols.push_back(j);
    }

    std::vector<RawStatRow> out;
    out.reserve(table.rows.size());
    detail::CellReader cell{table};
    for (const auto& row : table.rows) {
        cell.row = &row;
        RawStatRow r;
        r.line = row.line;
        r.player_name = row.cells[c_player];
        if (r.player_name.empty())
            throw InputError("empty player name, line " + std::to_string(row.line));
        r.season = detail::row_season(table, row, season);
        r.team = detail::upper(row.cells[c_team]);
        r.position = cell.text(c_pos);
        if (c_age)
            if (auto a = cell.number(*c_age)) r.age = static_cast<int>(*a);
        r.games = cell.integer(c_games, true);
        r.games_started = c_gs ? cell.integer(*c_gs, false) : 0;
        const auto mp = cell.number(c_minutes);
        if (!mp)
            throw InputError("missing value in column MP, line " + std::to_string(row.line));
        r.minutes = *mp;
        if (r.games < 0)
            throw InputError("negative games, line " + std::to_string(row.line));
        if (r.games_started > r.games)
            throw InputError("games started exceeds games, line " + std::to_string(row.line));
        for (auto j : feature_cols) {
            auto v = cell.number(j);
            if (v && detail::is_shooting_percentage(table.header[j]) && (*v < 0.0 || *v > 1.0))
                throw InputError("percentage outside [0,1] in column " + table.header[j] +
                                 ", line " + std::to_string(row.line));
            r.features.push_back({table.header[j], v});
        }
        out.push_back(std::move(r));
    }
    return out;
}

/// Salary snapshot: columns Player, Tm (or Team), Salary. Rows with a
/// missing or non-positive salary are skipped.
inline std::vector<SalaryRow> parse_salary_csv(std::istream& in, std::string_view season = {}) {
    const auto table = csv::read(in);
    const auto c_player = detail::require_column(table, "Player");
    const auto c_team = detail::require_column(table, "Tm", "Team");
    const auto c_salary = detail::require_column(table, "Salary");
    std::vector<SalaryRow> out;
    detail::CellReader cell{table};
    for (const auto& row : table.rows) {
        cell.row = &row;
        const auto s = cell.number(c_salary);
        if (!s || *s <= 0.0) continue;
        out.push_back({row.cells[c_player], detail::row_season(table, row, season),
                       detail::upper(row.cells[c_team]), *s});
    }
    return out;
}

/// Payroll snapshot: columns Tm (or Team), Payroll. One row per team.
inline std::vector<PayrollRow> parse_payroll_csv(std::istream& in, std::string_view season = {}) {
    const auto table = csv::read(in);
    const auto c_team = detail::require_column(table, "Tm", "Team");
    const auto c_payroll = detail::require_column(table, "Payroll");
    std::vector<PayrollRow> out;
    std::set<std::pair<std::string, std::string>> seen;
    detail::CellReader cell{table};
    for (const auto& row : table.rows) {
        cell.row = &row;
        const auto p = cell.number(c_payroll);
        if (!p || *p <= 0.0)
            throw InputError("payroll must be positive, line " + std::to_string(row.line));
        PayrollRow r{detail::upper(row.cells[c_team]), detail::row_season(table, row, season), *p};
        if (!seen.insert({r.team, r.season}).second)
            throw InputError("duplicate payroll row for team " + r.team + ", line " +
                             std::to_string(row.line));
        out.push_back(std::move(r));
    }
    return out;
}

/// Experience snapshot: columns Player, EXP.
inline std::vector<ExperienceRow> parse_experience_csv(std::istream& in,
                                                       std::string_view season = {}) {
    const auto table = csv::read(in);
    const auto c_player = detail::require_column(table, "Player");
    const auto c_exp = detail::require_column(table, "EXP");
    std::vector<ExperienceRow> out;
    detail::CellReader cell{table};
    for (const auto& row : table.rows) {
        cell.row = &row;
        const int exp = cell.integer(c_exp, true);
        if (exp < 0 || exp > kMaxExperienceYears)
            throw InputError("experience outside [0," + std::to_string(kMaxExperienceYears) +
                             "], line " + std::to_string(row.line));
        out.push_back({row.cells[c_player], detail::row_season(table, row, season), exp});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Merging and cleaning

/// Keeps players present in the statistics, salary, and experience sources
/// for `season`. "TOT" aggregate rows are discarded; when a player has
/// several team rows, the row for the salary team is kept. A player with a
/// single team row is kept even if that team differs from the salary team.
/// Payroll is joined on the salary team.
inline std::vector<PlayerSeasonRecord> merge_sources(const std::vector<RawStatRow>& stats,
                                                     const std::vector<SalaryRow>& salaries,
                                                     const std::vector<PayrollRow>& payrolls,
                                                     const std::vector<ExperienceRow>& experience,
                                                     const std::string& season,
                                                     CleaningLog* log = nullptr) {
    CleaningLog local;
    CleaningLog& lg = log ? *log : local;
    lg.season = season;

    std::unordered_map<std::string, const SalaryRow*> salary_by_name;
    for (const auto& s : salaries) {
        if (s.season != season) continue;
        if (!salary_by_name.emplace(normalize_name(s.player_name), &s).second)
            throw InputError("duplicate salary rows for player " + s.player_name + " in " + season);
    }
    std::unordered_map<std::string, int> exp_by_name;
    for (const auto& e : experience) {
        if (e.season != season) continue;
        if (!exp_by_name.emplace(normalize_name(e.player_name), e.experience_years).second)
            throw InputError("duplicate experience rows for player " + e.player_name + " in " +
                             season + " (ambiguous name)");
    }
    std::map<std::string, double> payroll_by_team;
    for (const auto& p : payrolls)
        if (p.season == season) payroll_by_team[p.team] = p.payroll_usd;

    // Group stat rows per player, preserving first-appearance order.
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<const RawStatRow*>> rows_by_name;
    for (const auto& r : stats) {
        ++lg.stat_rows;
        if (r.season != season) {
            ++lg.other_season_rows;
            continue;
        }
        if (r.team == "TOT") {
            ++lg.tot_rows_discarded;
            continue;
        }
        auto key = normalize_name(r.player_name);
        auto& bucket = rows_by_name[key];
        for (const auto* prev : bucket)
            if (prev->team == r.team)
                throw InputError("ambiguous player name " + r.player_name + ": two rows for team " +
                                 r.team + " (lines " + std::to_string(prev->line) + " and " +
                                 std::to_string(r.line) + ")");
        if (bucket.empty()) order.push_back(key);
        bucket.push_back(&r);
    }

    std::vector<PlayerSeasonRecord> out;
    std::set<std::string> missing_payroll;
    for (const auto& key : order) {
        const auto& rows = rows_by_name[key];
        const auto sal = salary_by_name.find(key);
        if (sal == salary_by_name.end()) {
            ++lg.dropped_no_salary;
            continue;
        }
        const auto exp = exp_by_name.find(key);
        if (exp == exp_by_name.end()) {
            ++lg.dropped_no_experience;
            continue;
        }
        const RawStatRow* chosen = nullptr;
        for (const auto* r : rows)
            if (r->team == sal->second->team) chosen = r;
        if (!chosen && rows.size() == 1) chosen = rows.front();
        if (!chosen) {
            ++lg.dropped_team_mismatch;
            continue;
        }
        lg.team_switch_rows_discarded += rows.size() - 1;

        const auto& salary = *sal->second;
        const auto pay = payroll_by_team.find(salary.team);
        if (pay == payroll_by_team.end()) {
            missing_payroll.insert(salary.team);
            continue;
        }
        PlayerSeasonRecord rec;
        rec.player_name = chosen->player_name;
        rec.season = season;
        rec.team = salary.team;
        rec.position = chosen->position;
        rec.age = chosen->age;
        rec.experience_years = exp->second;
        rec.games = chosen->games;
        rec.games_started = chosen->games_started;
        rec.minutes = chosen->minutes;
        rec.features = chosen->features;
        rec.salary_usd = salary.salary_usd;
        rec.payroll_usd = pay->second;
        rec.effective_payroll = pay->second;
        out.push_back(std::move(rec));
    }
    if (!missing_payroll.empty()) {
        std::string teams;
        for (const auto& t : missing_payroll) teams += (teams.empty() ? "" : ", ") + t;
        throw InputError("no payroll row for team(s) " + teams + " in " + season);
    }
    for (const auto& [name, s] : salary_by_name)
        if (!rows_by_name.count(name)) ++lg.salary_without_stats;
    lg.merged = out.size();
    return out;
}

/// Drops records with fewer than `min_games` games.
inline std::vector<PlayerSeasonRecord> clean(std::vector<PlayerSeasonRecord> records,
                                             int min_games = 10, CleaningLog* log = nullptr) {
    const auto before = records.size();
    std::erase_if(records, [&](const PlayerSeasonRecord& r) { return r.games < min_games; });
    if (log) {
        log->dropped_min_games += before - records.size();
        log->cleaned = records.size();
    }
    return records;
}

/// 0/1 class of a salary share: high iff share >= threshold.
inline ShareClass label_share_class(double share, double threshold = kShareClassThreshold) {
    if (!(share > 0.0 && share < 1.0))
        throw InputError("salary share " + csv::format_number(share) + " outside (0,1)");
    return share < threshold ? ShareClass::Low : ShareClass::High;
}

/// Salary share = salary / effective payroll. A team's effective payroll is
/// its reported payroll, or the sum of its players' salaries in `records`
/// when that sum exceeds the reported figure, so per-team shares sum to at
/// most 1.
inline std::vector<PlayerSeasonRecord> compute_salary_shares(
    std::vector<PlayerSeasonRecord> records, const std::vector<PayrollRow>& payrolls,
    CleaningLog* log = nullptr) {
    std::map<std::string, double> reported;
    for (const auto& p : payrolls)
        if (records.empty() || p.season == records.front().season || p.season.empty())
            reported[p.team] = p.payroll_usd;
    std::map<std::string, double> team_sum;
    for (const auto& r : records) team_sum[r.team] += r.salary_usd;

    std::map<std::string, double> effective;
    for (const auto& [team, sum] : team_sum) {
        const auto it = reported.find(team);
        if (it == reported.end()) throw InputError("no payroll row for team " + team);
        double eff = it->second;
        if (sum > eff) {
            eff = sum;
            if (log) log->payroll_corrected_teams.push_back(team);
        }
        if (!(eff > 0.0)) throw InputError("non-positive effective payroll for team " + team);
        effective[team] = eff;
    }
    for (auto& r : records) {
        r.payroll_usd = reported[r.team];
        r.effective_payroll = effective[r.team];
        r.salary_share = r.salary_usd / r.effective_payroll;
        if (!(r.salary_share > 0.0 && r.salary_share < 1.0))
            throw InputError("salary share of " + r.player_name + " is " +
                             csv::format_number(r.salary_share) + ", outside (0,1)");
        r.share_class = label_share_class(r.salary_share);
    }
    return records;
}

// ---------------------------------------------------------------------------
// Design matrix

struct DesignOptions {
    Task task = Task::Regression;
    bool include_age = true;
};

/// Predictor columns in fixed order: EXP, Age (optional), G, GS, MP, then
/// the statistics of the first record in their CSV column order. Team and
/// position are not predictors. Null cells stay NaN (imputed after
/// scaling).
inline Dataset build_design_matrix(const std::vector<PlayerSeasonRecord>& records,
                                   const std::string& kind, const DesignOptions& opt = {}) {
    if (records.empty()) throw InputError("no usable rows for the design matrix");
    Dataset d;
    d.task = opt.task;
    d.season = records.front().season;
    d.kind = kind;
    d.feature_names = {"EXP"};
    if (opt.include_age) d.feature_names.push_back("Age");
    for (const char* n : {"G", "GS", "MP"}) d.feature_names.emplace_back(n);
    const std::size_t fixed = d.feature_names.size();
    for (const auto& f : records.front().features) {
        if (std::find(d.feature_names.begin(), d.feature_names.end(), f.name) !=
            d.feature_names.end())
            throw InputError("duplicate predictor column " + f.name);
        d.feature_names.push_back(f.name);
    }

    const auto n = static_cast<Eigen::Index>(records.size());
    const auto p = static_cast<Eigen::Index>(d.feature_names.size());
    d.X.resize(n, p);
    d.y.resize(n);
    constexpr double kNull = std::numeric_limits<double>::quiet_NaN();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = records[static_cast<std::size_t>(i)];
        if (r.features.size() != records.front().features.size())
            throw InputError("record " + r.player_name + " has a different statistics layout");
        Eigen::Index j = 0;
        d.X(i, j++) = r.experience_years;
        if (opt.include_age) d.X(i, j++) = r.age ? static_cast<double>(*r.age) : kNull;
        d.X(i, j++) = r.games;
        d.X(i, j++) = r.games_started;
        d.X(i, j++) = r.minutes;
        for (std::size_t f = 0; f < r.features.size(); ++f) {
            if (r.features[f].name != d.feature_names[fixed + f])
                throw InputError("record " + r.player_name + " has a different statistics layout");
            d.X(i, j++) = r.features[f].value.value_or(kNull);
        }
        d.y[i] = opt.task == Task::Regression ? r.salary_share
                                              : static_cast<double>(r.share_class);
        d.row_ids.push_back(r.player_name);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Cleaned dataset CSV

inline constexpr const char* kCleanedFixedColumns[] = {
    "Player", "Season", "Tm", "Pos", "EXP", "Age", "G", "GS", "MP"};
inline constexpr const char* kCleanedTailColumns[] = {
    "Salary", "Payroll", "EffectivePayroll", "Share", "ShareClass"};

/// Writes the cleaned records: identity columns, then the statistics in
/// CSV order, then salary, reported payroll, effective payroll, share and
/// class (0 low, 1 high). Optional `comment` lines are prefixed with '#'.
inline void write_cleaned_csv(std::ostream& out, const std::vector<PlayerSeasonRecord>& records,
                              const std::vector<std::string>& comment = {}) {
    for (const auto& c : comment) out << "# " << c << "\n";
    bool first = true;
    auto sep = [&] {
        if (!first) out << ',';
        first = false;
    };
    for (const char* c : kCleanedFixedColumns) sep(), out << c;
    if (!records.empty())
        for (const auto& f : records.front().features) sep(), out << csv::escape(f.name);
    for (const char* c : kCleanedTailColumns) sep(), out << c;
    out << "\n";
    for (const auto& r : records) {
        first = true;
        sep(), out << csv::escape(r.player_name);
        sep(), out << csv::escape(r.season);
        sep(), out << csv::escape(r.team);
        sep(), out << csv::escape(r.position);
        sep(), out << r.experience_years;
        sep();
        if (r.age) out << *r.age;
        sep(), out << r.games;
        sep(), out << r.games_started;
        sep(), out << csv::format_number(r.minutes);
        for (const auto& f : r.features) {
            sep();
            if (f.value) out << csv::format_number(*f.value);
        }
        sep(), out << csv::format_number(r.salary_usd);
        sep(), out << csv::format_number(r.payroll_usd);
        sep(), out << csv::format_number(r.effective_payroll);
        sep(), out << csv::format_number(r.salary_share);
        sep(), out << static_cast<int>(r.share_class);
        out << "\n";
    }
}

/// Reads a file produced by write_cleaned_csv.
inline std::vector<PlayerSeasonRecord> read_cleaned_csv(std::istream& in) {
    const auto table = csv::read(in);
    constexpr std::size_t n_fixed = std::size(kCleanedFixedColumns);
    constexpr std::size_t n_tail = std::size(kCleanedTailColumns);
    if (table.header.size() < n_fixed + n_tail)
        throw InputError("cleaned dataset has too few columns");
    for (std::size_t j = 0; j < n_fixed; ++j)
        if (table.header[j] != kCleanedFixedColumns[j])
            throw InputError("cleaned dataset: expected column " +
                             std::string(kCleanedFixedColumns[j]) + " at position " +
                             std::to_string(j + 1));
    const std::size_t tail0 = table.header.size() - n_tail;
    for (std::size_t j = 0; j < n_tail; ++j)
        if (table.header[tail0 + j] != kCleanedTailColumns[j])
            throw InputError("cleaned dataset: expected column " +
                             std::string(kCleanedTailColumns[j]));

    std::vector<PlayerSeasonRecord> out;
    detail::CellReader cell{table};
    for (const auto& row : table.rows) {
        cell.row = &row;
        PlayerSeasonRecord r;
        r.player_name = row.cells[0];
        r.season = row.cells[1];
        r.team = row.cells[2];
        r.position = row.cells[3];
        r.experience_years = cell.integer(4, true);
        if (auto a = cell.number(5)) r.age = static_cast<int>(*a);
        r.games = cell.integer(6, true);
        r.games_started = cell.integer(7, false);
        r.minutes = cell.number(8).value_or(0.0);
        for (std::size_t j = n_fixed; j < tail0; ++j)
            r.features.push_back({table.header[j], cell.number(j)});
        r.salary_usd = cell.number(tail0).value_or(0.0);
        r.payroll_usd = cell.number(tail0 + 1).value_or(0.0);
        r.effective_payroll = cell.number(tail0 + 2).value_or(0.0);
        r.salary_share = cell.number(tail0 + 3).value_or(0.0);
        r.share_class = label_share_class(r.salary_share);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace sharecast
