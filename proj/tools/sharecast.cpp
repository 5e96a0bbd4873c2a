// sharecast: salary-share modelling from season statistics.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sharecast/sharecast.hpp"

namespace fs = std::filesystem;
using namespace sharecast;

namespace {

struct Options {
    std::vector<std::string> seasons;
    std::vector<std::string> kinds;
    std::string data_dir;
    std::string cleaned;
    std::string out = ".";
    unsigned threads = 0;
    std::uint64_t seed = 2020;
    std::size_t k = 10;
    std::size_t reps = 50;
    std::size_t trees = 500;
    std::vector<std::size_t> mtry_grid;
    std::size_t mtry = 0;
    std::size_t min_leaf = 0;
    bool no_lasso = false;
    bool lasso_only = false;
    std::size_t inner_k = 10;
    std::size_t n_lambda = 100;
    int min_games = 10;
    bool no_age = false;
    double importance = 0.5;
    std::string task = "regression";
    std::vector<std::size_t> levels = DemoOptions{}.levels;
    std::size_t demo_n = 400;
    std::size_t demo_p = 20;
    std::size_t points = 512;
    bool predictions = false;
};

std::string kind_file(StatKind k) {
    switch (k) {
        case StatKind::PerGame: return "per_game.csv";
        case StatKind::Per36: return "per_36.csv";
        case StatKind::Per100: return "per_100.csv";
        case StatKind::Advanced: return "advanced.csv";
    }
    return "";
}

std::ifstream open_input(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw InputError("cannot open " + p.string());
    return in;
}

template <class F>
auto with_file_context(const fs::path& p, F&& f) {
    auto in = open_input(p);
    try {
        return f(in);
    } catch (const InputError& e) {
        throw InputError(p.string() + ": " + e.what());
    }
}

std::ofstream open_output(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    return out;
}

struct SeasonRecords {
    std::vector<PlayerSeasonRecord> records;
    CleaningLog log;
};

SeasonRecords load_season(const Options& o, const std::string& season, StatKind kind) {
    if (o.data_dir.empty())
        throw InputError("no data directory (use --data-dir or SHARECAST_DATA_DIR)");
    const fs::path dir = fs::path(o.data_dir) / season;
    auto stats = with_file_context(dir / kind_file(kind),
                                   [&](std::istream& in) { return parse_stats_csv(in, kind, season); });
    auto salaries = with_file_context(dir / "salaries.csv",
                                      [&](std::istream& in) { return parse_salary_csv(in, season); });
    auto payrolls = with_file_context(dir / "payrolls.csv",
                                      [&](std::istream& in) { return parse_payroll_csv(in, season); });
    auto experience = with_file_context(
        dir / "experience.csv", [&](std::istream& in) { return parse_experience_csv(in, season); });
    SeasonRecords s;
    auto merged = merge_sources(stats, salaries, payrolls, experience, season, &s.log);
    auto cleaned = clean(std::move(merged), o.min_games, &s.log);
    s.records = compute_salary_shares(std::move(cleaned), payrolls, &s.log);
    return s;
}

Task parse_task(const std::string& t) {
    if (t == "regression") return Task::Regression;
    if (t == "classification") return Task::Classification;
    throw InputError("unknown task " + t);
}

std::vector<StatKind> resolve_kinds(const Options& o) {
    std::vector<StatKind> ks;
    if (o.kinds.empty()) return {std::begin(kAllStatKinds), std::end(kAllStatKinds)};
    for (const auto& k : o.kinds) ks.push_back(parse_stat_kind(k));
    return ks;
}

/// Everything in the run that can change an output byte.
Json run_json(const std::string& command, const Options& o) {
    Json j = {{"command", command},
              {"seasons", o.seasons},
              {"kinds", o.kinds},
              {"cleaned", o.cleaned.empty() ? Json(nullptr) : Json(fs::path(o.cleaned).filename().string())},
              {"seed", o.seed},
              {"min_games", o.min_games},
              {"include_age", !o.no_age}};
    if (command == "regress" || command == "classify" || command == "validate") {
        j["k"] = o.k;
        j["reps"] = o.reps;
        j["trees"] = o.trees;
        j["mtry_grid"] = o.mtry_grid;
        j["mtry"] = o.mtry;
        j["min_leaf"] = o.min_leaf;
        j["no_lasso"] = o.no_lasso;
        j["lasso_only"] = o.lasso_only;
        j["inner_k"] = o.inner_k;
        j["n_lambda"] = o.n_lambda;
        j["importance_threshold"] = o.importance;
        j["task"] = o.task;
    }
    if (command == "demo-overfit") {
        j = {{"command", command}, {"levels", o.levels}, {"n", o.demo_n},
             {"p", o.demo_p},      {"k", o.k},           {"seed", o.seed}};
    }
    if (command == "density") j["points"] = o.points;
    return j;
}

std::vector<std::string> header_lines(const std::string& command, const Options& o) {
    return {"sharecast " + command, "config " + hex64(config_hash(run_json(command, o))),
            "seed " + std::to_string(o.seed)};
}

Dataset load_dataset(const Options& o, const std::string& season, StatKind kind, Task task) {
    const DesignOptions d{task, !o.no_age};
    if (!o.cleaned.empty()) {
        auto recs = with_file_context(o.cleaned, [](std::istream& in) { return read_cleaned_csv(in); });
        return build_design_matrix(recs, to_string(kind), d);
    }
    return build_design_matrix(load_season(o, season, kind).records, to_string(kind), d);
}

// ---------------------------------------------------------------------------

int cmd_clean(const Options& o) {
    if (o.seasons.empty()) throw InputError("clean needs --season");
    const auto header = header_lines("clean", o);
    for (const auto& season : o.seasons)
        for (auto kind : resolve_kinds(o)) {
            const auto s = load_season(o, season, kind);
            const fs::path base = fs::path(o.out) / ("cleaned_" + season + "_" + to_string(kind));
            auto csv_out = open_output(base.string() + ".csv");
            write_cleaned_csv(csv_out, s.records, header);
            auto log_out = open_output(base.string() + ".log");
            for (const auto& h : header) log_out << "# " << h << "\n";
            log_out << "kind: " << to_string(kind) << "\n" << s.log.to_text();
            std::cout << season << " " << to_string(kind) << ": " << s.log.merged << " merged, "
                      << s.records.size() << " cleaned, " << s.log.payroll_corrected_teams.size()
                      << " payroll correction(s)\n";
        }
    return 0;
}

CvConfig cv_config(const Options& o, Task task, bool with_lasso) {
    CvConfig c;
    c.k = o.k;
    c.repetitions = o.reps;
    c.task = task;
    c.use_lasso_selection = with_lasso;
    c.master_seed = o.seed;
    c.threads = o.threads;
    c.forest.n_trees = o.trees;
    c.forest.min_leaf = o.min_leaf;
    c.lasso.inner_k = o.inner_k;
    c.lasso.n_lambda = o.n_lambda;
    c.importance_threshold = o.importance;
    if (!o.mtry_grid.empty()) c.mtry_grid = fixed_mtry_grid(o.mtry_grid);
    return c;
}

int cmd_cv(const Options& o, Task task) {
    const std::string command = task == Task::Regression ? "regress" : "classify";
    if (o.seasons.empty() && o.cleaned.empty()) throw InputError(command + " needs --season or --cleaned");
    if (o.no_lasso && o.lasso_only) throw InputError("--no-lasso and --lasso-only exclude each other");
    const auto header = header_lines(command, o);
    const std::string run_hash = hex64(config_hash(run_json(command, o)));
    std::vector<bool> modes;
    if (!o.no_lasso) modes.push_back(true);
    if (!o.lasso_only) modes.push_back(false);

    std::vector<CvReport> reports;
    std::vector<ClassCount> counts;
    const std::vector<std::string> seasons = o.seasons.empty() ? std::vector<std::string>{""} : o.seasons;
    for (const auto& season : seasons) {
        for (auto kind : resolve_kinds(o)) {
            Dataset data = load_dataset(o, season, kind, task);
            if (task == Task::Classification && kind == resolve_kinds(o).front()) {
                ClassCount c{data.season};
                for (Eigen::Index i = 0; i < data.y.size(); ++i) (data.y[i] > 0.5 ? c.high : c.low)++;
                counts.push_back(c);
            }
            for (bool with : modes) {
                auto rep = repeat_cv(data, cv_config(o, task, with));
                Json j = to_json(rep, o.predictions);
                j["run_config_hash"] = run_hash;
                const std::string stem = command + "_" + data.season + "_" + data.kind + "_" +
                                         (with ? "with" : "without") + "_lasso";
                auto out = open_output(fs::path(o.out) / (stem + ".json"));
                out << j.dump(2) << "\n";
                std::cout << data.season << " " << data.kind << (with ? " with" : " without")
                          << " LASSO: best " << rep.best().label << ", "
                          << (task == Task::Regression
                                  ? "PVE " + fixed(rep.best().pve.mean) + ", PCC " + fixed(rep.best().pcc.mean)
                                  : "AUC " + fixed(rep.best().auc.mean))
                          << "\n";
                reports.push_back(std::move(rep));
            }
        }
    }

    auto md = open_output(fs::path(o.out) / (command + "_report.md"));
    for (const auto& h : header) md << "<!-- " << h << " -->\n";
    md << "\n# " << (task == Task::Regression ? "Salary share regression" : "Salary class prediction")
       << "\n\n";
    if (task == Task::Regression) {
        md << "## PCC\n\n" << performance_table(reports, Metric::PCC) << "## PVE\n\n"
           << performance_table(reports, Metric::PVE);
    } else {
        md << "## Class counts\n\n" << class_count_table(counts, kShareClassThreshold) << "\n## AUC\n\n"
           << performance_table(reports, Metric::AUC);
    }
    if (const auto imp = importance_table(reports); !imp.empty())
        md << "## Most frequently selected statistics\n\n" << imp << "\n";
    md << "## Details\n\n";
    for (const auto& r : reports) md << to_markdown(r) << "\n";
    return 0;
}

int cmd_validate(const Options& o) {
    if (o.seasons.size() != 2) throw InputError("validate needs exactly two --season values (train, test)");
    const Task task = parse_task(o.task);
    const auto header = header_lines("validate", o);
    Json all = Json::array();
    for (auto kind : resolve_kinds(o)) {
        const Dataset train = load_dataset(o, o.seasons[0], kind, task);
        const Dataset test = load_dataset(o, o.seasons[1], kind, task);
        LassoSettings ls;
        ls.inner_k = o.inner_k;
        ls.n_lambda = o.n_lambda;
        const auto features = o.no_lasso ? train.feature_names : lasso_select(train, ls, derive_seed(o.seed, 1));
        ForestConfig fc;
        fc.n_trees = o.trees;
        fc.mtry = std::min(o.mtry, features.size());
        fc.min_leaf = o.min_leaf;
        fc.seed = derive_seed(o.seed, 2);
        const auto v = season_ahead_validation(train, test, features, fc);
        Json j = {{"kind", to_string(kind)}, {"train_season", o.seasons[0]}, {"test_season", o.seasons[1]},
                  {"task", to_string(task)}, {"n_train", v.n_train}, {"n_test", v.n_test},
                  {"features", v.features}, {"forest_fingerprint", hex64(v.forest_fingerprint)}};
        if (task == Task::Regression) {
            j["pve"] = v.pve;
            j["pcc"] = v.pcc;
            std::cout << to_string(kind) << ": PVE " << fixed(v.pve) << ", PCC " << fixed(v.pcc) << "\n";
        } else {
            j["auc"] = v.auc;
            std::cout << to_string(kind) << ": AUC " << fixed(v.auc) << "\n";
        }
        all.push_back(j);
    }
    Json doc = {{"config_hash", hex64(config_hash(run_json("validate", o)))}, {"seed", o.seed}, {"results", all}};
    auto out = open_output(fs::path(o.out) / "validate.json");
    out << doc.dump(2) << "\n";
    auto md = open_output(fs::path(o.out) / "validate.md");
    for (const auto& h : header) md << "<!-- " << h << " -->\n";
    md << "\n| statistics | " << (task == Task::Regression ? "PVE | PCC |\n|---|---|---|\n" : "AUC |\n|---|---|\n");
    for (const auto& j : all) {
        md << "| " << j["kind"].get<std::string>() << " | ";
        if (task == Task::Regression)
            md << fixed(j["pve"].get<double>()) << " | " << fixed(j["pcc"].get<double>()) << " |\n";
        else
            md << fixed(j["auc"].get<double>()) << " |\n";
    }
    return 0;
}

int cmd_demo(const Options& o) {
    DemoOptions d;
    d.n = o.demo_n;
    d.p = o.demo_p;
    d.levels = o.levels;
    d.k = o.k;
    d.seed = o.seed;
    const auto r = leakage_demo(d);
    const auto header = header_lines("demo-overfit", o);
    auto csv_out = open_output(fs::path(o.out) / "demo_overfit.csv");
    write_demo_csv(csv_out, r, header);
    auto md = open_output(fs::path(o.out) / "demo_overfit.md");
    for (const auto& h : header) md << "<!-- " << h << " -->\n";
    md << "\n" << demo_markdown(r);
    std::cout << demo_markdown(r);
    return 0;
}

int cmd_density(const Options& o) {
    if (o.seasons.empty() && o.cleaned.empty()) throw InputError("density needs --season or --cleaned");
    const auto header = header_lines("density", o);
    auto one = [&](const std::vector<PlayerSeasonRecord>& recs, const std::string& season) {
        if (recs.empty()) throw InputError("season " + season + " has no usable rows");
        std::vector<double> shares;
        for (const auto& r : recs) shares.push_back(r.salary_share);
        const double h = silverman_bandwidth(shares);
        const auto curve = kde(shares, h, density_grid(shares, h, o.points));
        auto out = open_output(fs::path(o.out) / ("density_" + season + ".csv"));
        auto lines = header;
        lines.push_back("season " + season + ", n " + std::to_string(shares.size()) + ", bandwidth " +
                        csv::format_number(h));
        write_density_csv(out, curve, lines);
        std::cout << season << ": n " << shares.size() << ", bandwidth " << fixed(h, 5) << "\n";
    };
    if (!o.cleaned.empty()) {
        auto recs = with_file_context(o.cleaned, [](std::istream& in) { return read_cleaned_csv(in); });
        one(recs, recs.empty() ? "cleaned" : recs.front().season);
    }
    for (const auto& season : o.seasons) one(load_season(o, season, StatKind::PerGame).records, season);
    return 0;
}

void add_data_options(CLI::App* c, Options& o) {
    c->add_option("--season", o.seasons, "Season directory name(s), e.g. 2016-17");
    c->add_option("--kind", o.kinds, "per-game, per-36, per-100, advanced (default all)");
    c->add_option("--data-dir", o.data_dir, "Root holding <season>/*.csv")->envname("SHARECAST_DATA_DIR");
    c->add_option("--cleaned", o.cleaned, "Cleaned CSV written by 'clean' instead of raw files");
    c->add_option("--out", o.out, "Output directory");
    c->add_option("--seed", o.seed, "Master seed");
    c->add_option("--min-games", o.min_games, "Minimum games played");
    c->add_flag("--no-age", o.no_age, "Leave Age out of the predictors");
}

void add_model_options(CLI::App* c, Options& o) {
    c->add_option("--k", o.k, "Folds")->check(CLI::PositiveNumber);
    c->add_option("--reps", o.reps, "Repetitions of k-fold CV")->check(CLI::PositiveNumber);
    c->add_option("--trees", o.trees, "Trees per forest")->check(CLI::PositiveNumber);
    c->add_option("--mtry-grid", o.mtry_grid, "Candidate mtry values (default 1, sqrt p, p/3, p/2, p)");
    c->add_option("--min-leaf", o.min_leaf, "Minimum rows per leaf (0: task default)");
    c->add_flag("--no-lasso", o.no_lasso, "Skip LASSO selection");
    c->add_option("--inner-k", o.inner_k, "Folds for tuning lambda");
    c->add_option("--n-lambda", o.n_lambda, "Lambda grid size");
    c->add_option("--threads", o.threads, "Worker threads (0: all cores); never changes results");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Salary-share prediction with LASSO selection and random forests"};
    app.set_config("--config", "", "TOML config file; command-line flags win");
    app.require_subcommand(1);
    Options o;

    auto* clean_cmd = app.add_subcommand("clean", "Merge and clean raw season files");
    add_data_options(clean_cmd, o);

    auto* regress = app.add_subcommand("regress", "Repeated k-fold CV of salary shares");
    auto* classify = app.add_subcommand("classify", "Repeated k-fold CV of the 5% share class");
    for (auto* c : {regress, classify}) {
        add_data_options(c, o);
        add_model_options(c, o);
        c->add_flag("--lasso-only", o.lasso_only, "Only run with LASSO selection");
        c->add_option("--importance", o.importance, "Selection frequency above which a feature is listed");
        c->add_flag("--predictions", o.predictions, "Include held-out predictions in the JSON reports");
    }

    auto* validate = app.add_subcommand("validate", "Fit on one season, predict the next");
    add_data_options(validate, o);
    add_model_options(validate, o);
    validate->add_option("--mtry", o.mtry, "Features tried per split (0: default)");
    validate->add_option("--task", o.task, "regression or classification");

    auto* demo = app.add_subcommand("demo-overfit", "Internal vs external fit on pure noise");
    demo->add_option("--levels", o.levels, "Tree depths, increasing");
    demo->add_option("--n", o.demo_n, "Rows");
    demo->add_option("--p", o.demo_p, "Noise predictors");
    demo->add_option("--k", o.k, "Folds for the external estimate");
    demo->add_option("--seed", o.seed, "Seed");
    demo->add_option("--out", o.out, "Output directory");

    auto* density = app.add_subcommand("density", "Kernel density of salary shares per season");
    add_data_options(density, o);
    density->add_option("--points", o.points, "Grid points")->check(CLI::Range(2, 1 << 20));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*clean_cmd) return cmd_clean(o);
        if (*regress) return cmd_cv(o, Task::Regression);
        if (*classify) return cmd_cv(o, Task::Classification);
        if (*validate) return cmd_validate(o);
        if (*demo) return cmd_demo(o);
        if (*density) return cmd_density(o);
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
