#include "moot/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "moot/gpm.hpp"
#include "moot/scoring.hpp"
#include "moot/tpe.hpp"

namespace moot {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Stratum s) {
    switch (s) {
        case Stratum::low: return "low";
        case Stratum::medium: return "medium";
        case Stratum::high: return "high";
    }
    return "unknown";
}

Stratum classify_dimensionality(std::size_t x_dims) {
    if (x_dims < 6) return Stratum::low;
    if (x_dims <= 11) return Stratum::medium;
    return Stratum::high;
}

Stratum classify_dimensionality(const Table& table) { return classify_dimensionality(table.x_columns().size()); }

const std::vector<std::string>& all_treatments() {
    static const std::vector<std::string> names{"synthcore", "ucb_gpm", "tpe", "exploit", "explore", "random", "baseline"};
    return names;
}

std::unique_ptr<Strategy> make_strategy(std::string_view name) {
    if (name == "random") return std::make_unique<RandomStrategy>();
    if (name == "exploit") return std::make_unique<ExploitStrategy>();
    if (name == "explore") return std::make_unique<ExploreStrategy>();
    if (name == "ucb_gpm") return std::make_unique<UcbGpmStrategy>();
    if (name == "tpe") return std::make_unique<TpeStrategy>();
    throw std::invalid_argument("'" + std::string(name) + "' is not a loop policy");
}

std::vector<fs::path> resolve_datasets(const std::vector<fs::path>& inputs) {
    std::set<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            for (const auto& entry : fs::directory_iterator(in))
                if (entry.is_regular_file() && entry.path().extension() == ".csv") files.insert(entry.path());
        } else if (fs::is_regular_file(in)) {
            files.insert(in);
        } else {
            throw DataError("dataset path does not exist: " + in.string());
        }
    }
    return {files.begin(), files.end()};
}

namespace {

json config_object(const ExperimentConfig& cfg) {
    json datasets = json::array();
    for (const auto& p : cfg.datasets) datasets.push_back(p.generic_string());
    json j = {
        {"datasets", datasets},
        {"treatments", cfg.treatments},
        {"budgets", cfg.budgets},
        {"repeats", cfg.repeats},
        {"seed", cfg.seed},
        {"shots", cfg.shots},
        {"backend", cfg.backend == BackendKind::llm ? "llm" : "surrogate"},
    };
    if (cfg.backend == BackendKind::llm) {
        j["llm"] = {{"endpoint", cfg.llm.endpoint},
                    {"model", cfg.llm.model},
                    {"api_key_env", cfg.llm.api_key_env},
                    {"temperature", cfg.llm.temperature},
                    {"max_retries", cfg.llm.max_retries},
                    {"timeout_seconds", cfg.llm.timeout_seconds},
                    {"cache_dir", cfg.llm.cache_dir.generic_string()}};
        if (cfg.llm.max_tokens) j["llm"]["max_tokens"] = *cfg.llm.max_tokens;
    }
    return j;
}

std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::string cell_label(const CellRecord& r) {
    return r.dataset + "/" + r.treatment + "/B" + std::to_string(r.budget) + "/r" + std::to_string(r.repeat);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

std::string config_json(const ExperimentConfig& cfg) { return config_object(cfg).dump(); }

std::string config_hash(const ExperimentConfig& cfg) { return ResponseCache::key("experiment-config", config_json(cfg)); }

std::uint64_t cell_seed(std::uint64_t master, std::size_t dataset, std::size_t treatment, std::size_t budget,
                        std::size_t repeat) {
    if (dataset >= (1u << 16) || treatment >= (1u << 8) || budget >= (1u << 24) || repeat >= (1u << 16))
        throw std::out_of_range("cell coordinates exceed the seed packing ranges");
    std::uint64_t packed = (static_cast<std::uint64_t>(dataset) << 48) | (static_cast<std::uint64_t>(treatment) << 40) |
                           (static_cast<std::uint64_t>(budget) << 16) | static_cast<std::uint64_t>(repeat);
    return mix64(packed ^ mix64(master));
}

std::string to_json_line(const CellRecord& r) {
    json j = {{"dataset", r.dataset},
              {"x_dims", r.x_dims},
              {"treatment", r.treatment},
              {"budget", r.budget},
              {"repeat", r.repeat},
              {"seed", r.seed},
              {"ok", r.ok},
              {"error", r.error},
              {"best_row_id", r.best_row_id},
              {"best_score", r.best_score},
              {"labels_spent", r.labels_spent},
              {"failed_rounds", r.failed_rounds},
              {"pool_min", r.pool_min},
              {"pool_mean", r.pool_mean}};
    return j.dump();
}

CellRecord record_from_json(const std::string& line) {
    auto j = json::parse(line);
    CellRecord r;
    r.dataset = j.at("dataset").get<std::string>();
    r.x_dims = j.at("x_dims").get<std::size_t>();
    r.treatment = j.at("treatment").get<std::string>();
    r.budget = j.at("budget").get<std::size_t>();
    r.repeat = j.at("repeat").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.ok = j.at("ok").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.best_row_id = j.at("best_row_id").get<std::size_t>();
    r.best_score = j.at("best_score").get<double>();
    r.labels_spent = j.at("labels_spent").get<std::size_t>();
    r.failed_rounds = j.at("failed_rounds").get<std::size_t>();
    r.pool_min = j.at("pool_min").get<double>();
    r.pool_mean = j.at("pool_mean").get<double>();
    return r;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, SynthesisBackend* backend) {
    if (cfg.repeats < 1) throw std::invalid_argument("repeats must be at least 1");
    if (cfg.budgets.empty()) throw std::invalid_argument("at least one budget is required");
    if (cfg.treatments.empty()) throw std::invalid_argument("at least one treatment is required");
    for (const auto& t : cfg.treatments)
        if (std::find(all_treatments().begin(), all_treatments().end(), t) == all_treatments().end())
            throw std::invalid_argument("unknown treatment '" + t + "'");

    auto files = resolve_datasets(cfg.datasets);
    if (files.empty()) throw DataError("no datasets to run");
    std::vector<Table> tables;
    std::set<std::string> names;
    for (const auto& f : files) {
        tables.push_back(load_table_file(f));
        if (!names.insert(tables.back().name()).second)
            throw DataError("two datasets share the name '" + tables.back().name() + "'");
    }

    std::unique_ptr<SynthesisBackend> owned;
    LlmBackend* llm = nullptr;
    if (!backend && std::find(cfg.treatments.begin(), cfg.treatments.end(), "synthcore") != cfg.treatments.end()) {
        if (cfg.backend == BackendKind::llm) {
            auto b = std::make_unique<LlmBackend>(cfg.llm);
            llm = b.get();
            owned = std::move(b);
        } else {
            owned = std::make_unique<SurrogateBackend>();
        }
        backend = owned.get();
    }

    struct PoolStats {
        double min, mean;
    };
    std::vector<PoolStats> pools;
    for (const auto& t : tables) {
        auto scores = score_all(t);
        pools.push_back({*std::min_element(scores.begin(), scores.end()),
                         std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size())});
    }

    std::vector<CellRecord> cells;
    for (std::size_t d = 0; d < tables.size(); ++d)
        for (const auto& treatment : cfg.treatments) {
            auto t_index = static_cast<std::size_t>(
                std::find(all_treatments().begin(), all_treatments().end(), treatment) - all_treatments().begin());
            for (std::size_t budget : cfg.budgets)
                for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
                    CellRecord r;
                    r.dataset = tables[d].name();
                    r.x_dims = tables[d].x_columns().size();
                    r.treatment = treatment;
                    r.budget = budget;
                    r.repeat = rep;
                    r.seed = cell_seed(cfg.seed, d, t_index, budget, rep);
                    r.pool_min = pools[d].min;
                    r.pool_mean = pools[d].mean;
                    cells.push_back(std::move(r));
                }
        }

    std::map<std::string, std::size_t> table_index;
    for (std::size_t d = 0; d < tables.size(); ++d) table_index[tables[d].name()] = d;

    auto run_cell = [&](CellRecord& r) {
        auto start = std::chrono::steady_clock::now();
        try {
            const Table& base = tables[table_index.at(r.dataset)];
            if (r.treatment == "baseline") {
                r.best_score = r.pool_mean;
                r.labels_spent = 0;
            } else {
                Table shuffled = shuffle_rows(base, r.seed);
                RunResult result;
                if (r.treatment == "synthcore") {
                    result = run_synthcore(shuffled, *backend, plan_budget(r.budget, cfg.shots, r.seed));
                } else {
                    auto policy = make_strategy(r.treatment);
                    result = run_loop(shuffled, *policy, r.budget, kDefaultWarm, r.seed);
                }
                r.best_row_id = result.best_row_id;
                r.best_score = result.best_score;
                r.labels_spent = result.labels_spent;
                r.failed_rounds = result.failed_rounds;
            }
        } catch (const std::exception& e) {
            r.ok = false;
            r.error = e.what();
        }
        r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    const std::string started = utc_now();
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) run_cell(cells[i]);
    };
    std::size_t jobs = std::clamp<std::size_t>(cfg.jobs, 1, std::max<std::size_t>(cells.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    ExperimentReport report;
    report.records = std::move(cells);
    report.rank_tables = rank_records(report.records, cfg.seed);
    report.envelope_violations = envelope_violations(report.records);

    std::size_t failed = 0;
    for (const auto& r : report.records) failed += r.ok ? 0 : 1;
    json manifest = {
        {"config", config_object(cfg)},
        {"config_hash", config_hash(cfg)},
        {"master_seed", cfg.seed},
        {"started", started},
        {"finished", utc_now()},
        {"cells", report.records.size()},
        {"failed_cells", failed},
        {"complete", failed == 0},
        {"envelope_violations", report.envelope_violations},
    };
    if (llm) manifest["cache"] = {{"hits", llm->cache_hits()}, {"network_calls", llm->network_calls()}};
    report.manifest = manifest.dump(2);
    return report;
}

std::map<std::string, stats::RankTable> rank_records(const std::vector<CellRecord>& records, std::uint64_t seed,
                                                     const stats::ScottKnottOptions& options) {
    struct Unit {
        std::size_t x_dims = 0;
        std::map<std::string, std::vector<double>> scores;
    };
    std::map<std::string, Unit> units;  // "dataset@B<budget>"
    std::set<std::string> treatments;
    for (const auto& r : records) {
        treatments.insert(r.treatment);
        if (!r.ok) continue;
        auto& unit = units[r.dataset + "@B" + std::to_string(r.budget)];
        unit.x_dims = r.x_dims;
        unit.scores[r.treatment].push_back(r.best_score);
    }

    std::map<std::string, std::map<std::string, stats::RankedGroups>> by_stratum;
    std::size_t index = 0;
    for (auto& [key, unit] : units) {
        ++index;
        if (unit.scores.size() != treatments.size()) continue;
        std::vector<stats::TreatmentSamples> samples;
        for (auto& [name, values] : unit.scores) samples.push_back({name, values});
        Rng rng(derive_seed(seed, {0x5C077ull, index}));
        auto groups = stats::scott_knott(std::move(samples), options, rng);
        by_stratum[std::string(to_string(classify_dimensionality(unit.x_dims)))][key] = groups;
        by_stratum["all"][key] = std::move(groups);
    }
    std::map<std::string, stats::RankTable> tables;
    for (const auto& [stratum, per_unit] : by_stratum) tables[stratum] = stats::rank_table(per_unit);
    return tables;
}

std::vector<std::string> envelope_violations(const std::vector<CellRecord>& records) {
    std::vector<std::string> out;
    for (const auto& r : records) {
        if (!r.ok) continue;
        if (r.best_score < r.pool_min)
            out.push_back(cell_label(r) + ": best_score below pool minimum");
        else if (r.best_score > r.pool_mean)
            out.push_back(cell_label(r) + ": best_score above pool mean");
    }
    return out;
}

void write_rank_tables(const std::map<std::string, stats::RankTable>& tables, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& [stratum, table] : tables) {
        write_text(dir / ("ranks_" + stratum + ".csv"), table.to_csv());
        write_text(dir / ("ranks_" + stratum + ".md"), table.to_markdown());
    }
}

void write_report(const ExperimentReport& report, const fs::path& dir) {
    fs::create_directories(dir);
    std::string results, timings = "dataset,treatment,budget,repeat,wall_seconds\n";
    for (const auto& r : report.records) {
        results += to_json_line(r) + "\n";
        std::ostringstream t;
        t << r.dataset << ',' << r.treatment << ',' << r.budget << ',' << r.repeat << ',' << std::setprecision(9)
          << r.wall_time << '\n';
        timings += t.str();
    }
    write_text(dir / "results.jsonl", results);
    write_text(dir / "timings.csv", timings);
    write_text(dir / "manifest.json", report.manifest + "\n");
    write_rank_tables(report.rank_tables, dir);
    if (!report.records.empty()) emit_curves(report.records, dir);
}

std::vector<CellRecord> load_records(const fs::path& dir) {
    std::ifstream in(dir / "results.jsonl");
    if (!in) throw std::runtime_error("no results.jsonl in " + dir.string());
    std::vector<CellRecord> records;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) records.push_back(record_from_json(line));

    std::ifstream tin(dir / "timings.csv");
    if (tin) {
        std::map<std::string, double> wall;
        std::getline(tin, line);
        while (std::getline(tin, line)) {
            auto last = line.rfind(',');
            if (last == std::string::npos) continue;
            wall[line.substr(0, last)] = std::stod(line.substr(last + 1));
        }
        for (auto& r : records) {
            auto key = r.dataset + "," + r.treatment + "," + std::to_string(r.budget) + "," + std::to_string(r.repeat);
            if (auto it = wall.find(key); it != wall.end()) r.wall_time = it->second;
        }
    }
    return records;
}

std::vector<fs::path> emit_curves(const std::vector<CellRecord>& records, const fs::path& dir) {
    if (records.empty()) throw std::invalid_argument("no records to plot");
    fs::create_directories(dir);

    struct Acc {
        double sum = 0.0;
        std::size_t n = 0;
        void add(double v) { sum += v, ++n; }
        double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    };
    struct DatasetInfo {
        double pool_min = 0.0, pool_mean = 0.0;
    };
    std::map<std::string, DatasetInfo> datasets;
    std::set<std::string> treatments;
    std::set<std::size_t> budgets;
    std::map<std::tuple<std::string, std::size_t, std::string>, Acc> achieved;  // dataset, budget, treatment
    std::map<std::pair<std::string, std::size_t>, Acc> runtime;
    for (const auto& r : records) {
        datasets[r.dataset] = {r.pool_min, r.pool_mean};
        treatments.insert(r.treatment);
        budgets.insert(r.budget);
        if (!r.ok) continue;
        achieved[{r.dataset, r.budget, r.treatment}].add(r.best_score);
        runtime[{r.treatment, r.budget}].add(r.wall_time);
    }

    std::vector<std::string> order;
    for (const auto& [name, info] : datasets) order.push_back(name);
    std::stable_sort(order.begin(), order.end(),
                     [&](const auto& a, const auto& b) { return datasets[a].pool_min < datasets[b].pool_min; });

    auto num = [](double v) {
        std::ostringstream s;
        s << std::setprecision(10) << v;
        return s.str();
    };

    std::ostringstream env;
    env << "dataset,budget,pool_min,pool_mean,treatment,mean_best_score\n";
    for (const auto& name : order)
        for (std::size_t b : budgets)
            for (const auto& t : treatments) {
                auto it = achieved.find({name, b, t});
                if (it == achieved.end()) continue;
                env << name << ',' << b << ',' << num(datasets[name].pool_min) << ',' << num(datasets[name].pool_mean)
                    << ',' << t << ',' << num(it->second.mean()) << '\n';
            }
    std::ostringstream budget_curve;
    budget_curve << "treatment,budget,mean_best_score\n";
    for (std::size_t b : budgets) {
        Acc mins, means;
        for (const auto& name : order) {
            mins.add(datasets[name].pool_min);
            means.add(datasets[name].pool_mean);
        }
        std::map<std::string, Acc> per_treatment;
        for (const auto& t : treatments) {
            for (const auto& name : order)
                if (auto it = achieved.find({name, b, t}); it != achieved.end()) per_treatment[t].add(it->second.mean());
            if (per_treatment[t].n == 0) continue;
            env << "ALL," << b << ',' << num(mins.mean()) << ',' << num(means.mean()) << ',' << t << ','
                << num(per_treatment[t].mean()) << '\n';
            budget_curve << t << ',' << b << ',' << num(per_treatment[t].mean()) << '\n';
        }
    }
    std::ostringstream rt;
    rt << "treatment,budget,mean_wall_seconds\n";
    for (const auto& [key, acc] : runtime) rt << key.first << ',' << key.second << ',' << num(acc.mean()) << '\n';

    std::vector<fs::path> written{dir / "curve_envelope.csv", dir / "curve_budget.csv", dir / "curve_runtime.csv"};
    write_text(written[0], env.str());
    write_text(written[1], budget_curve.str());
    write_text(written[2], rt.str());
    return written;
}

}  // namespace moot
