#include "toa/harness.hpp"
#include "toa/http_backend.hpp"
#include "toa/orchestrator.hpp"
#include "toa/scenario.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace {

using nlohmann::json;

struct Options {
    int agents = 5;
    std::string backend = "scripted";
    std::string model = "gpt-4o-mini";
    std::string mode = "toa";
    bool no_cache = false;
    bool no_prune = false;
    std::size_t interest_cap = 5;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t budget = 32768;
    int concurrency = 0;
    int parse_retries = 2;
    std::string prompts_dir;
    std::size_t snap = 0;
    std::string trace_path;
    std::string calls_path;
    double temperature = 0.01;
    int max_retries = 3;
    double rate = 5.0;
    int timeout_s = 120;
    bool quiet = false;
};

void add_common(CLI::App* app, Options& o) {
    app->add_option("--agents", o.agents, "Number of agents (one chunk each)")->check(CLI::Range(1, 4096));
    app->add_option("--backend", o.backend,
                    "scripted | case-study | keyword | http(s)://host/v1 (OpenAI-compatible)");
    app->add_option("--model", o.model, "Model name for HTTP backends");
    app->add_option("--mode", o.mode, "toa | sequential | vote")
        ->check(CLI::IsMember({"toa", "sequential", "vote"}));
    app->add_flag("--no-cache", o.no_cache, "Disable prefix caching");
    app->add_flag("--no-prune", o.no_prune, "Disable usefulness pruning");
    app->add_option("--interest-cap", o.interest_cap, "Largest interest set an agent may request");
    app->add_option("--seed", o.seed, "Seed for scripted scenario generation");
    app->add_option("--out", o.out, "Write the JSON report here");
    app->add_option("--budget", o.budget, "Per-agent context budget in tokens");
    app->add_option("--concurrency", o.concurrency, "Concurrent agents (0 = one per agent)");
    app->add_option("--parse-retries", o.parse_retries, "Re-requests after a malformed reply");
    app->add_option("--prompts", o.prompts_dir, "Directory of <phase>.txt prompt overrides");
    app->add_option("--snap", o.snap, "Snap chunk boundaries to sentence ends within K tokens");
    app->add_option("--trace", o.trace_path, "Write traversal events as JSON lines");
    app->add_option("--calls", o.calls_path, "Write call records as JSON lines");
    app->add_option("--temperature", o.temperature, "Sampling temperature for HTTP backends");
    app->add_option("--max-retries", o.max_retries, "Transport retries per call");
    app->add_option("--rate", o.rate, "Requests per second (<= 0 disables the limiter)");
    app->add_option("--timeout", o.timeout_s, "Per-request timeout in seconds");
    app->add_flag("--quiet", o.quiet, "Suppress the text report");
}

bool is_http(const std::string& b) { return b.rfind("http://", 0) == 0 || b.rfind("https://", 0) == 0; }

toa::RunConfig make_config(const Options& o) {
    toa::RunConfig c;
    c.agents = o.agents;
    c.context_budget = o.budget;
    c.cache = !o.no_cache;
    c.prune = !o.no_prune;
    c.interest_cap = o.interest_cap;
    c.mode = *toa::mode_from_string(o.mode);
    c.seed = o.seed;
    c.concurrency = o.concurrency;
    c.parse_retries = o.parse_retries;
    c.split.snap_window = o.snap;
    if (!o.prompts_dir.empty()) c.prompts.load_overrides(o.prompts_dir);
    c.backend.model = o.model;
    c.backend.temperature = o.temperature;
    c.backend.max_retries = o.max_retries;
    c.backend.rate_limit = o.rate;
    c.backend.timeout = std::chrono::seconds(o.timeout_s);
    c.backend.apply_environment();
    if (is_http(o.backend)) c.backend.endpoint = o.backend;
    return c;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw toa::Error(toa::Errc::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw toa::Error(toa::Errc::Io, "cannot write " + path);
    out << data;
}

// A document, a query and a way to build backends for them.
struct Setup {
    std::string document;
    toa::Query query;
    toa::BackendFactory factory;
};

Setup make_setup(const Options& o, const toa::RunConfig& config, const std::string& doc_path,
                 const std::string& question, const std::vector<std::string>& option_args) {
    Setup s;
    if (o.backend == "scripted" || o.backend == "case-study") {
        auto scenario = o.backend == "case-study" ? toa::case_study_scenario()
                                                  : toa::gen_scripted_scenario(o.seed, o.agents, 0.6, 0.6);
        if (scenario.truth.agents != o.agents)
            throw toa::Error(toa::Errc::InvalidConfig, "the case study needs --agents 5");
        s.document = scenario.document;
        s.query = scenario.query;
        auto spec = scenario.spec;
        s.factory = [spec] { return std::make_unique<toa::ScriptedBackend>(spec); };
        return s;
    }
    if (doc_path.empty() || question.empty())
        throw toa::Error(toa::Errc::InvalidConfig, "--document and --question are required for this backend");
    s.document = read_text(doc_path);
    s.query.question = question;
    for (const auto& arg : option_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0)
            throw toa::Error(toa::Errc::InvalidConfig, "--option expects LABEL=TEXT, got " + arg);
        s.query.options.push_back({arg.substr(0, eq), arg.substr(eq + 1)});
    }
    if (o.backend == "keyword") {
        auto chunks = toa::split_document(toa::Document(s.document), config.agents, config.split);
        auto q = s.query;
        s.factory = [chunks, q] { return std::make_unique<toa::KeywordBackend>(chunks, q); };
    } else if (is_http(o.backend)) {
        auto bc = config.backend;
        s.factory = [bc] { return std::make_unique<toa::OpenAiBackend>(bc); };
    } else {
        throw toa::Error(toa::Errc::InvalidConfig, "unknown backend " + o.backend);
    }
    return s;
}

bool all_failed(const toa::RunReport& r) {
    if (r.calls.empty()) return false;
    for (const auto& c : r.calls)
        if (c.outcome != toa::CallOutcome::Failed) return false;
    return true;
}

int cmd_run(const Options& o, const std::string& doc, const std::string& question,
            const std::vector<std::string>& option_args) {
    const auto config = make_config(o);
    const auto setup = make_setup(o, config, doc, question, option_args);
    auto backend = setup.factory();
    const auto report = toa::run(config, toa::Document(setup.document), setup.query, *backend);
    if (!o.quiet) std::cout << report.to_text();
    if (!o.out.empty()) write_text(o.out, report.to_json() + "\n");
    if (!o.trace_path.empty()) write_text(o.trace_path, report.trace_jsonl());
    if (!o.calls_path.empty()) {
        std::string lines;
        for (const auto& c : report.calls) lines += toa::to_json_line(c) + "\n";
        write_text(o.calls_path, lines);
    }
    if (all_failed(report)) {
        std::cerr << "error: every backend call failed\n";
        return 3;
    }
    return 0;
}

int cmd_ablate(const Options& o, const std::string& doc, const std::string& question,
               const std::vector<std::string>& option_args) {
    const auto config = make_config(o);
    const auto setup = make_setup(o, config, doc, question, option_args);
    const auto report = toa::compare_ablations(config, toa::Document(setup.document), setup.query, setup.factory);
    if (!o.quiet) std::cout << report.to_text();
    if (!o.out.empty()) write_text(o.out, report.to_json() + "\n");
    return 0;
}

int cmd_bench(const Options& o, const std::string& dataset, int repeats, int jobs) {
    const auto config = make_config(o);
    if (!is_http(o.backend) && o.backend != "keyword")
        throw toa::Error(toa::Errc::InvalidConfig, "bench needs the keyword backend or an HTTP endpoint");
    const auto records = toa::load_dataset(dataset);
    std::vector<std::optional<std::string>> golds;
    for (const auto& r : records) golds.push_back(r.gold);

    std::vector<double> accuracy, none_rate;
    json runs = json::array();
    for (int rep = 0; rep < repeats; ++rep) {
        std::vector<std::optional<std::string>> answers(records.size());
        std::vector<std::string> errors(records.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < records.size(); i = next++) {
                try {
                    const auto& rec = records[i];
                    const std::string text = rec.load_document();
                    toa::Document document(text);
                    std::unique_ptr<toa::Backend> backend;
                    if (o.backend == "keyword")
                        backend = std::make_unique<toa::KeywordBackend>(
                            toa::split_document(document, config.agents, config.split), rec.query());
                    else
                        backend = std::make_unique<toa::OpenAiBackend>(config.backend);
                    answers[i] = toa::run(config, document, rec.query(), *backend).final_answer;
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }
        };
        {
            std::vector<std::jthread> pool;
            for (int j = 0; j < std::max(1, jobs); ++j) pool.emplace_back(worker);
        }
        for (std::size_t i = 0; i < records.size(); ++i)
            if (!errors[i].empty()) std::cerr << "record " << records[i].id << ": " << errors[i] << "\n";
        const auto ev = toa::evaluate(answers, golds);
        accuracy.push_back(ev.accuracy);
        none_rate.push_back(ev.none_rate);
        json answers_json = json::array();
        for (std::size_t i = 0; i < records.size(); ++i)
            answers_json.push_back({{"id", records[i].id},
                                    {"answer", answers[i] ? json(*answers[i]) : json(nullptr)},
                                    {"gold", golds[i] ? json(*golds[i]) : json(nullptr)}});
        runs.push_back({{"accuracy", ev.accuracy}, {"none_rate", ev.none_rate}, {"answers", answers_json}});
    }
    const toa::ResultRow row{std::string("TOA (") + o.mode + ")", toa::mean_std(accuracy), toa::mean_std(none_rate)};
    if (!o.quiet) std::cout << toa::format_results_table({row});
    if (!o.out.empty())
        write_text(o.out, json{{"method", row.method},
                               {"accuracy", {{"mean", row.accuracy.mean}, {"std", row.accuracy.std}}},
                               {"none_rate", {{"mean", row.none_rate.mean}, {"std", row.none_rate.std}}},
                               {"runs", runs},
                               {"config", json::parse(toa::config_to_json(config))}}
                                  .dump(2) +
                              "\n");
    return 0;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stod(item));
    return out;
}

int cmd_needle(const Options& o, const std::string& lengths_arg, const std::string& depths_arg, bool multi,
               const std::string& haystack_path) {
    auto config = make_config(o);
    std::vector<double> lengths = parse_list(lengths_arg), depths = parse_list(depths_arg);
    if (lengths.empty() || depths.empty()) throw toa::Error(toa::Errc::InvalidConfig, "empty length or depth grid");
    std::size_t longest = 0;
    for (double l : lengths) longest = std::max(longest, static_cast<std::size_t>(l));
    const std::string source = haystack_path.empty() ? toa::synthetic_filler(longest + 64, o.seed)
                                                     : read_text(haystack_path);

    std::vector<std::pair<double, double>> grid;
    for (std::size_t i = 0; i < depths.size(); ++i) {
        if (!multi) grid.push_back({depths[i], depths[i]});
        else
            for (std::size_t j = i; j < depths.size(); ++j) grid.push_back({depths[i], depths[j]});
    }

    json cells = json::array();
    std::vector<double> scores;
    std::ostringstream table;
    table << (multi ? "depth1/depth2" : "depth") << "\t";
    for (double l : lengths) table << static_cast<std::size_t>(l) << "\t";
    table << "\n";
    for (const auto& [d1, d2] : grid) {
        std::ostringstream label;
        label << d1;
        if (multi) label << "/" << d2;
        table << label.str() << "\t";
        for (double l : lengths) {
            const auto len = static_cast<std::size_t>(l);
            auto spec = multi ? toa::multi_needle_fixture(len, d1, d2, source)
                              : toa::single_needle_fixture(len, d1, source);
            const auto hay = toa::build_haystack(spec);
            toa::Document document(hay.text);
            std::unique_ptr<toa::Backend> backend;
            if (is_http(o.backend)) backend = std::make_unique<toa::OpenAiBackend>(config.backend);
            else
                backend = std::make_unique<toa::KeywordBackend>(
                    toa::split_document(document, config.agents, config.split), toa::Query{spec.question, {}});
            config.context_budget = std::max(config.context_budget, len);
            const auto report = toa::run(config, document, toa::Query{spec.question, {}}, *backend);
            const double recall = toa::needle_recall(spec, report.final_answer);
            scores.push_back(recall);
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f", recall);
            table << buf << "\t";
            cells.push_back({{"length", len},
                             {"depths", multi ? json{d1, d2} : json{d1}},
                             {"recall", recall},
                             {"answer", report.final_answer ? json(*report.final_answer) : json(nullptr)},
                             {"calls", report.counts.total.calls}});
        }
        table << "\n";
    }
    const auto summary = toa::mean_std(scores);
    if (!o.quiet) {
        std::cout << table.str() << "mean recall: " << toa::format_mean_std(summary.mean, summary.std, 2) << "\n"
                  << "(scored by exact keyword match, not by a model judge)\n";
    }
    if (!o.out.empty())
        write_text(o.out, json{{"multi", multi},
                               {"scoring", "exact keyword match"},
                               {"mean_recall", summary.mean},
                               {"cells", cells}}
                                  .dump(2) +
                              "\n");
    return 0;
}

int cmd_selftest(const Options& o, std::uint64_t seeds) {
    const auto start = std::chrono::steady_clock::now();
    std::size_t checked = 0, failed = 0;
    const toa::TraverseOptions settings[] = {{false, false}, {true, false}, {true, true}};
    for (std::uint64_t s = o.seed; s < o.seed + seeds; ++s) {
        const auto scenario = toa::random_scenario(s);
        for (const auto& opt : settings) {
            auto check = toa::check_scenario(scenario, opt);
            ++checked;
            if (check.mismatches.empty()) continue;
            ++failed;
            if (failed <= 10)
                std::cout << "seed " << s << " cache=" << opt.cache << " prune=" << opt.prune << ": "
                          << check.mismatches.front() << "\n";
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << checked << " oracle checks over " << seeds << " seeds, " << failed << " mismatches, "
              << secs << " s\n";
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tree-of-agents long-document question answering"};
    app.require_subcommand(1);
    Options o;

    std::string doc, question, dataset, lengths = "1000,8000", depths = "0,10,20,30,40,50,60,70,80,90,100",
                                        haystack;
    std::vector<std::string> option_args;
    int repeats = 1, jobs = 1;
    bool multi = false;
    std::uint64_t seeds = 1000;

    auto* run = app.add_subcommand("run", "Answer one question over one document");
    add_common(run, o);
    run->add_option("--document", doc, "UTF-8 text file");
    run->add_option("--question", question, "Question text");
    run->add_option("--option", option_args, "Answer option as LABEL=TEXT (repeatable)");

    auto* bench = app.add_subcommand("bench", "Evaluate a JSON-lines dataset");
    add_common(bench, o);
    bench->add_option("--dataset", dataset, "JSON-lines dataset")->required();
    bench->add_option("--repeats", repeats, "Independent passes for mean and std")->check(CLI::Range(1, 100000));
    bench->add_option("--jobs", jobs, "Records processed concurrently")->check(CLI::Range(1, 1024));

    auto* needle = app.add_subcommand("needle", "Needle-in-a-haystack sweep");
    add_common(needle, o);
    needle->add_option("--lengths", lengths, "Comma-separated haystack lengths in tokens");
    needle->add_option("--depths", depths, "Comma-separated depth percentages");
    needle->add_flag("--multi", multi, "Plant the two-needle fixture");
    needle->add_option("--haystack", haystack, "Haystack source text (default: synthetic filler)");

    auto* ablate = app.add_subcommand("ablate", "Compare cache and prune settings");
    add_common(ablate, o);
    ablate->add_option("--document", doc, "UTF-8 text file");
    ablate->add_option("--question", question, "Question text");
    ablate->add_option("--option", option_args, "Answer option as LABEL=TEXT (repeatable)");

    auto* selftest = app.add_subcommand("selftest", "Check the engine against the brute-force oracle");
    add_common(selftest, o);
    selftest->add_option("--seeds", seeds, "Number of random scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) return cmd_run(o, doc, question, option_args);
        if (*bench) return cmd_bench(o, dataset, repeats, jobs);
        if (*needle) return cmd_needle(o, lengths, depths, multi, haystack);
        if (*ablate) return cmd_ablate(o, doc, question, option_args);
        if (*selftest) return cmd_selftest(o, seeds);
    } catch (const toa::Error& e) {
        std::cerr << "error [" << toa::to_string(e.code()) << "]: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
