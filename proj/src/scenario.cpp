#include "toa/scenario.hpp"

#include "toa/harness.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace toa {

namespace {

const std::vector<std::string> kLabels = {"A", "B", "C", "D"};

Query scenario_query() {
    return {"Which option is best supported by the document?",
            {{"A", "the first account"}, {"B", "the second account"}, {"C", "the third account"},
             {"D", "the fourth account"}}};
}

// Every non-root prefix of every ordering of `interests`, keyed with `owner`
// in front, in the order the orderings produce them (duplicates included).
std::vector<ChunkSequence> prefix_visits(int owner, std::vector<int> interests) {
    std::vector<ChunkSequence> out;
    if (interests.empty()) return out;
    std::sort(interests.begin(), interests.end());
    do {
        ChunkSequence seq{owner};
        for (int x : interests) {
            seq.push_back(x);
            out.push_back(seq);
        }
    } while (std::next_permutation(interests.begin(), interests.end()));
    return out;
}

std::set<ChunkSequence> distinct_prefixes(int owner, const std::vector<int>& interests) {
    auto v = prefix_visits(owner, interests);
    return {v.begin(), v.end()};
}

std::string unique_ids(std::mt19937_64& rng, const std::vector<int>& ids, int owner, int n) {
    std::vector<int> shown = ids;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < 0.2) shown.push_back(owner);
    if (u(rng) < 0.2) shown.push_back(n + static_cast<int>(rng() % 3));
    std::shuffle(shown.begin(), shown.end(), rng);
    std::string out;
    switch (rng() % 4) {
    case 0:
        for (int id : shown) out += (out.empty() ? "" : ",") + std::to_string(id);
        return out;
    case 1:
        out = "[";
        for (int id : shown) out += (out.size() == 1 ? "" : ", ") + std::to_string(id);
        return out + "]";
    case 2:
        for (int id : shown) out += (out.empty() ? "" : " and ") + std::to_string(id);
        return out;
    default:
        for (int id : shown) out += (out.empty() ? "Agent " : ", Agent ") + std::to_string(id);
        return out;
    }
}

std::string raw_label(std::mt19937_64& rng, const std::optional<std::string>& label) {
    if (!label) {
        static const std::vector<std::string> forms = {"None", "none", "null", "N/A"};
        return forms[rng() % forms.size()];
    }
    switch (rng() % 4) {
    case 0: return *label;
    case 1: return "Option " + *label;
    case 2: return std::string(1, static_cast<char>(std::tolower(static_cast<unsigned char>((*label)[0]))));
    default: return *label + ".";
    }
}

} // namespace

std::size_t distinct_prefix_count(std::size_t k) {
    std::size_t total = 0, term = 1;
    for (std::size_t r = 1; r <= k; ++r) {
        term *= k - r + 1;
        total += term;
    }
    return total;
}

Scenario gen_scripted_scenario(std::uint64_t seed, int n, double interest_density, double usefulness_density) {
    if (n < 1 || n > 5) throw Error(Errc::InvalidArgument, "scenario agents must be in [1, 5]");
    if (interest_density < 0 || interest_density > 1 || usefulness_density < 0 || usefulness_density > 1)
        throw Error(Errc::InvalidArgument, "densities must lie in [0, 1]");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto random_answer = [&]() -> std::optional<std::string> {
        const double x = u(rng);
        if (x < 0.15) return std::nullopt;
        return kLabels[rng() % kLabels.size()];
    };

    Scenario s;
    s.seed = seed;
    s.query = scenario_query();
    s.document = synthetic_filler(static_cast<std::size_t>(n) * 40, seed);
    auto& t = s.truth;
    t.agents = n;
    t.labels = kLabels;
    t.interests.resize(static_cast<std::size_t>(n));
    t.verdicts.resize(static_cast<std::size_t>(n));
    t.finals.resize(static_cast<std::size_t>(n));
    s.spec.agents.resize(static_cast<std::size_t>(n));

    for (int i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        auto& script = s.spec.agents[idx];
        const auto first = random_answer();
        script.perceive = {"agent " + std::to_string(i) + " initial evidence", first.value_or("None")};

        auto& interests = t.interests[idx];
        for (int j = 0; j < n; ++j)
            if (j != i && u(rng) < interest_density) interests.push_back(j);
        while (interests.size() > 4) interests.erase(interests.begin() + static_cast<long>(rng() % interests.size()));
        script.select_ids = interests.empty()
                                ? std::vector<std::string>{"None", "none", "N/A", "null"}[rng() % 4]
                                : unique_ids(rng, interests, i, n);

        for (const auto& seq : distinct_prefixes(i, interests)) {
            const Utility v = u(rng) < usefulness_density ? Utility::Useful : Utility::Useless;
            t.verdicts[idx][seq] = v;
            script.updates[seq] = {v, "fact " + format_sequence(seq), random_answer().value_or("None")};
        }

        std::vector<ChunkSequence> keys{{i}};
        for (const auto& seq : distinct_prefixes(i, interests)) keys.push_back(seq);
        for (const auto& key : keys) {
            std::optional<std::string> intended = random_answer();
            std::string raw = raw_label(rng, intended);
            if (u(rng) < 0.05) {
                raw = "E";
                intended.reset();
            }
            t.finals[idx][key] = intended;
            script.finals[key] = raw;
        }
    }
    t.tie_break_preference = kLabels;
    std::shuffle(t.tie_break_preference.begin(), t.tie_break_preference.end(), rng);
    s.spec.tie_break_preference = t.tie_break_preference;
    return s;
}

Scenario random_scenario(std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 1 + static_cast<int>(rng() % 5);
    const double interest = u(rng);
    const double usefulness = u(rng);
    return gen_scripted_scenario(seed, n, interest, usefulness);
}

Scenario case_study_scenario() {
    Scenario s;
    s.query = {"What is the relationship between the three victims?",
               {{"A", "They were former business partners."},
                {"B", "They were members of the same family."},
                {"C", "They were rivals competing for the same contract."},
                {"D", "They were regular guests at the same hotel."}}};
    const std::size_t length = 22140;
    const std::string filler = synthetic_filler(length + 32, 11);
    const auto tokens = default_tokenizer().tokenize(filler);
    s.document = filler.substr(0, tokens[length - 1].end);

    auto& t = s.truth;
    t.agents = 5;
    t.labels = kLabels;
    t.interests = {{2, 3, 4}, {4}, {4}, {4}, {0}};
    t.tie_break_preference = kLabels;
    s.spec.tie_break_preference = kLabels;

    const std::vector<PerceiveResponse> first = {
        {"They were all regular customers at the same hotel.", "D"},
        {"The victims were known to frequently exchange business proposals.", "C"},
        {"All three victims had booked rooms under the same group reservation.", "C"},
        {"Each victim was connected to a similar project involving a large sum of money.", "C"},
        {"The victims had a shared history of working together.", "A"}};
    const std::map<ChunkSequence, Utility> agent0 = {
        {{0, 2}, Utility::Useless},       {{0, 3}, Utility::Useful},        {{0, 3, 2}, Utility::Useless},
        {{0, 3, 4}, Utility::Useful},     {{0, 3, 4, 2}, Utility::Useless}, {{0, 4}, Utility::Useful},
        {{0, 4, 2}, Utility::Useless},    {{0, 4, 3}, Utility::Useful},     {{0, 4, 3, 2}, Utility::Useful}};

    s.spec.agents.resize(5);
    t.verdicts.resize(5);
    t.finals.resize(5);
    for (int i = 0; i < 5; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        auto& script = s.spec.agents[idx];
        script.perceive = first[idx];
        std::string ids;
        for (int x : t.interests[idx]) ids += (ids.empty() ? "" : ", ") + std::to_string(x);
        script.select_ids = ids;
        for (const auto& seq : distinct_prefixes(i, t.interests[idx])) {
            // prefixes the pruned walk never reaches are useless
            Utility v = Utility::Useful;
            if (i == 0) {
                auto it = agent0.find(seq);
                v = it == agent0.end() ? Utility::Useless : it->second;
            }
            t.verdicts[idx][seq] = v;
            script.updates[seq] = {v, "facts gathered along " + format_sequence(seq),
                                   "They had worked together on one venture."};
        }
        t.finals[idx][{i}] = "A";
        for (const auto& seq : distinct_prefixes(i, t.interests[idx])) t.finals[idx][seq] = "A";
        script.default_final = "A";
        script.default_utility = Utility::Useful;
    }
    return s;
}

OracleResult oracle_predict(const ScenarioTruth& truth, TraverseOptions options, Mode mode) {
    if (mode == Mode::Sequential) throw Error(Errc::InvalidArgument, "the oracle covers toa and vote modes");
    const int n = truth.agents;
    OracleResult out;
    for (Phase p : kAllPhases) out.calls[p] = 0;
    out.calls[Phase::Perceive] = static_cast<std::size_t>(n);
    out.calls[Phase::Finalize] = static_cast<std::size_t>(n);
    const bool explore = mode == Mode::TOA && n > 1;
    if (explore) out.calls[Phase::SelectChunks] = static_cast<std::size_t>(n);

    for (int i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        OracleAgent a;
        std::set<ChunkSequence> keys{{i}};
        if (explore) {
            const auto& verdict = truth.verdicts[idx];
            auto useful = [&](const ChunkSequence& s) { return verdict.at(s) == Utility::Useful; };
            // a prefix is reached when every shorter non-root prefix is useful
            auto reached = [&](const ChunkSequence& s) {
                for (std::size_t len = 2; len < s.size(); ++len)
                    if (!useful(ChunkSequence(s.begin(), s.begin() + static_cast<long>(len)))) return false;
                return true;
            };
            const auto visits = prefix_visits(i, truth.interests[idx]);
            const std::set<ChunkSequence> distinct(visits.begin(), visits.end());

            if (!options.prune) {
                for (const auto& s : distinct) {
                    keys.insert(s);
                    a.usefulness[s] = verdict.at(s);
                }
                a.update_calls = options.cache ? distinct.size() : visits.size();
            } else {
                for (const auto& s : distinct) {
                    if (!reached(s)) continue;
                    a.usefulness[s] = verdict.at(s);
                    if (useful(s)) keys.insert(s);
                }
                if (options.cache) {
                    a.update_calls = a.usefulness.size();
                } else {
                    std::map<ChunkSequence, std::size_t> seen;
                    for (const auto& s : visits)
                        if (reached(s)) ++seen[s];
                    for (const auto& [s, count] : seen) a.update_calls += useful(s) ? count : 1;
                }
            }
        }
        a.cache_keys.assign(keys.begin(), keys.end());
        a.sigma = a.cache_keys.front();
        for (const auto& k : a.cache_keys)
            if (k.size() > a.sigma.size()) a.sigma = k;
        a.answer = truth.finals[idx].at(a.sigma);
        out.calls[Phase::UpdateCognition] += a.update_calls;
        out.agents.push_back(std::move(a));
    }

    std::map<std::string, int> tally;
    for (const auto& a : out.agents)
        if (a.answer) ++tally[*a.answer];
    int top = 0;
    for (const auto& [_, c] : tally) top = std::max(top, c);
    std::vector<std::string> tied;
    for (const auto& [label, c] : tally)
        if (c == top) tied.push_back(label);
    if (tied.size() == 1) {
        out.final_answer = tied.front();
    } else if (tied.size() > 1) {
        out.tie_broken = true;
        out.calls[Phase::TieBreak] = 1;
        out.final_answer = tied.front();
        for (const auto& label : truth.tie_break_preference)
            if (std::find(tied.begin(), tied.end(), label) != tied.end()) {
                out.final_answer = label;
                break;
            }
    }
    return out;
}

OracleCheck check_scenario(const Scenario& scenario, TraverseOptions options, Mode mode, int concurrency) {
    const auto& truth = scenario.truth;
    RunConfig config;
    config.agents = truth.agents;
    config.cache = options.cache;
    config.prune = options.prune;
    config.mode = mode;
    config.seed = scenario.seed;
    config.concurrency = concurrency;
    config.context_budget = 1u << 30;

    OracleCheck out;
    out.expected = oracle_predict(truth, options, mode);
    ScriptedBackend backend(scenario.spec);
    out.report = run(config, Document(scenario.document), scenario.query, backend);

    auto& bad = out.mismatches;
    const auto& r = out.report;
    auto label = [](const std::optional<std::string>& v) { return v.value_or("None"); };
    if (r.final_answer != out.expected.final_answer)
        bad.push_back("final answer " + label(r.final_answer) + " != " + label(out.expected.final_answer));
    if (r.vote.tie_broken != out.expected.tie_broken) bad.push_back("tie-break flag differs");
    for (Phase p : kAllPhases) {
        const auto got = r.counts.by_phase.at(p).calls;
        const auto want = out.expected.calls.at(p);
        if (got != want)
            bad.push_back(std::string(to_string(p)) + " calls " + std::to_string(got) + " != " + std::to_string(want));
    }
    if (r.agents.size() != out.expected.agents.size()) {
        bad.push_back("agent count differs");
        return out;
    }
    const bool explore = mode == Mode::TOA && truth.agents > 1;
    for (std::size_t i = 0; i < r.agents.size(); ++i) {
        const auto& got = r.agents[i];
        const auto& want = out.expected.agents[i];
        const std::string who = "agent " + std::to_string(i) + ": ";
        if (got.error) bad.push_back(who + "failed: " + *got.error);
        if (explore && got.interests != truth.interests[i]) bad.push_back(who + "interest set differs");
        if (got.cache_keys != want.cache_keys) bad.push_back(who + "cache keys differ");
        if (got.usefulness != want.usefulness) bad.push_back(who + "usefulness map differs");
        if (got.stats.fresh_calls != want.update_calls)
            bad.push_back(who + "update calls " + std::to_string(got.stats.fresh_calls) + " != " +
                          std::to_string(want.update_calls));
        if (got.verdict.sigma != want.sigma) bad.push_back(who + "sigma* differs");
        if (got.verdict.answer != want.answer)
            bad.push_back(who + "answer " + label(got.verdict.answer) + " != " + label(want.answer));
    }
    return out;
}

} // namespace toa
