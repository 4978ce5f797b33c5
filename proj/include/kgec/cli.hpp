#pragma once

// `kgec` command line: mine | train | eval | analyze | significance.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgec/analysis.hpp"
#include "kgec/checkpoint.hpp"
#include "kgec/config.hpp"
#include "kgec/data.hpp"
#include "kgec/evaluator.hpp"
#include "kgec/manifest.hpp"
#include "kgec/miner.hpp"
#include "kgec/trainer.hpp"

namespace kgec::cli {

namespace fs = std::filesystem;

class CliError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline unsigned resolve_workers(std::optional<unsigned> flag) {
    if (flag) return std::max(1u, *flag);
    if (const char* env = std::getenv("KGEC_WORKERS")) {
        try {
            return std::max(1, std::stoi(env));
        } catch (const std::exception&) {
            throw CliError(std::string("KGEC_WORKERS is not a number: '") + env + "'");
        }
    }
    return 1;
}

inline void require_file(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw CliError(what + " '" + p.string() + "' does not exist");
}

inline std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw CliError("cannot write '" + p.string() + "'");
    return out;
}

inline std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

inline std::vector<std::string> parse_string_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) if (!item.empty()) out.push_back(item);
    return out;
}

// ---- mine ----------------------------------------------------------------

struct MineArgs {
    fs::path data;
    fs::path out = "kgec_out";
    double min_conf = 0.8;
    std::uint64_t min_support = 10;
    double thresh = 0.8;
};

inline int run_mine(const MineArgs& a) {
    require_file(a.data, "data");
    Vocab vocab;
    std::vector<Triple> train;
    if (fs::is_directory(a.data)) {
        auto ds = load_dataset(a.data);
        vocab = std::move(ds.vocab);
        train = std::move(ds.train);
    } else {
        train = load_triples(a.data, vocab, true);
    }
    auto rules = mine_entailments(train, {a.min_conf, a.min_support});
    auto ents = to_entailments(rules);
    fs::create_directories(a.out);
    {
        auto out = open_out(a.out / "entailments.tsv");
        write_entailments(out, ents, vocab);
    }
    {
        auto out = open_out(a.out / "rule_diagnostics.csv");
        write_rule_diagnostics(out, rules, vocab);
    }
    auto part = classify_pairs(ents, a.thresh);
    {
        auto out = open_out(a.out / "relation_classes.csv");
        out << "class,first,second\n";
        for (const auto& p : part.equivalence)
            out << "equivalence," << vocab.relations.name(p.first) << ',' << vocab.relations.name(p.second) << '\n';
        for (const auto& p : part.inversion)
            out << "inversion," << vocab.relations.name(p.first) << ',' << vocab.relations.name(p.second) << '\n';
        for (const auto& e : part.others)
            out << "others," << premise_name(e, vocab) << ',' << vocab.relations.name(e.conclusion) << '\n';
    }
    std::cout << "mined " << rules.size() << " entailments (" << part.equivalence.size() << " equivalence pairs, "
              << part.inversion.size() << " inversion pairs) -> " << (a.out / "entailments.tsv").string() << '\n';
    return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
    std::optional<fs::path> data;
    std::optional<fs::path> ents;
    std::optional<fs::path> config;
    std::optional<fs::path> manifest;
    fs::path out = "kgec_out";
    std::optional<std::uint64_t> seed;
    std::optional<double> mu;
    bool no_projection = false;
    bool grid = false;
    std::optional<unsigned> workers;
};

inline std::vector<HashedInput> hash_run_inputs(const fs::path& data, const std::optional<fs::path>& ents) {
    std::vector<HashedInput> inputs;
    for (const char* split : {"train", "valid", "test"}) inputs.push_back(hash_input(split, detail::split_file(data, split)));
    if (ents) inputs.push_back(hash_input("entailments", *ents));
    return inputs;
}

inline void write_log_header(std::ostream& out) { out << "epoch,logistic,penalty,l2,total,valid_mrr\n"; }

inline void write_log_row(std::ostream& out, const EpochLog& e) {
    out << e.epoch << ',' << e.loss.logistic << ',' << e.loss.entailment_penalty << ',' << e.loss.l2 << ','
        << e.loss.total << ',';
    if (e.valid_mrr) out << *e.valid_mrr;
    out << '\n';
    out.flush();
}

inline TrainResult train_logged(const Dataset& ds, std::span<const Entailment> ents, const TrainConfig& config,
                                const fs::path& log_path, unsigned workers) {
    auto log = open_out(log_path);
    log.precision(12);
    write_log_header(log);
    TrainHooks hooks;
    hooks.eval_workers = workers;
    hooks.on_epoch = [&](const EpochLog& e) { write_log_row(log, e); };
    return train(ds, ents, config, hooks);
}

inline std::string grid_key(const TrainConfig& c) { return to_config_text(c); }

// Tunes d, eta, neg_ratio, lr for ComplEx (mu = 0, no projection), then mu
// with the other settings fixed. Completed runs are recorded in grid.json and
// skipped on restart.
inline int run_grid(const Dataset& ds, std::span<const Entailment> ents, const ConfigFile& cfg, const TrainArgs& a,
                    unsigned workers) {
    if (ds.valid.empty()) throw CliError("--grid needs a non-empty validation split");
    const fs::path state_path = a.out / "grid.json";
    nlohmann::json state = {{"runs", nlohmann::json::array()}};
    if (fs::exists(state_path)) {
        std::ifstream in(state_path);
        state = nlohmann::json::parse(in);
    }
    auto lookup = [&](const TrainConfig& c) -> std::optional<double> {
        for (const auto& r : state["runs"])
            if (r.at("config").get<std::string>() == grid_key(c)) return r.at("valid_mrr").get<double>();
        return std::nullopt;
    };
    std::optional<double> best_mrr;
    for (const auto& r : state["runs"])
        if (!best_mrr || r.at("valid_mrr").get<double>() > *best_mrr) best_mrr = r.at("valid_mrr").get<double>();

    auto run_one = [&](const TrainConfig& c, int stage) {
        if (auto done = lookup(c)) return *done;
        const auto idx = state["runs"].size();
        auto result = train_logged(ds, ents, c, a.out / ("grid_log_" + std::to_string(idx) + ".csv"), workers);
        const double mrr = result.best_valid_mrr.value_or(0.0);
        if (!best_mrr || mrr > *best_mrr) {
            best_mrr = mrr;
            save_checkpoint(a.out / "checkpoint.bin", result.best, ds.vocab, c.precision);
            std::ofstream(a.out / "best.cfg") << to_config_text(c);
        }
        state["runs"].push_back({{"stage", stage}, {"config", grid_key(c)}, {"valid_mrr", mrr},
                                 {"best_epoch", result.best_epoch}});
        std::ofstream(state_path) << state.dump(2) << '\n';
        std::cout << "grid run " << idx << " stage " << stage << ": d=" << c.dim << " eta=" << c.eta
                  << " neg_ratio=" << c.neg_ratio << " lr=" << c.lr << " mu=" << c.mu << " valid_mrr=" << mrr << '\n';
        return mrr;
    };

    TrainConfig best_base = cfg.train;
    std::optional<double> stage1_best;
    for (auto d : cfg.grid.dims)
        for (auto eta : cfg.grid.etas)
            for (auto neg : cfg.grid.neg_ratios)
                for (auto lr : cfg.grid.lrs) {
                    TrainConfig c = cfg.train;
                    c.dim = d;
                    c.eta = eta;
                    c.neg_ratio = neg;
                    c.lr = lr;
                    c.mu = 0.0;
                    c.projection = false;
                    double mrr = run_one(c, 1);
                    if (!stage1_best || mrr > *stage1_best) {
                        stage1_best = mrr;
                        best_base = c;
                    }
                }
    if (!ents.empty()) {
        for (auto mu : cfg.grid.mus) {
            TrainConfig c = best_base;
            c.mu = mu;
            c.projection = !a.no_projection;
            run_one(c, 2);
        }
    }
    std::cout << "grid done: " << state["runs"].size() << " runs, best valid MRR " << best_mrr.value_or(0.0) << '\n';
    return 0;
}

inline int run_train(const TrainArgs& a) {
    ConfigFile cfg;
    fs::path data_dir;
    std::optional<fs::path> ents_path = a.ents;
    if (a.manifest) {
        require_file(*a.manifest, "manifest");
        auto m = read_manifest(*a.manifest);
        if (auto changed = changed_inputs(m); !changed.empty())
            throw CliError("manifest input changed since the run: " + changed.front());
        cfg.train = m.config;
        data_dir = m.data_dir;
        if (auto* e = find_input(m, "entailments")) ents_path = e->path;
    } else {
        if (!a.data) throw CliError("train needs --data (or --manifest)");
        data_dir = *a.data;
        if (a.config) {
            require_file(*a.config, "config");
            cfg = load_config(*a.config);
        }
    }
    if (a.seed) cfg.train.seed = *a.seed;
    if (a.mu) cfg.train.mu = *a.mu;
    if (a.no_projection) cfg.train.projection = false;
    validate(cfg.train);
    require_file(data_dir, "data directory");
    if (ents_path) require_file(*ents_path, "entailment file");
    const unsigned workers = resolve_workers(a.workers);

    auto ds = load_dataset(data_dir);
    std::vector<Entailment> ents;
    if (ents_path) ents = load_entailments(*ents_path, ds.vocab);
    fs::create_directories(a.out);

    if (a.grid) return run_grid(ds, ents, cfg, a, workers);

    RunManifest manifest;
    manifest.config = cfg.train;
    manifest.data_dir = fs::absolute(data_dir);
    manifest.inputs = hash_run_inputs(data_dir, ents_path);
    manifest.outputs = {{"checkpoint", fs::absolute(a.out / "checkpoint.bin")},
                        {"log", fs::absolute(a.out / "train_log.csv")},
                        {"manifest", fs::absolute(a.out / "manifest.json")}};
    write_manifest(a.out / "manifest.json", manifest);

    auto result = train_logged(ds, ents, cfg.train, a.out / "train_log.csv", workers);
    save_checkpoint(a.out / "checkpoint.bin", result.best, ds.vocab, cfg.train.precision);
    std::cout << "trained " << cfg.train.max_iters << " epochs; best epoch " << result.best_epoch;
    if (result.best_valid_mrr) std::cout << " (valid MRR " << *result.best_valid_mrr << ")";
    std::cout << " -> " << (a.out / "checkpoint.bin").string() << '\n';
    return 0;
}

// ---- eval ----------------------------------------------------------------

struct EvalArgs {
    fs::path checkpoint;
    fs::path data;
    fs::path out = "kgec_out";
    std::optional<unsigned> workers;
    bool raw = false;
};

inline void write_metrics_csv(std::ostream& out, const EvalResult& r) {
    auto prec = out.precision(10);
    out << "metric,value\n" << "mrr," << r.mrr << '\n';
    for (const auto& [n, v] : r.hits) out << "hits@" << n << ',' << v << '\n';
    out.precision(prec);
}

inline void write_rank_dump(std::ostream& out, std::span<const Triple> test, const EvalResult& r, const Vocab& vocab) {
    out << "head,rel,tail,head_rank,tail_rank\n";
    for (std::size_t i = 0; i < test.size(); ++i)
        out << vocab.entities.name(test[i].head) << ',' << vocab.relations.name(test[i].rel) << ','
            << vocab.entities.name(test[i].tail) << ',' << r.per_triple[i].head_rank << ','
            << r.per_triple[i].tail_rank << '\n';
}

inline int run_eval(const EvalArgs& a) {
    require_file(a.checkpoint, "checkpoint");
    require_file(a.data, "data directory");
    auto ckpt = load_checkpoint(a.checkpoint);
    auto ds = load_dataset(a.data, ckpt.vocab);
    auto known = build_known_index(ds);
    auto result = evaluate(ckpt.params, ds.test, known, {.workers = resolve_workers(a.workers), .filtered = !a.raw});
    fs::create_directories(a.out);
    {
        auto out = open_out(a.out / "metrics.csv");
        write_metrics_csv(out, result);
    }
    {
        auto out = open_out(a.out / "ranks.csv");
        write_rank_dump(out, ds.test, result, ds.vocab);
    }
    write_metrics_csv(std::cout, result);
    return 0;
}

// ---- analyze -------------------------------------------------------------

struct AnalyzeArgs {
    fs::path checkpoint;
    std::optional<fs::path> types;
    std::optional<fs::path> ents;
    fs::path out = "kgec_out";
    std::string k_list = "1,2,5,10,20,50";
    std::string heatmap_types;
    std::size_t per_type = 30;
    std::uint64_t seed = 0;
    double thresh = 0.8;
};

inline int run_analyze(const AnalyzeArgs& a) {
    require_file(a.checkpoint, "checkpoint");
    auto ckpt = load_checkpoint(a.checkpoint);
    fs::create_directories(a.out);
    bool did_something = false;
    if (a.types) {
        require_file(*a.types, "type label file");
        auto labels = load_type_labels(*a.types, ckpt.vocab);
        if (labels.size() == 0) throw CliError("no type labels match the checkpoint vocabulary");
        auto ks = parse_double_list(a.k_list);
        std::vector<std::string> heat_types = parse_string_list(a.heatmap_types);
        if (heat_types.empty()) {
            // Four most frequent types, ties by name order of first appearance.
            std::vector<std::pair<std::size_t, std::uint32_t>> freq(labels.types.size());
            for (std::uint32_t t = 0; t < freq.size(); ++t) freq[t] = {0, t};
            for (const auto& [e, t] : labels.type_of) ++freq[t].first;
            std::stable_sort(freq.begin(), freq.end(), [](auto& l, auto& r) { return l.first > r.first; });
            for (std::size_t i = 0; i < std::min<std::size_t>(4, freq.size()); ++i)
                heat_types.push_back(labels.types.name(freq[i].second));
        }
        auto rows = sample_typed_entities(labels, heat_types, a.per_type, a.seed);
        for (auto [name, m] : {std::pair{"re", &ckpt.params.entity_re}, std::pair{"im", &ckpt.params.entity_im}}) {
            auto curve = purity_curve(*m, labels, ks);
            auto pout = open_out(a.out / (std::string("purity_") + name + ".csv"));
            write_purity_csv(pout, curve);
            auto hout = open_out(a.out / (std::string("heatmap_") + name + ".csv"));
            write_heatmap_csv(hout, *m, rows, labels, ckpt.vocab);
        }
        did_something = true;
    }
    if (a.ents) {
        require_file(*a.ents, "entailment file");
        auto ents = load_entailments(*a.ents, ckpt.vocab);
        auto part = classify_pairs(ents, a.thresh);
        auto out = open_out(a.out / "relation_diagnostics.csv");
        out << "class,first,second,residual,re_violation,im_gap\n";
        out.precision(10);
        for (const auto& d : diagnose_partition(ckpt.params, part)) {
            out << to_string(d.pair.cls) << ',' << ckpt.vocab.relations.name(d.pair.first) << ','
                << ckpt.vocab.relations.name(d.pair.second) << ',' << d.residual << ',' << d.re_violation << ','
                << d.im_gap << '\n';
        }
        did_something = true;
    }
    if (!did_something) throw CliError("analyze needs --types and/or --ents");
    std::cout << "analysis written to " << a.out.string() << '\n';
    return 0;
}

// ---- significance ---------------------------------------------------------

struct SignificanceArgs {
    fs::path a;
    fs::path b;
    fs::path out = "kgec_out";
};

struct RankDump {
    std::vector<std::string> keys;
    std::vector<RankPair> ranks;
};

inline RankDump read_rank_dump(const fs::path& path) {
    require_file(path, "rank dump");
    std::ifstream in(path);
    RankDump dump;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) continue;
        auto last = line.rfind(',');
        auto prev = line.rfind(',', last - 1);
        if (last == std::string::npos || prev == std::string::npos)
            throw ParseError(path.string(), lineno, "expected head,rel,tail,head_rank,tail_rank");
        try {
            dump.ranks.push_back({std::stoull(line.substr(prev + 1, last - prev - 1)), std::stoull(line.substr(last + 1))});
        } catch (const std::exception&) {
            throw ParseError(path.string(), lineno, "bad rank value");
        }
        dump.keys.push_back(line.substr(0, prev));
    }
    return dump;
}

inline int run_significance(const SignificanceArgs& args) {
    auto a = read_rank_dump(args.a);
    auto b = read_rank_dump(args.b);
    if (a.keys != b.keys) throw CliError("rank dumps cover different test triples");
    fs::create_directories(args.out);
    auto out = open_out(args.out / "significance.csv");
    out.precision(10);
    std::cout.precision(6);
    out << "metric,mean_a,mean_b,t,p_value,significant_p_lt_0.05\n";
    const std::pair<const char*, RankMetric> metrics[] = {{"mrr", RankMetric::ReciprocalRank},
                                                          {"hits@1", RankMetric::Hits1},
                                                          {"hits@3", RankMetric::Hits3},
                                                          {"hits@10", RankMetric::Hits10}};
    for (auto [name, metric] : metrics) {
        auto xa = rank_observations(a.ranks, metric);
        auto xb = rank_observations(b.ranks, metric);
        auto mean = [](const std::vector<double>& v) {
            double s = 0.0;
            for (double x : v) s += x;
            return s / static_cast<double>(v.size());
        };
        auto t = paired_ttest(xa, xb);
        out << name << ',' << mean(xa) << ',' << mean(xb) << ',' << t.t << ',' << t.p_value << ','
            << (t.significant() ? "yes" : "no") << '\n';
        std::cout << name << ": " << mean(xa) << " vs " << mean(xb) << "  p=" << t.p_value
                  << (t.significant() ? " *" : "") << '\n';
    }
    return 0;
}

// ---- entry point -----------------------------------------------------------

inline int run(int argc, const char* const* argv) {
    CLI::App app{"Knowledge-graph embeddings with non-negativity and approximate entailment constraints", "kgec"};
    app.require_subcommand(1);

    MineArgs mine;
    auto* mine_cmd = app.add_subcommand("mine", "extract length-1 entailments with PCA confidence from train");
    mine_cmd->add_option("--data", mine.data, "dataset directory or a single triple TSV")->required();
    mine_cmd->add_option("--out", mine.out, "output directory");
    mine_cmd->add_option("--min-conf", mine.min_conf, "keep rules with PCA confidence above this");
    mine_cmd->add_option("--min-support", mine.min_support, "minimum number of supporting pairs");
    mine_cmd->add_option("--thresh", mine.thresh, "confidence threshold for equivalence/inversion classes");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train embeddings");
    train_cmd->add_option("--data", tr.data, "dataset directory with train/valid/test");
    train_cmd->add_option("--ents", tr.ents, "entailment TSV");
    train_cmd->add_option("--config", tr.config, "key=value config file");
    train_cmd->add_option("--manifest", tr.manifest, "replay the run recorded in a manifest");
    train_cmd->add_option("--out", tr.out, "output directory");
    train_cmd->add_option("--seed", tr.seed, "override the config seed");
    train_cmd->add_option("--mu", tr.mu, "override the entailment penalty");
    train_cmd->add_flag("--no-projection", tr.no_projection, "skip the [0,1] projection (plain ComplEx)");
    train_cmd->add_flag("--grid", tr.grid, "grid search, selecting by validation MRR");
    train_cmd->add_option("--workers", tr.workers, "evaluation threads (default: $KGEC_WORKERS or 1)");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "filtered link prediction on the test split");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--data", ev.data, "dataset directory")->required();
    eval_cmd->add_option("--out", ev.out, "output directory");
    eval_cmd->add_option("--workers", ev.workers, "threads (default: $KGEC_WORKERS or 1)");
    eval_cmd->add_flag("--raw", ev.raw, "debug: unfiltered ranks");

    AnalyzeArgs an;
    auto* analyze_cmd = app.add_subcommand("analyze", "dimension purity, heatmaps and relation-pair diagnostics");
    analyze_cmd->add_option("--checkpoint", an.checkpoint, "checkpoint file")->required();
    analyze_cmd->add_option("--types", an.types, "entity<TAB>type labels");
    analyze_cmd->add_option("--ents", an.ents, "entailment TSV for relation diagnostics");
    analyze_cmd->add_option("--out", an.out, "output directory");
    analyze_cmd->add_option("--k", an.k_list, "comma-separated K percentages");
    analyze_cmd->add_option("--heatmap-types", an.heatmap_types, "comma-separated type names for the heatmap");
    analyze_cmd->add_option("--per-type", an.per_type, "entities per heatmap type");
    analyze_cmd->add_option("--seed", an.seed, "heatmap sampling seed");
    analyze_cmd->add_option("--thresh", an.thresh, "equivalence/inversion threshold");
    analyze_cmd->add_option("--workers", "accepted for symmetry; analysis is single-threaded");

    SignificanceArgs sig;
    auto* sig_cmd = app.add_subcommand("significance", "paired t-tests between two rank dumps");
    sig_cmd->add_option("--a", sig.a, "rank dump of model A")->required();
    sig_cmd->add_option("--b", sig.b, "rank dump of model B")->required();
    sig_cmd->add_option("--out", sig.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "kgec: error: " << e.what() << '\n';
        return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
    }

    try {
        if (*mine_cmd) return run_mine(mine);
        if (*train_cmd) return run_train(tr);
        if (*eval_cmd) return run_eval(ev);
        if (*analyze_cmd) return run_analyze(an);
        if (*sig_cmd) return run_significance(sig);
    } catch (const std::exception& e) {
        std::cerr << "kgec: error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

inline int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("kgec");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace kgec::cli
