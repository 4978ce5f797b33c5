#pragma once

// key = value configuration files for training runs and grid searches.
//
//   # comment
//   d = 200
//   eta = 0.03
//   neg_ratio = 10
//   lr = 1.0
//   mu = 10
//   n_batches = 100
//   max_iters = 1000
//   grad_norm_cap = 1.0
//   seed = 0
//   eval_every = 50
//   projection = true          # false gives plain ComplEx
//   l2_scope = batch           # batch | full
//   precision = float32        # checkpoint precision: float32 | float64
//   grid_d = 100,150,200       # grid search axes (optional)

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kgec/trainer.hpp"

namespace kgec {

struct GridSpec {
    std::vector<std::size_t> dims = {100, 150, 200};
    std::vector<double> etas = {0.001, 0.003, 0.01, 0.03, 0.1};
    std::vector<std::size_t> neg_ratios = {2, 10};
    std::vector<double> lrs = {0.01, 0.05, 0.1, 0.5, 1.0};
    std::vector<double> mus = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4, 1e5};
};

struct ConfigFile {
    TrainConfig train;
    GridSpec grid;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("bad value '" + std::string(v) + "' for '" + std::string(key) + "'");
    return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean '" + std::string(v) + "' for '" + std::string(key) + "'");
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view v) {
    std::vector<T> out;
    while (!v.empty()) {
        auto comma = v.find(',');
        out.push_back(parse_number<T>(key, trim(v.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    if (out.empty()) throw ConfigError("empty list for '" + std::string(key) + "'");
    return out;
}

}  // namespace detail

inline void apply_setting(ConfigFile& cfg, std::string_view key, std::string_view value) {
    using namespace detail;
    auto& c = cfg.train;
    if (key == "d") c.dim = parse_number<std::size_t>(key, value);
    else if (key == "eta") c.eta = parse_number<double>(key, value);
    else if (key == "neg_ratio") c.neg_ratio = parse_number<std::size_t>(key, value);
    else if (key == "lr") c.lr = parse_number<double>(key, value);
    else if (key == "mu") c.mu = parse_number<double>(key, value);
    else if (key == "n_batches") c.n_batches = parse_number<std::size_t>(key, value);
    else if (key == "max_iters") c.max_iters = parse_number<std::size_t>(key, value);
    else if (key == "grad_norm_cap") c.grad_norm_cap = parse_number<double>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "eval_every") c.eval_every = parse_number<std::size_t>(key, value);
    else if (key == "projection") c.projection = parse_bool(key, value);
    else if (key == "l2_scope") {
        if (value == "batch") c.l2_scope = L2Scope::Batch;
        else if (value == "full") c.l2_scope = L2Scope::Full;
        else throw ConfigError("l2_scope must be 'batch' or 'full'");
    } else if (key == "precision") {
        if (value == "float32") c.precision = Precision::Float32;
        else if (value == "float64") c.precision = Precision::Float64;
        else throw ConfigError("precision must be 'float32' or 'float64'");
    }
    else if (key == "grid_d") cfg.grid.dims = parse_list<std::size_t>(key, value);
    else if (key == "grid_eta") cfg.grid.etas = parse_list<double>(key, value);
    else if (key == "grid_neg_ratio") cfg.grid.neg_ratios = parse_list<std::size_t>(key, value);
    else if (key == "grid_lr") cfg.grid.lrs = parse_list<double>(key, value);
    else if (key == "grid_mu") cfg.grid.mus = parse_list<double>(key, value);
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

inline ConfigFile parse_config(std::istream& in, const std::string& source = "<config>") {
    ConfigFile cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = line;
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = detail::trim(view);
        if (view.empty()) continue;
        auto eq = view.find('=');
        if (eq == std::string_view::npos) throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            apply_setting(cfg, detail::trim(view.substr(0, eq)), detail::trim(view.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    validate(cfg.train);
    return cfg;
}

inline ConfigFile load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    return parse_config(in, path.string());
}

inline std::string to_config_text(const TrainConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "d = " << c.dim << '\n'
        << "eta = " << c.eta << '\n'
        << "neg_ratio = " << c.neg_ratio << '\n'
        << "lr = " << c.lr << '\n'
        << "mu = " << c.mu << '\n'
        << "n_batches = " << c.n_batches << '\n'
        << "max_iters = " << c.max_iters << '\n'
        << "grad_norm_cap = " << c.grad_norm_cap << '\n'
        << "seed = " << c.seed << '\n'
        << "eval_every = " << c.eval_every << '\n'
        << "projection = " << (c.projection ? "true" : "false") << '\n'
        << "l2_scope = " << (c.l2_scope == L2Scope::Batch ? "batch" : "full") << '\n'
        << "precision = " << (c.precision == Precision::Float32 ? "float32" : "float64") << '\n';
    return out.str();
}

}  // namespace kgec
