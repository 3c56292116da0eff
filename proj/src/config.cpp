#include "rct/config.hpp"

#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "rct/error.hpp"

namespace rct {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& what) {
    const auto mark = node.Mark();
    if (mark.is_null()) throw ParseError(what);
    throw ParseError(what, mark.line + 1, mark.column + 1);
}

void require_map(const YAML::Node& node, const std::string& where,
                 const std::set<std::string>& allowed) {
    if (!node.IsMap()) fail(node, fmt::format("'{}' must be a mapping", where));
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.contains(key))
            fail(kv.first, fmt::format("unknown key '{}' in {}", key, where));
    }
}

template <class T>
T scalar(const YAML::Node& node, const std::string& name) {
    if (!node.IsScalar()) fail(node, fmt::format("'{}' must be a scalar", name));
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        fail(node, fmt::format("'{}' has invalid value '{}'", name, node.Scalar()));
    }
}

double number(const YAML::Node& node, const std::string& name) {
    const auto v = scalar<double>(node, name);
    if (!std::isfinite(v)) fail(node, fmt::format("'{}' must be finite", name));
    return v;
}

bool is_infinity(const YAML::Node& node) {
    if (node.IsNull()) return true;
    if (!node.IsScalar()) return false;
    const auto& s = node.Scalar();
    return s == "inf" || s == "Inf" || s == "infinity" || s == ".inf" || s == ".Inf";
}

template <class F>
auto sequence(const YAML::Node& node, const std::string& name, F element) {
    if (!node.IsSequence() || node.size() == 0)
        fail(node, fmt::format("'{}' must be a non-empty list", name));
    std::vector<decltype(element(node))> out;
    for (const auto& item : node) out.push_back(element(item));
    return out;
}

void apply_population(const YAML::Node& node, PopulationParams& p) {
    require_map(node, "population",
                {"mu_b", "sd_b_across", "mean_control_change", "sd_control_change", "n_plots"});
    if (node["mu_b"]) p.mu_b = number(node["mu_b"], "mu_b");
    if (node["sd_b_across"]) p.sd_b_across = number(node["sd_b_across"], "sd_b_across");
    if (node["mean_control_change"])
        p.mean_control_change = number(node["mean_control_change"], "mean_control_change");
    if (node["sd_control_change"])
        p.sd_control_change = number(node["sd_control_change"], "sd_control_change");
    if (node["n_plots"]) p.n_plots = scalar<int>(node["n_plots"], "n_plots");
}

void apply_scenarios(const YAML::Node& node, ScenarioGrid& g) {
    require_map(node, "scenarios",
                {"tau_values", "relative_tau_values", "beta_mod_values", "sd_eps1_values",
                 "n_values", "samples_per_plot_values", "n_replicates"});
    auto num = [](const std::string& name) {
        return [name](const YAML::Node& n) { return number(n, name); };
    };
    if (node["tau_values"] && node["relative_tau_values"])
        fail(node["relative_tau_values"], "give tau_values or relative_tau_values, not both");
    if (node["tau_values"]) g.tau_values = sequence(node["tau_values"], "tau_values", num("tau_values"));
    if (node["relative_tau_values"]) {
        g.tau_values.clear();
        for (double r : sequence(node["relative_tau_values"], "relative_tau_values",
                                 num("relative_tau_values")))
            g.tau_values.push_back(r * g.base_params.mu_b);
    }
    if (node["beta_mod_values"])
        g.beta_mod_values = sequence(node["beta_mod_values"], "beta_mod_values", num("beta_mod_values"));
    if (node["sd_eps1_values"])
        g.sd_eps1_values = sequence(node["sd_eps1_values"], "sd_eps1_values", num("sd_eps1_values"));
    if (node["n_values"])
        g.n_values = sequence(node["n_values"], "n_values",
                              [](const YAML::Node& n) { return scalar<int>(n, "n_values"); });
    if (node["samples_per_plot_values"])
        g.samples_per_plot_values = sequence(
            node["samples_per_plot_values"], "samples_per_plot_values",
            [](const YAML::Node& n) -> std::optional<int> {
                if (is_infinity(n)) return std::nullopt;
                return scalar<int>(n, "samples_per_plot_values");
            });
    if (node["n_replicates"]) g.n_replicates = scalar<int>(node["n_replicates"], "n_replicates");
}

void apply_policy(const YAML::Node& node, ScenarioGrid& g) {
    require_map(node, "policy", {"treatment_cost", "budget"});
    if (node["treatment_cost"]) g.treatment_cost = number(node["treatment_cost"], "treatment_cost");
    if (node["budget"]) {
        g.budget = is_infinity(node["budget"]) ? std::numeric_limits<double>::infinity()
                                               : number(node["budget"], "budget");
    }
}

nlohmann::ordered_json grid_json(const ScenarioGrid& g) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["seed"] = g.master_seed;
    j["alpha"] = g.alpha;
    j["max_failure_rate"] = g.max_failure_rate;
    const auto& p = g.base_params;
    j["population"] = {{"mu_b", p.mu_b},
                       {"sd_b_across", p.sd_b_across},
                       {"mean_control_change", p.mean_control_change},
                       {"sd_control_change", p.sd_control_change},
                       {"n_plots", p.n_plots}};
    j["design"] = {{"sd_within_plot", g.sd_within_plot}};
    ordered_json m = ordered_json::array();
    for (const auto& v : g.samples_per_plot_values) {
        if (v)
            m.push_back(*v);
        else
            m.push_back("inf");
    }
    j["scenarios"] = {{"tau_values", g.tau_values},
                      {"beta_mod_values", g.beta_mod_values},
                      {"sd_eps1_values", g.sd_eps1_values},
                      {"n_values", g.n_values},
                      {"samples_per_plot_values", m},
                      {"n_replicates", g.n_replicates}};
    ordered_json budget = std::isfinite(g.budget) ? ordered_json(g.budget) : ordered_json("inf");
    j["policy"] = {{"treatment_cost", g.treatment_cost}, {"budget", budget}};
    return j;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& grid_override) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(e.msg, e.mark.line + 1, e.mark.column + 1);
    }
    if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    require_map(root, "config",
                {"seed", "threads", "grid", "output_dir", "alpha", "max_failure_rate",
                 "population", "design", "scenarios", "policy"});

    RunConfig cfg;
    if (root["grid"]) cfg.grid_name = scalar<std::string>(root["grid"], "grid");
    if (!grid_override.empty()) cfg.grid_name = grid_override;
    if (cfg.grid_name == "full" || cfg.grid_name == "custom") {
        cfg.grid = ScenarioGrid::full();
    } else if (cfg.grid_name == "power_curve") {
        cfg.grid = ScenarioGrid::power_curve();
    } else {
        if (root["grid"] && grid_override.empty())
            fail(root["grid"], fmt::format("unknown grid '{}'", cfg.grid_name));
        throw ParseError(fmt::format("unknown grid '{}'", cfg.grid_name));
    }

    auto& g = cfg.grid;
    if (root["population"]) {
        apply_population(root["population"], g.base_params);
        if (cfg.grid_name == "power_curve") {
            g.tau_values.clear();
            for (double r : ScenarioGrid::power_curve_relative_taus())
                g.tau_values.push_back(r * g.base_params.mu_b);
        }
    }
    if (root["seed"]) g.master_seed = scalar<std::uint64_t>(root["seed"], "seed");
    if (root["threads"]) cfg.threads = scalar<int>(root["threads"], "threads");
    if (root["output_dir"]) cfg.output_dir = scalar<std::string>(root["output_dir"], "output_dir");
    if (root["alpha"]) g.alpha = number(root["alpha"], "alpha");
    if (root["max_failure_rate"])
        g.max_failure_rate = number(root["max_failure_rate"], "max_failure_rate");
    if (root["design"]) {
        require_map(root["design"], "design", {"sd_within_plot"});
        if (root["design"]["sd_within_plot"])
            g.sd_within_plot = number(root["design"]["sd_within_plot"], "sd_within_plot");
    }
    if (root["scenarios"]) apply_scenarios(root["scenarios"], g);
    if (root["policy"]) apply_policy(root["policy"], g);

    try {
        g.validate();
    } catch (const Error& e) {
        throw ParseError(fmt::format("invalid configuration: {}", e.what()));
    }
    if (cfg.threads < 0) throw ParseError("threads must be >= 0");
    return cfg;
}

std::string run_config_json(const RunConfig& config) {
    nlohmann::ordered_json j;
    j["grid"] = config.grid_name;
    j["output_dir"] = config.output_dir;
    j["threads"] = config.threads;
    const auto grid = grid_json(config.grid);
    for (const auto& [k, v] : grid.items()) j[k] = v;
    return j.dump(2);
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string grid_hash(const ScenarioGrid& grid) {
    return fmt::format("{:016x}", fnv1a64(grid_json(grid).dump()));
}

}  // namespace rct
