// rcb: run, sweep, bounds and check subcommands over a key=value config.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rcb/audit.hpp"
#include "rcb/config.hpp"
#include "rcb/harness.hpp"
#include "rcb/theory.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kBudgetError = 3;
constexpr int kAuditFailure = 4;

struct GridSpec {
    std::string key;
    std::vector<std::string> values;
};

GridSpec parse_grid(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw rcb::ConfigError("grid", "expected key=v1,v2,...");
    GridSpec g{rcb::trim(text.substr(0, eq)), {}};
    if (!rcb::is_config_key(g.key)) throw rcb::ConfigError(g.key, "unknown key");
    std::string v;
    std::istringstream is(text.substr(eq + 1));
    while (std::getline(is, v, ',')) g.values.push_back(rcb::trim(v));
    if (g.values.empty()) throw rcb::ConfigError("grid", "no values");
    return g;
}

rcb::ParsedConfig load(const std::string& path, const std::vector<std::string>& overrides) {
    rcb::ParsedConfig p = path.empty() ? rcb::parse_config_string("", overrides) : rcb::parse_config_file(path, overrides);
    for (const auto& w : p.warnings) std::cerr << "warning: " << w << '\n';
    return p;
}

// "results/run.csv" + "C" + "50" -> "results/run_C50.csv"
std::string grid_path(const std::string& out, const std::string& key, const std::string& value) {
    std::filesystem::path p(out.empty() ? "sweep.csv" : out);
    const std::string ext = p.has_extension() ? p.extension().string() : ".csv";
    return (p.parent_path() / (p.stem().string() + "_" + key + value + ext)).string();
}

std::string summary_path(const std::string& out) {
    std::filesystem::path p(out.empty() ? "sweep.csv" : out);
    return (p.parent_path() / (p.stem().string() + "_summary.csv")).string();
}

void emit(const rcb::RegretCurve& curve, const rcb::ExperimentConfig& cfg) {
    if (cfg.out.empty() || cfg.out == "-") {
        rcb::write_results(curve, std::cout, cfg.downsample);
    } else {
        if (auto dir = std::filesystem::path(cfg.out).parent_path(); !dir.empty()) std::filesystem::create_directories(dir);
        rcb::write_results(curve, cfg.out, cfg.downsample);
        std::cerr << "wrote " << cfg.out << " (final mean regret " << curve.final_regret() << ")\n";
    }
}

int cmd_run(const std::string& config, const std::vector<std::string>& overrides) {
    const auto p = load(config, overrides);
    emit(rcb::run_many(p.config), p.config);
    return kOk;
}

int cmd_sweep(const std::string& config, const std::vector<std::string>& overrides, const std::string& grid_text) {
    const GridSpec grid = parse_grid(grid_text);
    const auto base = load(config, overrides);
    std::ofstream summary;
    const std::string spath = summary_path(base.config.out);
    if (auto dir = std::filesystem::path(spath).parent_path(); !dir.empty()) std::filesystem::create_directories(dir);
    summary.open(spath);
    if (!summary) throw std::runtime_error("cannot open " + spath);
    summary << "key,value,algo,graph,n_nodes,d,L,measure,C,T,final_mean_regret,final_std_regret,n_seeds\n";
    for (const auto& v : grid.values) {
        auto ov = overrides;
        ov.push_back(grid.key + "=" + v);
        auto p = load(config, ov);
        p.config.out = grid_path(base.config.out, grid.key, v);
        const auto curve = rcb::run_many(p.config);
        emit(curve, p.config);
        const auto& m = curve.meta;
        summary << grid.key << ',' << v << ',' << m.algo << ',' << m.graph << ',' << m.n_nodes << ',' << m.d << ','
                << m.L << ',' << m.measure << ',' << rcb::format_double(m.C) << ',' << p.config.T << ','
                << rcb::format_double(curve.final_regret()) << ',' << rcb::format_double(curve.std_regret.back())
                << ',' << m.n_seeds << '\n';
    }
    std::cerr << "wrote " << spath << '\n';
    return kOk;
}

int cmd_bounds(const std::string& config, const std::vector<std::string>& overrides, const std::string& grid_text) {
    GridSpec grid;
    if (!grid_text.empty()) grid = parse_grid(grid_text);
    std::ostream* os = &std::cout;
    std::ofstream file;
    const auto base = load(config, overrides);
    if (!base.config.out.empty() && base.config.out != "-") {
        file.open(base.config.out);
        if (!file) throw std::runtime_error("cannot open " + base.config.out);
        os = &file;
    }
    *os << "key,value,t,d,L,N,C,upper,lower\n";
    const std::vector<std::string> values = grid.values.empty() ? std::vector<std::string>{""} : grid.values;
    for (const auto& v : values) {
        auto ov = overrides;
        if (!grid.key.empty()) ov.push_back(grid.key + "=" + v);
        const auto p = load(config, ov);
        const auto sem = rcb::build_instance(p.config, p.config.seeds.front());
        rcb::BoundParams bp{sem.dag().max_in_degree(), sem.dag().longest_path(), sem.n_nodes(), sem.m_x(), p.config.c0};
        for (std::size_t r : rcb::downsample_rows(p.config.T, p.config.downsample)) {
            const double t = static_cast<double>(r + 1);
            *os << grid.key << ',' << v << ',' << r + 1 << ',' << bp.d << ',' << bp.L << ',' << bp.N << ','
                << rcb::format_double(p.config.C) << ',' << rcb::format_double(rcb::upper_bound_curve(t, p.config.C, bp))
                << ',' << rcb::format_double(rcb::lower_bound_curve(t, p.config.C, bp)) << '\n';
        }
    }
    return kOk;
}

int cmd_check() {
    rcb::ExperimentConfig cov;
    cov.graph = "chain";
    cov.n = 4;
    cov.T = 500;
    cov.algo = rcb::PolicyKind::robust_lcb;
    cov.measure = rcb::Measure::df;
    cov.schedule = rcb::ScheduleKind::early_flip;
    cov.C = 10.0;
    cov.seeds = {1, 2, 3, 4, 5};
    const rcb::AuditResult results[] = {
        rcb::audit_reward_map(100, 8, 1),
        rcb::audit_compounding_error(200, 5, 4, 2),
        rcb::audit_hard_instance_gap(),
        rcb::audit_budgets(),
        rcb::audit_oracle_zero(),
        rcb::audit_coverage(cov),
    };
    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.passed;
    }
    return ok ? kOk : kAuditFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust causal bandit simulations on linear SEMs"};
    app.require_subcommand(1);
    app.footer(rcb::config_help());

    std::string config, grid;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config, "key=value configuration file")->check(CLI::ExistingFile);
        sub->allow_extras();
        sub->footer("Any configuration key can be given as --key=value and overrides the file.");
    };
    auto* run = app.add_subcommand("run", "run all seeds of one configuration and write the regret curve");
    add_common(run);
    auto* sweep = app.add_subcommand("sweep", "run one configuration per grid value and write a summary");
    add_common(sweep);
    sweep->add_option("--grid", grid, "key=v1,v2,... to vary")->required();
    auto* bounds = app.add_subcommand("bounds", "tabulate the theoretical upper and lower regret curves");
    add_common(bounds);
    bounds->add_option("--grid", grid, "key=v1,v2,... to vary");
    auto* check = app.add_subcommand("check", "run the built-in oracle and invariant audits");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        std::vector<std::string> overrides = sub->remaining();
        if (sub == run) return cmd_run(config, overrides);
        if (sub == sweep) return cmd_sweep(config, overrides, grid);
        if (sub == bounds) return cmd_bounds(config, overrides, grid);
        if (sub == check) return cmd_check();
    } catch (const rcb::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const rcb::BudgetViolation& e) {
        std::cerr << "budget violation: " << e.what() << '\n';
        return kBudgetError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kOk;
}
