#include "twr/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNonconvergence = 3;

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> eps;
    int jobs = 0;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "run configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "output directory (default: $TWR_OUT_DIR, else .)");
    cmd->add_option("--seed", c.seed, "master seed, overrides the config");
    cmd->add_option("--eps", c.eps, "bisection tolerance in bits, overrides the config")->check(CLI::PositiveNumber);
    cmd->add_option("--jobs", c.jobs, "worker threads (default: hardware concurrency)")->check(CLI::NonNegativeNumber);
}

twr::RunConfig resolve(const Common& c) {
    twr::RunConfig cfg = twr::load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.eps) cfg.eps = *c.eps;
    cfg.validate();
    return cfg;
}

fs::path out_dir(const Common& c) {
    fs::path dir = ".";
    if (!c.out.empty()) dir = c.out;
    else if (const char* env = std::getenv("TWR_OUT_DIR"); env && *env) dir = env;
    fs::create_directories(dir);
    return dir;
}

int jobs_of(const Common& c) {
    if (c.jobs > 0) return c.jobs;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

template <class Writer>
void write_file(const fs::path& path, Writer&& w) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    w(f);
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

int cmd_solve(const Common& c) {
    const twr::RunConfig cfg = resolve(c);
    const fs::path dir = out_dir(c);
    const twr::SingleRun run = twr::run_single(cfg);
    write_file(dir / "trace.csv", [&](std::ostream& o) { twr::write_trace_csv(o, run.solution); });
    write_file(dir / "summary.csv", [&](std::ostream& o) { twr::write_summary_csv(o, run); });
    const auto& s = run.solution;
    std::cout << "subcase " << twr::subcase_name(s.subcase.label) << "  route " << twr::route_name(s.route)
              << "  status " << twr::status_name(s.status) << "\nR_tw " << s.rates.r_tw << "  total power "
              << s.powers.total() << "  iterations " << s.bisection_iters << "  audit "
              << (run.audit.all_pass() ? "pass" : "fail") << "\n";
    return s.status == twr::SolveStatus::Optimal ? 0 : kExitNonconvergence;
}

int cmd_sweep(const Common& c) {
    const twr::RunConfig cfg = resolve(c);
    const fs::path dir = out_dir(c);
    const auto cells = twr::run_sweep(cfg, jobs_of(c));
    write_file(dir / "sweep.csv", [&](std::ostream& o) { twr::write_sweep_csv(o, cfg, cells); });
    int failures = 0;
    for (const auto& cell : cells) failures += cell.failures;
    std::cout << cells.size() << " cells, " << cfg.trials << " trials each, " << failures << " failures\n";
    return 0;
}

int cmd_oracle(const Common& c) {
    const twr::RunConfig cfg = resolve(c);
    const fs::path dir = out_dir(c);
    const auto rows = twr::run_oracle_suite(cfg, jobs_of(c));
    write_file(dir / "oracle.csv", [&](std::ostream& o) { twr::write_oracle_csv(o, rows); });
    int passed = 0;
    for (const auto& r : rows) passed += r.pass ? 1 : 0;
    std::cout << passed << "/" << rows.size() << " trials within (" << cfg.rate_tol << " bits, "
              << 100.0 * cfg.power_tol << "%)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Power allocation for MIMO decode-and-forward two-way relaying"};
    app.require_subcommand(1);
    Common common;
    CLI::App* solve = app.add_subcommand("solve", "solve one channel draw and write trace.csv and summary.csv");
    CLI::App* sweep = app.add_subcommand("sweep", "Monte Carlo subcase counts over the [sweep] axes, sweep.csv");
    CLI::App* oracle = app.add_subcommand("oracle", "scalar solver-versus-oracle suite, oracle.csv");
    for (CLI::App* cmd : {solve, sweep, oracle}) add_common(cmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (solve->parsed()) return cmd_solve(common);
        if (sweep->parsed()) return cmd_sweep(common);
        return cmd_oracle(common);
    } catch (const twr::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
