// Command-line front end: run a config, run the acceptance suite, compare result files.
//
// Exit codes: 0 ok, 1 checks failed, 2 usage, 3 schema error, 4 I/O error,
// 5 resource limit, 6 other numerical error, 70 internal error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fkpf/acceptance.hpp"
#include "fkpf/harness.hpp"
#include "fkpf/parallel.hpp"

namespace {

enum Exit { kOk = 0, kFailed = 1, kUsage = 2, kSchema = 3, kIO = 4, kResource = 5, kNumeric = 6, kInternal = 70 };

void print_run(const fkpf::RunResult& r, const fkpf::ExperimentConfig& cfg) {
    std::printf("%s '%s' hash %s: %zu rows in %.1f s\n", fkpf::to_string(cfg.kind).c_str(), cfg.name.c_str(),
                cfg.hash.c_str(), r.rows.size(), r.seconds);
    for (const auto& f : r.files) std::printf("  wrote %s\n", f.c_str());
}

int summarize_criteria(const std::vector<fkpf::CriterionResult>& cs) {
    int failed = 0;
    for (const auto& c : cs) failed += c.pass ? 0 : 1;
    std::printf("%s: %zu criteria run, %d failed\n", failed ? "FAIL" : "PASS", cs.size(), failed);
    return failed ? kFailed : kOk;
}

int cmd_run(const std::string& path, const std::string& out) {
    const auto cfg = fkpf::load_config(path);
    fkpf::RunOptions opts;
    opts.out_dir = out;
    opts.progress = [](const fkpf::CriterionResult& c) {
        std::printf("%s\n", fkpf::format_criterion(c).c_str());
        std::fflush(stdout);
    };
    const auto r = fkpf::run_experiment(cfg, opts);
    print_run(r, cfg);
    if (cfg.kind == fkpf::ExperimentKind::Selftest) return summarize_criteria(r.criteria);
    return kOk;
}

int cmd_selftest(std::uint64_t seed, const std::vector<int>& only, const std::string& out) {
    nlohmann::json j{{"experiment", "selftest"}, {"mc", {{"seed", seed}}}};
    if (!only.empty()) j["selftest"] = {{"only", only}};
    const auto cfg = fkpf::parse_config(j.dump());
    fkpf::RunOptions opts;
    opts.out_dir = out;
    opts.write_files = !out.empty();
    opts.progress = [](const fkpf::CriterionResult& c) {
        std::printf("%s\n", fkpf::format_criterion(c).c_str());
        std::fflush(stdout);
    };
    std::printf("selftest seed %llu, %u workers\n", static_cast<unsigned long long>(seed), fkpf::resolve_workers());
    const auto r = fkpf::run_experiment(cfg, opts);
    for (const auto& f : r.files) std::printf("  wrote %s\n", f.c_str());
    return summarize_criteria(r.criteria);
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& tol) {
    const auto rep = fkpf::compare_files(a, b, tol);
    rep.write(std::cout);
    return rep.pass ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feynman-Kac Monte Carlo and exact-diagonalization runner"};
    app.set_version_flag("--version", fkpf::version_string());
    app.require_subcommand(1);
    app.footer("Worker threads: FKPF_WORKERS (default: hardware concurrency). Results do not depend on it.");

    std::string config, out;
    auto* run = app.add_subcommand("run", "run the experiment described by a JSON config");
    run->add_option("config", config, "config file")->required();
    run->add_option("--out", out, "output directory (overrides output.dir)");

    std::uint64_t seed = fkpf::AcceptanceOptions{}.seed;
    std::vector<int> only;
    std::string st_out;
    auto* st = app.add_subcommand("selftest", "run the acceptance criteria");
    st->add_option("--seed", seed, "base seed");
    st->add_option("--only", only, "criterion ids to run")->check(CLI::Range(1, fkpf::kCriterionCount));
    st->add_option("--out", st_out, "write results.csv and manifest.json here");

    std::string a, b, tol;
    auto* cmp = app.add_subcommand("compare", "compare two result CSV files row by row");
    cmp->add_option("a", a, "first CSV")->required();
    cmp->add_option("b", b, "second CSV")->required();
    cmp->add_option("tolspec", tol, "e.g. \"z=3,abs=1e-6;kernel:z=3\"")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*run) return cmd_run(config, out);
        if (*st) return cmd_selftest(seed, only, st_out);
        if (*cmp) return cmd_compare(a, b, tol);
    } catch (const fkpf::SchemaError& e) {
        std::fprintf(stderr, "schema error: %s\n", e.what());
        return kSchema;
    } catch (const fkpf::IOError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kIO;
    } catch (const fkpf::ResourceLimit& e) {
        std::fprintf(stderr, "resource limit: %s\n", e.what());
        return kResource;
    } catch (const fkpf::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kInternal;
    }
    return kUsage;
}
