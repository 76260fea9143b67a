#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "fkpf/acceptance.hpp"
#include "fkpf/harness.hpp"
#include "../support/gen.hpp"

using namespace fkpf;
namespace fs = std::filesystem;

namespace {

const char* kKernel = R"({
  "experiment": "kernel",
  "name": "k",
  "domain": {"kind": "interval", "lo": 0.0, "hi": 1.0},
  "modes": {"omega": [1.0]},
  "t": [0.2],
  "pairs": [{"x": [0.5], "y": [0.5]}, {"x": [0.25], "y": [0.6]}],
  "mc": {"samples": 2000, "steps": 32, "seed": 4, "gating": {"correction": "weighted"}}
})";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("fkpf-harness-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ResultRow row(const std::string& exp, const std::string& q, double re, double se) {
    ResultRow r;
    r.experiment = exp;
    r.quantity = q;
    r.x = "0.5";
    r.y = "0.5";
    r.t = 0.2;
    r.re = re;
    r.stderr_ = se;
    r.n = 1000;
    r.seed = 1;
    r.config_hash = "h";
    return r;
}

// Replaces the first occurrence of `from` in the kernel config.
std::string edit(const std::string& from, const std::string& to) {
    std::string s = kKernel;
    const auto p = s.find(from);
    REQUIRE(p != std::string::npos);
    return s.replace(p, from.size(), to);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config parsing and schema errors") {
    const auto c = parse_config(kKernel);
    CHECK(c.kind == ExperimentKind::Kernel);
    CHECK(c.pairs.size() == 2);
    CHECK(c.times == std::vector<double>{0.2});
    CHECK(c.mc.seed == 4);
    CHECK(c.mc.gating.correction == ExitCorrection::Weighted);
    CHECK(c.hash.size() == 16);

    CHECK_THROWS_AS(parse_config("{not json"), SchemaError);
    CHECK_THROWS_AS(parse_config(edit("\"name\": \"k\"", "\"name\": \"k\", \"bogus\": 1")), SchemaError);
    CHECK_THROWS_AS(parse_config(edit("\"steps\": 32", "\"steps\": 32, \"stepz\": 1")), SchemaError);
    CHECK_THROWS_AS(parse_config(edit("\"samples\": 2000", "\"samples\": \"many\"")), SchemaError);
    CHECK_THROWS_AS(parse_config(edit("\"kernel\"", "\"kernal\"")), SchemaError);
    CHECK_THROWS_AS(parse_config(edit("\"t\": [0.2],", "")), SchemaError);
    CHECK_THROWS_AS(parse_config(edit("\"t\": [0.2]", "\"t\": [-0.2]")), SchemaError);
    CHECK_THROWS_AS(parse_config(edit("{\"x\": [0.5]", "{\"x\": [1.5]")), SchemaError);
    CHECK_THROWS_AS(parse_config(edit("{\"x\": [0.5]", "{\"x\": [0.5, 0.1]")), SchemaError);
    CHECK_THROWS_AS(parse_config(edit("\"omega\": [1.0]", "\"omega\": [0.0]")), SchemaError);
    CHECK_THROWS_AS(parse_config(edit("\"name\": \"k\"", "\"name\": \"a/b\"")), SchemaError);
    CHECK_THROWS_AS(parse_config(edit("\"name\": \"k\"", "\"name\": \"k\", \"output\": {\"operator\": true}")),
                    SchemaError);
    // Missing table file is an I/O problem, not a schema problem.
    CHECK_THROWS_AS(parse_config(edit("\"modes\"", "\"coefficients\": {\"table\": \"no-such-file.tbl\"}, \"modes\"")),
                    IOError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IOError);

    try {
        parse_config(edit("\"steps\": 32", "\"steps\": 32, \"stepz\": 1"));
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("stepz") != std::string::npos);
    }
}

TEST_CASE("config hash ignores output and workers only") {
    const auto base = parse_config(kKernel);
    const auto out = parse_config(edit("\"name\": \"k\"", "\"name\": \"k\", \"output\": {\"dir\": \"elsewhere\", \"paths\": 3}"));
    const auto workers = parse_config(edit("\"seed\": 4", "\"seed\": 4, \"workers\": 3"));
    const auto reordered = parse_config(edit("\"samples\": 2000, \"steps\": 32", "\"steps\": 32, \"samples\": 2000"));
    CHECK(out.hash == base.hash);
    CHECK(workers.hash == base.hash);
    CHECK(reordered.hash == base.hash);
    CHECK(workers.mc.workers == 3);
    CHECK(parse_config(edit("\"seed\": 4", "\"seed\": 5")).hash != base.hash);
    CHECK(parse_config(edit("\"t\": [0.2]", "\"t\": [0.25]")).hash != base.hash);
}

TEST_CASE("coefficient tables are hashed by content") {
    const auto dir = scratch("table");
    auto tab = CoefficientTable::sample(builtin::smooth_trig({1.0}, 0.5, 0.3), {-2.0}, {2.0}, {33});
    tab.save((dir / "a.tbl").string());
    tab.save((dir / "b.tbl").string());
    const std::string cfg = edit("\"modes\"", "\"coefficients\": {\"table\": \"a.tbl\"}, \"modes\"");
    std::string cfg_b = cfg;
    cfg_b.replace(cfg_b.find("a.tbl"), 5, "b.tbl");
    const auto ca = parse_config(cfg, dir.string()), cb = parse_config(cfg_b, dir.string());
    CHECK(ca.table.has_value());
    CHECK(ca.hash == cb.hash);
    tab.V()[5] += 1.0;
    tab.save((dir / "b.tbl").string());
    CHECK(parse_config(cfg_b, dir.string()).hash != ca.hash);
    // A two-mode table against a one-mode config.
    auto two = CoefficientTable::sample(builtin::constant_G(1, {1.0, 0.5}, 0.2), {-2.0}, {2.0}, {9});
    two.save((dir / "a.tbl").string());
    CHECK_THROWS_AS(parse_config(cfg, dir.string()), SchemaError);
}

TEST_CASE("CSV round trip is exact") {
    testing::Gen gen(71);
    std::vector<ResultRow> rows;
    for (int i = 0; i < 50; ++i) {
        ResultRow r = row("exp" + std::to_string(i % 3), "kernel", gen.normal() * std::pow(10.0, gen.integer(-300, 300)),
                          std::abs(gen.normal()));
        r.im = i == 7 ? std::numeric_limits<double>::denorm_min() : gen.normal();
        r.param = "n=" + std::to_string(i);
        r.x = format_point({gen.normal(), gen.normal()});
        r.t = gen.uniform(0.0, 3.0);
        r.seed = 0xFFFFFFFFFFFFFFFFull - static_cast<std::uint64_t>(i);
        rows.push_back(r);
    }
    const std::string text = csv_string(rows);
    CHECK(text.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
    std::istringstream is(text);
    const auto back = read_csv(is);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].re == rows[i].re);
        CHECK(back[i].im == rows[i].im);
        CHECK(back[i].t == rows[i].t);
        CHECK(back[i].stderr_ == rows[i].stderr_);
        CHECK(back[i].seed == rows[i].seed);
        CHECK(back[i].key() == rows[i].key());
    }
    CHECK(csv_string(back) == text);

    CHECK(format_point({0.5, -1.0}) == "0.5;-1");
    std::istringstream bad_header("a,b\n");
    CHECK_THROWS_AS(read_csv(bad_header), InvalidArgument);
    std::istringstream short_row(std::string(kCsvHeader) + "\nx,y,z\n");
    CHECK_THROWS_AS(read_csv(short_row), InvalidArgument);
    CHECK_THROWS_AS(read_csv_file("/nonexistent/results.csv"), IOError);
}

TEST_CASE("compare: identical, statistical and mixed rules") {
    const std::vector<ResultRow> a{row("kernel", "kernel", 1.0, 0.01), row("diamagnetic", "max_violation", -0.5, 0.0)};

    SUBCASE("identical inputs pass under every rule, including no rule") {
        for (const char* spec : {"z=3", "abs=0", "rel=0", "z=0"}) CHECK(compare_rows(a, a, ToleranceSpec::parse(spec)).pass);
        CHECK(compare_rows(a, a, ToleranceSpec{}).pass);
    }
    SUBCASE("10 joint stderr apart fails with the z-score") {
        auto b = a;
        b[0].re = 1.0 + 10.0 * std::hypot(0.01, 0.01);
        const auto rep = compare_rows(a, b, ToleranceSpec::parse("z=3"));
        CHECK_FALSE(rep.pass);
        const auto& v = rep.rows[1];  // keys sort "diamagnetic" before "kernel"
        CHECK(v.key == a[0].key());
        CHECK_FALSE(v.pass);
        CHECK(v.z == doctest::Approx(10.0).epsilon(1e-12));
        std::ostringstream os;
        rep.write(os);
        CHECK(os.str().find("z=10.000") != std::string::npos);
        CHECK(os.str().find("FAIL: 1/2") != std::string::npos);
    }
    SUBCASE("mixed absolute and statistical criteria give per-row verdicts") {
        auto b = a;
        b[0].re = 1.02;   // 1.41 joint stderr
        b[1].re = -0.5 + 1e-12;
        const auto spec = ToleranceSpec::parse("z=3;diamagnetic:abs=1e-10");
        const auto rep = compare_rows(a, b, spec);
        CHECK(rep.pass);
        CHECK(rep.rows[0].reason == "abs");
        CHECK(rep.rows[1].reason == "z");
        b[1].re = -0.5 + 1e-9;
        const auto rep2 = compare_rows(a, b, spec);
        CHECK_FALSE(rep2.pass);
        CHECK_FALSE(rep2.rows[0].pass);
        CHECK(rep2.rows[1].pass);
        // Zero stderr: any difference is infinitely many sigma.
        CHECK_FALSE(compare_rows(a, b, ToleranceSpec::parse("z=1e6")).rows[0].pass);
        CHECK(compare_rows(a, b, ToleranceSpec::parse("rel=0.05")).pass);
    }
    SUBCASE("missing and duplicate rows") {
        auto b = a;
        b.pop_back();
        const auto rep = compare_rows(a, b, ToleranceSpec::parse("z=3"));
        CHECK_FALSE(rep.pass);
        CHECK(rep.rows[0].missing);
        auto dup = a;
        dup.push_back(a[0]);
        CHECK_THROWS_AS(compare_rows(dup, a, ToleranceSpec::parse("z=3")), InvalidArgument);
    }
    SUBCASE("malformed tolerance specs") {
        for (const char* bad : {"", "z", "q=3", "z=-1", "z=abc", ":z=3"})
            CHECK_THROWS_AS(ToleranceSpec::parse(bad), InvalidArgument);
        const auto spec = ToleranceSpec::parse(" z = 3 , abs = 1e-6 ; kernel : rel = 0.1 ");
        CHECK(*spec.fallback.z == 3.0);
        CHECK(*spec.fallback.abs == 1e-6);
        CHECK(*spec.rule_for("kernel").rel == 0.1);
        CHECK_FALSE(spec.rule_for("kernel").z.has_value());
        CHECK(*spec.rule_for("other").z == 3.0);
    }
}

TEST_CASE("compare_files on written results") {
    const auto dir = scratch("compare");
    std::vector<ResultRow> a{row("kernel", "kernel", 1.0, 0.01)};
    auto b = a;
    b[0].re = 1.5;
    {
        std::ofstream(dir / "a.csv") << csv_string(a);
        std::ofstream(dir / "b.csv") << csv_string(b);
    }
    CHECK(compare_files((dir / "a.csv").string(), (dir / "a.csv").string(), "z=3").pass);
    CHECK_FALSE(compare_files((dir / "a.csv").string(), (dir / "b.csv").string(), "z=3").pass);
    CHECK(compare_files((dir / "a.csv").string(), (dir / "b.csv").string(), "abs=0.5").pass);
    CHECK_THROWS_AS(compare_files((dir / "a.csv").string(), (dir / "none.csv").string(), "z=3"), IOError);
}

TEST_CASE("runs are reproducible and worker-count independent") {
    const auto cfg = parse_config(kKernel);
    RunOptions o1;
    o1.write_files = false;
    o1.workers = 1;
    RunOptions o3 = o1;
    o3.workers = 3;
    const auto r1 = run_experiment(cfg, o1), r1b = run_experiment(cfg, o1), r3 = run_experiment(cfg, o3);
    REQUIRE(r1.rows.size() == 2);
    CHECK(csv_string(r1.rows) == csv_string(r1b.rows));
    CHECK(csv_string(r1.rows) == csv_string(r3.rows));
    for (const auto& r : r1.rows) {
        CHECK(r.config_hash == cfg.hash);
        CHECK(r.seed == 4);
        CHECK(r.n == 2000);
        CHECK(r.stderr_ > 0.0);
        CHECK(r.quantity == "kernel");
    }
    CHECK(r1.files.empty());
    CHECK(r1.manifest.find(cfg.hash) != std::string::npos);
}

TEST_CASE("run writes CSV, manifest and dumps") {
    const auto dir = scratch("run");
    const std::string text = R"({
      "experiment": "semigroup",
      "name": "toy",
      "domain": {"kind": "interval", "lo": -2.0, "hi": 2.0},
      "coefficients": {"builtin": "bump_coupling", "g": 0.5, "radius": 1.5},
      "modes": {"omega": [1.0]},
      "t": [0.3],
      "points": [[0.0], [0.5]],
      "mc": {"samples": 500, "steps": 16, "seed": 2},
      "oracle": {"grid": {"lo": [-2.0], "hi": [2.0], "points": [15]}, "cutoff": 3},
      "output": {"dir": "out", "paths": 2, "operator": true, "eigenvalues": 4}
    })";
    const auto cfg = parse_config(text, dir.string());
    CHECK(cfg.output.dir == (dir / "out").string());
    const auto res = run_experiment(cfg);
    const fs::path out = dir / "out";
    for (const char* f : {"results.csv", "manifest.json", "paths.csv", "operator.txt", "eigenvalues.csv"})
        CHECK_MESSAGE(fs::exists(out / f), f);

    const auto rows = read_csv_file((out / "results.csv").string());
    CHECK(rows.size() == 4);  // Tt and Tt_oracle at two points
    CHECK(csv_string(rows) == csv_string(res.rows));
    for (const auto& r : rows)
        if (r.quantity == "Tt") {
            const auto o = std::find_if(rows.begin(), rows.end(), [&](const ResultRow& q) {
                return q.quantity == "Tt_oracle" && q.x == r.x;
            });
            REQUIRE(o != rows.end());
            CHECK(std::abs(cplx(r.re, r.im) - cplx(o->re, o->im)) < 5.0 * r.stderr_ + 0.05);
        }

    const std::string manifest = read_file(out / "manifest.json");
    for (const char* k : {"\"config_hash\"", "\"seed\"", "\"version\"", "\"timing\"", "\"outputs\""})
        CHECK_MESSAGE(manifest.find(k) != std::string::npos, k);

    const std::string ops = read_file(out / "operator.txt");
    CHECK(ops.find("dimension 60\n") != std::string::npos);  // 15 sites x 4 boson levels
    const std::string ev = read_file(out / "eigenvalues.csv");
    CHECK(ev.rfind("index,eigenvalue\n", 0) == 0);
    CHECK(std::count(ev.begin(), ev.end(), '\n') == 5);

    // Points off the oracle grid are rejected.
    std::string off = text;
    off.replace(off.find("[0.5]]"), 6, "[0.4]]");
    CHECK_THROWS_AS(run_experiment(parse_config(off, dir.string())), SchemaError);
}

TEST_CASE("selftest config runs a criterion subset") {
    const auto cfg = parse_config(R"({"experiment": "selftest", "selftest": {"only": [10]}, "mc": {"seed": 3}})");
    CHECK(cfg.only == std::vector<int>{10});
    RunOptions o;
    o.write_files = false;
    int seen = 0;
    o.progress = [&](const CriterionResult& c) {
        ++seen;
        CHECK(c.id == 10);
    };
    const auto r = run_experiment(cfg, o);
    CHECK(seen == 1);
    REQUIRE(r.criteria.size() == 1);
    CHECK(r.criteria[0].pass);
    CHECK(r.ok);
    CHECK(format_criterion(r.criteria[0]).rfind("[PASS] 10 ", 0) == 0);
    CHECK_THROWS_AS(parse_config(R"({"experiment": "selftest", "selftest": {"only": [15]}})"), SchemaError);
}

}  // TEST_SUITE
