#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fkpf/oracle.hpp"
#include "fkpf/semigroup.hpp"

namespace fkpf {

// Config text that does not match the schema (unknown keys, wrong types,
// missing fields, out-of-range values).
class SchemaError : public Error {
public:
    using Error::Error;
};

// Files that cannot be read or written.
class IOError : public Error {
public:
    using Error::Error;
};

enum class ExperimentKind { Semigroup, Kernel, Diamagnetic, PenaltySweep, MollifyConverge, Selftest };

std::string to_string(ExperimentKind k);

struct StateConfig {
    std::string kind = "gaussian";  // gaussian | indicator
    std::vector<double> center;
    double width = 1.0;
    cplx amplitude = 1.0;
};

struct OracleConfig {
    bool enabled = false;
    GridSpec grid;
    int cutoff = 6;
};

struct OutputConfig {
    std::string dir = ".";
    std::string csv = "results.csv";
    std::string manifest = "manifest.json";
    std::size_t paths = 0;  // number of paths to dump; 0 disables
    std::string paths_file = "paths.csv";
    bool operator_dump = false;
    std::string operator_file = "operator.txt";
    std::size_t eigenvalues = 0;  // lowest eigenvalues to report; 0 disables
    std::string eigenvalues_file = "eigenvalues.csv";
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Kernel;
    std::string name;
    int dim = 1;
    Domain domain = Domain::all_space(1);
    Coefficients coeffs;
    std::optional<CoefficientTable> table;  // set when the coefficients come from a table file
    std::vector<double> omega{1.0};
    MCConfig mc;
    OracleConfig oracle;
    std::vector<double> times;
    std::vector<std::vector<double>> points;                                          // semigroup
    std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;          // kernel, penalty-sweep
    OneBosonVector u, g;
    StateConfig state;
    double kappa = 1.0;
    std::vector<double> n_caps;
    std::size_t trials = 100;
    std::vector<double> energies;
    std::vector<double> n_list;
    std::vector<int> resolutions;
    std::vector<int> only;  // selftest: criterion subset, empty = all
    OutputConfig output;

    std::string canonical;  // canonical JSON of the hashed part (output and workers excluded)
    std::string hash;

    Model model() const;
};

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

// One long-format result line.
struct ResultRow {
    std::string experiment;
    std::string quantity;
    std::string param;
    std::string x, y;
    double t = 0.0;
    double re = 0.0, im = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string config_hash;

    std::string key() const;
};

std::string format_point(const std::vector<double>& x);

inline constexpr const char* kCsvHeader = "experiment,quantity,param,x,y,t,Re,Im,stderr,N,seed,config_hash";

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows);
std::string csv_string(const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_csv(std::istream& is);
std::vector<ResultRow> read_csv_file(const std::string& path);

// Per-row acceptance rule. A row passes if any enabled test passes:
// |a - b| <= abs, |a - b| <= rel * max(|a|, |b|), or |a - b| / hypot(se_a, se_b) <= z.
struct ToleranceRule {
    std::optional<double> z;
    std::optional<double> abs;
    std::optional<double> rel;
};

// "z=3,abs=1e-6" applies to every row; "kernel:z=3;diamagnetic:abs=1e-10" adds
// per-experiment overrides; an entry without prefix is the default.
struct ToleranceSpec {
    ToleranceRule fallback;
    std::map<std::string, ToleranceRule> per_experiment;

    static ToleranceSpec parse(const std::string& text);
    const ToleranceRule& rule_for(const std::string& experiment) const;
};

struct RowVerdict {
    std::string key;
    bool pass;
    bool missing;
    double abs_diff;
    double z;
    std::string reason;
};

struct CompareReport {
    bool pass = true;
    std::vector<RowVerdict> rows;

    void write(std::ostream& os) const;
};

CompareReport compare_rows(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b, const ToleranceSpec& spec);
CompareReport compare_files(const std::string& a, const std::string& b, const std::string& tolspec);

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    std::vector<ResultRow> rows;
};

struct RunOptions {
    std::string out_dir;  // overrides output.dir when non-empty
    unsigned workers = 0;
    bool write_files = true;
    std::function<void(const CriterionResult&)> progress;  // selftest only
};

struct RunResult {
    std::vector<ResultRow> rows;
    std::vector<CriterionResult> criteria;
    std::vector<std::string> files;
    std::string manifest;
    double seconds = 0.0;
    bool ok = true;  // false only when a selftest criterion failed
};

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

std::string version_string();

}  // namespace fkpf
