// Runs every acceptance criterion and prints one line per criterion.
#include <cstdio>
#include <cstdlib>
#include <string>

#include "fkpf/acceptance.hpp"

int main(int argc, char** argv) {
    fkpf::AcceptanceOptions opts;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--seed" && i + 1 < argc)
            opts.seed = std::strtoull(argv[++i], nullptr, 10);
        else if (a == "--only" && i + 1 < argc)
            opts.only.push_back(std::atoi(argv[++i]));
        else {
            std::fprintf(stderr, "usage: %s [--seed N] [--only ID]...\n", argv[0]);
            return 2;
        }
    }
    int failed = 0;
    fkpf::run_acceptance(opts, [&](const fkpf::CriterionResult& r) {
        std::printf("%s\n", fkpf::format_criterion(r).c_str());
        std::fflush(stdout);
        failed += r.pass ? 0 : 1;
    });
    std::printf("%s: %d criteria failed\n", failed ? "FAIL" : "PASS", failed);
    return failed ? 1 : 0;
}
