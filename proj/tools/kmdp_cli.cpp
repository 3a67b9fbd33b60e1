// kmdp command-line front end. Talks to the core exclusively through the
// C API in kmdp.h; stdout carries data (CSV / key=value), stderr carries
// diagnostics.

#include <kmdp.h>

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct ConfigHandle {
    kmdp_config* ptr = nullptr;
    ~ConfigHandle() { kmdp_config_free(ptr); }
};

struct SummaryHandle {
    kmdp_summary* ptr = nullptr;
    ~SummaryHandle() { kmdp_summary_free(ptr); }
};

int report_error(const char* what, kmdp_status status) {
    std::fprintf(stderr, "kmdp: %s: %s\n", what, kmdp_last_error());
    switch (status) {
    case KMDP_ERR_PARTIAL:
        return 2;
    default:
        return 1;
    }
}

int load_config(const std::string& path, const std::vector<uint64_t>& seed_override,
                const std::string& out_override, ConfigHandle& handle) {
    kmdp_status st = kmdp_config_load(path.c_str(), &handle.ptr);
    if (st != KMDP_OK) {
        std::fprintf(stderr, "kmdp: cannot load config %s: %s\n", path.c_str(), kmdp_last_error());
        return 1;
    }
    if (!seed_override.empty()) {
        st = kmdp_config_override_seeds(handle.ptr, seed_override.data(), seed_override.size());
        if (st != KMDP_OK) return report_error("seed override", st);
    }
    if (!out_override.empty()) {
        st = kmdp_config_override_output_dir(handle.ptr, out_override.c_str());
        if (st != KMDP_OK) return report_error("output dir override", st);
    }
    return 0;
}

int cmd_run(const std::string& config_path, bool force, const std::vector<uint64_t>& seeds,
            const std::string& out_dir) {
    ConfigHandle cfg;
    if (int rc = load_config(config_path, seeds, out_dir, cfg)) return rc;

    SummaryHandle summary;
    const kmdp_status st = kmdp_run_experiment(cfg.ptr, force ? 1 : 0, &summary.ptr);
    if (st != KMDP_OK && st != KMDP_ERR_PARTIAL) return report_error("run", st);

    char* csv = nullptr;
    if (kmdp_summary_to_csv(summary.ptr, &csv) == KMDP_OK) {
        std::fputs(csv, stdout);
        kmdp_string_free(csv);
    }
    if (st == KMDP_ERR_PARTIAL) {
        const size_t n = kmdp_summary_size(summary.ptr);
        for (size_t i = 0; i < n; ++i) {
            kmdp_summary_row row;
            if (kmdp_summary_row_at(summary.ptr, i, &row) == KMDP_OK && row.failed) {
                std::fprintf(stderr, "kmdp: cell %s seed %" PRIu64 " failed: %s\n", row.agent,
                             row.seed, kmdp_summary_row_error(summary.ptr, i));
            }
        }
        return 2;
    }
    return 0;
}

int cmd_mig(const std::string& spec, int t, double lambda, int mesh, uint64_t mesh_seed,
            double box_lo, double box_hi) {
    std::string kernel_json = spec;
    if (!spec.empty() && spec.front() != '{') {
        std::ifstream in(spec);
        if (!in) {
            std::fprintf(stderr, "kmdp: cannot open kernel spec file %s\n", spec.c_str());
            return 1;
        }
        std::stringstream ss;
        ss << in.rdbuf();
        kernel_json = ss.str();
    }
    double* values = nullptr;
    size_t len = 0;
    const kmdp_status st = kmdp_mig_schedule(kernel_json.c_str(), t, lambda, mesh, mesh_seed,
                                             box_lo, box_hi, &values, &len);
    if (st != KMDP_OK) return report_error("mig", st);
    std::printf("t,gamma\n");
    for (size_t i = 0; i < len; ++i) {
        std::printf("%zu,%.17g\n", i + 1, values[i]);
    }
    kmdp_buffer_free(values);
    return 0;
}

int cmd_coverage(const std::string& config_path, int runs, bool zero_beta) {
    if (runs < 1) {
        std::fprintf(stderr, "kmdp: coverage: --runs must be >= 1\n");
        return 1;
    }
    ConfigHandle cfg;
    if (int rc = load_config(config_path, {}, "", cfg)) return rc;
    kmdp_coverage_report report;
    const kmdp_status st = kmdp_coverage_run(cfg.ptr, runs, zero_beta ? 1 : 0, &report);
    if (st != KMDP_OK) return report_error("coverage", st);
    std::printf("runs=%d\n", report.runs);
    std::printf("episodes=%d\n", report.episodes);
    std::printf("grid_points=%d\n", report.grid_points);
    std::printf("delta=%.17g\n", report.delta);
    std::printf("reward_violation_rate=%.17g\n", report.reward_rate);
    std::printf("reward_threshold=%.17g\n", report.reward_threshold);
    std::printf("transition_violation_rate=%.17g\n", report.transition_rate);
    std::printf("transition_threshold=%.17g\n", report.transition_threshold);
    const bool pass = report.reward_pass && report.transition_pass;
    std::printf("result=%s\n", pass ? "pass" : "fail");
    return pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernelized-MDP regret experiments (GP-UCRL / PSRL)"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run an experiment config, print the summary CSV");
    std::string run_config;
    bool run_force = false;
    std::vector<uint64_t> run_seeds;
    std::string run_out;
    run->add_option("config", run_config, "experiment config (.kmdp.conf)")->required();
    run->add_flag("--force", run_force, "recompute cells whose CSV already exists");
    run->add_option("--seeds", run_seeds, "override the config's seed list");
    run->add_option("--out", run_out, "override the output directory");

    // mig
    auto* mig = app.add_subcommand("mig", "print a greedy MIG schedule as CSV");
    std::string mig_spec;
    int mig_t = 0;
    double mig_lambda = 1.0;
    int mig_mesh = 512;
    uint64_t mig_seed = 0;
    double mig_lo = -1.0, mig_hi = 1.0;
    mig->add_option("kernel", mig_spec, "kernel spec: inline JSON or a file path")->required();
    mig->add_option("--t", mig_t, "schedule length")->required();
    mig->add_option("--lambda", mig_lambda, "regularizer lambda (> 0)");
    mig->add_option("--mesh", mig_mesh, "candidate mesh size");
    mig->add_option("--mesh-seed", mig_seed, "mesh seed");
    mig->add_option("--box-lo", mig_lo, "mesh box lower bound (per dimension)");
    mig->add_option("--box-hi", mig_hi, "mesh box upper bound (per dimension)");

    // coverage
    auto* cov = app.add_subcommand("coverage", "Monte-Carlo confidence-band coverage check");
    std::string cov_config;
    int cov_runs = 0;
    bool cov_zero_beta = false;
    cov->add_option("config", cov_config, "experiment config (.kmdp.conf)")->required();
    cov->add_option("--runs", cov_runs, "number of Monte-Carlo ground truths")->required();
    cov->add_flag("--zero-beta", cov_zero_beta, "debug: force beta = 0 (expected to fail)");

    // selftest
    auto* selftest = app.add_subcommand("selftest", "fast invariant suite");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(run_config, run_force, run_seeds, run_out);
    if (mig->parsed()) return cmd_mig(mig_spec, mig_t, mig_lambda, mig_mesh, mig_seed, mig_lo, mig_hi);
    if (cov->parsed()) return cmd_coverage(cov_config, cov_runs, cov_zero_beta);
    if (selftest->parsed()) {
        const int failures = kmdp_selftest();
        if (failures < 0) {
            std::fprintf(stderr, "kmdp: selftest error: %s\n", kmdp_last_error());
            return 1;
        }
        std::printf("selftest.failures=%d\n", failures);
        return failures == 0 ? 0 : 1;
    }
    return 1;
}
