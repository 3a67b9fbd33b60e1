#include "kmdp.h"

#include "kmdp/harness.hpp"
#include "kmdp/infogain.hpp"
#include "kmdp/planners.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <cstring>
#include <sstream>

using namespace kmdp;

struct kmdp_config {
    ExperimentConfig cfg;
};

struct kmdp_summary {
    RunSummary summary;
};

namespace {

thread_local std::string t_last_error;

kmdp_status fail(kmdp_status code, const std::string& message) {
    t_last_error = message;
    return code;
}

template <typename Fn>
kmdp_status guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const InputError& e) {
        return fail(KMDP_ERR_INVALID_ARGUMENT, e.what());
    } catch (const ConfigError& e) {
        return fail(KMDP_ERR_CONFIG, e.what());
    } catch (const IoError& e) {
        return fail(KMDP_ERR_IO, e.what());
    } catch (const NumericError& e) {
        return fail(KMDP_ERR_NUMERIC, e.what());
    } catch (const std::exception& e) {
        return fail(KMDP_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(KMDP_ERR_INTERNAL, "unknown error");
    }
}

} // namespace

extern "C" {

const char* kmdp_version(void) {
    return "1.0.0";
}

const char* kmdp_last_error(void) {
    return t_last_error.c_str();
}

kmdp_status kmdp_config_load(const char* path, kmdp_config** out) {
    if (!path || !out) return fail(KMDP_ERR_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&]() {
        auto* handle = new kmdp_config{ExperimentConfig::from_file(path)};
        *out = handle;
        return KMDP_OK;
    });
}

kmdp_status kmdp_config_parse(const char* json_text, kmdp_config** out) {
    if (!json_text || !out) return fail(KMDP_ERR_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&]() {
        auto* handle = new kmdp_config{ExperimentConfig::from_json_text(json_text)};
        *out = handle;
        return KMDP_OK;
    });
}

kmdp_status kmdp_config_override_seeds(kmdp_config* cfg, const uint64_t* seeds, size_t n_seeds) {
    if (!cfg || !seeds || n_seeds == 0) {
        return fail(KMDP_ERR_INVALID_ARGUMENT, "override_seeds: null/empty seed list");
    }
    cfg->cfg.seeds.assign(seeds, seeds + n_seeds);
    return KMDP_OK;
}

kmdp_status kmdp_config_override_output_dir(kmdp_config* cfg, const char* dir) {
    if (!cfg || !dir || !*dir) {
        return fail(KMDP_ERR_INVALID_ARGUMENT, "override_output_dir: null/empty dir");
    }
    cfg->cfg.output_dir = dir;
    if (!cfg->cfg.mig_cache_dir.empty()) return KMDP_OK;
    return KMDP_OK;
}

void kmdp_config_free(kmdp_config* cfg) {
    delete cfg;
}

kmdp_status kmdp_run_experiment(const kmdp_config* cfg, int force, kmdp_summary** out) {
    if (!cfg || !out) return fail(KMDP_ERR_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&]() {
        auto* handle = new kmdp_summary{run_experiment(cfg->cfg, force != 0)};
        *out = handle;
        if (handle->summary.partial_failure) {
            return fail(KMDP_ERR_PARTIAL, "one or more experiment cells failed");
        }
        return KMDP_OK;
    });
}

size_t kmdp_summary_size(const kmdp_summary* summary) {
    return summary ? summary->summary.rows.size() : 0;
}

kmdp_status kmdp_summary_row_at(const kmdp_summary* summary, size_t index, kmdp_summary_row* out) {
    if (!summary || !out || index >= summary->summary.rows.size()) {
        return fail(KMDP_ERR_INVALID_ARGUMENT, "summary_row_at: bad handle or index");
    }
    const RunSummaryRow& row = summary->summary.rows[index];
    std::memset(out, 0, sizeof(*out));
    std::strncpy(out->agent, row.agent.c_str(), sizeof(out->agent) - 1);
    out->seed = row.seed;
    out->final_regret = row.final_regret;
    out->growth_p = row.growth_p;
    out->growth_ci_lo = row.growth_ci_lo;
    out->growth_ci_hi = row.growth_ci_hi;
    out->coverage_viol = row.coverage_viol;
    out->secs = row.secs;
    out->failed = row.failed ? 1 : 0;
    return KMDP_OK;
}

const char* kmdp_summary_row_error(const kmdp_summary* summary, size_t index) {
    if (!summary || index >= summary->summary.rows.size()) return "";
    return summary->summary.rows[index].error.c_str();
}

int kmdp_summary_partial_failure(const kmdp_summary* summary) {
    return summary && summary->summary.partial_failure ? 1 : 0;
}

kmdp_status kmdp_summary_to_csv(const kmdp_summary* summary, char** out_text) {
    if (!summary || !out_text) return fail(KMDP_ERR_INVALID_ARGUMENT, "null argument");
    *out_text = nullptr;
    return guarded([&]() {
        std::ostringstream ss;
        ss << kSummaryCsvHeader << '\n';
        for (const RunSummaryRow& row : summary->summary.rows) {
            if (row.failed) continue;
            ss << row.agent << ',' << row.seed << ',' << format_double(row.final_regret) << ','
               << format_double(row.growth_p) << ',' << format_double(row.growth_ci_lo) << ','
               << format_double(row.growth_ci_hi) << ',' << format_double(row.coverage_viol) << ','
               << format_double(row.secs) << '\n';
        }
        const std::string text = ss.str();
        char* buf = static_cast<char*>(std::malloc(text.size() + 1));
        if (!buf) return fail(KMDP_ERR_INTERNAL, "out of memory");
        std::memcpy(buf, text.c_str(), text.size() + 1);
        *out_text = buf;
        return KMDP_OK;
    });
}

void kmdp_summary_free(kmdp_summary* summary) {
    delete summary;
}

void kmdp_string_free(char* text) {
    std::free(text);
}

kmdp_status kmdp_mig_schedule(const char* kernel_json, int t, double lambda, int mesh_size,
                              uint64_t mesh_seed, double box_lo, double box_hi,
                              double** out_values, size_t* out_len) {
    if (!kernel_json || !out_values || !out_len) {
        return fail(KMDP_ERR_INVALID_ARGUMENT, "null argument");
    }
    *out_values = nullptr;
    *out_len = 0;
    return guarded([&]() {
        const Kernel kernel = Kernel::from_json(nlohmann::json::parse(kernel_json));
        if (t < 0) return fail(KMDP_ERR_INVALID_ARGUMENT, "mig: t must be >= 0");
        if (t == 0) return KMDP_OK;
        const Box box = Box::cube(kernel.dim(), box_lo, box_hi);
        const auto mesh = make_mesh(kernel, box, mesh_size, mesh_seed);
        const auto schedule = mig_schedule(kernel, mesh, t, lambda);
        double* buf = static_cast<double*>(std::malloc(schedule.size() * sizeof(double)));
        if (!buf) return fail(KMDP_ERR_INTERNAL, "out of memory");
        std::memcpy(buf, schedule.data(), schedule.size() * sizeof(double));
        *out_values = buf;
        *out_len = schedule.size();
        return KMDP_OK;
    });
}

void kmdp_buffer_free(double* values) {
    std::free(values);
}

kmdp_status kmdp_coverage_run(const kmdp_config* cfg, int runs, int zero_beta_debug,
                              kmdp_coverage_report* out) {
    if (!cfg || !out) return fail(KMDP_ERR_INVALID_ARGUMENT, "null argument");
    return guarded([&]() {
        const CoverageReport rep = run_coverage(cfg->cfg, runs, zero_beta_debug != 0);
        out->runs = rep.runs;
        out->episodes = rep.episodes;
        out->grid_points = rep.grid_points;
        out->delta = rep.delta;
        out->reward_rate = rep.reward_rate;
        out->transition_rate = rep.transition_rate;
        out->reward_threshold = rep.reward_threshold;
        out->transition_threshold = rep.transition_threshold;
        out->reward_pass = rep.reward_pass ? 1 : 0;
        out->transition_pass = rep.transition_pass ? 1 : 0;
        return KMDP_OK;
    });
}

int kmdp_selftest(void) {
    try {
        return run_selftest();
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return -1;
    }
}

} // extern "C"
