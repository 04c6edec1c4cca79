#include <cstdio>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "camel/checkpoint.hpp"
#include "camel/config.hpp"
#include "camel/harness.hpp"
#include "camel/log.hpp"
#include "camel/selfcheck.hpp"

namespace {

struct SweepAxis {
    std::string key;
    std::vector<std::string> values;
};

SweepAxis parse_sweep(const std::string& arg) {
    const size_t eq = arg.find('=');
    if (eq == std::string::npos)
        throw CLI::ValidationError("--sweep expects KEY=V1,V2,..., got '" + arg + "'");
    SweepAxis axis;
    axis.key = arg.substr(0, eq);
    std::string rest = arg.substr(eq + 1);
    size_t pos = 0;
    while (pos <= rest.size()) {
        const size_t comma = rest.find(',', pos);
        const std::string v =
            comma == std::string::npos ? rest.substr(pos) : rest.substr(pos, comma - pos);
        if (!v.empty()) axis.values.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (axis.values.empty())
        throw CLI::ValidationError("--sweep '" + arg + "' lists no values");
    return axis;
}

int run_one(const camel::RunConfig& config, const std::string& out_dir) {
    camel::RunResult result = camel::run(config);
    camel::write_run_artifacts(config, result, out_dir);
    std::printf("run complete: %d windows, mean accuracy %.4f -> %s\n",
                result.summary.windows_evaluated, result.summary.mean_accuracy, out_dir.c_str());
    for (size_t i = 0; i < result.summary.stream_names.size(); ++i)
        std::printf("  %-12s accuracy %.4f\n", result.summary.stream_names[i].c_str(),
                    result.summary.per_stream_accuracy[i]);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"camel: heterogeneous multistream online learning"};
    app.get_formatter()->column_width(34);

    std::string config_path, preset_name, out_dir = "runs", ablation;
    long long seed = -1;
    std::vector<std::string> sweeps;
    bool check = false;
    int jobs = 1;

    app.add_option("--config", config_path, "run configuration file");
    app.add_option("--preset", preset_name, "built-in scenario: set1|set2|set3|set4");
    app.add_option("--seed", seed, "override the run seed");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--ablation", ablation, "base|base-i|base-i-dp|full");
    app.add_option("--sweep", sweeps, "KEY=V1,V2,... (repeatable; cartesian product)");
    app.add_option("--jobs", jobs, "run sweep points concurrently")->capture_default_str();
    app.add_flag("--check", check, "run the invariant self-test suite and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (check) {
            bool ok = true;
            for (const camel::CheckResult& r : camel::run_self_checks()) {
                std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                            r.detail.c_str());
                ok = ok && r.passed;
            }
            return ok ? 0 : 1;
        }

        if (config_path.empty() && preset_name.empty()) {
            std::fprintf(stderr, "error: need --config or --preset (see --help)\n");
            return 2;
        }

        camel::RunConfig config;
        if (!preset_name.empty()) config = camel::preset(preset_name);
        if (!config_path.empty()) config = camel::load_config_file(config_path);
        if (seed >= 0) config.seed = static_cast<uint64_t>(seed);
        if (!ablation.empty()) config.ablation = camel::ablation_from_string(ablation);
        config.validate();

        if (sweeps.empty()) return run_one(config, out_dir);

        std::vector<SweepAxis> axes;
        for (const std::string& s : sweeps) axes.push_back(parse_sweep(s));
        std::vector<std::pair<camel::RunConfig, std::string>> points;
        std::vector<size_t> idx(axes.size(), 0);
        while (true) {
            camel::RunConfig point = config;
            std::string tag;
            for (size_t a = 0; a < axes.size(); ++a) {
                camel::apply_override(point, axes[a].key, axes[a].values[idx[a]]);
                if (!tag.empty()) tag += "_";
                tag += axes[a].key + "-" + axes[a].values[idx[a]];
            }
            point.validate();
            points.emplace_back(std::move(point),
                                (std::filesystem::path(out_dir) / tag).string());
            size_t a = 0;
            for (; a < axes.size(); ++a) {
                if (++idx[a] < axes[a].values.size()) break;
                idx[a] = 0;
            }
            if (a == axes.size()) break;
        }

        std::printf("sweep: %zu runs\n", points.size());
        if (jobs < 1) jobs = 1;
        std::atomic<size_t> cursor{0};
        std::atomic<bool> failed{false};
        auto worker = [&] {
            while (true) {
                const size_t i = cursor.fetch_add(1);
                if (i >= points.size()) return;
                try {
                    camel::RunResult result = camel::run(points[i].first);
                    camel::write_run_artifacts(points[i].first, result, points[i].second);
                    std::printf("  [%zu/%zu] %s: mean accuracy %.4f\n", i + 1, points.size(),
                                points[i].second.c_str(), result.summary.mean_accuracy);
                } catch (const std::exception& e) {
                    LOG_ERROR("sweep point %s failed: %s", points[i].second.c_str(), e.what());
                    failed = true;
                }
            }
        };
        std::vector<std::thread> threads;
        for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
        for (std::thread& th : threads) th.join();
        return failed ? 1 : 0;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
