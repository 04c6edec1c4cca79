#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camel/streamgen.hpp"

namespace camel {

enum class Ablation { Base, BaseI, BaseIDp, Full };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

struct RunConfig {
    uint64_t seed = 1;
    int window_size = 100;
    int max_windows = 99;  // adaptation windows after the initial one
    int latent_dim = 8;    // D_h
    int expert_dim = 8;    // D_f
    int heads = 2;
    int hidden_dim = 50;
    double lr = 1e-4;
    int init_epochs = 100;
    int window_epochs = 30;
    double mmd_sigma = 0.15;
    double mmd_threshold = 0.07;
    double util_threshold = 0.1;
    int cooldown = 2;
    int lookback = 5;
    double drop_factor = 0.95;
    int ref_size = 0;  // 0 -> window_size / 4
    Ablation ablation = Ablation::Full;
    std::vector<GeneratorSpec> streams;

    int effective_ref_size() const { return ref_size > 0 ? ref_size : window_size / 4; }
    void validate() const;
};

// Flat key = value text with one [stream] section per stream.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "config");
RunConfig load_config_file(const std::string& path);
std::string config_to_text(const RunConfig& config);

// Applies a single "key=value" override to the top-level section.
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

// Built-in scenarios. Names: set1..set4.
RunConfig preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace camel
