#include "camel/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace camel {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

// shortest representation that parses back to the same double
std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

double parse_double(const std::string& v, const std::string& key) {
    const char* begin = v.c_str();
    char* end = nullptr;
    double d = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw std::invalid_argument("config key '" + key + "': bad number '" + v + "'");
    return d;
}

long parse_long(const std::string& v, const std::string& key) {
    const double d = parse_double(v, key);
    const long l = static_cast<long>(d);
    if (d != static_cast<double>(l))
        throw std::invalid_argument("config key '" + key + "': expected an integer, got '" + v + "'");
    return l;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config key '" + key + "': expected true/false, got '" + v + "'");
}

GeneratorKind kind_from_string(const std::string& s) {
    if (s == "sea") return GeneratorKind::Sea;
    if (s == "hyperplane") return GeneratorKind::Hyperplane;
    if (s == "random_tree" || s == "rtg") return GeneratorKind::RandomTree;
    if (s == "rbf") return GeneratorKind::Rbf;
    if (s == "led") return GeneratorKind::Led;
    if (s == "waveform") return GeneratorKind::Waveform;
    if (s == "csv") return GeneratorKind::CsvFile;
    throw std::invalid_argument("unknown stream kind '" + s + "'");
}

std::string kind_to_string(GeneratorKind k) {
    switch (k) {
        case GeneratorKind::Sea: return "sea";
        case GeneratorKind::Hyperplane: return "hyperplane";
        case GeneratorKind::RandomTree: return "random_tree";
        case GeneratorKind::Rbf: return "rbf";
        case GeneratorKind::Led: return "led";
        case GeneratorKind::Waveform: return "waveform";
        case GeneratorKind::CsvFile: return "csv";
    }
    return "?";
}

void parse_drift(GeneratorSpec& spec, const std::string& value) {
    spec.drifts.clear();
    spec.incremental = false;
    for (const std::string& tok : split(value, ',')) {
        if (tok.empty() || tok == "none") continue;
        if (tok == "incremental") {
            spec.incremental = true;
            continue;
        }
        const size_t at = tok.find('@');
        if (at == std::string::npos)
            throw std::invalid_argument("drift token '" + tok + "' (want kind@window or incremental)");
        const std::string kind = tok.substr(0, at);
        DriftEvent e;
        if (kind == "sudden") e.kind = DriftEvent::Kind::Sudden;
        else if (kind == "gradual") e.kind = DriftEvent::Kind::Gradual;
        else throw std::invalid_argument("unknown drift kind '" + kind + "'");
        e.window = static_cast<int>(parse_long(tok.substr(at + 1), "drift"));
        spec.drifts.push_back(e);
    }
}

std::string drift_to_string(const GeneratorSpec& spec) {
    std::string out;
    for (const DriftEvent& e : spec.drifts) {
        if (!out.empty()) out += ",";
        out += (e.kind == DriftEvent::Kind::Sudden ? "sudden@" : "gradual@") +
               std::to_string(e.window);
    }
    if (spec.incremental) out += out.empty() ? "incremental" : ",incremental";
    return out.empty() ? "none" : out;
}

void set_stream_key(GeneratorSpec& s, const std::string& key, const std::string& value) {
    if (key == "name") s.name = value;
    else if (key == "kind") s.kind = kind_from_string(value);
    else if (key == "features") s.features = static_cast<int>(parse_long(value, key));
    else if (key == "classes") s.classes = static_cast<int>(parse_long(value, key));
    else if (key == "noise") s.noise = parse_double(value, key);
    else if (key == "samples") s.samples = parse_long(value, key);
    else if (key == "drift") parse_drift(s, value);
    else if (key == "sea_thetas") {
        s.sea_thetas.clear();
        for (const std::string& tok : split(value, ',')) s.sea_thetas.push_back(parse_double(tok, key));
        if (s.sea_thetas.empty()) throw std::invalid_argument("sea_thetas must not be empty");
    } else if (key == "hyp_magnitude") s.hyp_magnitude = parse_double(value, key);
    else if (key == "hyp_flip_prob") s.hyp_flip_prob = parse_double(value, key);
    else if (key == "tree_depth") s.tree_depth = static_cast<int>(parse_long(value, key));
    else if (key == "gradual_span") s.gradual_span = static_cast<int>(parse_long(value, key));
    else if (key == "rbf_centroids") s.rbf_centroids = static_cast<int>(parse_long(value, key));
    else if (key == "rbf_speed") s.rbf_speed = parse_double(value, key);
    else if (key == "csv_path") s.csv_path = value;
    else if (key == "csv_header") s.csv_header = parse_bool(value, key);
    else if (key == "csv_standardize") s.csv_standardize = parse_bool(value, key);
    else throw std::invalid_argument("unknown stream key '" + key + "'");
}

}  // namespace

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::Base: return "base";
        case Ablation::BaseI: return "base-i";
        case Ablation::BaseIDp: return "base-i-dp";
        case Ablation::Full: return "full";
    }
    return "?";
}

Ablation ablation_from_string(const std::string& s) {
    if (s == "base") return Ablation::Base;
    if (s == "base-i") return Ablation::BaseI;
    if (s == "base-i-dp") return Ablation::BaseIDp;
    if (s == "full") return Ablation::Full;
    throw std::invalid_argument("unknown ablation mode '" + s + "' (base|base-i|base-i-dp|full)");
}

void RunConfig::validate() const {
    if (streams.empty()) throw std::invalid_argument("config defines no streams");
    if (window_size < 8) throw std::invalid_argument("window_size must be >= 8");
    if (max_windows < 0) throw std::invalid_argument("max_windows must be >= 0");
    if (latent_dim < 1 || expert_dim < 1) throw std::invalid_argument("latent/expert dims must be >= 1");
    if (heads < 1 || latent_dim % heads != 0)
        throw std::invalid_argument("latent_dim " + std::to_string(latent_dim) +
                                    " must be divisible by heads " + std::to_string(heads));
    if (lr <= 0.0) throw std::invalid_argument("lr must be positive");
    if (init_epochs < 1 || window_epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (mmd_sigma <= 0.0 || mmd_threshold <= 0.0 || util_threshold <= 0.0)
        throw std::invalid_argument("sigma and thresholds must be positive");
    if (cooldown < 0 || lookback < 1) throw std::invalid_argument("bad cooldown/lookback");
    if (drop_factor <= 0.0 || drop_factor > 1.0)
        throw std::invalid_argument("drop_factor must lie in (0, 1]");
    if (effective_ref_size() < 2) throw std::invalid_argument("reference window would be < 2 rows");
    for (const GeneratorSpec& s : streams) finalize_spec(s);  // throws on bad stream
}

void apply_override(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "seed") c.seed = static_cast<uint64_t>(parse_long(value, key));
    else if (key == "window_size") c.window_size = static_cast<int>(parse_long(value, key));
    else if (key == "max_windows") c.max_windows = static_cast<int>(parse_long(value, key));
    else if (key == "latent_dim") c.latent_dim = static_cast<int>(parse_long(value, key));
    else if (key == "expert_dim") c.expert_dim = static_cast<int>(parse_long(value, key));
    else if (key == "heads") c.heads = static_cast<int>(parse_long(value, key));
    else if (key == "hidden_dim") c.hidden_dim = static_cast<int>(parse_long(value, key));
    else if (key == "lr") c.lr = parse_double(value, key);
    else if (key == "init_epochs") c.init_epochs = static_cast<int>(parse_long(value, key));
    else if (key == "window_epochs") c.window_epochs = static_cast<int>(parse_long(value, key));
    else if (key == "mmd_sigma") c.mmd_sigma = parse_double(value, key);
    else if (key == "mmd_threshold") c.mmd_threshold = parse_double(value, key);
    else if (key == "util_threshold") c.util_threshold = parse_double(value, key);
    else if (key == "cooldown") c.cooldown = static_cast<int>(parse_long(value, key));
    else if (key == "lookback") c.lookback = static_cast<int>(parse_long(value, key));
    else if (key == "drop_factor") c.drop_factor = parse_double(value, key);
    else if (key == "ref_size") c.ref_size = static_cast<int>(parse_long(value, key));
    else if (key == "ablation") c.ablation = ablation_from_string(value);
    else throw std::invalid_argument("unknown config key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    GeneratorSpec* current = nullptr;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(line);
        const size_t hash = s.find('#');
        if (hash != std::string::npos) s = trim(s.substr(0, hash));
        if (s.empty()) continue;
        if (s == "[stream]") {
            config.streams.emplace_back();
            current = &config.streams.back();
            continue;
        }
        const size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": expected key = value, got '" + s + "'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        try {
            if (current) set_stream_key(*current, key, value);
            else apply_override(config, key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return config;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string config_to_text(const RunConfig& c) {
    std::ostringstream out;
    out << "seed = " << c.seed << "\n";
    out << "window_size = " << c.window_size << "\n";
    out << "max_windows = " << c.max_windows << "\n";
    out << "latent_dim = " << c.latent_dim << "\n";
    out << "expert_dim = " << c.expert_dim << "\n";
    out << "heads = " << c.heads << "\n";
    out << "hidden_dim = " << c.hidden_dim << "\n";
    out << "lr = " << fmt_double(c.lr) << "\n";
    out << "init_epochs = " << c.init_epochs << "\n";
    out << "window_epochs = " << c.window_epochs << "\n";
    out << "mmd_sigma = " << fmt_double(c.mmd_sigma) << "\n";
    out << "mmd_threshold = " << fmt_double(c.mmd_threshold) << "\n";
    out << "util_threshold = " << fmt_double(c.util_threshold) << "\n";
    out << "cooldown = " << c.cooldown << "\n";
    out << "lookback = " << c.lookback << "\n";
    out << "drop_factor = " << fmt_double(c.drop_factor) << "\n";
    out << "ref_size = " << c.ref_size << "\n";
    out << "ablation = " << to_string(c.ablation) << "\n";
    for (const GeneratorSpec& s : c.streams) {
        out << "\n[stream]\n";
        if (!s.name.empty()) out << "name = " << s.name << "\n";
        out << "kind = " << kind_to_string(s.kind) << "\n";
        out << "features = " << s.features << "\n";
        out << "classes = " << s.classes << "\n";
        out << "noise = " << fmt_double(s.noise) << "\n";
        out << "samples = " << s.samples << "\n";
        out << "drift = " << drift_to_string(s) << "\n";
        switch (s.kind) {
            case GeneratorKind::Sea: {
                out << "sea_thetas = ";
                for (size_t i = 0; i < s.sea_thetas.size(); ++i)
                    out << (i ? "," : "") << fmt_double(s.sea_thetas[i]);
                out << "\n";
                out << "gradual_span = " << s.gradual_span << "\n";
                break;
            }
            case GeneratorKind::Hyperplane:
                out << "hyp_magnitude = " << fmt_double(s.hyp_magnitude) << "\n";
                out << "hyp_flip_prob = " << fmt_double(s.hyp_flip_prob) << "\n";
                break;
            case GeneratorKind::RandomTree:
                out << "tree_depth = " << s.tree_depth << "\n";
                out << "gradual_span = " << s.gradual_span << "\n";
                break;
            case GeneratorKind::Rbf:
                out << "rbf_centroids = " << s.rbf_centroids << "\n";
                out << "rbf_speed = " << fmt_double(s.rbf_speed) << "\n";
                break;
            case GeneratorKind::Led:
            case GeneratorKind::Waveform:
                out << "gradual_span = " << s.gradual_span << "\n";
                break;
            case GeneratorKind::CsvFile:
                out << "csv_path = " << s.csv_path << "\n";
                out << "csv_header = " << (s.csv_header ? "true" : "false") << "\n";
                out << "csv_standardize = " << (s.csv_standardize ? "true" : "false") << "\n";
                break;
        }
    }
    return out.str();
}

RunConfig preset(const std::string& name) {
    RunConfig c;
    if (name == "set1") {
        c.latent_dim = c.expert_dim = 20;
        c.mmd_threshold = 0.05;
        c.util_threshold = 0.07;
        c.max_windows = 49;
        for (int i = 0; i < 3; ++i) {
            GeneratorSpec s;
            s.name = "tree" + std::to_string(i + 1);
            s.kind = GeneratorKind::RandomTree;
            s.features = 20;
            s.classes = 2;
            s.samples = 5000;
            s.drifts = {{DriftEvent::Kind::Sudden, 12 + 2 * i}, {DriftEvent::Kind::Gradual, 30 + 2 * i}};
            c.streams.push_back(std::move(s));
        }
    } else if (name == "set2") {
        c.latent_dim = c.expert_dim = 4;
        c.mmd_threshold = 0.05;
        c.util_threshold = 0.07;
        c.max_windows = 299;
        for (int i = 0; i < 3; ++i) {
            GeneratorSpec s;
            s.name = "hyperplane" + std::to_string(i + 1);
            s.kind = GeneratorKind::Hyperplane;
            s.features = 4;
            s.classes = 2;
            s.samples = 30000;
            s.incremental = true;
            c.streams.push_back(std::move(s));
        }
    } else if (name == "set3") {
        c.latent_dim = c.expert_dim = 8;
        c.mmd_threshold = 0.07;
        c.util_threshold = 0.1;
        c.max_windows = 99;
        GeneratorSpec seaa;
        seaa.name = "seaa";
        seaa.kind = GeneratorKind::Sea;
        seaa.samples = 10000;
        seaa.noise = 0.1;
        seaa.drifts = {{DriftEvent::Kind::Sudden, 25},
                       {DriftEvent::Kind::Sudden, 50},
                       {DriftEvent::Kind::Sudden, 75}};
        c.streams.push_back(std::move(seaa));
        GeneratorSpec rtg;
        rtg.name = "rtg";
        rtg.kind = GeneratorKind::RandomTree;
        rtg.features = 10;
        rtg.samples = 10000;
        c.streams.push_back(std::move(rtg));
        GeneratorSpec rbf;
        rbf.name = "rbf";
        rbf.kind = GeneratorKind::Rbf;
        rbf.samples = 10000;
        rbf.incremental = true;
        c.streams.push_back(std::move(rbf));
    } else if (name == "set4") {
        c.latent_dim = c.expert_dim = 30;
        c.mmd_threshold = 0.1;
        c.util_threshold = 0.1;
        c.max_windows = 999;
        GeneratorSpec led;
        led.name = "led";
        led.kind = GeneratorKind::Led;
        led.samples = 100000;
        led.noise = 0.1;
        c.streams.push_back(std::move(led));
        GeneratorSpec leddrift;
        leddrift.name = "leddrift";
        leddrift.kind = GeneratorKind::Led;
        leddrift.features = 24;
        leddrift.samples = 100000;
        leddrift.noise = 0.1;
        leddrift.drifts = {{DriftEvent::Kind::Sudden, 333}, {DriftEvent::Kind::Sudden, 666}};
        c.streams.push_back(std::move(leddrift));
        GeneratorSpec wave;
        wave.name = "waveform";
        wave.kind = GeneratorKind::Waveform;
        wave.samples = 100000;
        c.streams.push_back(std::move(wave));
    } else {
        throw std::invalid_argument("unknown preset '" + name + "' (set1|set2|set3|set4)");
    }
    for (GeneratorSpec& s : c.streams) s = finalize_spec(std::move(s));
    return c;
}

std::vector<std::string> preset_names() { return {"set1", "set2", "set3", "set4"}; }

}  // namespace camel
