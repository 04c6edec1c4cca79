#include "camel/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace camel {

namespace {

constexpr const char* kMagic = "camel-checkpoint 1";

void write_matrix(std::ostream& out, const char* tag, const Matrix& m) {
    out << tag << " " << m.rows << " " << m.cols << "\n";
    char buf[40];
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%a", m.at(r, c));
            out << buf << (c + 1 == m.cols ? "" : " ");
        }
        out << "\n";
    }
}

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::string token() {
        std::string t;
        if (!(in_ >> t)) throw std::runtime_error("checkpoint truncated");
        return t;
    }

    void expect(const std::string& want) {
        const std::string got = token();
        if (got != want)
            throw std::runtime_error("checkpoint: expected '" + want + "', got '" + got + "'");
    }

    long integer() {
        const std::string t = token();
        char* end = nullptr;
        const long v = std::strtol(t.c_str(), &end, 10);
        if (*end != '\0') throw std::runtime_error("checkpoint: bad integer '" + t + "'");
        return v;
    }

    double real() {
        const std::string t = token();
        char* end = nullptr;
        const double v = std::strtod(t.c_str(), &end);
        if (*end != '\0') throw std::runtime_error("checkpoint: bad value '" + t + "'");
        return v;
    }

    Matrix matrix(const std::string& tag) {
        expect(tag);
        const int rows = static_cast<int>(integer());
        const int cols = static_cast<int>(integer());
        Matrix m(rows, cols);
        for (double& v : m.data) v = real();
        return m;
    }

private:
    std::istream& in_;
};

void write_parameter(std::ostream& out, const Parameter& p) {
    out << "param " << p.name << " frozen " << (p.frozen ? 1 : 0) << "\n";
    write_matrix(out, "value", p.value);
}

void read_parameter(Reader& r, Parameter& p) {
    r.expect("param");
    p.name = r.token();
    r.expect("frozen");
    p.frozen = r.integer() != 0;
    Matrix value = r.matrix("value");
    p.reshape(std::move(value));
}

void write_adam_entry(std::ostream& out, const Adam& adam, const Parameter& p) {
    const AdamState* s = adam.state(&p);
    if (!s || !s->m.same_shape(p.value)) {
        out << "adam none\n";
        return;
    }
    out << "adam state " << s->step_count << "\n";
    write_matrix(out, "m", s->m);
    write_matrix(out, "v", s->v);
}

void read_adam_entry(Reader& r, Adam& adam, Parameter& p) {
    r.expect("adam");
    const std::string kind = r.token();
    if (kind == "none") {
        adam.forget(&p);
        return;
    }
    if (kind != "state") throw std::runtime_error("checkpoint: bad adam record '" + kind + "'");
    AdamState& s = adam.state_mutable(p);
    s.step_count = r.integer();
    s.m = r.matrix("m");
    s.v = r.matrix("v");
}

}  // namespace

void save_checkpoint(const std::string& path, Runner& runner) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << kMagic << "\n";
    out << "next_window " << runner.next_window() << "\n";
    out << "systems " << runner.systems().size() << "\n";
    for (auto& sys : runner.systems()) {
        out << "system " << sys->spec().stream_id << " pool " << sys->pool_size()
            << " next_expert_id " << sys->next_expert_id() << "\n";
        for (const auto& pe : sys->pool()) {
            char util[40];
            std::snprintf(util, sizeof(util), "%a", pe->utilization);
            out << "expert " << pe->id << " frozen " << (pe->frozen ? 1 : 0) << " birth "
                << pe->birth_window << " util " << util << " util_windows " << pe->util_windows
                << "\n";
        }
        const auto params = sys->parameters();
        out << "params " << params.size() << "\n";
        for (const Parameter* p : params) {
            write_parameter(out, *p);
            write_adam_entry(out, runner.optimizer(), *p);
        }
    }
    out << "detectors " << runner.detectors().size() << "\n";
    for (const MmdDetector& det : runner.detectors()) {
        out << "detector primed " << (det.primed() ? 1 : 0) << "\n";
        write_matrix(out, "reference", det.reference());
    }
    out << "tuners " << runner.tuners().size() << "\n";
    for (const TunerState& tuner : runner.tuners()) {
        out << "tuner cooldown " << tuner.cooldown_remaining << " history "
            << tuner.perf_history.size();
        char buf[40];
        for (double a : tuner.perf_history) {
            std::snprintf(buf, sizeof(buf), "%a", a);
            out << " " << buf;
        }
        out << "\n";
    }
}

void load_checkpoint(const std::string& path, Runner& runner) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string magic_word, magic_ver;
    in >> magic_word >> magic_ver;
    if (magic_word + " " + magic_ver != kMagic)
        throw std::runtime_error("not a camel checkpoint: " + path);
    Reader r(in);
    r.expect("next_window");
    runner.set_next_window(static_cast<int>(r.integer()));
    r.expect("systems");
    const size_t n = static_cast<size_t>(r.integer());
    if (n != runner.systems().size())
        throw std::runtime_error("checkpoint stream count does not match the config");
    for (size_t i = 0; i < n; ++i) {
        StreamSystem& sys = *runner.systems()[i];
        r.expect("system");
        r.integer();  // stream id
        r.expect("pool");
        const int pool = static_cast<int>(r.integer());
        if (pool < 1) throw std::runtime_error("checkpoint: empty expert pool");
        r.expect("next_expert_id");
        const int next_id = static_cast<int>(r.integer());
        while (sys.pool_size() < pool) sys.append_expert_for_restore(0);
        if (sys.pool_size() != pool)
            throw std::runtime_error("checkpoint: cannot shrink a fresh system's pool");
        for (int j = 0; j < pool; ++j) {
            PrivateExpert& pe = *sys.pool()[j];
            r.expect("expert");
            pe.id = static_cast<int>(r.integer());
            r.expect("frozen");
            pe.frozen = r.integer() != 0;
            pe.net.set_frozen(pe.frozen);
            r.expect("birth");
            pe.birth_window = static_cast<int>(r.integer());
            r.expect("util");
            pe.utilization = r.real();
            r.expect("util_windows");
            pe.util_windows = r.integer();
        }
        sys.set_next_expert_id(next_id);
        r.expect("params");
        const size_t count = static_cast<size_t>(r.integer());
        const auto params = sys.parameters();
        if (count != params.size())
            throw std::runtime_error("checkpoint: parameter count mismatch for system " +
                                     std::to_string(i));
        for (Parameter* p : params) {
            read_parameter(r, *p);
            read_adam_entry(r, runner.optimizer(), *p);
        }
    }
    r.expect("detectors");
    const size_t nd = static_cast<size_t>(r.integer());
    if (nd != runner.detectors().size())
        throw std::runtime_error("checkpoint detector count does not match the config");
    for (size_t i = 0; i < nd; ++i) {
        r.expect("detector");
        r.expect("primed");
        r.integer();
        runner.detectors()[i].restore_reference(r.matrix("reference"));
    }
    r.expect("tuners");
    const size_t nt = static_cast<size_t>(r.integer());
    if (nt != runner.tuners().size())
        throw std::runtime_error("checkpoint tuner count does not match the config");
    for (size_t i = 0; i < nt; ++i) {
        TunerState& tuner = runner.tuners()[i];
        r.expect("tuner");
        r.expect("cooldown");
        tuner.cooldown_remaining = static_cast<int>(r.integer());
        r.expect("history");
        const size_t len = static_cast<size_t>(r.integer());
        tuner.perf_history.clear();
        for (size_t k = 0; k < len; ++k) tuner.perf_history.push_back(r.real());
    }
}

}  // namespace camel
