#include "dysflow/config_file.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dysflow/error.hpp"

namespace dysflow::configfile {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void fail(int line, const std::string& msg) {
    throw UsageError("config line " + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& v, int line) {
    errno = 0;
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (errno != 0 || end != v.c_str() + v.size() || v.empty())
        fail(line, "expected a number, got \"" + v + "\"");
    return d;
}

long long parse_int(const std::string& v, int line) {
    errno = 0;
    char* end = nullptr;
    const long long n = std::strtoll(v.c_str(), &end, 10);
    if (errno != 0 || end != v.c_str() + v.size() || v.empty())
        fail(line, "expected an integer, got \"" + v + "\"");
    return n;
}

bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(line, "expected a boolean, got \"" + v + "\"");
}

using Setter = std::function<void(PipelineConfig&, const std::string&, int)>;

std::map<std::string, std::map<std::string, Setter>> build_schema() {
    const auto dbl = [](auto member) {
        return [member](PipelineConfig& c, const std::string& v, int line) {
            member(c) = parse_double(v, line);
        };
    };
    const auto szt = [](auto member) {
        return [member](PipelineConfig& c, const std::string& v, int line) {
            const long long n = parse_int(v, line);
            if (n < 0) fail(line, "value must be non-negative");
            member(c) = std::size_t(n);
        };
    };
    const auto i32 = [](auto member) {
        return [member](PipelineConfig& c, const std::string& v, int line) {
            member(c) = int(parse_int(v, line));
        };
    };
    const auto u64 = [](auto member) {
        return [member](PipelineConfig& c, const std::string& v, int line) {
            const long long n = parse_int(v, line);
            if (n < 0) fail(line, "value must be non-negative");
            member(c) = std::uint64_t(n);
        };
    };
    const auto bol = [](auto member) {
        return [member](PipelineConfig& c, const std::string& v, int line) {
            member(c) = parse_bool(v, line);
        };
    };

    std::map<std::string, std::map<std::string, Setter>> schema;
    schema["ztw"] = {
        {"segment_ms", dbl([](PipelineConfig& c) -> double& { return c.ztw.segment_ms; })},
        {"dft_size", szt([](PipelineConfig& c) -> std::size_t& { return c.ztw.dft_size; })},
        {"hop_ms", dbl([](PipelineConfig& c) -> double& { return c.ztw.hop_ms; })},
        {"pre_emphasis_alpha",
         dbl([](PipelineConfig& c) -> double& { return c.ztw.pre_emphasis_alpha; })},
    };
    schema["perceptual"] = {
        {"n_mel_bands",
         szt([](PipelineConfig& c) -> std::size_t& { return c.perceptual.n_mel_bands; })},
        {"f_min", dbl([](PipelineConfig& c) -> double& { return c.perceptual.f_min; })},
        {"f_max", dbl([](PipelineConfig& c) -> double& { return c.perceptual.f_max; })},
        {"n_ceps", szt([](PipelineConfig& c) -> std::size_t& { return c.perceptual.n_ceps; })},
        {"log_floor", dbl([](PipelineConfig& c) -> double& { return c.perceptual.log_floor; })},
    };
    schema["frame"] = {
        {"window_ms", dbl([](PipelineConfig& c) -> double& { return c.frame.window_ms; })},
        {"hop_ms", dbl([](PipelineConfig& c) -> double& { return c.frame.hop_ms; })},
    };
    schema["sdc"] = {
        {"n_static", szt([](PipelineConfig& c) -> std::size_t& { return c.sdc.n_static; })},
        {"delay", szt([](PipelineConfig& c) -> std::size_t& { return c.sdc.delay; })},
        {"shift", szt([](PipelineConfig& c) -> std::size_t& { return c.sdc.shift; })},
        {"blocks", szt([](PipelineConfig& c) -> std::size_t& { return c.sdc.blocks; })},
    };
    schema["tdnn"] = {
        {"conv1_filters", i32([](PipelineConfig& c) -> int& { return c.tdnn.conv1.filters; })},
        {"conv1_kernel", i32([](PipelineConfig& c) -> int& { return c.tdnn.conv1.kernel; })},
        {"conv1_dilation", i32([](PipelineConfig& c) -> int& { return c.tdnn.conv1.dilation; })},
        {"conv2_filters", i32([](PipelineConfig& c) -> int& { return c.tdnn.conv2.filters; })},
        {"conv2_kernel", i32([](PipelineConfig& c) -> int& { return c.tdnn.conv2.kernel; })},
        {"conv2_dilation", i32([](PipelineConfig& c) -> int& { return c.tdnn.conv2.dilation; })},
        {"pool_size", i32([](PipelineConfig& c) -> int& { return c.tdnn.pool_size; })},
        {"dropout_rate", dbl([](PipelineConfig& c) -> double& { return c.tdnn.dropout_rate; })},
        {"l2_lambda", dbl([](PipelineConfig& c) -> double& { return c.tdnn.l2_lambda; })},
        {"fc1_units", i32([](PipelineConfig& c) -> int& { return c.tdnn.fc1_units; })},
        {"fc2_units", i32([](PipelineConfig& c) -> int& { return c.tdnn.fc2_units; })},
    };
    schema["train"] = {
        {"learning_rate", dbl([](PipelineConfig& c) -> double& { return c.train.learning_rate; })},
        {"batch_size", i32([](PipelineConfig& c) -> int& { return c.train.batch_size; })},
        {"max_epochs", i32([](PipelineConfig& c) -> int& { return c.train.max_epochs; })},
        {"early_stop_patience",
         i32([](PipelineConfig& c) -> int& { return c.train.early_stop_patience; })},
        {"class_weighting",
         bol([](PipelineConfig& c) -> bool& { return c.train.class_weighting; })},
        {"seed", u64([](PipelineConfig& c) -> std::uint64_t& { return c.train.seed; })},
    };
    schema["split"] = {
        {"train_fraction",
         dbl([](PipelineConfig& c) -> double& { return c.split.train_fraction; })},
        {"val_fraction", dbl([](PipelineConfig& c) -> double& { return c.split.val_fraction; })},
        {"seed", u64([](PipelineConfig& c) -> std::uint64_t& { return c.split.seed; })},
        {"speaker_disjoint",
         bol([](PipelineConfig& c) -> bool& { return c.split.speaker_disjoint; })},
    };
    return schema;
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
    static const auto schema = build_schema();
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::size_t comment = raw.find_first_of("#;");
        if (comment != std::string::npos) raw.erase(comment);
        const std::string s = trim(raw);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail(line, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!schema.count(section)) fail(line, "unknown section [" + section + "]");
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) fail(line, "expected key = value");
        if (section.empty()) fail(line, "key outside any [section]");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        const auto& keys = schema.at(section);
        const auto it = keys.find(key);
        if (it == keys.end()) fail(line, "unknown key \"" + key + "\" in [" + section + "]");
        it->second(cfg, value, line);
    }
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot read config file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str());
}

}  // namespace dysflow::configfile
