#include "dysflow/sdc.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "dysflow/error.hpp"

namespace dysflow::sdc {

void SdcConfig::validate() const {
    if (n_static == 0) throw UsageError("sdc: N must be positive");
    if (delay == 0) throw UsageError("sdc: d must be >= 1");
    if (shift == 0) throw UsageError("sdc: p must be >= 1");
    if (blocks == 0) throw UsageError("sdc: K must be >= 1");
}

std::string SdcConfig::to_string() const {
    return std::to_string(n_static) + "-" + std::to_string(delay) + "-" + std::to_string(shift) +
           "-" + std::to_string(blocks);
}

SdcConfig SdcConfig::parse(const std::string& text) {
    SdcConfig cfg;
    std::size_t* fields[4] = {&cfg.n_static, &cfg.delay, &cfg.shift, &cfg.blocks};
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        if (pos >= text.size()) throw UsageError("malformed N-d-p-K string: " + text);
        std::size_t next = text.find('-', pos);
        if (i < 3 && next == std::string::npos)
            throw UsageError("malformed N-d-p-K string: " + text);
        const std::string part = text.substr(pos, next == std::string::npos ? next : next - pos);
        if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
            throw UsageError("malformed N-d-p-K string: " + text);
        *fields[i] = std::stoul(part);
        pos = next == std::string::npos ? text.size() : next + 1;
    }
    if (pos != text.size()) throw UsageError("malformed N-d-p-K string: " + text);
    cfg.validate();
    return cfg;
}

FeatureMatrix sdc_features(const cepstra::CepstralMatrix& cepstra, const SdcConfig& cfg) {
    cfg.validate();
    const std::size_t t_count = cepstra.values.rows;
    const std::size_t n = cepstra.values.cols;
    if (t_count == 0) throw DataError("sdc_features: empty cepstral matrix");
    if (n != cfg.n_static) throw UsageError("sdc_features: cepstral width does not match N");

    FeatureMatrix out;
    out.config = cfg;
    out.kind = cepstra.kind;
    out.values = Matrix<float>(t_count, n * (cfg.blocks + 1));

    const auto clamp_row = [&](std::ptrdiff_t idx) {
        if (idx < 0) idx = 0;
        if (idx >= std::ptrdiff_t(t_count)) idx = std::ptrdiff_t(t_count) - 1;
        return cepstra.values.row(std::size_t(idx));
    };

    for (std::size_t t = 0; t < t_count; ++t) {
        float* row = out.values.row(t);
        const float* stat = cepstra.values.row(t);
        for (std::size_t j = 0; j < n; ++j) row[j] = stat[j];
        for (std::size_t i = 0; i < cfg.blocks; ++i) {
            const auto base = std::ptrdiff_t(t) + std::ptrdiff_t(i * cfg.shift);
            const float* ahead = clamp_row(base + std::ptrdiff_t(cfg.delay));
            const float* behind = clamp_row(base - std::ptrdiff_t(cfg.delay));
            float* block = row + n * (i + 1);
            for (std::size_t j = 0; j < n; ++j) block[j] = ahead[j] - behind[j];
        }
    }
    return out;
}

FeatureMatrix static_features(const cepstra::CepstralMatrix& cepstra) {
    if (cepstra.values.rows == 0) throw DataError("static_features: empty cepstral matrix");
    FeatureMatrix out;
    out.values = cepstra.values;
    out.kind = cepstra.kind;
    out.config.n_static = cepstra.values.cols;
    out.config.blocks = 0;  // marks a static-only stack
    return out;
}

namespace {
constexpr char kMagic[4] = {'F', 'T', 'R', '1'};

void put_u32(std::ofstream& f, std::uint32_t v) {
    const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                       char((v >> 24) & 0xff)};
    f.write(b, 4);
}

std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated FTR1 file: " + path);
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
}
}  // namespace

void write_ftr(const std::string& path, const Matrix<float>& m) {
    if (m.rows > std::numeric_limits<std::uint32_t>::max() ||
        m.cols > std::numeric_limits<std::uint32_t>::max())
        throw FormatError("write_ftr: dimension overflow");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write feature file: " + path);
    f.write(kMagic, 4);
    put_u32(f, std::uint32_t(m.rows));
    put_u32(f, std::uint32_t(m.cols));
    static_assert(sizeof(float) == 4);
    f.write(reinterpret_cast<const char*>(m.data.data()),
            std::streamsize(m.data.size() * sizeof(float)));
    if (!f) throw DataError("short write to feature file: " + path);
}

Matrix<float> read_ftr(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open feature file: " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad FTR1 magic in " + path);
    const std::uint32_t rows = get_u32(f, path);
    const std::uint32_t cols = get_u32(f, path);
    if (cols != 0 && rows > std::numeric_limits<std::uint32_t>::max() / cols)
        throw FormatError("FTR1 dimension overflow in " + path);
    Matrix<float> m(rows, cols);
    if (!m.data.empty() &&
        !f.read(reinterpret_cast<char*>(m.data.data()),
                std::streamsize(m.data.size() * sizeof(float))))
        throw FormatError("truncated FTR1 file: " + path);
    char extra;
    if (f.read(&extra, 1)) throw FormatError("trailing bytes in FTR1 file: " + path);
    return m;
}

}  // namespace dysflow::sdc
