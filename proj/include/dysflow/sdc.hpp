#pragma once

#include <cstddef>
#include <string>

#include "dysflow/cepstra.hpp"
#include "dysflow/matrix.hpp"

namespace dysflow::sdc {

// Shifted-delta-cepstra parameters in the usual N-d-p-K notation.
struct SdcConfig {
    std::size_t n_static = 13;  // N
    std::size_t delay = 1;      // d
    std::size_t shift = 3;      // p
    std::size_t blocks = 7;     // K

    void validate() const;
    std::string to_string() const;                    // "13-1-3-7"
    static SdcConfig parse(const std::string& text);  // accepts the hyphenated form
};

// Static cepstra stacked with K shifted-delta blocks; frames x N*(K+1).
struct FeatureMatrix {
    Matrix<float> values;
    SdcConfig config;
    cepstra::FeatureKind kind = cepstra::FeatureKind::PeZtwcc;
};

// Row t = [C(t) | C(t+d) - C(t-d) | C(t+p+d) - C(t+p-d) | ...], block i
// differencing frames t + i*p +- d. Out-of-range indices clamp to [0, T-1]
// so the frame count never changes with the configuration.
FeatureMatrix sdc_features(const cepstra::CepstralMatrix& cepstra, const SdcConfig& cfg);

// Static features only (no delta blocks), for the plain-feature baselines.
FeatureMatrix static_features(const cepstra::CepstralMatrix& cepstra);

// FTR1 container: "FTR1" magic, u32 LE rows, u32 LE cols, then rows*cols
// f32 LE values row-major. Round trips are bit exact.
void write_ftr(const std::string& path, const Matrix<float>& m);
Matrix<float> read_ftr(const std::string& path);

}  // namespace dysflow::sdc
