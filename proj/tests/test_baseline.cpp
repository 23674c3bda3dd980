#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "dysflow/baseline.hpp"
#include "dysflow/error.hpp"
#include "dysflow/rng.hpp"

using namespace dysflow;

namespace {

audio::AudioClip make_clip(std::vector<double> samples) {
    audio::AudioClip clip;
    clip.sample_rate = 16000;
    clip.channels = 1;
    clip.samples = std::move(samples);
    return clip;
}

audio::AudioClip tone(double freq_hz, double seconds = 3.0, double amp = 0.5) {
    std::vector<double> s(std::size_t(std::llround(seconds * 16000)));
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] = amp * std::sin(2.0 * std::numbers::pi * freq_hz * double(i) / 16000.0);
    return make_clip(std::move(s));
}

// Gaussian elimination on the order-p Toeplitz system, the independent check
// for the Levinson recursion.
std::vector<double> solve_toeplitz_direct(const std::vector<double>& r, std::size_t p) {
    std::vector<std::vector<double>> a(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            a[i][j] = r[std::size_t(std::abs(int(i) - int(j)))];
        a[i][p] = r[i + 1];
    }
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < p; ++row)
            if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
        std::swap(a[col], a[pivot]);
        for (std::size_t row = 0; row < p; ++row) {
            if (row == col) continue;
            const double f = a[row][col] / a[col][col];
            for (std::size_t j = col; j <= p; ++j) a[row][j] -= f * a[col][j];
        }
    }
    std::vector<double> x(p);
    for (std::size_t i = 0; i < p; ++i) x[i] = a[i][p] / a[i][i];
    return x;
}

}  // namespace

TEST_CASE("frame arithmetic for the 25 ms / 10 ms grid") {
    baseline::FrameConfig fcfg;
    CHECK(fcfg.window_samples(16000) == 400);
    CHECK(fcfg.hop_samples(16000) == 160);
    CHECK(fcfg.fft_size(16000) == 512);
}

TEST_CASE("mfcc shape on a 3 s clip") {
    const auto mat = baseline::mfcc(make_clip(std::vector<double>(48000, 0.0)));
    CHECK(mat.values.rows == 298);  // floor((48000 - 400)/160) + 1
    CHECK(mat.values.cols == 13);
    CHECK(mat.kind == cepstra::FeatureKind::Mfcc);

    // Silence: floored log gives identical rows.
    const float* first = mat.values.row(0);
    for (std::size_t r = 1; r < mat.values.rows; ++r)
        for (std::size_t k = 0; k < 13; ++k) CHECK(mat.values.row(r)[k] == first[k]);
}

TEST_CASE("mfcc rejects a clip shorter than one window") {
    CHECK_THROWS_AS(baseline::mfcc(make_clip(std::vector<double>(300, 0.1))), DataError);
}

TEST_CASE("mfcc distinguishes a 1 kHz tone from a 3 kHz tone") {
    const auto a = baseline::mfcc(tone(1000.0));
    const auto b = baseline::mfcc(tone(3000.0));
    REQUIRE(a.values.rows == b.values.rows);

    // Compare c[1..12] averaged over frames.
    double dist2 = 0.0;
    for (std::size_t k = 1; k < 13; ++k) {
        double ma = 0.0, mb = 0.0;
        for (std::size_t r = 0; r < a.values.rows; ++r) {
            ma += a.values.row(r)[k];
            mb += b.values.row(r)[k];
        }
        ma /= double(a.values.rows);
        mb /= double(b.values.rows);
        dist2 += (ma - mb) * (ma - mb);
    }
    CHECK(std::sqrt(dist2) > 0.1);
}

TEST_CASE("plpcc on silence produces constant finite rows") {
    const auto mat = baseline::plpcc(make_clip(std::vector<double>(48000, 0.0)));
    CHECK(mat.values.rows == 298);
    CHECK(mat.values.cols == 13);
    CHECK(mat.kind == cepstra::FeatureKind::Plp);
    const float* first = mat.values.row(0);
    for (std::size_t r = 0; r < mat.values.rows; ++r)
        for (std::size_t k = 0; k < 13; ++k) {
            CHECK(std::isfinite(mat.values.row(r)[k]));
            CHECK(mat.values.row(r)[k] == first[k]);
        }
}

TEST_CASE("plpcc on white noise stays stable") {
    Rng rng(31);
    std::vector<double> noise(48000);
    for (auto& s : noise) s = 0.3 * rng.gaussian();
    const auto mat = baseline::plpcc(make_clip(std::move(noise)));
    CHECK(mat.values.rows == 298);
    for (const float v : mat.values.data) CHECK(std::isfinite(v));
}

TEST_CASE("levinson matches a direct Toeplitz solve") {
    Rng rng(32);
    for (int trial = 0; trial < 30; ++trial) {
        // Autocorrelation of a random stable signal: r[k] = sum x[n] x[n+k].
        std::vector<double> x(256);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        std::vector<double> r(baseline::kPlpOrder + 1, 0.0);
        for (std::size_t k = 0; k < r.size(); ++k)
            for (std::size_t n = 0; n + k < x.size(); ++n) r[k] += x[n] * x[n + k];

        const auto lev = baseline::levinson(r, baseline::kPlpOrder);
        const auto direct = solve_toeplitz_direct(r, baseline::kPlpOrder);
        REQUIRE(lev.lpc.size() == direct.size());
        for (std::size_t j = 0; j < direct.size(); ++j)
            CHECK(lev.lpc[j] == doctest::Approx(direct[j]).epsilon(1e-6));
    }
}

TEST_CASE("levinson reflection coefficients stay inside the unit circle") {
    Rng rng(33);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> x(512);
        for (auto& v : x) v = rng.gaussian();
        std::vector<double> r(baseline::kPlpOrder + 1, 0.0);
        for (std::size_t k = 0; k < r.size(); ++k)
            for (std::size_t n = 0; n + k < x.size(); ++n) r[k] += x[n] * x[n + k];

        const auto lev = baseline::levinson(r, baseline::kPlpOrder);
        CHECK(lev.error > 0.0);
        for (const double k : lev.reflection) CHECK(std::abs(k) < 1.0);
    }
}

TEST_CASE("lpc polynomial of a known AR(2) process is recovered") {
    // x[n] = a1 x[n-1] + a2 x[n-2] + e[n]; with enough data the order-2
    // normal equations return (a1, a2) and the higher reflections vanish.
    Rng rng(34);
    const double a1 = 0.9, a2 = -0.5;
    std::vector<double> x(20000, 0.0);
    for (std::size_t n = 2; n < x.size(); ++n)
        x[n] = a1 * x[n - 1] + a2 * x[n - 2] + rng.gaussian();

    std::vector<double> r(5, 0.0);
    for (std::size_t k = 0; k < r.size(); ++k)
        for (std::size_t n = 0; n + k < x.size(); ++n) r[k] += x[n] * x[n + k];

    const auto lev = baseline::levinson(r, 4);
    CHECK(lev.lpc[0] == doctest::Approx(a1).epsilon(0.05));
    CHECK(lev.lpc[1] == doctest::Approx(a2).epsilon(0.05));
    CHECK(std::abs(lev.lpc[2]) < 0.05);
    CHECK(std::abs(lev.lpc[3]) < 0.05);
}

TEST_CASE("all-pole roots of plp models stay inside the unit circle") {
    // Minimum-phase guarantee, checked by evaluating the LPC polynomial's
    // companion-matrix spectral radius via power iteration on random frames.
    Rng rng(35);
    std::vector<double> noise(48000);
    double state = 0.0;
    for (auto& s : noise) {
        state = 0.7 * state + rng.gaussian();  // colored noise
        s = 0.1 * state;
    }
    std::vector<double> r(baseline::kPlpOrder + 1, 0.0);
    for (std::size_t k = 0; k < r.size(); ++k)
        for (std::size_t n = 0; n + k < noise.size(); ++n) r[k] += noise[n] * noise[n + k];
    const auto lev = baseline::levinson(r, baseline::kPlpOrder);

    // A(z) = 1 - sum a_j z^-j; roots via Durand-Kerner on the monic
    // polynomial z^p - a_1 z^(p-1) - ... - a_p.
    const std::size_t p = lev.lpc.size();
    std::vector<std::complex<double>> roots(p);
    for (std::size_t i = 0; i < p; ++i)
        roots[i] = std::polar(0.9, 2.0 * std::numbers::pi * double(i) / double(p) + 0.4);
    const auto poly = [&](std::complex<double> z) {
        std::complex<double> v = 1.0;
        for (std::size_t j = 0; j < p; ++j) v = v * z - lev.lpc[j];
        return v;
    };
    for (int iter = 0; iter < 200; ++iter) {
        for (std::size_t i = 0; i < p; ++i) {
            std::complex<double> denom = 1.0;
            for (std::size_t j = 0; j < p; ++j)
                if (j != i) denom *= roots[i] - roots[j];
            roots[i] -= poly(roots[i]) / denom;
        }
    }
    for (const auto& z : roots) {
        CHECK(std::abs(poly(z)) < 1e-8);  // converged
        CHECK(std::abs(z) < 1.0);
    }
}

TEST_CASE("lpc_to_cepstrum yields 13 finite coefficients") {
    std::vector<double> r(baseline::kPlpOrder + 1);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = std::pow(0.8, double(k));
    const auto lev = baseline::levinson(r, baseline::kPlpOrder);
    const auto ceps = baseline::lpc_to_cepstrum(lev, 13);
    REQUIRE(ceps.size() == 13);
    for (const double c : ceps) CHECK(std::isfinite(c));
    // AR(1)-like autocorrelation: first LPC coefficient near 0.8.
    CHECK(lev.lpc[0] == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("bark scale is monotone and anchored at zero") {
    CHECK(baseline::hz_to_bark(0.0) == doctest::Approx(0.0).epsilon(1e-9));
    double prev = -1.0;
    for (double hz = 0.0; hz <= 8000.0; hz += 250.0) {
        const double b = baseline::hz_to_bark(hz);
        CHECK(b > prev);
        prev = b;
    }
    CHECK(baseline::hz_to_bark(8000.0) <= 22.0);  // ~21 critical bands at 16 kHz
}

TEST_CASE("mfcc and plpcc share the frame grid") {
    Rng rng(36);
    std::vector<double> s(48000);
    for (auto& v : s) v = 0.2 * rng.gaussian();
    const audio::AudioClip clip = make_clip(std::move(s));
    const auto m = baseline::mfcc(clip);
    const auto p = baseline::plpcc(clip);
    CHECK(m.values.rows == p.values.rows);
    CHECK(m.frame_hop_s == doctest::Approx(p.frame_hop_s));
}
