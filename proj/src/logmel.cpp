#include "lwf/logmel.hpp"

#include <cmath>
#include <string>

#include "lwf/error.hpp"

namespace lwf {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLogFloorEnergy = 1e-10;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

void fft_radix2(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw ShapeError("fft_radix2: size must be a power of two, got " + std::to_string(n));
    }
    // Bit-reversal permutation.
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

std::vector<std::vector<double>> mel_filterbank(int n_mels, int n_fft, double sample_rate) {
    const int n_bins = n_fft / 2 + 1;
    const double f_max = sample_rate / 2.0;
    const double mel_max = hz_to_mel(f_max);
    std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i) {
        edges[static_cast<size_t>(i)] =
            mel_to_hz(mel_max * static_cast<double>(i) / (n_mels + 1));
    }
    std::vector<std::vector<double>> bank(static_cast<size_t>(n_mels),
                                          std::vector<double>(static_cast<size_t>(n_bins), 0.0));
    for (int m = 0; m < n_mels; ++m) {
        const double lo = edges[static_cast<size_t>(m)];
        const double mid = edges[static_cast<size_t>(m) + 1];
        const double hi = edges[static_cast<size_t>(m) + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double f = sample_rate * static_cast<double>(k) / n_fft;
            double w = 0.0;
            if (f > lo && f < mid) {
                w = (f - lo) / (mid - lo);
            } else if (f == mid) {
                w = 1.0;
            } else if (f > mid && f < hi) {
                w = (hi - f) / (hi - mid);
            }
            bank[static_cast<size_t>(m)][static_cast<size_t>(k)] = w;
        }
    }
    return bank;
}

Tensor extract_logmel(const std::vector<double>& waveform, int sample_rate,
                      const LogmelConfig& cfg) {
    if (waveform.empty()) throw DataError("extract_logmel: empty waveform");
    if (sample_rate != cfg.sample_rate) {
        throw DataError("extract_logmel: expected " + std::to_string(cfg.sample_rate) +
                        " Hz input, got " + std::to_string(sample_rate) + " Hz");
    }
    const int n_frames =
        static_cast<int>((waveform.size() + static_cast<size_t>(cfg.hop) - 1) /
                         static_cast<size_t>(cfg.hop));
    const int n_bins = cfg.window / 2 + 1;

    std::vector<double> hamming(static_cast<size_t>(cfg.window));
    for (int i = 0; i < cfg.window; ++i) {
        hamming[static_cast<size_t>(i)] =
            0.54 - 0.46 * std::cos(2.0 * kPi * i / (cfg.window - 1));
    }
    const auto bank = mel_filterbank(cfg.n_mels, cfg.window, cfg.sample_rate);

    std::vector<double> out(static_cast<size_t>(n_frames) * cfg.n_mels);
    std::vector<std::complex<double>> frame(static_cast<size_t>(cfg.window));
    std::vector<double> power(static_cast<size_t>(n_bins));
    for (int t = 0; t < n_frames; ++t) {
        const size_t start = static_cast<size_t>(t) * cfg.hop;
        for (int i = 0; i < cfg.window; ++i) {
            const size_t idx = start + static_cast<size_t>(i);
            const double s = idx < waveform.size() ? waveform[idx] : 0.0;
            frame[static_cast<size_t>(i)] = {s * hamming[static_cast<size_t>(i)], 0.0};
        }
        fft_radix2(frame);
        for (int k = 0; k < n_bins; ++k) {
            power[static_cast<size_t>(k)] = std::norm(frame[static_cast<size_t>(k)]);
        }
        for (int m = 0; m < cfg.n_mels; ++m) {
            double e = 0.0;
            const auto& filt = bank[static_cast<size_t>(m)];
            for (int k = 0; k < n_bins; ++k) e += filt[static_cast<size_t>(k)] * power[static_cast<size_t>(k)];
            out[static_cast<size_t>(t) * cfg.n_mels + m] = std::log(std::max(e, kLogFloorEnergy));
        }
    }
    return Tensor({n_frames, cfg.n_mels}, std::move(out));
}

}  // namespace lwf
