#pragma once

#include <complex>
#include <vector>

#include "lwf/tensor.hpp"

namespace lwf {

// Reference feature extractor: 44.1 kHz mono input, 1024-sample Hamming
// window advanced by 512 samples (one frame per started hop, tail
// zero-padded), power spectrum, 64 triangular mel filters spanning
// 0-22050 Hz, natural log floored at 1e-10. Output shape
// [ceil(n_samples / 512), 64].
struct LogmelConfig {
    int sample_rate = 44100;
    int window = 1024;
    int hop = 512;
    int n_mels = 64;
};

Tensor extract_logmel(const std::vector<double>& waveform, int sample_rate,
                      const LogmelConfig& cfg = {});

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a);

// Triangular filter bank on the one-sided spectrum: [n_mels, n_fft/2 + 1].
std::vector<std::vector<double>> mel_filterbank(int n_mels, int n_fft, double sample_rate);

}  // namespace lwf
