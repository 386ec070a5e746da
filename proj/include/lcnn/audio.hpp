#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lcnn/tensor.hpp"

namespace lcnn::audio {

struct AudioClip {
    std::vector<float> samples;  // mono, nominally in [-1, 1]
    std::uint32_t sample_rate = 44100;
};

// Log-mel front end: periodic Hamming window, centered reflect padding,
// power spectrum, HTK mel triangles, natural log with an additive floor.
struct FrontendConfig {
    std::uint32_t sample_rate = 44100;
    double window_ms = 40.0;
    double hop_ms = 20.0;
    std::size_t n_mels = 40;
    double f_min = 0.0;
    double f_max = 0.0;  // 0 selects sample_rate / 2
    double log_floor = 1e-10;

    std::size_t window_samples() const;
    std::size_t hop_samples() const;
    std::size_t fft_size() const;  // next power of two >= window
    std::size_t bins() const { return fft_size() / 2 + 1; }
    double upper_frequency() const { return f_max > 0.0 ? f_max : sample_rate / 2.0; }
    std::size_t frames_for(std::size_t n_samples) const { return 1 + n_samples / hop_samples(); }
};

struct FeatureMap {
    Tensor data;  // [1, n_mels, frames]
    std::map<std::string, std::string> metadata;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

std::vector<double> hamming_periodic(std::size_t length);

// [frames, bins] magnitude spectrogram.
TensorD stft_magnitude(const AudioClip& clip, const FrontendConfig& config = {});

// [n_mels, bins] triangular filters on the HTK mel scale.
TensorD mel_filterbank(std::size_t n_mels, std::size_t fft_size, double sample_rate, double f_min, double f_max);

// Center frequencies (Hz) of the filters produced by mel_filterbank.
std::vector<double> mel_centers_hz(std::size_t n_mels, double f_min, double f_max);

// [n_mels, frames] log-mel energies in double precision.
TensorD log_mel_energies(const AudioClip& clip, const FrontendConfig& config = {});

// [1, n_mels, frames] float feature map with the parameters recorded in metadata.
FeatureMap log_mel(const AudioClip& clip, const FrontendConfig& config = {});

}  // namespace lcnn::audio
