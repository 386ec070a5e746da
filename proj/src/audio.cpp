#include "lcnn/audio.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "lcnn/error.hpp"
#include "lcnn/format.hpp"

namespace lcnn::audio {

namespace {

std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
    std::ptrdiff_t m = i % period;
    if (m < 0) m += period;
    return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - m);
}

// FFTW's planner is not re-entrant.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwDeleter {
    void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

std::size_t FrontendConfig::window_samples() const {
    return static_cast<std::size_t>(std::lround(window_ms * 1e-3 * sample_rate));
}

std::size_t FrontendConfig::hop_samples() const {
    return static_cast<std::size_t>(std::lround(hop_ms * 1e-3 * sample_rate));
}

std::size_t FrontendConfig::fft_size() const {
    std::size_t n = 1;
    while (n < window_samples()) n <<= 1;
    return n;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> hamming_periodic(std::size_t length) {
    std::vector<double> w(length);
    for (std::size_t n = 0; n < length; ++n) {
        w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(length));
    }
    return w;
}

TensorD stft_magnitude(const AudioClip& clip, const FrontendConfig& config) {
    const std::size_t win = config.window_samples();
    const std::size_t hop = config.hop_samples();
    const std::size_t n_fft = config.fft_size();
    const std::size_t n = clip.samples.size();
    if (win == 0 || hop == 0) throw ConfigError("stft: window and hop must span at least one sample");
    if (n < hop) {
        throw InputError("stft: clip has " + std::to_string(n) + " samples, shorter than one hop (" +
                         std::to_string(hop) + ")");
    }
    const std::size_t frames = config.frames_for(n);
    const std::size_t bins = n_fft / 2 + 1;
    const auto pad = static_cast<std::ptrdiff_t>(win / 2);
    const std::vector<double> window = hamming_periodic(win);

    std::unique_ptr<double, FftwDeleter> in(static_cast<double*>(fftw_malloc(sizeof(double) * n_fft)));
    std::unique_ptr<fftw_complex, FftwDeleter> out(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), in.get(), out.get(), FFTW_ESTIMATE);
    }

    TensorD mag(Shape{frames, bins});
    for (std::size_t t = 0; t < frames; ++t) {
        const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * hop) - pad;
        for (std::size_t i = 0; i < win; ++i) {
            in.get()[i] = window[i] * static_cast<double>(clip.samples[reflect_index(start + static_cast<std::ptrdiff_t>(i), n)]);
        }
        for (std::size_t i = win; i < n_fft; ++i) in.get()[i] = 0.0;
        fftw_execute(plan);
        for (std::size_t k = 0; k < bins; ++k) mag[t * bins + k] = std::hypot(out.get()[k][0], out.get()[k][1]);
    }
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return mag;
}

std::vector<double> mel_centers_hz(std::size_t n_mels, double f_min, double f_max) {
    const double lo = hz_to_mel(f_min);
    const double hi = hz_to_mel(f_max);
    std::vector<double> points(n_mels + 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
        points[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
    }
    return points;
}

TensorD mel_filterbank(std::size_t n_mels, std::size_t fft_size, double sample_rate, double f_min, double f_max) {
    if (n_mels == 0) throw ConfigError("mel_filterbank: n_mels must be >= 1");
    if (!(f_max > f_min) || f_min < 0.0) throw ConfigError("mel_filterbank: need 0 <= f_min < f_max");
    const std::size_t bins = fft_size / 2 + 1;
    // Edge points: entry m is the lower edge of filter m, m+1 its center, m+2 its upper edge.
    const std::vector<double> edges = mel_centers_hz(n_mels, f_min, f_max);
    TensorD bank(Shape{n_mels, bins});
    for (std::size_t m = 0; m < n_mels; ++m) {
        const double lower = edges[m];
        const double center = edges[m + 1];
        const double upper = edges[m + 2];
        bool any = false;
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
            const double rising = (f - lower) / (center - lower);
            const double falling = (upper - f) / (upper - center);
            const double w = std::max(0.0, std::min(rising, falling));
            bank[m * bins + k] = w;
            any = any || w > 0.0;
        }
        if (!any) {
            throw ConfigError("mel_filterbank: filter " + std::to_string(m) + " of " + std::to_string(n_mels) +
                              " covers no FFT bin; too many mel bands for fft size " + std::to_string(fft_size));
        }
    }
    return bank;
}

TensorD log_mel_energies(const AudioClip& clip, const FrontendConfig& config) {
    if (clip.sample_rate != config.sample_rate) {
        throw InputError("log_mel: clip sample rate " + std::to_string(clip.sample_rate) +
                         " Hz does not match the configured " + std::to_string(config.sample_rate) +
                         " Hz (no resampling)");
    }
    const TensorD mag = stft_magnitude(clip, config);
    const std::size_t frames = mag.dim(0);
    const std::size_t bins = mag.dim(1);
    const TensorD bank = mel_filterbank(config.n_mels, config.fft_size(), config.sample_rate, config.f_min,
                                        config.upper_frequency());
    TensorD out(Shape{config.n_mels, frames});
    for (std::size_t t = 0; t < frames; ++t) {
        const double* spectrum = mag.ptr() + t * bins;
        for (std::size_t m = 0; m < config.n_mels; ++m) {
            const double* filt = bank.ptr() + m * bins;
            double e = 0.0;
            for (std::size_t k = 0; k < bins; ++k) e += filt[k] * spectrum[k] * spectrum[k];
            out[m * frames + t] = std::log(e + config.log_floor);
        }
    }
    return out;
}

FeatureMap log_mel(const AudioClip& clip, const FrontendConfig& config) {
    const TensorD energies = log_mel_energies(clip, config);
    FeatureMap fm;
    fm.data = energies.cast<float>().reshaped({1, energies.dim(0), energies.dim(1)});
    fm.metadata = {
        {"sample_rate", std::to_string(config.sample_rate)},
        {"window", "hamming_periodic"},
        {"window_samples", std::to_string(config.window_samples())},
        {"hop_samples", std::to_string(config.hop_samples())},
        {"fft_size", std::to_string(config.fft_size())},
        {"padding", "reflect_center"},
        {"n_mels", std::to_string(config.n_mels)},
        {"mel_scale", "htk"},
        {"f_min", format_number(config.f_min)},
        {"f_max", format_number(config.upper_frequency())},
        {"energy", "power"},
        {"log", "natural"},
        {"log_floor", format_number(config.log_floor)},
    };
    return fm;
}

}  // namespace lcnn::audio
