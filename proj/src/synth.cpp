#include "lcnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "lcnn/error.hpp"
#include "lcnn/wav.hpp"

namespace lcnn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFadeS = 0.02;

double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

double rms(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s / static_cast<double>(x.size()));
}

// Sum of harmonics of f0 with per-harmonic decay, sinusoidal vibrato and a
// gate with linear fades.
std::vector<double> tone(double f0, std::size_t harmonics, double decay, double vibrato_depth, double vibrato_hz,
                         double on, double off, std::uint32_t rate, std::size_t n, Rng& rng) {
    std::vector<double> phases(harmonics);
    for (double& p : phases) p = rng.uniform(0.0, kTwoPi);
    const double vib_phase = rng.uniform(0.0, kTwoPi);
    const double nyquist = rate / 2.0;
    std::vector<double> out(n, 0.0);
    double theta = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        const double f = f0 * (1.0 + vibrato_depth * std::sin(kTwoPi * vibrato_hz * t + vib_phase));
        theta += kTwoPi * f / rate;
        double gate = 0.0;
        if (t >= on && t <= off) gate = std::min({1.0, (t - on) / kFadeS, (off - t) / kFadeS});
        if (gate <= 0.0) continue;
        double s = 0.0;
        double a = 1.0;
        for (std::size_t h = 0; h < harmonics; ++h) {
            if (f0 * static_cast<double>(h + 1) < nyquist) s += a * std::sin(static_cast<double>(h + 1) * theta + phases[h]);
            a *= decay;
        }
        out[i] = gate * s;
    }
    return out;
}

}  // namespace

void SynthConfig::validate() const {
    if (per_class == 0) throw ConfigError("synth: per_class must be >= 1");
    if (!(band_fill > 0.0 && band_fill <= 1.0)) throw ConfigError("synth: band_fill must be in (0, 1]");
    if (max_harmonics == 0) throw ConfigError("synth: max_harmonics must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("synth: validation_fraction must be in [0, 1)");
    }
    if (sample_rate == 0 || !(duration_s > 0.0)) throw ConfigError("synth: sample rate and duration must be positive");
    if (!(f_low > 0.0 && f_high > f_low && f_high < sample_rate / 2.0)) {
        throw ConfigError("synth: need 0 < f_low < f_high < sample_rate/2");
    }
    if (snr_db_min > snr_db_max || distractor_db_min > distractor_db_max) throw ConfigError("synth: empty level range");
}

double SynthConfig::band_edge(std::size_t k) const {
    return f_low * std::pow(f_high / f_low, static_cast<double>(k) / static_cast<double>(kSceneLabels.size()));
}

std::size_t SynthConfig::train_per_class() const {
    const auto val = static_cast<std::size_t>(std::lround(static_cast<double>(per_class) * validation_fraction));
    return per_class - std::min(val, per_class);
}

audio::AudioClip synth_clip(std::size_t label, const SynthConfig& config, Rng& rng) {
    if (label >= kSceneLabels.size()) throw InputError("synth: class index out of range");
    const auto n = static_cast<std::size_t>(std::lround(config.duration_s * config.sample_rate));

    const double lo = std::log(config.band_edge(label));
    const double hi = std::log(config.band_edge(label + 1));
    const double margin = 0.5 * (1.0 - config.band_fill) * (hi - lo);
    const double f0 = std::exp(rng.uniform(lo + margin, hi - margin));
    const std::size_t harmonics = 1 + rng.below(config.max_harmonics);
    const double decay = rng.uniform(0.3, 0.8);
    const double on = rng.uniform(0.0, 0.4) * config.duration_s;
    const double off = on + rng.uniform(0.5, 1.0) * (config.duration_s - on);
    std::vector<double> x = tone(f0, harmonics, decay, rng.uniform(0.0, 0.01), rng.uniform(2.0, 7.0), on, off,
                                 config.sample_rate, n, rng);
    const double signal_rms = std::max(rms(x), 1e-12);

    const double fd = std::exp(rng.uniform(std::log(config.f_low), std::log(config.f_high)));
    const double d_on = rng.uniform(0.0, 0.5) * config.duration_s;
    const std::vector<double> d = tone(fd, 1, 0.0, 0.0, 1.0, d_on, d_on + 0.5 * config.duration_s,
                                       config.sample_rate, n, rng);
    const double d_gain = signal_rms * db_to_amplitude(rng.uniform(config.distractor_db_min, config.distractor_db_max)) /
                          std::max(rms(d), 1e-12);

    const double noise_rms = signal_rms / db_to_amplitude(rng.uniform(config.snr_db_min, config.snr_db_max));
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] += d_gain * d[i] + noise_rms * rng.normal();
        peak = std::max(peak, std::abs(x[i]));
    }

    audio::AudioClip clip;
    clip.sample_rate = config.sample_rate;
    clip.samples.resize(n);
    const double gain = 0.5 / std::max(peak, 1e-12);
    for (std::size_t i = 0; i < n; ++i) clip.samples[i] = static_cast<float>(x[i] * gain);
    return clip;
}

std::filesystem::path write_synthetic_dataset(const std::filesystem::path& out_dir, const SynthConfig& config) {
    config.validate();
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "wav", ec);
    if (ec) throw IoError((out_dir / "wav").string() + ": " + ec.message());

    Rng rng(config.seed);
    const std::size_t n_train = config.train_per_class();
    std::vector<ManifestRow> rows;
    for (std::size_t c = 0; c < kSceneLabels.size(); ++c) {
        const std::string label(kSceneLabels[c]);
        for (std::size_t i = 0; i < config.per_class; ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "_%03zu.wav", i);
            const std::string rel = "wav/" + label + name;
            audio::write_wav(out_dir / rel, synth_clip(c, config, rng));
            rows.push_back({rel, label, i < n_train ? Split::Train : Split::Validation});
        }
    }
    const auto manifest = out_dir / "manifest.csv";
    write_manifest(manifest, rows);
    return manifest;
}

}  // namespace lcnn
