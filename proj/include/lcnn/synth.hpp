#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lcnn/audio.hpp"
#include "lcnn/dataset.hpp"
#include "lcnn/rng.hpp"

namespace lcnn {

// Tone-in-noise scenes. Class c owns the fundamental band
// [f_low * r^c, f_low * r^(c+1)) with r = (f_high/f_low)^(1/10), of which the
// central `band_fill` fraction (in log frequency) is used; each clip adds
// a few decaying harmonics, vibrato, a gated envelope, a weaker distractor
// tone at a random frequency and white noise at a random SNR.
struct SynthConfig {
    std::size_t per_class = 30;
    std::uint64_t seed = 0;
    double validation_fraction = 1.0 / 3.0;
    std::uint32_t sample_rate = 44100;
    double duration_s = 1.0;
    double f_low = 300.0;
    double f_high = 6000.0;
    double band_fill = 0.7;
    std::size_t max_harmonics = 2;
    double snr_db_min = 5.0;
    double snr_db_max = 20.0;
    double distractor_db_min = -24.0;
    double distractor_db_max = -12.0;

    void validate() const;
    double band_edge(std::size_t k) const;
    // Train clips per class; the rest of `per_class` go to validation.
    std::size_t train_per_class() const;
};

audio::AudioClip synth_clip(std::size_t label, const SynthConfig& config, Rng& rng);

// Writes wav/<label>_<n>.wav (float32) for every clip plus manifest.csv under
// `out_dir`; returns the manifest path. Clips are generated class by class, so
// the output depends only on the config.
std::filesystem::path write_synthetic_dataset(const std::filesystem::path& out_dir, const SynthConfig& config);

}  // namespace lcnn
