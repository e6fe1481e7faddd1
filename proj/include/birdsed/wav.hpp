#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace birdsed {

struct WavData {
  std::vector<float> samples;  // mono, in [-1, 1]
  int sample_rate = 0;
};

// Decodes a RIFF/WAVE container holding 16-bit PCM, mono or stereo.
// Samples are scaled by 1/32768; stereo is downmixed by channel average.
// Throws DataError naming the defect for anything else.
WavData decode_wav(std::span<const std::uint8_t> bytes);

WavData read_wav_file(const std::filesystem::path& path);

// PCM16 mono writer; values are clamped to [-1, 1] and rounded.
std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate);

void write_wav_file(const std::filesystem::path& path, std::span<const float> samples,
                    int sample_rate);

}  // namespace birdsed
