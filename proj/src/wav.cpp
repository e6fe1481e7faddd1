#include "birdsed/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "birdsed/common.hpp"

namespace birdsed {

namespace {

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

}  // namespace

WavData decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw DataError("wav: truncated RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0) throw DataError("wav: missing RIFF tag");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) throw DataError("wav: missing WAVE tag");

  int channels = 0;
  int sample_rate = 0;
  int bits_per_sample = 0;
  bool have_fmt = false;
  const std::uint8_t* data_ptr = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t chunk_size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size()) {
      throw DataError("wav: chunk extends past end of file");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw DataError("wav: fmt chunk too short");
      const std::uint16_t format = read_u16(chunk + 8);
      if (format != 1) throw DataError("wav: unsupported format tag (PCM only)");
      channels = read_u16(chunk + 10);
      sample_rate = static_cast<int>(read_u32(chunk + 12));
      bits_per_sample = read_u16(chunk + 22);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data_ptr = bytes.data() + body;
      data_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are 2-byte aligned
  }

  if (!have_fmt) throw DataError("wav: no fmt chunk");
  if (data_ptr == nullptr) throw DataError("wav: no data chunk");
  if (bits_per_sample != 16) throw DataError("wav: only 16-bit PCM supported");
  if (channels != 1 && channels != 2) throw DataError("wav: only mono or stereo supported");
  if (sample_rate <= 0) throw DataError("wav: invalid sample rate");

  const std::size_t n_values = data_size / 2;
  const std::size_t n_frames = n_values / channels;
  WavData out;
  out.sample_rate = sample_rate;
  out.samples.resize(n_frames);
  const float scale = 1.0f / 32768.0f;
  if (channels == 1) {
    for (std::size_t i = 0; i < n_frames; ++i) {
      const auto s = static_cast<std::int16_t>(read_u16(data_ptr + 2 * i));
      out.samples[i] = static_cast<float>(s) * scale;
    }
  } else {
    for (std::size_t i = 0; i < n_frames; ++i) {
      const auto l = static_cast<std::int16_t>(read_u16(data_ptr + 4 * i));
      const auto r = static_cast<std::int16_t>(read_u16(data_ptr + 4 * i + 2));
      out.samples[i] = 0.5f * (static_cast<float>(l) + static_cast<float>(r)) * scale;
    }
  }
  return out;
}

WavData read_wav_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open audio file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const DataError& e) {
    throw DataError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate) {
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits per sample
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_size);
  for (const float x : samples) {
    long v = std::lrintf(x * 32768.0f);
    if (v > 32767) v = 32767;
    if (v < -32768) v = -32768;
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  return out;
}

void write_wav_file(const std::filesystem::path& path, std::span<const float> samples,
                    int sample_rate) {
  const std::vector<std::uint8_t> bytes = encode_wav_pcm16(samples, sample_rate);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write audio file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write on audio file: " + path.string());
}

}  // namespace birdsed
