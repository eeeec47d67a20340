#include "ovqa/media_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace ovqa {

namespace {

void put_u32le(std::uint32_t v, std::ostream& out) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t decode_u32le(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint32_t get_u32le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("ovwm: truncated data");
  return decode_u32le(b);
}

}  // namespace

std::size_t frame_bytes_420(int width, int height) {
  const std::size_t luma = static_cast<std::size_t>(width) * height;
  return luma + luma / 2;
}

FramePlane read_frame(std::istream& source, const VideoMeta& meta, int index) {
  // Byte-level access only; projection aspect rules apply where geometry
  // is actually used.
  if (meta.width <= 0 || meta.height <= 0) {
    throw std::invalid_argument("frame dimensions must be positive");
  }
  if (index < 0 || (meta.frame_count > 0 && index >= meta.frame_count)) {
    throw std::out_of_range("frame index out of range");
  }
  const std::size_t frame_size = frame_bytes_420(meta.width, meta.height);
  source.seekg(static_cast<std::streamoff>(frame_size) * index, std::ios::beg);

  FramePlane plane(meta.width, meta.height);
  source.read(reinterpret_cast<char*>(plane.samples.data()),
              static_cast<std::streamsize>(plane.samples.size()));
  if (source.gcount() != static_cast<std::streamsize>(plane.samples.size())) {
    throw std::runtime_error("truncated video stream at frame " + std::to_string(index));
  }
  return plane;
}

RawVideoReader::RawVideoReader(const std::string& path, VideoMeta meta)
    : stream_(path, std::ios::binary), meta_(meta) {
  if (!stream_) throw std::runtime_error("cannot open video file: " + path);
  if (meta_.width <= 0 || meta_.height <= 0) {
    throw std::invalid_argument("frame dimensions must be positive");
  }
  const auto size = std::filesystem::file_size(path);
  const std::size_t frame_size = frame_bytes_420(meta_.width, meta_.height);
  const int available = static_cast<int>(size / frame_size);
  if (meta_.frame_count <= 0) {
    meta_.frame_count = available;
  } else if (meta_.frame_count > available) {
    throw std::runtime_error(path + ": file holds only " + std::to_string(available) +
                             " frames");
  }
  if (meta_.frame_count == 0) {
    throw std::runtime_error(path + ": no complete frame for the given geometry");
  }
}

FramePlane RawVideoReader::read_frame(int index) {
  stream_.clear();
  return ovqa::read_frame(stream_, meta_, index);
}

void append_frame_420(const FramePlane& y, std::ostream& sink) {
  sink.write(reinterpret_cast<const char*>(y.samples.data()),
             static_cast<std::streamsize>(y.samples.size()));
  const std::size_t chroma = y.samples.size() / 2;
  const std::string neutral(chroma, static_cast<char>(128));
  sink.write(neutral.data(), static_cast<std::streamsize>(neutral.size()));
}

void write_weight_map(const WeightMap& map, std::uint32_t frame_index,
                      std::ostream& sink) {
  sink.write("OVWM", 4);
  put_u32le(static_cast<std::uint32_t>(map.width), sink);
  put_u32le(static_cast<std::uint32_t>(map.height), sink);
  put_u32le(frame_index, sink);
  for (float v : map.values) {
    if (!(std::isfinite(v) && v >= 0.0f)) {
      throw std::invalid_argument("weight maps must hold finite non-negative values");
    }
    put_u32le(std::bit_cast<std::uint32_t>(v), sink);
  }
  if (!sink) throw std::runtime_error("ovwm: write failed");
}

OvwmRecord read_weight_map(std::istream& source) {
  char magic[4];
  source.read(magic, 4);
  if (!source || std::memcmp(magic, "OVWM", 4) != 0) {
    throw std::runtime_error("ovwm: bad magic");
  }
  const std::uint32_t width = get_u32le(source);
  const std::uint32_t height = get_u32le(source);
  const std::uint32_t frame_index = get_u32le(source);
  if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16)) {
    throw std::runtime_error("ovwm: implausible dimensions");
  }
  OvwmRecord rec;
  rec.frame_index = frame_index;
  rec.map = WeightMap(static_cast<int>(width), static_cast<int>(height));
  std::vector<unsigned char> raw(rec.map.values.size() * 4);
  source.read(reinterpret_cast<char*>(raw.data()),
              static_cast<std::streamsize>(raw.size()));
  if (source.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw std::runtime_error("ovwm: truncated value block");
  }
  for (std::size_t i = 0; i < rec.map.values.size(); ++i) {
    const float v = std::bit_cast<float>(decode_u32le(raw.data() + 4 * i));
    if (!(std::isfinite(v) && v >= 0.0f)) {
      throw std::runtime_error("ovwm: negative or non-finite value");
    }
    rec.map.values[i] = v;
  }
  return rec;
}

void save_weight_map(const WeightMap& map, std::uint32_t frame_index,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create " + path);
  write_weight_map(map, frame_index, out);
}

OvwmRecord load_weight_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_weight_map(in);
}

}  // namespace ovqa
