#pragma once

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <string>

#include "ovqa/frame.hpp"

namespace ovqa {

// Byte size of one planar 4:2:0 frame.
std::size_t frame_bytes_420(int width, int height);

// Reads the Y plane of frame `index` from a headerless planar 4:2:0 stream.
// Chroma planes are skipped, not loaded.
FramePlane read_frame(std::istream& source, const VideoMeta& meta, int index);

// Seekable raw 4:2:0 video file. When meta.frame_count is zero it is
// derived from the file size.
class RawVideoReader {
 public:
  RawVideoReader(const std::string& path, VideoMeta meta);

  const VideoMeta& meta() const { return meta_; }
  int frame_count() const { return meta_.frame_count; }
  FramePlane read_frame(int index);

 private:
  std::ifstream stream_;
  VideoMeta meta_;
};

// Appends one 4:2:0 frame: the given Y plane plus neutral (128) chroma.
void append_frame_420(const FramePlane& y, std::ostream& sink);

// OVWM raster format: magic "OVWM", then width, height and frame_index as
// 32-bit little-endian unsigned integers, then width*height IEEE-754
// 32-bit little-endian values, row-major.
struct OvwmRecord {
  WeightMap map;
  std::uint32_t frame_index = 0;
};

void write_weight_map(const WeightMap& map, std::uint32_t frame_index,
                      std::ostream& sink);
OvwmRecord read_weight_map(std::istream& source);

void save_weight_map(const WeightMap& map, std::uint32_t frame_index,
                     const std::string& path);
OvwmRecord load_weight_map(const std::string& path);

}  // namespace ovqa
