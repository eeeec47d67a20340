#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ovqa/frame.hpp"
#include "ovqa/geometry.hpp"

namespace ovqa {

// Normalized gaze position inside the viewport; u rightward, v downward.
struct GazeSample {
  double u = 0.5;
  double v = 0.5;
};

// One behavior record: [Timestamp HM_pitch HM_yaw HM_roll EM_x EM_y EM_flag].
// The timestamp is the interval to the previous sample in milliseconds.
// Invalid EM fields are retained but quarantined behind em_valid.
struct TraceRecord {
  double interval_ms = 0.0;
  Pose pose;
  double em_u = 0.0;
  double em_v = 0.0;
  bool em_valid = false;
};

struct SubjectTrace {
  std::string subject_id;
  std::vector<TraceRecord> records;
};

// Whether the first column carries inter-sample intervals (accumulated to
// absolute time starting at zero) or absolute times.
enum class TimestampMode { Intervals, Absolute };

// Parses whitespace- or comma-separated numeric lines with 7 fields each.
// Errors name the offending 1-based line number.
SubjectTrace parse_trace(std::string_view text, std::string subject_id = {});
SubjectTrace load_trace(const std::string& path);

std::string format_trace(const SubjectTrace& trace);

struct FrameSample {
  Pose pose;
  std::optional<GazeSample> gaze;
  bool inherited = false;  // hold-last fill, not an original record
};

// Per-frame behavior samples; frames[i] lists the samples of frame i.
struct FrameSamples {
  std::vector<std::vector<FrameSample>> frames;
};

// Assigns records to frames by cumulative time: frame = floor(t * fps),
// clamped to the video length. Frames without records inherit the nearest
// earlier frame's last pose. Throws when the trace covers less than 10% of
// the video duration.
FrameSamples align_to_frames(const SubjectTrace& trace, const VideoMeta& meta,
                             TimestampMode mode = TimestampMode::Intervals);

}  // namespace ovqa
