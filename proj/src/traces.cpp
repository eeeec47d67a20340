#include "ovqa/traces.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ovqa {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      if (!cur.empty()) {
        fields.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& token, int line_no) {
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != token.size() || !std::isfinite(value)) {
    throw std::runtime_error("trace line " + std::to_string(line_no) +
                             ": not a number: '" + token + "'");
  }
  return value;
}

}  // namespace

SubjectTrace parse_trace(std::string_view text, std::string subject_id) {
  SubjectTrace trace;
  trace.subject_id = std::move(subject_id);

  std::istringstream stream{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 7) {
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": expected 7 fields, got " +
                               std::to_string(fields.size()));
    }
    TraceRecord rec;
    rec.interval_ms = parse_number(fields[0], line_no);
    const double pitch = parse_number(fields[1], line_no);
    const double yaw = parse_number(fields[2], line_no);
    const double roll = parse_number(fields[3], line_no);
    try {
      rec.pose = Pose(pitch, yaw, roll);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("trace line " + std::to_string(line_no) + ": " + e.what());
    }
    rec.em_u = parse_number(fields[4], line_no);
    rec.em_v = parse_number(fields[5], line_no);
    const double flag = parse_number(fields[6], line_no);
    if (flag != 0.0 && flag != 1.0) {
      throw std::runtime_error("trace line " + std::to_string(line_no) +
                               ": EM flag must be 0 or 1");
    }
    rec.em_valid = flag == 1.0;
    if (rec.em_valid &&
        !(rec.em_u >= 0.0 && rec.em_u <= 1.0 && rec.em_v >= 0.0 && rec.em_v <= 1.0)) {
      throw std::runtime_error("trace line " + std::to_string(line_no) +
                               ": valid EM coordinates must lie in [0, 1]");
    }
    trace.records.push_back(rec);
  }
  return trace;
}

SubjectTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  // Subject id = file name without directory and extension.
  std::string name = path;
  if (const auto slash = name.find_last_of("/\\"); slash != std::string::npos) {
    name = name.substr(slash + 1);
  }
  if (const auto dot = name.find_last_of('.'); dot != std::string::npos && dot > 0) {
    name = name.substr(0, dot);
  }
  return parse_trace(buf.str(), name);
}

std::string format_trace(const SubjectTrace& trace) {
  std::string out;
  char buf[160];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g %.9g %.9g %d\n", r.interval_ms,
                  r.pose.pitch, r.pose.yaw, r.pose.roll, r.em_u, r.em_v,
                  r.em_valid ? 1 : 0);
    out += buf;
  }
  return out;
}

FrameSamples align_to_frames(const SubjectTrace& trace, const VideoMeta& meta,
                             TimestampMode mode) {
  validate_meta(meta);
  if (trace.records.empty()) throw std::runtime_error("trace holds no records");
  if (meta.frame_count <= 0) throw std::runtime_error("video frame count unknown");

  // Absolute time of every record, seconds.
  std::vector<double> times(trace.records.size());
  if (mode == TimestampMode::Intervals) {
    double t = 0.0;
    times[0] = 0.0;
    for (std::size_t i = 1; i < trace.records.size(); ++i) {
      t += trace.records[i].interval_ms / 1000.0;
      times[i] = t;
    }
  } else {
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
      times[i] = trace.records[i].interval_ms / 1000.0;
    }
  }

  const double duration = meta.frame_count / meta.frame_rate;
  if (times.back() < 0.1 * duration) {
    throw std::runtime_error("trace covers " + std::to_string(times.back()) +
                             " s of a " + std::to_string(duration) + " s video");
  }

  FrameSamples out;
  out.frames.resize(meta.frame_count);
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    int f = static_cast<int>(std::floor(times[i] * meta.frame_rate));
    f = std::clamp(f, 0, meta.frame_count - 1);
    FrameSample s;
    s.pose = r.pose;
    if (r.em_valid) s.gaze = GazeSample{r.em_u, r.em_v};
    out.frames[f].push_back(s);
  }

  // Hold-last fill for gaps after the first covered frame.
  const FrameSample* last = nullptr;
  for (auto& frame : out.frames) {
    if (!frame.empty()) {
      last = &frame.back();
    } else if (last != nullptr) {
      FrameSample s;
      s.pose = last->pose;
      s.inherited = true;
      frame.push_back(s);
      last = &frame.back();
    }
  }
  return out;
}

}  // namespace ovqa
