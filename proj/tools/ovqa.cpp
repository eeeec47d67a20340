// Command-line driver: objective metrics, behavior weight maps, projection
// conversion, subjective score processing and correlation tables.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ovqa/csv.hpp"
#include "ovqa/errors.hpp"
#include "ovqa/eval.hpp"
#include "ovqa/frame.hpp"
#include "ovqa/media_io.hpp"
#include "ovqa/metrics.hpp"
#include "ovqa/parallel.hpp"
#include "ovqa/percmodel.hpp"
#include "ovqa/projection.hpp"
#include "ovqa/subjective.hpp"
#include "ovqa/traces.hpp"
#include "ovqa/weights.hpp"

namespace fs = std::filesystem;
using namespace ovqa;

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

struct MetaOpts {
  std::string ref;
  std::string imp;
  int width = 0;
  int height = 0;
  double fps = 30.0;
  std::string proj = "erp";
  int frames = 0;  // 0 = derive from file size
};

void add_meta_options(CLI::App* cmd, MetaOpts& meta, bool need_imp) {
  cmd->add_option("--ref", meta.ref, "reference raw 4:2:0 video")->required();
  if (need_imp) {
    cmd->add_option("--imp", meta.imp, "impaired raw 4:2:0 video")->required();
  }
  cmd->add_option("--width", meta.width, "frame width in pixels")->required();
  cmd->add_option("--height", meta.height, "frame height in pixels")->required();
  cmd->add_option("--fps", meta.fps, "frame rate");
  cmd->add_option("--proj", meta.proj, "projection: erp|rcmp|tsp|cpp");
  cmd->add_option("--frames", meta.frames, "frame count limit (0 = whole file)");
}

VideoMeta to_meta(const MetaOpts& opts) {
  VideoMeta meta;
  meta.width = opts.width;
  meta.height = opts.height;
  meta.frame_rate = opts.fps;
  meta.frame_count = opts.frames;
  meta.projection = projection_from_string(opts.proj);
  return meta;
}

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot create " + path);
  return file;
}

// ---------------------------------------------------------------------------
// Behavior inputs: either trace files or precomputed OVWM rasters.
// ---------------------------------------------------------------------------

struct BehaviorOpts {
  std::string traces_dir;
  std::string hm_maps_dir;
  std::string em_maps_dir;
  double fov_h = kDefaultFovDeg;
  double fov_v = kDefaultFovDeg;
  double sigma = 0.1;
  std::string timestamp_mode = "interval";
  std::string hm_sample = "first";  // first | mean
};

void add_behavior_options(CLI::App* cmd, BehaviorOpts& opts) {
  cmd->add_option("--traces", opts.traces_dir, "directory of per-subject trace files");
  cmd->add_option("--hm-maps", opts.hm_maps_dir, "directory of I-HM OVWM rasters");
  cmd->add_option("--em-maps", opts.em_maps_dir, "directory of I-EM OVWM rasters");
  cmd->add_option("--fov-h", opts.fov_h, "viewport horizontal FOV, degrees");
  cmd->add_option("--fov-v", opts.fov_v, "viewport vertical FOV, degrees");
  cmd->add_option("--sigma", opts.sigma, "gaze Gaussian sigma, viewport units");
  cmd->add_option("--timestamp-mode", opts.timestamp_mode,
                  "trace timestamps: interval|absolute");
  cmd->add_option("--hm-sample", opts.hm_sample,
                  "per-frame samples to use: first|mean");
}

TimestampMode timestamp_mode_of(const std::string& name) {
  if (name == "interval") return TimestampMode::Intervals;
  if (name == "absolute") return TimestampMode::Absolute;
  throw std::runtime_error("unknown timestamp mode: " + name);
}

std::vector<std::string> sorted_files(const std::string& dir, const std::string& ext) {
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) {
      out.push_back(entry.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct SubjectBehavior {
  std::vector<std::string> ids;
  std::vector<FrameSamples> aligned;
};

SubjectBehavior load_subject_traces(const std::string& dir, const VideoMeta& meta,
                                    TimestampMode mode) {
  SubjectBehavior out;
  const auto files = sorted_files(dir, ".txt");
  if (files.empty()) throw std::runtime_error("no .txt trace files in " + dir);
  for (const auto& path : files) {
    SubjectTrace trace = load_trace(path);
    out.aligned.push_back(align_to_frames(trace, meta, mode));
    out.ids.push_back(trace.subject_id);
  }
  return out;
}

// OVWM files grouped by the frame index stored in the header.
std::map<int, std::vector<WeightMap>> load_map_dir(const std::string& dir) {
  std::map<int, std::vector<WeightMap>> by_frame;
  for (const auto& path : sorted_files(dir, ".ovwm")) {
    OvwmRecord rec = load_weight_map(path);
    by_frame[static_cast<int>(rec.frame_index)].push_back(std::move(rec.map));
  }
  if (by_frame.empty()) throw std::runtime_error("no .ovwm files in " + dir);
  return by_frame;
}

// Per-subject viewport masks of one frame, built from traces.
std::vector<WeightMap> frame_hm_maps(const SubjectBehavior& behavior, int frame,
                                     const Fov& fov, const DirectionGrid& grid,
                                     bool average_samples) {
  std::vector<WeightMap> maps;
  for (const auto& subject : behavior.aligned) {
    const auto& samples = subject.frames[frame];
    if (samples.empty()) continue;
    if (!average_samples || samples.size() == 1) {
      maps.push_back(i_hm_map(samples[0].pose, fov, grid));
    } else {
      std::vector<WeightMap> per_sample;
      for (const auto& s : samples) per_sample.push_back(i_hm_map(s.pose, fov, grid));
      maps.push_back(mean_map(per_sample));
    }
  }
  return maps;
}

std::vector<WeightMap> frame_em_maps(const SubjectBehavior& behavior, int frame,
                                     const Fov& fov, const GazeParams& gaze,
                                     const DirectionGrid& grid, bool average_samples) {
  std::vector<WeightMap> maps;
  for (const auto& subject : behavior.aligned) {
    const auto& samples = subject.frames[frame];
    if (samples.empty()) continue;
    if (!average_samples) {
      if (!samples[0].gaze) continue;  // invalid gaze: subject skipped
      maps.push_back(i_em_map(samples[0].pose, *samples[0].gaze, gaze, fov, grid));
    } else {
      std::vector<WeightMap> per_sample;
      for (const auto& s : samples) {
        if (!s.gaze) continue;
        per_sample.push_back(i_em_map(s.pose, *s.gaze, gaze, fov, grid));
      }
      if (per_sample.empty()) continue;
      maps.push_back(mean_map(per_sample));
    }
  }
  return maps;
}

// ---------------------------------------------------------------------------
// metrics command
// ---------------------------------------------------------------------------

struct MetricsOpts {
  MetaOpts meta;
  BehaviorOpts behavior;
  std::vector<std::string> metrics{"psnr"};
  int spsnr_points = kDefaultSpsnrSamples;
  int downsample_width = 0;
  int frame_interval = 1;
  int threads = 1;
  std::string sequence;
  std::string out;
  std::uint64_t seed = 0;
};

const std::set<std::string> kKnownMetrics = {"psnr",      "ssim",      "ws-psnr",
                                             "s-psnr",    "cpp-psnr",  "psnr-i-hm",
                                             "psnr-o-hm", "psnr-i-em"};

int run_metrics(const MetricsOpts& opts) {
  for (const auto& m : opts.metrics) {
    if (kKnownMetrics.count(m) == 0) throw std::runtime_error("unknown metric: " + m);
  }
  const bool want_hm = std::count(opts.metrics.begin(), opts.metrics.end(), "psnr-i-hm") ||
                       std::count(opts.metrics.begin(), opts.metrics.end(), "psnr-o-hm");
  const bool want_em =
      std::count(opts.metrics.begin(), opts.metrics.end(), "psnr-i-em") > 0;

  VideoMeta meta = to_meta(opts.meta);
  RawVideoReader ref_probe(opts.meta.ref, meta);
  RawVideoReader imp_probe(opts.meta.imp, meta);
  if (opts.meta.frames == 0 && ref_probe.frame_count() != imp_probe.frame_count()) {
    throw std::runtime_error("reference and impaired frame counts differ; use --frames");
  }
  meta.frame_count = std::min(ref_probe.frame_count(), imp_probe.frame_count());

  // Metrics run at the (optionally downsampled) working size.
  VideoMeta work = meta;
  if (opts.downsample_width > 0 && opts.downsample_width != meta.width) {
    work.width = opts.downsample_width;
    work.height = static_cast<int>(std::lround(
        static_cast<double>(meta.height) * opts.downsample_width / meta.width));
  }
  validate_meta(work);

  const Fov fov(opts.behavior.fov_h, opts.behavior.fov_v);
  const GazeParams gaze{opts.behavior.sigma};

  std::optional<SubjectBehavior> traces;
  std::map<int, std::vector<WeightMap>> hm_files, em_files;
  if (want_hm || want_em) {
    const bool hm_from_files = want_hm && !opts.behavior.hm_maps_dir.empty();
    const bool em_from_files = want_em && !opts.behavior.em_maps_dir.empty();
    if (hm_from_files) hm_files = load_map_dir(opts.behavior.hm_maps_dir);
    if (em_from_files) em_files = load_map_dir(opts.behavior.em_maps_dir);
    const bool need_traces = (want_hm && !hm_from_files) || (want_em && !em_from_files);
    if (need_traces) {
      if (opts.behavior.traces_dir.empty()) {
        throw std::runtime_error(
            "behavior metrics need --traces or precomputed --hm-maps/--em-maps");
      }
      traces = load_subject_traces(opts.behavior.traces_dir, meta,
                                   timestamp_mode_of(opts.behavior.timestamp_mode));
    }
  }

  std::optional<SampleSet> samples;
  if (std::count(opts.metrics.begin(), opts.metrics.end(), "s-psnr")) {
    samples = uniform_samples(opts.spsnr_points);
  }
  std::optional<DirectionGrid> grid;
  if (want_hm || want_em) {
    grid = DirectionGrid::make(work.width, work.height, work.projection);
  }
  const bool average_samples = opts.behavior.hm_sample == "mean";
  if (opts.behavior.hm_sample != "first" && opts.behavior.hm_sample != "mean") {
    throw std::runtime_error("--hm-sample must be first or mean");
  }

  if (opts.frame_interval < 1) throw std::runtime_error("--frame-interval must be positive");
  std::vector<int> frame_ids;
  for (int f = 0; f < meta.frame_count; f += opts.frame_interval) frame_ids.push_back(f);

  // results[selected frame][metric index]
  std::vector<std::vector<double>> results(
      frame_ids.size(), std::vector<double>(opts.metrics.size(), kMissing));

  parallel_for(static_cast<int>(frame_ids.size()), opts.threads, [&](int slot) {
    const int f = frame_ids[slot];
    RawVideoReader ref_reader(opts.meta.ref, meta);
    RawVideoReader imp_reader(opts.meta.imp, meta);
    FramePlane ref = ref_reader.read_frame(f);
    FramePlane imp = imp_reader.read_frame(f);
    if (work.width != meta.width || work.height != meta.height) {
      ref = resize_bilinear(ref, work.width, work.height);
      imp = resize_bilinear(imp, work.width, work.height);
    }

    std::vector<WeightMap> hm_maps, em_maps;
    if (want_hm) {
      if (!hm_files.empty()) {
        const auto it = hm_files.find(f);
        if (it != hm_files.end()) hm_maps = it->second;
      } else if (traces) {
        hm_maps = frame_hm_maps(*traces, f, fov, *grid, average_samples);
      }
    }
    if (want_em) {
      if (!em_files.empty()) {
        const auto it = em_files.find(f);
        if (it != em_files.end()) em_maps = it->second;
      } else if (traces) {
        em_maps = frame_em_maps(*traces, f, fov, gaze, *grid, average_samples);
      }
    }

    for (std::size_t mi = 0; mi < opts.metrics.size(); ++mi) {
      const std::string& name = opts.metrics[mi];
      double value = kMissing;
      if (name == "psnr") {
        value = psnr(ref, imp);
      } else if (name == "ssim") {
        value = ssim(ref, imp);
      } else if (name == "ws-psnr") {
        value = ws_psnr(ref, imp);
      } else if (name == "s-psnr") {
        value = s_psnr(ref, imp, work.projection, *samples);
      } else if (name == "cpp-psnr") {
        value = cpp_psnr(ref, imp, work.projection);
      } else if (name == "psnr-i-hm") {
        if (!hm_maps.empty()) value = psnr_i_hm(ref, imp, hm_maps);
      } else if (name == "psnr-o-hm") {
        if (!hm_maps.empty()) value = psnr_o_hm(ref, imp, o_hm_map(hm_maps));
      } else if (name == "psnr-i-em") {
        if (!em_maps.empty()) value = psnr_i_em(ref, imp, em_maps);
      }
      results[slot][mi] = value;
    }
  });

  std::string sequence = opts.sequence;
  if (sequence.empty()) sequence = fs::path(opts.meta.imp).stem().string();

  std::ofstream file;
  std::ostream& out = open_output(opts.out, file);
  out << "sequence,frame,metric,value\n";
  for (std::size_t slot = 0; slot < frame_ids.size(); ++slot) {
    for (std::size_t mi = 0; mi < opts.metrics.size(); ++mi) {
      if (std::isnan(results[slot][mi])) continue;
      out << sequence << ',' << frame_ids[slot] << ',' << opts.metrics[mi] << ','
          << format_double(results[slot][mi]) << '\n';
    }
  }
  for (std::size_t mi = 0; mi < opts.metrics.size(); ++mi) {
    std::vector<double> values;
    for (std::size_t slot = 0; slot < frame_ids.size(); ++slot) {
      if (!std::isnan(results[slot][mi])) values.push_back(results[slot][mi]);
    }
    if (values.empty()) {
      throw std::runtime_error("metric " + opts.metrics[mi] +
                               " produced no frame values (missing behavior data?)");
    }
    out << sequence << ",-1," << opts.metrics[mi] << ','
        << format_double(pool_sequence(values)) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// weights command
// ---------------------------------------------------------------------------

struct WeightsOpts {
  BehaviorOpts behavior;
  std::string mode;  // i-hm | o-hm | i-em
  std::string out_dir;
  int width = 0;
  int height = 0;
  double fps = 30.0;
  std::string proj = "erp";
  int frames = 0;
  int threads = 1;
};

int run_weights(const WeightsOpts& opts) {
  if (opts.mode != "i-hm" && opts.mode != "o-hm" && opts.mode != "i-em") {
    throw std::runtime_error("--mode must be i-hm, o-hm or i-em");
  }
  if (opts.behavior.traces_dir.empty()) throw std::runtime_error("--traces is required");
  if (opts.frames <= 0) throw std::runtime_error("--frames must be positive");

  VideoMeta meta;
  meta.width = opts.width;
  meta.height = opts.height;
  meta.frame_rate = opts.fps;
  meta.frame_count = opts.frames;
  meta.projection = projection_from_string(opts.proj);
  validate_meta(meta);

  fs::create_directories(opts.out_dir);
  const Fov fov(opts.behavior.fov_h, opts.behavior.fov_v);
  const GazeParams gaze{opts.behavior.sigma};
  const auto behavior = load_subject_traces(
      opts.behavior.traces_dir, meta, timestamp_mode_of(opts.behavior.timestamp_mode));
  const auto grid = DirectionGrid::make(meta.width, meta.height, meta.projection);
  const bool average_samples = opts.behavior.hm_sample == "mean";

  std::vector<int> written(meta.frame_count, 0);
  parallel_for(meta.frame_count, opts.threads, [&](int f) {
    char suffix[24];
    std::snprintf(suffix, sizeof(suffix), "_f%06d.ovwm", f);
    if (opts.mode == "o-hm") {
      const auto maps = frame_hm_maps(behavior, f, fov, grid, average_samples);
      if (maps.empty()) return;
      save_weight_map(o_hm_map(maps), static_cast<std::uint32_t>(f),
                      (fs::path(opts.out_dir) / (std::string("ohm") + suffix)).string());
      written[f] = 1;
      return;
    }
    for (std::size_t s = 0; s < behavior.ids.size(); ++s) {
      const auto& samples = behavior.aligned[s].frames[f];
      if (samples.empty()) continue;
      std::optional<WeightMap> map;
      if (opts.mode == "i-hm") {
        if (!average_samples || samples.size() == 1) {
          map = i_hm_map(samples[0].pose, fov, grid);
        } else {
          std::vector<WeightMap> per_sample;
          for (const auto& smp : samples) per_sample.push_back(i_hm_map(smp.pose, fov, grid));
          map = mean_map(per_sample);
        }
      } else {  // i-em
        std::vector<WeightMap> per_sample;
        if (!average_samples) {
          // First-sample semantics: an invalid first gaze drops the
          // (subject, frame) pair, matching the metrics path.
          if (samples[0].gaze) {
            per_sample.push_back(
                i_em_map(samples[0].pose, *samples[0].gaze, gaze, fov, grid));
          }
        } else {
          for (const auto& smp : samples) {
            if (!smp.gaze) continue;
            per_sample.push_back(i_em_map(smp.pose, *smp.gaze, gaze, fov, grid));
          }
        }
        if (per_sample.empty()) continue;
        map = per_sample.size() > 1 ? mean_map(per_sample) : std::move(per_sample[0]);
      }
      save_weight_map(*map, static_cast<std::uint32_t>(f),
                      (fs::path(opts.out_dir) / (behavior.ids[s] + suffix)).string());
      written[f] += 1;
    }
  });

  long total = 0;
  for (int w : written) total += w;
  if (total == 0) {
    std::cerr << "warning: no weight maps written (no usable samples)\n";
  }
  std::cout << "wrote " << total << " map files to " << opts.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// convert command
// ---------------------------------------------------------------------------

struct ConvertOpts {
  MetaOpts meta;
  std::string to_proj;
  int to_width = 0;
  int to_height = 0;
  std::string out;
};

int run_convert(const ConvertOpts& opts) {
  VideoMeta meta = to_meta(opts.meta);
  RawVideoReader reader(opts.meta.ref, meta);
  const ProjectionKind src_kind = meta.projection;
  const ProjectionKind dst_kind = projection_from_string(opts.to_proj);
  check_frame_geometry(dst_kind, opts.to_width, opts.to_height);

  std::ofstream out(opts.out, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create " + opts.out);
  for (int f = 0; f < reader.frame_count(); ++f) {
    const FramePlane src = reader.read_frame(f);
    const FramePlane dst =
        resample_frame(src, src_kind, dst_kind, opts.to_width, opts.to_height);
    append_frame_420(dst, out);
  }
  std::cout << "converted " << reader.frame_count() << " frames to "
            << opts.to_proj << " " << opts.to_width << "x" << opts.to_height << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval command
// ---------------------------------------------------------------------------

struct EvalOpts {
  std::string objective;
  std::string subjective;
  std::string out;
};

int run_eval(const EvalOpts& opts) {
  std::ifstream obj_in(opts.objective);
  if (!obj_in) throw std::runtime_error("cannot open " + opts.objective);
  std::ifstream dmos_in(opts.subjective);
  if (!dmos_in) throw std::runtime_error("cannot open " + opts.subjective);

  const auto rows = evaluate_tables(read_objective_csv(obj_in), read_dmos_csv(dmos_in));
  std::ofstream file;
  std::ostream& out = open_output(opts.out, file);
  write_eval_csv(out, rows);
  return 0;
}

// ---------------------------------------------------------------------------
// scores command
// ---------------------------------------------------------------------------

struct ScoresOpts {
  std::string scores;
  std::string refs;
  std::string out;
  bool no_reject = false;
};

int run_scores(const ScoresOpts& opts) {
  const CsvTable raw = load_csv(opts.scores);
  const int c_subject = raw.column("subject");
  const int c_sequence = raw.column("sequence");
  const int c_score = raw.column("score");
  if (c_subject < 0 || c_sequence < 0 || c_score < 0) {
    throw std::runtime_error("scores csv needs subject,sequence,score columns");
  }

  std::vector<std::string> subjects, sequences;
  for (const auto& row : raw.rows) {
    if (std::find(subjects.begin(), subjects.end(), row[c_subject]) == subjects.end()) {
      subjects.push_back(row[c_subject]);
    }
    if (std::find(sequences.begin(), sequences.end(), row[c_sequence]) ==
        sequences.end()) {
      sequences.push_back(row[c_sequence]);
    }
  }
  ScoreTable table = ScoreTable::create(subjects, sequences);
  for (const auto& row : raw.rows) {
    const int i = table.subject_index(row[c_subject]);
    const int j = table.sequence_index(row[c_sequence]);
    const double s = std::stod(row[c_score]);
    if (!(s >= 0.0 && s <= 100.0)) {
      throw std::runtime_error("score outside [0, 100]: " + row[c_score]);
    }
    table.score(i, j) = s;
  }

  const CsvTable refs = load_csv(opts.refs);
  const int c_seq = refs.column("sequence");
  const int c_ref = refs.column("reference");
  if (c_seq < 0 || c_ref < 0) {
    throw std::runtime_error("refs csv needs sequence,reference columns");
  }
  std::map<std::string, std::string> reference_of;
  for (const auto& row : refs.rows) {
    if (row[c_seq] == row[c_ref]) continue;  // reference rows may map to themselves
    reference_of[row[c_seq]] = row[c_ref];
  }

  if (!opts.no_reject) {
    auto rejection = reject_subjects(table);
    for (const auto& id : rejection.rejected) {
      std::cerr << "rejected subject: " << id << "\n";
    }
    table = std::move(rejection.table);
  }

  const auto mos_values = mos(table);
  const auto dmos_result = dmos(table, reference_of);
  for (const auto& id : dmos_result.flagged) {
    std::cerr << "flagged subject (zero-variance differences): " << id << "\n";
  }

  std::ofstream file;
  std::ostream& out = open_output(opts.out, file);
  out << "sequence,mos,dmos,is_reference\n";
  for (std::size_t j = 0; j < table.sequences.size(); ++j) {
    out << table.sequences[j] << ',' << format_double(mos_values[j]) << ','
        << format_double(dmos_result.dmos[j]) << ','
        << (dmos_result.is_reference[j] ? 1 : 0) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Behavior-aware objective quality toolkit for omnidirectional video"};
  app.require_subcommand(1);

  MetricsOpts metrics_opts;
  auto* metrics_cmd = app.add_subcommand("metrics", "compute objective metrics");
  metrics_cmd->set_config("--config");
  add_meta_options(metrics_cmd, metrics_opts.meta, true);
  add_behavior_options(metrics_cmd, metrics_opts.behavior);
  metrics_cmd->add_option("--metric", metrics_opts.metrics,
                          "metric name, repeatable: psnr ssim ws-psnr s-psnr cpp-psnr "
                          "psnr-i-hm psnr-o-hm psnr-i-em");
  metrics_cmd->add_option("--spsnr-points", metrics_opts.spsnr_points,
                          "sphere sample count for s-psnr");
  metrics_cmd->add_option("--downsample-width", metrics_opts.downsample_width,
                          "resize frames to this width before measuring");
  metrics_cmd->add_option("--frame-interval", metrics_opts.frame_interval,
                          "measure every Nth frame only");
  metrics_cmd->add_option("--threads", metrics_opts.threads, "worker count");
  metrics_cmd->add_option("--sequence", metrics_opts.sequence, "sequence id for CSV rows");
  metrics_cmd->add_option("--seed", metrics_opts.seed, "random seed");
  metrics_cmd->add_option("--out", metrics_opts.out, "output CSV ('-' = stdout)");

  WeightsOpts weights_opts;
  auto* weights_cmd = app.add_subcommand("weights", "generate OVWM weight maps");
  weights_cmd->set_config("--config");
  add_behavior_options(weights_cmd, weights_opts.behavior);
  weights_cmd->add_option("--mode", weights_opts.mode, "i-hm | o-hm | i-em")->required();
  weights_cmd->add_option("--out-dir", weights_opts.out_dir, "output directory")
      ->required();
  weights_cmd->add_option("--width", weights_opts.width, "map width")->required();
  weights_cmd->add_option("--height", weights_opts.height, "map height")->required();
  weights_cmd->add_option("--fps", weights_opts.fps, "frame rate");
  weights_cmd->add_option("--proj", weights_opts.proj, "projection");
  weights_cmd->add_option("--frames", weights_opts.frames, "frame count")->required();
  weights_cmd->add_option("--threads", weights_opts.threads, "worker count");

  ConvertOpts convert_opts;
  auto* convert_cmd = app.add_subcommand("convert", "resample between projections");
  convert_cmd->set_config("--config");
  add_meta_options(convert_cmd, convert_opts.meta, false);
  convert_cmd->add_option("--to-proj", convert_opts.to_proj, "target projection")
      ->required();
  convert_cmd->add_option("--to-width", convert_opts.to_width, "target width")
      ->required();
  convert_cmd->add_option("--to-height", convert_opts.to_height, "target height")
      ->required();
  convert_cmd->add_option("--out", convert_opts.out, "output raw video")->required();

  EvalOpts eval_opts;
  auto* eval_cmd = app.add_subcommand("eval", "fit + correlate metrics against DMOS");
  eval_cmd->set_config("--config");
  eval_cmd->add_option("--objective", eval_opts.objective,
                       "CSV: sequence,metric,value[,group]")
      ->required();
  eval_cmd->add_option("--subjective", eval_opts.subjective,
                       "CSV: sequence,dmos[,group]")
      ->required();
  eval_cmd->add_option("--out", eval_opts.out, "output CSV ('-' = stdout)");

  ScoresOpts scores_opts;
  auto* scores_cmd =
      app.add_subcommand("scores", "subject rejection + MOS/DMOS from raw scores");
  scores_cmd->set_config("--config");
  scores_cmd->add_option("--scores", scores_opts.scores,
                         "CSV: subject,sequence,score")
      ->required();
  scores_cmd->add_option("--refs", scores_opts.refs, "CSV: sequence,reference")
      ->required();
  scores_cmd->add_option("--out", scores_opts.out, "output CSV ('-' = stdout)");
  scores_cmd->add_flag("--no-reject", scores_opts.no_reject, "skip subject rejection");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (metrics_cmd->parsed()) return run_metrics(metrics_opts);
    if (weights_cmd->parsed()) return run_weights(weights_opts);
    if (convert_cmd->parsed()) return run_convert(convert_opts);
    if (eval_cmd->parsed()) return run_eval(eval_opts);
    if (scores_cmd->parsed()) return run_scores(scores_opts);
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
