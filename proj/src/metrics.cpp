#include "ovqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ovqa {

namespace {

void check_same_size(const FramePlane& a, const FramePlane& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument("frame dimensions differ");
  }
}

double psnr_from_mse(double mse) {
  if (!(mse > 0.0)) return kPsnrCapDb;
  const double db = 10.0 * std::log10(kPeakIntensity * kPeakIntensity / mse);
  return std::min(db, kPsnrCapDb);
}

double mean_weighted_psnr(const FramePlane& ref, const FramePlane& imp,
                          const std::vector<WeightMap>& subject_maps) {
  if (subject_maps.empty()) throw std::invalid_argument("no subject maps given");
  double sum = 0.0;
  int used = 0;
  for (const auto& m : subject_maps) {
    if (!(weight_sum(m) > 0.0)) continue;  // unusable subject
    sum += weighted_psnr(ref, imp, m, true);
    ++used;
  }
  if (used == 0) throw std::invalid_argument("no subject map has positive mass");
  return sum / used;
}

}  // namespace

double psnr(const FramePlane& ref, const FramePlane& imp) {
  check_same_size(ref, imp);
  double sse = 0.0;
  for (std::size_t i = 0; i < ref.samples.size(); ++i) {
    const double d = static_cast<double>(ref.samples[i]) - imp.samples[i];
    sse += d * d;
  }
  return psnr_from_mse(sse / static_cast<double>(ref.samples.size()));
}

double weighted_psnr(const FramePlane& ref, const FramePlane& imp, const WeightMap& w,
                     bool normalize) {
  check_same_size(ref, imp);
  if (w.width != ref.width || w.height != ref.height) {
    throw std::invalid_argument("weight map size differs from frames");
  }
  double weighted_sse = 0.0;
  double total_weight = 0.0;
  for (std::size_t i = 0; i < ref.samples.size(); ++i) {
    const double d = static_cast<double>(ref.samples[i]) - imp.samples[i];
    weighted_sse += w.values[i] * d * d;
    total_weight += w.values[i];
  }
  if (normalize) {
    if (!(total_weight > 0.0)) {
      throw std::invalid_argument("weighted_psnr: zero weight mass");
    }
    if (!(weighted_sse > 0.0)) return kPsnrCapDb;
    const double db = 10.0 * std::log10(kPeakIntensity * kPeakIntensity * total_weight /
                                        weighted_sse);
    return std::min(db, kPsnrCapDb);
  }
  if (!(weighted_sse > 0.0)) return kPsnrCapDb;
  const double db = 10.0 * std::log10(kPeakIntensity * kPeakIntensity / weighted_sse);
  return std::min(db, kPsnrCapDb);
}

double psnr_i_hm(const FramePlane& ref, const FramePlane& imp,
                 const std::vector<WeightMap>& subject_maps) {
  return mean_weighted_psnr(ref, imp, subject_maps);
}

double psnr_i_em(const FramePlane& ref, const FramePlane& imp,
                 const std::vector<WeightMap>& subject_maps) {
  return mean_weighted_psnr(ref, imp, subject_maps);
}

double psnr_o_hm(const FramePlane& ref, const FramePlane& imp, const WeightMap& o_map) {
  const double total = weight_sum(o_map);
  if (std::abs(total - 1.0) > 1e-4) {
    throw std::invalid_argument("psnr_o_hm: map must sum to 1");
  }
  return weighted_psnr(ref, imp, o_map, false);
}

double ws_psnr(const FramePlane& ref, const FramePlane& imp) {
  check_same_size(ref, imp);
  check_frame_geometry(ProjectionKind::Erp, ref.width, ref.height);
  WeightMap w(ref.width, ref.height);
  for (int y = 0; y < ref.height; ++y) {
    const float row = static_cast<float>(
        std::cos((y + 0.5 - ref.height / 2.0) * kPi / ref.height));
    for (int x = 0; x < ref.width; ++x) w.at(x, y) = row;
  }
  return weighted_psnr(ref, imp, w, true);
}

double s_psnr(const FramePlane& ref, const FramePlane& imp, ProjectionKind kind,
              const SampleSet& samples) {
  check_same_size(ref, imp);
  if (samples.points.empty()) throw std::invalid_argument("empty sample set");
  double sse = 0.0;
  std::size_t count = 0;
  for (const auto& p : samples.points) {
    const auto pos = sphere_to_pixel(p, ref.width, ref.height, kind);
    if (!pos) continue;
    const double a = bilinear_sample(ref, pos->x, pos->y, kind);
    const double b = bilinear_sample(imp, pos->x, pos->y, kind);
    sse += (a - b) * (a - b);
    ++count;
  }
  if (count == 0) throw std::runtime_error("s_psnr: no sample hit the frame");
  return psnr_from_mse(sse / static_cast<double>(count));
}

double cpp_psnr(const FramePlane& ref, const FramePlane& imp, ProjectionKind kind) {
  check_same_size(ref, imp);
  const int cw = ref.width - (ref.width % 2);
  const int ch = cw / 2;
  const FramePlane a = resample_frame(ref, kind, ProjectionKind::Cpp, cw, ch);
  const FramePlane b = resample_frame(imp, kind, ProjectionKind::Cpp, cw, ch);

  double sse = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      if (!pixel_to_sphere(x, y, cw, ch, ProjectionKind::Cpp)) continue;
      const double d = static_cast<double>(a.at(x, y)) - b.at(x, y);
      sse += d * d;
      ++count;
    }
  }
  return psnr_from_mse(sse / static_cast<double>(count));
}

double ssim(const FramePlane& ref, const FramePlane& imp) {
  check_same_size(ref, imp);
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  const double c1 = (0.01 * kPeakIntensity) * (0.01 * kPeakIntensity);
  const double c2 = (0.03 * kPeakIntensity) * (0.03 * kPeakIntensity);
  const int w = ref.width;
  const int h = ref.height;
  if (w < kWindow || h < kWindow) {
    throw std::invalid_argument("frames smaller than the 11x11 SSIM window");
  }

  double kernel[kWindow];
  double ksum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - (kWindow - 1) / 2.0;
    kernel[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;

  // Separable Gaussian, valid region only (no padding).
  const int vw = w - kWindow + 1;
  const int vh = h - kWindow + 1;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = ref.samples[i];
    const double b = imp.samples[i];
    x[i] = a;
    y[i] = b;
    xx[i] = a * a;
    yy[i] = b * b;
    xy[i] = a * b;
  }

  auto blur_valid = [&](const std::vector<double>& src) {
    std::vector<double> tmp(static_cast<std::size_t>(vw) * h);
    for (int row = 0; row < h; ++row) {
      for (int col = 0; col < vw; ++col) {
        double acc = 0.0;
        for (int k = 0; k < kWindow; ++k) {
          acc += kernel[k] * src[static_cast<std::size_t>(row) * w + col + k];
        }
        tmp[static_cast<std::size_t>(row) * vw + col] = acc;
      }
    }
    std::vector<double> out(static_cast<std::size_t>(vw) * vh);
    for (int row = 0; row < vh; ++row) {
      for (int col = 0; col < vw; ++col) {
        double acc = 0.0;
        for (int k = 0; k < kWindow; ++k) {
          acc += kernel[k] * tmp[static_cast<std::size_t>(row + k) * vw + col];
        }
        out[static_cast<std::size_t>(row) * vw + col] = acc;
      }
    }
    return out;
  };

  const auto mx = blur_valid(x);
  const auto my = blur_valid(y);
  const auto mxx = blur_valid(xx);
  const auto myy = blur_valid(yy);
  const auto mxy = blur_valid(xy);

  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double mux = mx[i];
    const double muy = my[i];
    const double vx = mxx[i] - mux * mux;
    const double vy = myy[i] - muy * muy;
    const double cxy = mxy[i] - mux * muy;
    const double num = (2.0 * mux * muy + c1) * (2.0 * cxy + c2);
    const double den = (mux * mux + muy * muy + c1) * (vx + vy + c2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

double pool_sequence(const std::vector<double>& per_frame) {
  if (per_frame.empty()) throw std::invalid_argument("nothing to pool");
  double sum = 0.0;
  for (double v : per_frame) sum += v;
  return sum / static_cast<double>(per_frame.size());
}

}  // namespace ovqa
