#pragma once

#include <vector>

#include "ovqa/frame.hpp"
#include "ovqa/projection.hpp"

namespace ovqa {

inline constexpr double kPeakIntensity = 255.0;  // 8-bit Y
inline constexpr double kPsnrCapDb = 100.0;      // identical-content sentinel

double psnr(const FramePlane& ref, const FramePlane& imp);

// normalize=true computes 10*log10(Ymax^2 * sum(w) / sum(w * d^2)) — the
// per-subject form; normalize=false computes 10*log10(Ymax^2 / sum(w * d^2))
// for maps that already sum to 1.
double weighted_psnr(const FramePlane& ref, const FramePlane& imp, const WeightMap& w,
                     bool normalize);

// Mean over subjects of the normalized weighted PSNR. Subject maps with
// zero mass are skipped; throws when none is usable.
double psnr_i_hm(const FramePlane& ref, const FramePlane& imp,
                 const std::vector<WeightMap>& subject_maps);
double psnr_i_em(const FramePlane& ref, const FramePlane& imp,
                 const std::vector<WeightMap>& subject_maps);

// Weighted PSNR against a population map that sums to 1 (checked to 1e-4).
double psnr_o_hm(const FramePlane& ref, const FramePlane& imp, const WeightMap& o_map);

// ERP-only spherically uniform PSNR with row weights cos(latitude).
double ws_psnr(const FramePlane& ref, const FramePlane& imp);

// PSNR over bilinear samples taken at the given sphere points; both frames
// share the projection.
double s_psnr(const FramePlane& ref, const FramePlane& imp, ProjectionKind kind,
              const SampleSet& samples);

// Resamples both frames into the Craster parabolic projection at a 2:1
// working size (width = source width) and measures PSNR over the valid
// region.
double cpp_psnr(const FramePlane& ref, const FramePlane& imp, ProjectionKind kind);

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), C1=(0.01*255)^2,
// C2=(0.03*255)^2.
double ssim(const FramePlane& ref, const FramePlane& imp);

// Arithmetic mean of per-frame scores.
double pool_sequence(const std::vector<double>& per_frame);

}  // namespace ovqa
