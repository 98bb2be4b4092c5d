#pragma once

#include <string>
#include <vector>

#include "sdfrecon/image.hpp"
#include "sdfrecon/tape.hpp"

namespace sdfrecon {

struct SegmentLabelMap {
    ImageLabel labels;       // compact ids, 0..n-1 in scan-order of first pixel
    std::vector<int> sizes;  // pixel count per id

    int n_segments() const { return static_cast<int>(sizes.size()); }
};

// P(r) per pixel: 1 when the pixel lies in a kept large-plane segment.
using PlaneMask = Grid<int>;

// Graph-based greedy segmentation: Gaussian presmooth, 8-connected grid with
// Euclidean RGB edge weights on the 8-bit scale, ascending merge with
// threshold Int(C) + k/|C|, then a post-pass absorbing components smaller
// than min_size. Deterministic: edge ties break by construction index.
SegmentLabelMap felzenszwalb_segment(const ImageRgb& image, double k,
                                     int min_size, double presmooth_sigma);

// Keep segments covering at least min_fraction of the pixels.
PlaneMask filter_large_planes(const SegmentLabelMap& labels,
                              double min_fraction);

// min over i in {-1, 0, 1} of |i - n_hat . n_f|; unit inputs assumed.
double plane_loss(const Vec3& n_hat, const Vec3& n_f);

// Tape version: normals is 3xR, result is the 1xR per-ray loss.
NodeId plane_loss_node(Tape& tape, NodeId normals, const Vec3& n_f);

// L_j = sum_{mask=1} p_hat * l_pla - sum_r mask * log(p_hat), with p_hat
// clamped to [1e-6, 1-1e-6]. full_bce adds the negative-class term
// -(1-mask) * log(1-p_hat); off by default.
double joint_loss(const std::vector<double>& p_hat,
                  const std::vector<double>& l_pla,
                  const std::vector<int>& mask, bool full_bce = false);

// Tape version over 1xR rows; mask holds one 0/1 entry per ray.
NodeId joint_loss_node(Tape& tape, NodeId p_hat, NodeId l_pla,
                       const std::vector<int>& mask, bool full_bce = false);

// Label PGM (ids mod 256) plus sidecar segments_<view>.txt of "id size kept".
void write_segmentation(const std::string& dir, int view,
                        const SegmentLabelMap& seg, const PlaneMask& mask);

}  // namespace sdfrecon
