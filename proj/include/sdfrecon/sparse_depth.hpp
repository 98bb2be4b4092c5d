#pragma once

#include <string>
#include <vector>

#include "sdfrecon/geometry.hpp"
#include "sdfrecon/image.hpp"

namespace sdfrecon {

struct FeaturePoint {
    double u = 0, v = 0;       // sub-pixel position
    double response = 0;       // Harris corner score
    Eigen::VectorXd desc;      // zero-mean unit-norm patch
};

struct Correspondence {
    int view_a = 0, view_b = 0;
    double ua = 0, va = 0, ub = 0, vb = 0;
    double score = 0;  // NCC of the matched descriptors
};

struct SparseDepthRecord {
    double u = 0, v = 0;
    double d_app = 0;  // depth along this view's ray
    double gap = 0;    // closest-approach distance of the ray pair
};

struct SparseDepthMap {
    std::vector<std::vector<SparseDepthRecord>> views;
    int n_parallel = 0, n_wide_gap = 0, n_behind = 0, n_kept = 0;

    int total_records() const {
        int n = 0;
        for (const auto& v : views) n += static_cast<int>(v.size());
        return n;
    }
};

// Harris corners with non-maximum suppression; descriptors are 11x11
// zero-mean unit-norm patches. Images smaller than the patch yield an empty
// list with a warning on stderr.
std::vector<FeaturePoint> detect_corners(const ImageGray& img, int max_points,
                                         int nms_radius);

// Mutual-best NCC matching with a ratio test (best/second-best distance
// < 0.9). view ids are stamped into the output.
std::vector<Correspondence> match_features(const std::vector<FeaturePoint>& a,
                                           const std::vector<FeaturePoint>& b,
                                           int view_a, int view_b);

// Detect + match across all view pairs with index distance <= adjacency.
std::vector<Correspondence> match_views(const std::vector<ImageGray>& images,
                                        int max_points, int nms_radius,
                                        int adjacency);

// Midpoint triangulation of each correspondence. Discards parallel pairs,
// pairs meeting behind either camera, and gaps above max_gap; survivors
// record D_app on both rays.
SparseDepthMap triangulate_matches(const std::vector<Correspondence>& matches,
                                   const std::vector<CameraModel>& cams,
                                   double max_gap);

// Sum of |d_hat - d_app| over paired entries.
double geometry_loss(const std::vector<double>& d_hat,
                     const std::vector<double>& d_app);

// matches.txt: lines "viewA viewB uA vA uB vB"
void write_matches(const std::string& path,
                   const std::vector<Correspondence>& matches);
std::vector<Correspondence> read_matches(const std::string& path);

// Sparse depth dump: per view, file sparse_<view>.txt of "u v D_app gap".
void write_sparse_depth(const std::string& dir, const SparseDepthMap& map);
SparseDepthMap read_sparse_depth(const std::string& dir, int n_views);

}  // namespace sdfrecon
