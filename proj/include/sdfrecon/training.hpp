#pragma once

#include <string>
#include <vector>

#include "sdfrecon/io.hpp"
#include "sdfrecon/plane_seg.hpp"
#include "sdfrecon/rendering.hpp"
#include "sdfrecon/sparse_depth.hpp"

namespace sdfrecon {

struct TrainConfig {
    double lambda_c = 1.0;
    double lambda_geo_start = 1.0;
    double lambda_geo_end = 0.05;
    double lambda_j = 0.05;
    double lambda_eik = 0.1;
    int iterations = 5000;
    int batch_rays = 512;
    int samples_per_ray = 64;
    double learning_rate = 5e-4;
    std::uint64_t seed = 0;
    double matched_start = 0.5;  // matched-pixel batch fraction schedule
    double matched_end = 0.1;
    int eik_uniform = 512;  // uniform box samples per step
    int eik_near = 512;     // perturbed ray samples per step
    double near = 0.05;
    double far = 4.0;
    double bbox_min = -1.0;  // scene bounding cube
    double bbox_max = 1.0;
    int checkpoint_interval = 1000;
    int ray_chunk = 64;  // rays per tape; chunks are reduced in order
    bool literal_density = false;
    bool full_bce = false;
    FieldsConfig fields;
};

// Flat key = value pairs -> config; unknown keys are a hard error naming
// the key. Keys are exactly the TrainConfig field names (FieldsConfig
// members appear under their own names).
TrainConfig parse_train_config(
    const std::vector<std::pair<std::string, std::string>>& kv);

// Linear decay from start to end over the first half of the run.
double lambda_geo_at(const TrainConfig& cfg, int iteration);
double matched_fraction_at(const TrainConfig& cfg, int iteration);

struct RaySample {
    Ray ray;
    Vec3 color = Vec3::Zero();  // C(r)
    int plane_flag = 0;         // P(r)
    bool has_depth = false;
    double d_app = 0;
};

struct RayBatch {
    std::vector<RaySample> rays;
    int n_matched = 0;
};

// Draws matched-pixel rays first (fraction per schedule), then uniform
// pixels. Missing sparse depth degrades the matched share to zero with a
// one-time warning.
RayBatch sample_batch(const Dataset& ds, const SparseDepthMap& sd,
                      const std::vector<PlaneMask>& masks,
                      const TrainConfig& cfg, int iteration, Rng& rng);

// Sum over rays of |C_hat - C|_1.
double color_loss(const std::vector<Vec3>& c_hat, const std::vector<Vec3>& c);

// Sum over columns of (|grad f_g| - 1)^2 at the given 3xM points.
NodeId eikonal_loss_node(Tape& tape, const SceneFields& f, const Mat& pts);
double eikonal_loss(const SceneFields& f, const Mat& pts);

struct LossBreakdown {
    double L_c = 0, L_geo = 0, L_j = 0, L_eik = 0, total = 0;
    int n_color = 0, n_geo = 0, n_joint = 0, n_eik = 0;  // normalizing counts
    double lambda_geo = 0;
    double beta = 0;
};

// Weighted mean-normalized assembly of the term sums; throws on a
// non-finite term, naming it.
LossBreakdown assemble_loss(double lc_sum, int nc, double lgeo_sum, int ng,
                            double lj_sum, int nj, double leik_sum, int ne,
                            const TrainConfig& cfg, int iteration);

// Full-batch loss and parameter gradient at the current parameters. The rng
// drives sample stratification and Eikonal draws; reseed it for repeatable
// evaluations. Chunks are processed in a fixed order, so the reduction is
// deterministic.
LossBreakdown loss_and_grad(const SceneFields& f, const RayBatch& batch,
                            const TrainConfig& cfg, int iteration, Rng& rng,
                            Eigen::VectorXd* grad);

struct TrainResult {
    SceneFields fields;
    std::vector<LossBreakdown> log;
};

// The optimization loop. run_dir, when nonempty, receives train_log.csv,
// periodic checkpoint_<iter>.bin files and a final checkpoint.bin; on a
// non-finite loss the last good checkpoint survives and the error names
// the offending term.
TrainResult train(const Dataset& ds, const SparseDepthMap& sd,
                  const std::vector<PlaneMask>& masks, const TrainConfig& cfg,
                  const std::string& run_dir = "");

}  // namespace sdfrecon
