#include "sdfrecon/training.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>

#include "sdfrecon/adam.hpp"
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace sdfrecon {

namespace {

double schedule(double start, double end, int iteration, int total) {
    const int window = std::max(1, total / 2);
    if (iteration >= window) return end;
    const double a = static_cast<double>(iteration) / window;
    return start + a * (end - start);
}

}  // namespace

double lambda_geo_at(const TrainConfig& cfg, int iteration) {
    return schedule(cfg.lambda_geo_start, cfg.lambda_geo_end, iteration,
                    cfg.iterations);
}

double matched_fraction_at(const TrainConfig& cfg, int iteration) {
    return schedule(cfg.matched_start, cfg.matched_end, iteration,
                    cfg.iterations);
}

TrainConfig parse_train_config(
    const std::vector<std::pair<std::string, std::string>>& kv) {
    TrainConfig c;
    for (const auto& [key, val] : kv) {
        auto d = [&] { return std::stod(val); };
        auto i = [&] { return std::stoi(val); };
        if (key == "lambda_c") c.lambda_c = d();
        else if (key == "lambda_geo_start") c.lambda_geo_start = d();
        else if (key == "lambda_geo_end") c.lambda_geo_end = d();
        else if (key == "lambda_j") c.lambda_j = d();
        else if (key == "lambda_eik") c.lambda_eik = d();
        else if (key == "iterations") c.iterations = i();
        else if (key == "batch_rays") c.batch_rays = i();
        else if (key == "samples_per_ray") c.samples_per_ray = i();
        else if (key == "learning_rate") c.learning_rate = d();
        else if (key == "seed") c.seed = std::stoull(val);
        else if (key == "matched_start") c.matched_start = d();
        else if (key == "matched_end") c.matched_end = d();
        else if (key == "eik_uniform") c.eik_uniform = i();
        else if (key == "eik_near") c.eik_near = i();
        else if (key == "near") c.near = d();
        else if (key == "far") c.far = d();
        else if (key == "bbox_min") c.bbox_min = d();
        else if (key == "bbox_max") c.bbox_max = d();
        else if (key == "checkpoint_interval") c.checkpoint_interval = i();
        else if (key == "ray_chunk") c.ray_chunk = i();
        else if (key == "literal_density") c.literal_density = i() != 0;
        else if (key == "full_bce") c.full_bce = i() != 0;
        else if (key == "geo_width") c.fields.geo_width = i();
        else if (key == "geo_depth") c.fields.geo_depth = i();
        else if (key == "feature_width") c.fields.feature_width = i();
        else if (key == "color_width") c.fields.color_width = i();
        else if (key == "color_depth") c.fields.color_depth = i();
        else if (key == "plane_width") c.fields.plane_width = i();
        else if (key == "plane_depth") c.fields.plane_depth = i();
        else if (key == "pe_x") c.fields.pe_x = i();
        else if (key == "pe_v") c.fields.pe_v = i();
        else if (key == "init_radius") c.fields.init_radius = d();
        else if (key == "init_beta") c.fields.init_beta = d();
        else throw std::runtime_error("unknown config key: " + key);
    }
    if (c.lambda_c < 0 || c.lambda_j < 0 || c.lambda_eik < 0 ||
        c.lambda_geo_start < 0 || c.lambda_geo_end < 0)
        throw std::runtime_error("config: loss weights must be >= 0");
    if (c.iterations <= 0 || c.batch_rays <= 0 || c.samples_per_ray < 2)
        throw std::runtime_error("config: iterations/batch_rays/samples_per_ray");
    if (!(c.near >= 0) || !(c.far > c.near))
        throw std::runtime_error("config: need 0 <= near < far");
    return c;
}

RayBatch sample_batch(const Dataset& ds, const SparseDepthMap& sd,
                      const std::vector<PlaneMask>& masks,
                      const TrainConfig& cfg, int iteration, Rng& rng) {
    if (ds.num_views() == 0)
        throw std::invalid_argument("sample_batch: empty dataset");
    const int n_views = ds.num_views();
    const int w = ds.cams[0].width, h = ds.cams[0].height;

    // flat index over every sparse depth record
    std::vector<std::pair<int, int>> matched;  // (view, record index)
    for (int v = 0; v < static_cast<int>(sd.views.size()); ++v)
        for (int r = 0; r < static_cast<int>(sd.views[v].size()); ++r)
            matched.push_back({v, r});

    int want = static_cast<int>(
        std::lround(matched_fraction_at(cfg, iteration) * cfg.batch_rays));
    if (matched.empty() && want > 0) {
        static bool warned = false;
        if (!warned) {
            std::cerr << "sample_batch: no sparse depth records, matched "
                         "fraction degraded to 0\n";
            warned = true;
        }
        want = 0;
    }

    auto plane_flag_at = [&](int view, int px, int py) {
        if (view >= static_cast<int>(masks.size()) || masks[view].empty())
            return 0;
        return masks[view].at(px, py);
    };

    RayBatch batch;
    batch.rays.reserve(cfg.batch_rays);
    for (int i = 0; i < want; ++i) {
        const auto [view, ri] = matched[rng.index(matched.size())];
        const SparseDepthRecord& rec = sd.views[view][ri];
        RaySample s;
        s.ray = pixel_to_ray(ds.cams[view], rec.u, rec.v);
        const int px = std::clamp(static_cast<int>(rec.u), 0, w - 1);
        const int py = std::clamp(static_cast<int>(rec.v), 0, h - 1);
        s.color = ds.images[view].at(px, py);
        s.plane_flag = plane_flag_at(view, px, py);
        s.has_depth = true;
        s.d_app = rec.d_app;
        batch.rays.push_back(s);
    }
    batch.n_matched = want;
    while (static_cast<int>(batch.rays.size()) < cfg.batch_rays) {
        const int view = static_cast<int>(rng.index(n_views));
        const int px = static_cast<int>(rng.index(w));
        const int py = static_cast<int>(rng.index(h));
        RaySample s;
        s.ray = pixel_to_ray(ds.cams[view], px + 0.5, py + 0.5);
        s.color = ds.images[view].at(px, py);
        s.plane_flag = plane_flag_at(view, px, py);
        batch.rays.push_back(s);
    }
    return batch;
}

double color_loss(const std::vector<Vec3>& c_hat, const std::vector<Vec3>& c) {
    if (c_hat.size() != c.size())
        throw std::invalid_argument("color_loss: length mismatch");
    double acc = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
        acc += (c_hat[i] - c[i]).cwiseAbs().sum();
    return acc;
}

NodeId eikonal_loss_node(Tape& tape, const SceneFields& f, const Mat& pts) {
    NodeId x = tape.input3(pts);
    GeoNodes g = geo_graph(tape, f, x);
    NodeId norm = tape.sqrt(tape.col_sum(tape.square(g.grad)));
    return tape.sum_all(tape.square(tape.add_const(norm, -1.0)));
}

double eikonal_loss(const SceneFields& f, const Mat& pts) {
    Tape tape(&f.params);
    return tape.value(eikonal_loss_node(tape, f, pts))(0, 0);
}

LossBreakdown assemble_loss(double lc_sum, int nc, double lgeo_sum, int ng,
                            double lj_sum, int nj, double leik_sum, int ne,
                            const TrainConfig& cfg, int iteration) {
    LossBreakdown bd;
    bd.n_color = nc;
    bd.n_geo = ng;
    bd.n_joint = nj;
    bd.n_eik = ne;
    bd.L_c = lc_sum / std::max(1, nc);
    bd.L_geo = lgeo_sum / std::max(1, ng);
    bd.L_j = lj_sum / std::max(1, nj);
    bd.L_eik = leik_sum / std::max(1, ne);
    bd.lambda_geo = lambda_geo_at(cfg, iteration);
    const std::pair<const char*, double> terms[] = {
        {"L_c", bd.L_c}, {"L_geo", bd.L_geo}, {"L_j", bd.L_j},
        {"L_eik", bd.L_eik}};
    for (const auto& [name, v] : terms)
        if (!std::isfinite(v))
            throw std::runtime_error(std::string("non-finite loss term ") + name);
    bd.total = cfg.lambda_c * bd.L_c + bd.lambda_geo * bd.L_geo +
               cfg.lambda_j * bd.L_j + cfg.lambda_eik * bd.L_eik;
    return bd;
}

LossBreakdown loss_and_grad(const SceneFields& f, const RayBatch& batch,
                            const TrainConfig& cfg, int iteration, Rng& rng,
                            Eigen::VectorXd* grad) {
    const int total_rays = static_cast<int>(batch.rays.size());
    if (total_rays == 0) throw std::invalid_argument("loss_and_grad: no rays");
    const double lam_geo = lambda_geo_at(cfg, iteration);
    const Vec3 n_floor(0, 0, 1);
    SceneFieldProvider provider(f, cfg.literal_density);

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.params.size());
    double lc_sum = 0, lgeo_sum = 0, lj_sum = 0, leik_sum = 0;
    int n_matched = 0;
    for (const RaySample& s : batch.rays) n_matched += s.has_depth ? 1 : 0;

    std::vector<Vec3> sample_positions;  // Eikonal near-surface candidates
    sample_positions.reserve(static_cast<std::size_t>(total_rays) *
                             cfg.samples_per_ray);

    for (int start = 0; start < total_rays; start += cfg.ray_chunk) {
        const int r = std::min(cfg.ray_chunk, total_rays - start);
        std::vector<Ray> rays(r);
        Mat ctarget(3, r), dtarget(1, r), dmask(1, r);
        std::vector<int> pflags(r);
        for (int i = 0; i < r; ++i) {
            const RaySample& s = batch.rays[start + i];
            rays[i] = s.ray;
            ctarget.col(i) = s.color;
            dmask(0, i) = s.has_depth ? 1.0 : 0.0;
            dtarget(0, i) = s.d_app;
            pflags[i] = s.plane_flag;
        }

        Tape tape(&f.params);
        RenderNodes rn = render_rays_graph(tape, provider, rays, cfg.near,
                                           cfg.far, cfg.samples_per_ray, rng);
        NodeId lc = tape.sum_all(
            tape.abs(tape.sub(rn.color, tape.constant(ctarget))));
        NodeId lgeo = tape.sum_all(tape.mul(
            tape.constant(dmask),
            tape.abs(tape.sub(rn.depth, tape.constant(dtarget)))));
        NodeId lpla = plane_loss_node(tape, rn.normal, n_floor);
        NodeId lj = joint_loss_node(tape, rn.plane, lpla, pflags, cfg.full_bce);

        NodeId weighted = tape.add(
            tape.add(tape.scale(lc, cfg.lambda_c / total_rays),
                     tape.scale(lgeo, lam_geo / std::max(1, n_matched))),
            tape.scale(lj, cfg.lambda_j / total_rays));
        tape.backward(weighted);
        acc += tape.grad();
        lc_sum += tape.value(lc)(0, 0);
        lgeo_sum += tape.value(lgeo)(0, 0);
        lj_sum += tape.value(lj)(0, 0);

        const Mat& xs = tape.value(rn.x);
        for (int c = 0; c < xs.cols(); ++c)
            sample_positions.push_back(xs.col(c));
    }

    // Eikonal points: uniform box draws plus perturbed ray samples
    const int n_near =
        sample_positions.empty() ? 0 : cfg.eik_near;
    const int n_eik = cfg.eik_uniform + n_near;
    if (n_eik > 0) {
        const double diag =
            std::sqrt(3.0) * (cfg.bbox_max - cfg.bbox_min);
        const double sigma = 0.01 * diag;
        Mat pts(3, n_eik);
        for (int i = 0; i < cfg.eik_uniform; ++i)
            for (int k = 0; k < 3; ++k)
                pts(k, i) = rng.uniform(cfg.bbox_min, cfg.bbox_max);
        for (int i = 0; i < n_near; ++i) {
            const Vec3& base =
                sample_positions[rng.index(sample_positions.size())];
            for (int k = 0; k < 3; ++k)
                pts(k, cfg.eik_uniform + i) = base[k] + sigma * rng.gaussian();
        }
        Tape tape(&f.params);
        NodeId le = eikonal_loss_node(tape, f, pts);
        tape.backward(tape.scale(le, cfg.lambda_eik / n_eik));
        acc += tape.grad();
        leik_sum = tape.value(le)(0, 0);
    }

    if (grad) *grad = acc;
    LossBreakdown bd = assemble_loss(lc_sum, total_rays, lgeo_sum, n_matched,
                                     lj_sum, total_rays, leik_sum, n_eik, cfg,
                                     iteration);
    bd.beta = f.beta();
    return bd;
}

TrainResult train(const Dataset& ds, const SparseDepthMap& sd,
                  const std::vector<PlaneMask>& masks, const TrainConfig& cfg,
                  const std::string& run_dir) {
    Rng rng(cfg.seed);
    TrainResult res{make_scene_fields(cfg.fields, rng), {}};
    SceneFields& f = res.fields;
    AdamState st(f.params.size());

    std::ofstream csv;
    if (!run_dir.empty()) {
        std::filesystem::create_directories(run_dir);
        csv.open(run_dir + "/train_log.csv");
        if (!csv)
            throw std::runtime_error(run_dir + "/train_log.csv: cannot open");
        csv << "iter,L_c,L_geo,L_j,L_eik,total,beta,lambda_geo\n";
        csv << std::setprecision(10);
    }

    Eigen::VectorXd g;
    for (int it = 0; it < cfg.iterations; ++it) {
        RayBatch batch = sample_batch(ds, sd, masks, cfg, it, rng);
        LossBreakdown bd = loss_and_grad(f, batch, cfg, it, rng, &g);
        adam_step(f.params, g, st, cfg.learning_rate);
        if (!(f.beta() > 0) || !std::isfinite(f.beta()))
            throw std::runtime_error("training: beta left the positive range");
        res.log.push_back(bd);
        if (csv)
            csv << it << "," << bd.L_c << "," << bd.L_geo << "," << bd.L_j
                << "," << bd.L_eik << "," << bd.total << "," << bd.beta << ","
                << bd.lambda_geo << "\n";
        if (!run_dir.empty() && (it + 1) % cfg.checkpoint_interval == 0)
            save_checkpoint(
                run_dir + "/checkpoint_" + std::to_string(it + 1) + ".bin", f);
    }
    if (!run_dir.empty()) save_checkpoint(run_dir + "/checkpoint.bin", f);
    return res;
}

}  // namespace sdfrecon
