#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "sdfrecon/meshing.hpp"
#include "sdfrecon/synth.hpp"
#include "sdfrecon/training.hpp"

namespace fs = std::filesystem;
using namespace sdfrecon;

namespace {

// exit codes: 0 ok, 1 usage, 2 data error, 3 numerical failure
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int thread_cap() {
    if (const char* env = std::getenv("SDFRECON_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

std::string config_snapshot(const TrainConfig& c) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "lambda_c = " << c.lambda_c << "\n"
       << "lambda_geo_start = " << c.lambda_geo_start << "\n"
       << "lambda_geo_end = " << c.lambda_geo_end << "\n"
       << "lambda_j = " << c.lambda_j << "\n"
       << "lambda_eik = " << c.lambda_eik << "\n"
       << "iterations = " << c.iterations << "\n"
       << "batch_rays = " << c.batch_rays << "\n"
       << "samples_per_ray = " << c.samples_per_ray << "\n"
       << "learning_rate = " << c.learning_rate << "\n"
       << "seed = " << c.seed << "\n"
       << "matched_start = " << c.matched_start << "\n"
       << "matched_end = " << c.matched_end << "\n"
       << "eik_uniform = " << c.eik_uniform << "\n"
       << "eik_near = " << c.eik_near << "\n"
       << "near = " << c.near << "\n"
       << "far = " << c.far << "\n"
       << "bbox_min = " << c.bbox_min << "\n"
       << "bbox_max = " << c.bbox_max << "\n"
       << "checkpoint_interval = " << c.checkpoint_interval << "\n"
       << "ray_chunk = " << c.ray_chunk << "\n"
       << "literal_density = " << (c.literal_density ? 1 : 0) << "\n"
       << "full_bce = " << (c.full_bce ? 1 : 0) << "\n"
       << "geo_width = " << c.fields.geo_width << "\n"
       << "geo_depth = " << c.fields.geo_depth << "\n"
       << "feature_width = " << c.fields.feature_width << "\n"
       << "color_width = " << c.fields.color_width << "\n"
       << "color_depth = " << c.fields.color_depth << "\n"
       << "plane_width = " << c.fields.plane_width << "\n"
       << "plane_depth = " << c.fields.plane_depth << "\n"
       << "pe_x = " << c.fields.pe_x << "\n"
       << "pe_v = " << c.fields.pe_v << "\n"
       << "init_radius = " << c.fields.init_radius << "\n"
       << "init_beta = " << c.fields.init_beta << "\n";
    return ss.str();
}

// desk: sized for a single CPU core; paper: the full-scale recipe
void apply_preset(TrainConfig& c, const std::string& preset) {
    if (preset == "desk") {
        c.iterations = 5000;
        c.batch_rays = 256;
        c.samples_per_ray = 32;
        c.fields.geo_width = 32;
        c.fields.feature_width = 32;
        c.fields.color_width = 32;
        c.fields.plane_width = 32;
        c.fields.pe_x = 3;
        c.lambda_eik = 2.0;
        c.lambda_j = 0.5;
        c.lambda_geo_end = 0.2;
        c.checkpoint_interval = 1000;
    } else if (preset == "paper") {
        c.iterations = 50000;
        c.batch_rays = 1024;
        c.samples_per_ray = 64;
        c.checkpoint_interval = 5000;
    } else {
        throw std::runtime_error("unknown preset: " + preset);
    }
}

std::vector<PlaneMask> segment_masks(const Dataset& ds, double k, int min_size,
                                     double sigma, double min_fraction) {
    std::vector<PlaneMask> masks;
    for (const ImageRgb& img : ds.images)
        masks.push_back(filter_large_planes(
            felzenszwalb_segment(img, k, min_size, sigma), min_fraction));
    return masks;
}

SparseDepthMap sparse_for_training(const Dataset& ds, const std::string& data,
                                   const std::string& sparse_dir,
                                   double max_gap) {
    if (!sparse_dir.empty()) return read_sparse_depth(sparse_dir, ds.num_views());
    if (fs::exists(data + "/matches.txt")) {
        auto matches = read_matches(data + "/matches.txt");
        return triangulate_matches(matches, ds.cams, max_gap);
    }
    SparseDepthMap empty;
    empty.views.resize(ds.num_views());
    return empty;
}

struct EvalArtifacts {
    TriangleMesh mesh;
    MetricsReport metrics;
};

EvalArtifacts mesh_and_eval(const SceneFields& f, const std::vector<Vec3>& gt,
                            double bbox_min, double bbox_max, int res,
                            int samples, double tau, std::uint64_t seed) {
    EvalArtifacts out;
    out.mesh = mesh_from_fields(f, Vec3::Constant(bbox_min),
                                Vec3::Constant(bbox_max), res);
    if (out.mesh.empty())
        throw std::runtime_error("mesh extraction produced an empty mesh");
    Rng rng(seed);
    out.metrics = eval_metrics(sample_mesh_surface(out.mesh, samples, rng), gt,
                               tau);
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"indoor scene reconstruction from posed images"};
    app.require_subcommand(1);
    Eigen::setNbThreads(thread_cap());

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string sy_out;
    int sy_views = 20, sy_size = 64, sy_gt = 20000, sy_match = 400;
    double sy_noise = 0.25;
    std::uint64_t sy_seed = 1;
    synth_cmd->add_option("--out", sy_out, "output dataset directory")->required();
    synth_cmd->add_option("--views", sy_views, "camera count");
    synth_cmd->add_option("--size", sy_size, "image side length");
    synth_cmd->add_option("--gt-points", sy_gt, "ground-truth surface samples");
    synth_cmd->add_option("--match-points", sy_match,
                          "surface points for matches.txt, 0 to skip");
    synth_cmd->add_option("--noise", sy_noise, "match pixel noise sigma");
    synth_cmd->add_option("--seed", sy_seed, "rng seed");
    synth_cmd->callback([&] {
        Rng rng(sy_seed);
        write_synth_dataset(sy_out, default_scene(),
                            default_cameras(sy_views, sy_size), sy_gt,
                            sy_match > 0 ? std::optional<int>(sy_match)
                                         : std::nullopt,
                            sy_noise, rng);
        std::cout << "dataset written to " << sy_out << "\n";
    });

    // ---- match ----
    auto* match_cmd = app.add_subcommand("match", "detect and match features");
    std::string ma_data, ma_out;
    int ma_max = 200, ma_nms = 3, ma_adj = 2;
    match_cmd->add_option("--data", ma_data, "dataset directory")->required();
    match_cmd->add_option("--out", ma_out, "matches output file")->required();
    match_cmd->add_option("--max-points", ma_max, "corners per image");
    match_cmd->add_option("--nms", ma_nms, "non-maximum suppression radius");
    match_cmd->add_option("--adjacency", ma_adj, "max view index distance");
    match_cmd->callback([&] {
        Dataset ds = load_dataset(ma_data);
        std::vector<ImageGray> gray;
        for (const ImageRgb& img : ds.images) gray.push_back(to_gray(img));
        auto matches = match_views(gray, ma_max, ma_nms, ma_adj);
        write_matches(ma_out, matches);
        std::cout << matches.size() << " matches -> " << ma_out << "\n";
    });

    // ---- triangulate ----
    auto* tri_cmd = app.add_subcommand("triangulate",
                                       "triangulate matches to sparse depth");
    std::string tr_data, tr_matches, tr_out;
    double tr_gap = 0.005 * 2.0 * std::sqrt(3.0);  // 0.5% of the room diagonal
    tri_cmd->add_option("--data", tr_data, "dataset directory")->required();
    tri_cmd->add_option("--matches", tr_matches, "matches file")->required();
    tri_cmd->add_option("--out", tr_out, "sparse depth output dir")->required();
    tri_cmd->add_option("--max-gap", tr_gap, "closest-approach rejection");
    tri_cmd->callback([&] {
        Dataset ds = load_dataset(tr_data);
        auto matches = read_matches(tr_matches);
        SparseDepthMap sd = triangulate_matches(matches, ds.cams, tr_gap);
        fs::create_directories(tr_out);
        write_sparse_depth(tr_out, sd);
        std::cout << sd.n_kept << " kept, " << sd.n_parallel << " parallel, "
                  << sd.n_behind << " behind, " << sd.n_wide_gap
                  << " wide-gap -> " << tr_out << "\n";
    });

    // ---- segment ----
    auto* seg_cmd = app.add_subcommand("segment", "plane segmentation masks");
    std::string se_data, se_out;
    double se_k = 500, se_sigma = 0.8, se_frac = 0.01;
    int se_min = 20;
    seg_cmd->add_option("--data", se_data, "dataset directory")->required();
    seg_cmd->add_option("--out", se_out, "output directory")->required();
    seg_cmd->add_option("--k", se_k, "merge threshold scale");
    seg_cmd->add_option("--min-size", se_min, "minimum segment pixels");
    seg_cmd->add_option("--sigma", se_sigma, "presmooth sigma");
    seg_cmd->add_option("--min-fraction", se_frac, "large-plane cutoff");
    seg_cmd->callback([&] {
        Dataset ds = load_dataset(se_data);
        fs::create_directories(se_out);
        for (int v = 0; v < ds.num_views(); ++v) {
            auto seg = felzenszwalb_segment(ds.images[v], se_k, se_min, se_sigma);
            auto mask = filter_large_planes(seg, se_frac);
            write_segmentation(se_out, v, seg, mask);
        }
        std::cout << ds.num_views() << " views segmented -> " << se_out << "\n";
    });

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "optimize the scene fields");
    std::string tn_data, tn_out, tn_config, tn_preset = "desk", tn_sparse;
    train_cmd->add_option("--data", tn_data, "dataset directory")->required();
    train_cmd->add_option("--out", tn_out, "run directory")->required();
    train_cmd->add_option("--config", tn_config, "key = value config file");
    train_cmd->add_option("--preset", tn_preset, "desk or paper");
    train_cmd->add_option("--sparse", tn_sparse, "sparse depth directory");
    train_cmd->callback([&] {
        TrainConfig cfg;
        apply_preset(cfg, tn_preset);
        if (!tn_config.empty()) {
            TrainConfig base = parse_train_config(parse_config(tn_config));
            cfg = base;  // explicit config overrides the preset entirely
        }
        Dataset ds = load_dataset(tn_data);
        SparseDepthMap sd = sparse_for_training(
            ds, tn_data, tn_sparse, 0.005 * std::sqrt(3.0) *
                                        (cfg.bbox_max - cfg.bbox_min));
        auto masks = segment_masks(ds, 500, 20, 0.8, 0.01);
        fs::create_directories(tn_out);
        std::ofstream snap(tn_out + "/config.cfg");
        snap << config_snapshot(cfg);
        snap.close();
        TrainResult res = train(ds, sd, masks, cfg, tn_out);
        std::cout << "final total loss " << res.log.back().total << ", beta "
                  << res.fields.beta() << " -> " << tn_out << "\n";
    });

    // ---- mesh ----
    auto* mesh_cmd = app.add_subcommand("mesh", "extract a mesh from a run");
    std::string me_run, me_ckpt, me_out;
    int me_res = 128;
    double me_lo = -1, me_hi = 1;
    mesh_cmd->add_option("--run", me_run, "run directory");
    mesh_cmd->add_option("--checkpoint", me_ckpt, "explicit checkpoint path");
    mesh_cmd->add_option("--out", me_out, "obj output path");
    mesh_cmd->add_option("--res", me_res, "grid cells per axis");
    mesh_cmd->add_option("--bbox-min", me_lo, "grid lower corner");
    mesh_cmd->add_option("--bbox-max", me_hi, "grid upper corner");
    mesh_cmd->callback([&] {
        if (me_ckpt.empty()) {
            if (me_run.empty())
                throw std::runtime_error("mesh: need --run or --checkpoint");
            me_ckpt = me_run + "/checkpoint.bin";
        }
        if (me_out.empty())
            me_out = (me_run.empty() ? std::string("mesh") : me_run + "/mesh") +
                     ".obj";
        SceneFields f = load_checkpoint(me_ckpt);
        TriangleMesh mesh = mesh_from_fields(f, Vec3::Constant(me_lo),
                                             Vec3::Constant(me_hi), me_res);
        write_obj(me_out, mesh);
        std::cout << mesh.vertices.size() << " vertices, "
                  << mesh.triangles.size() << " triangles -> " << me_out
                  << "\n";
    });

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "point metrics against GT");
    std::string ev_run, ev_mesh, ev_gt, ev_out;
    double ev_tau = 0.05;
    int ev_samples = 20000;
    std::uint64_t ev_seed = 2;
    eval_cmd->add_option("--run", ev_run, "run directory (uses its mesh.obj)");
    eval_cmd->add_option("--mesh", ev_mesh, "explicit mesh path");
    eval_cmd->add_option("--gt", ev_gt, "ground-truth xyz")->required();
    eval_cmd->add_option("--out", ev_out, "metrics csv path");
    eval_cmd->add_option("--tau", ev_tau, "distance threshold");
    eval_cmd->add_option("--samples", ev_samples, "mesh surface samples");
    eval_cmd->add_option("--seed", ev_seed, "sampling seed");
    eval_cmd->callback([&] {
        if (ev_mesh.empty()) {
            if (ev_run.empty())
                throw std::runtime_error("eval: need --run or --mesh");
            ev_mesh = ev_run + "/mesh.obj";
        }
        if (ev_out.empty())
            ev_out = (ev_run.empty() ? std::string("metrics")
                                     : ev_run + "/metrics") +
                     ".csv";
        TriangleMesh mesh = read_obj(ev_mesh);
        Rng rng(ev_seed);
        MetricsReport m = eval_metrics(
            sample_mesh_surface(mesh, ev_samples, rng), read_xyz(ev_gt), ev_tau);
        std::ofstream(ev_out) << metrics_csv(m);
        std::cout << metrics_pretty(m);
    });

    // ---- render ----
    auto* render_cmd = app.add_subcommand("render", "render a trained view");
    std::string re_ckpt, re_data, re_out;
    int re_view = 0, re_samples = 64;
    std::uint64_t re_seed = 3;
    render_cmd->add_option("--checkpoint", re_ckpt, "checkpoint path")->required();
    render_cmd->add_option("--data", re_data, "dataset with the pose")->required();
    render_cmd->add_option("--view", re_view, "view index");
    render_cmd->add_option("--out", re_out, "output ppm path")->required();
    render_cmd->add_option("--samples", re_samples, "samples per ray");
    render_cmd->callback([&] {
        SceneFields f = load_checkpoint(re_ckpt);
        Dataset ds = load_dataset(re_data);
        const CameraModel& cam = ds.cams.at(re_view);
        SceneFieldProvider provider(f);
        ImageRgb img(cam.width, cam.height);
        ImageGray depth(cam.width, cam.height);
        Rng rng(re_seed);
        const int chunk = 64;
        std::vector<std::pair<int, int>> px;
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) px.push_back({x, y});
        for (std::size_t start = 0; start < px.size(); start += chunk) {
            const int n = static_cast<int>(
                std::min<std::size_t>(chunk, px.size() - start));
            std::vector<Ray> rays(n);
            for (int i = 0; i < n; ++i)
                rays[i] = pixel_to_ray(cam, px[start + i].first + 0.5,
                                       px[start + i].second + 0.5);
            Tape tape(&f.params);
            RenderNodes rn = render_rays_graph(tape, provider, rays, 0.05, 4.0,
                                               re_samples, rng);
            for (int i = 0; i < n; ++i) {
                img.at(px[start + i].first, px[start + i].second) =
                    tape.value(rn.color).col(i);
                depth.at(px[start + i].first, px[start + i].second) =
                    tape.value(rn.depth)(0, i);
            }
        }
        write_ppm(re_out, img);
        const std::string dpath =
            re_out.substr(0, re_out.find_last_of('.')) + "_depth.pgm";
        write_pgm16(dpath, depth, 1000.0);
        std::cout << "rendered view " << re_view << " -> " << re_out << "\n";
    });

    // ---- ablate ----
    auto* ab_cmd = app.add_subcommand("ablate", "baseline/geo/plane/full grid");
    std::string ab_data, ab_out, ab_preset = "desk", ab_sparse;
    int ab_res = 128, ab_samples = 20000;
    double ab_tau = 0.05;
    ab_cmd->add_option("--data", ab_data, "dataset directory")->required();
    ab_cmd->add_option("--out", ab_out, "output directory")->required();
    ab_cmd->add_option("--preset", ab_preset, "desk or paper");
    ab_cmd->add_option("--sparse", ab_sparse, "sparse depth directory");
    ab_cmd->add_option("--res", ab_res, "meshing resolution");
    ab_cmd->add_option("--samples", ab_samples, "eval samples");
    ab_cmd->add_option("--tau", ab_tau, "eval threshold");
    ab_cmd->callback([&] {
        Dataset ds = load_dataset(ab_data);
        TrainConfig base;
        apply_preset(base, ab_preset);
        SparseDepthMap sd = sparse_for_training(
            ds, ab_data, ab_sparse,
            0.005 * std::sqrt(3.0) * (base.bbox_max - base.bbox_min));
        auto masks = segment_masks(ds, 500, 20, 0.8, 0.01);
        std::vector<Vec3> gt = read_xyz(ab_data + "/gt_points.xyz");
        fs::create_directories(ab_out);

        struct Config {
            const char* name;
            bool geo, plane;
        };
        const Config grid[] = {{"baseline", false, false},
                               {"geo", true, false},
                               {"plane", false, true},
                               {"full", true, true}};
        std::ostringstream table;
        table << "config,accuracy,completeness,precision,recall,f_score\n";
        for (const Config& g : grid) {
            TrainConfig cfg = base;
            if (!g.geo) cfg.lambda_geo_start = cfg.lambda_geo_end = 0;
            if (!g.plane) cfg.lambda_j = 0;
            const std::string run = ab_out + "/" + g.name;
            std::cerr << "[ablate] training " << g.name << "\n";
            TrainResult res = train(ds, sd, masks, cfg, run);
            EvalArtifacts ea =
                mesh_and_eval(res.fields, gt, cfg.bbox_min, cfg.bbox_max,
                              ab_res, ab_samples, ab_tau, 2);
            write_obj(run + "/mesh.obj", ea.mesh);
            std::ofstream(run + "/metrics.csv") << metrics_csv(ea.metrics);
            table << g.name << "," << ea.metrics.accuracy << ","
                  << ea.metrics.completeness << "," << ea.metrics.precision
                  << "," << ea.metrics.recall << "," << ea.metrics.f_score
                  << "\n";
        }
        std::ofstream(ab_out + "/ablation.csv") << table.str();
        std::cout << table.str();
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // any malformed invocation is a usage error
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        const std::string what = e.what();
        if (what.find("non-finite") != std::string::npos ||
            what.find("beta") != std::string::npos)
            return kExitNumerical;
        return kExitData;
    }
}
