#include "sdfrecon/io.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace sdfrecon {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) fail(path + ": cannot open for writing");
    out << std::setprecision(17);
    return out;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) fail(path + ": cannot open");
    return in;
}

}  // namespace

void write_poses(const std::string& path, const std::vector<Mat4>& poses) {
    auto out = open_out(path);
    for (const Mat4& p : poses) {
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                out << p(r, c) << (r == 3 && c == 3 ? '\n' : ' ');
    }
}

std::vector<Mat4> read_poses(const std::string& path) {
    auto in = open_in(path);
    std::vector<Mat4> poses;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ss(line);
        Mat4 p;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                if (!(ss >> p(r, c)))
                    fail(path + ": line " + std::to_string(lineno) +
                         ": expected 16 reals");
        if (!p.allFinite())
            fail(path + ": line " + std::to_string(lineno) + ": non-finite pose");
        poses.push_back(p);
    }
    return poses;
}

void write_intrinsics(const std::string& path, const CameraModel& cam) {
    auto out = open_out(path);
    out << cam.fx << " " << cam.fy << " " << cam.cx << " " << cam.cy << " "
        << cam.width << " " << cam.height << "\n";
}

CameraModel read_intrinsics(const std::string& path) {
    auto in = open_in(path);
    CameraModel cam;
    cam.pose = Mat4::Identity();
    if (!(in >> cam.fx >> cam.fy >> cam.cx >> cam.cy >> cam.width >> cam.height))
        fail(path + ": expected 'fx fy cx cy width height'");
    return cam;
}

Dataset load_dataset(const std::string& root) {
    namespace fs = std::filesystem;
    std::vector<std::string> problems;
    Dataset d;
    std::vector<Mat4> poses;
    CameraModel base;
    try {
        poses = read_poses(root + "/poses.txt");
    } catch (const std::exception& e) {
        problems.push_back(e.what());
    }
    try {
        base = read_intrinsics(root + "/intrinsics.txt");
    } catch (const std::exception& e) {
        problems.push_back(e.what());
    }
    for (std::size_t i = 0; i < poses.size(); ++i) {
        const std::string p = root + "/images/" + std::to_string(i) + ".ppm";
        try {
            d.images.push_back(read_ppm(p));
        } catch (const std::exception& e) {
            problems.push_back(e.what());
        }
    }
    if (problems.empty()) {
        if (d.images.size() != poses.size())
            problems.push_back(root + ": " + std::to_string(d.images.size()) +
                               " images vs " + std::to_string(poses.size()) +
                               " poses");
        for (std::size_t i = 0; i < d.images.size(); ++i)
            if (d.images[i].width() != base.width ||
                d.images[i].height() != base.height)
                problems.push_back(root + ": image " + std::to_string(i) +
                                   " size differs from intrinsics");
    }
    if (!problems.empty()) {
        std::string msg = "load_dataset failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        fail(msg);
    }
    for (const Mat4& p : poses) {
        CameraModel cam = base;
        cam.pose = p;
        d.cams.push_back(cam);
    }
    return d;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(
    const std::string& text, const std::string& origin) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(origin + ": line " + std::to_string(lineno) +
                 ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            fail(origin + ": line " + std::to_string(lineno) +
                 ": empty key or value");
        kv.emplace_back(key, val);
    }
    return kv;
}

std::vector<std::pair<std::string, std::string>> parse_config(
    const std::string& path) {
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x53444652;  // "SDFR"
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::istream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) fail(path + ": truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const SceneFields& f) {
    auto out = open_out(path, true);
    put(out, kCheckpointMagic);
    put(out, kCheckpointVersion);
    const FieldsConfig& c = f.cfg;
    for (int v : {c.geo_width, c.geo_depth, c.feature_width, c.color_width,
                  c.color_depth, c.plane_width, c.plane_depth, c.pe_x, c.pe_v})
        put(out, std::int32_t(v));
    put(out, c.init_radius);
    put(out, c.init_beta);
    put(out, std::int64_t(f.params.size()));
    out.write(reinterpret_cast<const char*>(f.params.data()),
              f.params.size() * sizeof(double));
    if (!out) fail(path + ": write failed");
}

SceneFields load_checkpoint(const std::string& path) {
    auto in = open_in(path, true);
    if (get<std::uint32_t>(in, path) != kCheckpointMagic)
        fail(path + ": not a checkpoint file");
    if (get<std::uint32_t>(in, path) != kCheckpointVersion)
        fail(path + ": unsupported checkpoint version");
    FieldsConfig c;
    for (int* v : {&c.geo_width, &c.geo_depth, &c.feature_width, &c.color_width,
                   &c.color_depth, &c.plane_width, &c.plane_depth, &c.pe_x,
                   &c.pe_v})
        *v = get<std::int32_t>(in, path);
    c.init_radius = get<double>(in, path);
    c.init_beta = get<double>(in, path);
    SceneFields f = make_scene_fields_uninit(c);
    const auto n = get<std::int64_t>(in, path);
    if (n != f.params.size())
        fail(path + ": parameter count does not match architecture");
    in.read(reinterpret_cast<char*>(f.params.data()), n * sizeof(double));
    if (!in) fail(path + ": truncated parameters");
    return f;
}

void write_xyz(const std::string& path, const std::vector<Vec3>& pts) {
    auto out = open_out(path);
    for (const Vec3& p : pts) out << p[0] << " " << p[1] << " " << p[2] << "\n";
}

std::vector<Vec3> read_xyz(const std::string& path) {
    auto in = open_in(path);
    std::vector<Vec3> pts;
    Vec3 p;
    while (in >> p[0] >> p[1] >> p[2]) pts.push_back(p);
    return pts;
}

}  // namespace sdfrecon
