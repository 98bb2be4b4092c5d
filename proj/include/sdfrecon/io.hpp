#pragma once

#include <map>
#include <string>
#include <vector>

#include "sdfrecon/fields.hpp"
#include "sdfrecon/geometry.hpp"
#include "sdfrecon/image.hpp"

namespace sdfrecon {

// poses.txt: one camera per line, 16 reals, row-major 4x4 camera-to-world.
void write_poses(const std::string& path, const std::vector<Mat4>& poses);
std::vector<Mat4> read_poses(const std::string& path);

// intrinsics.txt: single line "fx fy cx cy width height", shared by all views.
void write_intrinsics(const std::string& path, const CameraModel& cam);
CameraModel read_intrinsics(const std::string& path);  // pose left identity

struct Dataset {
    std::vector<ImageRgb> images;
    std::vector<CameraModel> cams;  // intrinsics + per-view pose

    int num_views() const { return static_cast<int>(images.size()); }
    int width() const { return images.empty() ? 0 : images[0].width(); }
    int height() const { return images.empty() ? 0 : images[0].height(); }
};

// Eagerly loads images/<i>.ppm, poses.txt, intrinsics.txt. Collects every
// violation into one error message.
Dataset load_dataset(const std::string& root);

// Flat "key = value" config with '#' comments. Preserves file order.
std::vector<std::pair<std::string, std::string>> parse_config(
    const std::string& path);
std::vector<std::pair<std::string, std::string>> parse_config_text(
    const std::string& text, const std::string& origin);

// Checkpoint: binary dump of FieldsConfig + full parameter vector.
void save_checkpoint(const std::string& path, const SceneFields& f);
SceneFields load_checkpoint(const std::string& path);

// ASCII XYZ point cloud, one "x y z" line per point.
void write_xyz(const std::string& path, const std::vector<Vec3>& pts);
std::vector<Vec3> read_xyz(const std::string& path);

}  // namespace sdfrecon
