#pragma once

#include <filesystem>
#include <string>

#include "sidefield/geom/mesh.hpp"

namespace sidefield::geom {

/// OBJ text with "v x y z [r g b]" and 1-based "f a b c" lines. Numbers use the
/// shortest round-trip decimal form, so import(export(m)) is exact.
std::string to_obj_string(const TriMesh& mesh);
TriMesh from_obj_string(const std::string& text);

void write_obj(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh read_obj(const std::filesystem::path& path);

}  // namespace sidefield::geom
