#pragma once

#include "dmfc/model.hpp"
#include "dmfc/volume.hpp"

#include <filesystem>
#include <string>

namespace dmfc {

// ASCII PLY with double precision properties; tet meshes add an intensity
// vertex property and an "element tet" index list.
void write_tri_mesh_ply(const std::filesystem::path& path, const TriMesh& mesh);
TriMesh read_tri_mesh_ply(const std::filesystem::path& path);

void write_tet_mesh_ply(const std::filesystem::path& path, const TetMesh& mesh);
TetMesh read_tet_mesh_ply(const std::filesystem::path& path);

// Raw little-endian float64 voxel block + JSON sidecar ("<stem>.json") with
// dims, spacing, origin.
void write_volume(const std::filesystem::path& raw_path, const Volume3& vol);
Volume3 read_volume(const std::filesystem::path& raw_path);

// Single-file container: magic, JSON manifest, float64 binary sections.
// Save/load round-trips bit-exactly.
void save_model(const std::filesystem::path& path, const DmfcGpm& model,
                const std::string& tool_version);
DmfcGpm load_model(const std::filesystem::path& path);

// Write-then-rename so partially written files never appear under the target
// name.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace dmfc
