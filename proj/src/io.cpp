#include "dmfc/io.hpp"

#include <nlohmann/json.hpp>

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dmfc {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void append_doubles(std::string& out, const double* data, size_t count) {
    // on-disk format is little-endian float64, which is the native layout here
    out.append(reinterpret_cast<const char*>(data), count * sizeof(double));
}

void format_double(std::ostringstream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
}

struct PlyData {
    Points vertices;
    VecX intensity;  // empty if absent
    std::vector<std::array<int, 3>> faces;
    std::vector<std::array<int, 4>> tets;
};

std::string ply_text(const Points& vertices, const VecX* intensity,
                     const std::vector<std::array<int, 3>>* faces,
                     const std::vector<std::array<int, 4>>* tets) {
    std::ostringstream os;
    os << "ply\nformat ascii 1.0\ncomment dmfc mesh\n";
    os << "element vertex " << vertices.cols() << "\n";
    os << "property double x\nproperty double y\nproperty double z\n";
    if (intensity) os << "property double intensity\n";
    if (faces) {
        os << "element face " << faces->size() << "\n";
        os << "property list uchar int vertex_indices\n";
    }
    if (tets) {
        os << "element tet " << tets->size() << "\n";
        os << "property list uchar int vertex_indices\n";
    }
    os << "end_header\n";
    for (Index i = 0; i < vertices.cols(); ++i) {
        format_double(os, vertices(0, i));
        os << ' ';
        format_double(os, vertices(1, i));
        os << ' ';
        format_double(os, vertices(2, i));
        if (intensity) {
            os << ' ';
            format_double(os, (*intensity)[i]);
        }
        os << '\n';
    }
    if (faces)
        for (const auto& f : *faces) os << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    if (tets)
        for (const auto& t : *tets)
            os << "4 " << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
    return os.str();
}

PlyData parse_ply(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "ply") throw DataError("not a PLY file: " + path.string());

    struct Element {
        std::string name;
        size_t count = 0;
        std::vector<std::string> properties;
    };
    std::vector<Element> elements;
    bool ascii = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = fmt == "ascii";
        } else if (tok == "element") {
            Element e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (tok == "property") {
            if (elements.empty()) throw DataError("PLY property before element");
            std::string rest;
            std::getline(ls, rest);
            elements.back().properties.push_back(rest);
        } else if (tok == "end_header") {
            break;
        }
    }
    if (!ascii) throw DataError("only ASCII PLY supported: " + path.string());

    PlyData out;
    for (const auto& e : elements) {
        if (e.name == "vertex") {
            const bool has_intensity =
                std::any_of(e.properties.begin(), e.properties.end(), [](const std::string& p) {
                    return p.find("intensity") != std::string::npos;
                });
            out.vertices.resize(3, static_cast<Index>(e.count));
            if (has_intensity) out.intensity.resize(static_cast<Index>(e.count));
            for (size_t i = 0; i < e.count; ++i) {
                if (!std::getline(in, line)) throw DataError("PLY: truncated vertex block");
                std::istringstream ls(line);
                double x, y, z;
                if (!(ls >> x >> y >> z)) throw DataError("PLY: bad vertex line");
                out.vertices.col(static_cast<Index>(i)) = Vec3(x, y, z);
                if (has_intensity) {
                    double v;
                    if (!(ls >> v)) throw DataError("PLY: missing intensity");
                    out.intensity[static_cast<Index>(i)] = v;
                }
            }
        } else if (e.name == "face" || e.name == "tet") {
            for (size_t i = 0; i < e.count; ++i) {
                if (!std::getline(in, line)) throw DataError("PLY: truncated index block");
                std::istringstream ls(line);
                int n;
                if (!(ls >> n)) throw DataError("PLY: bad list line");
                if (e.name == "face") {
                    if (n != 3) throw DataError("PLY: only triangles supported");
                    std::array<int, 3> f{};
                    ls >> f[0] >> f[1] >> f[2];
                    out.faces.push_back(f);
                } else {
                    if (n != 4) throw DataError("PLY: tet element must list 4 vertices");
                    std::array<int, 4> t{};
                    ls >> t[0] >> t[1] >> t[2] >> t[3];
                    out.tets.push_back(t);
                }
            }
        } else {
            // skip unknown elements
            for (size_t i = 0; i < e.count; ++i) std::getline(in, line);
        }
    }
    return out;
}

}  // namespace

void atomic_write_file(const std::filesystem::path& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_tri_mesh_ply(const std::filesystem::path& path, const TriMesh& mesh) {
    atomic_write_file(path, ply_text(mesh.vertices, nullptr, &mesh.triangles, nullptr));
}

TriMesh read_tri_mesh_ply(const std::filesystem::path& path) {
    PlyData d = parse_ply(path);
    TriMesh m;
    m.vertices = std::move(d.vertices);
    m.triangles = std::move(d.faces);
    m.validate();
    return m;
}

void write_tet_mesh_ply(const std::filesystem::path& path, const TetMesh& mesh) {
    atomic_write_file(path, ply_text(mesh.vertices, &mesh.intensity, nullptr, &mesh.tets));
}

TetMesh read_tet_mesh_ply(const std::filesystem::path& path) {
    PlyData d = parse_ply(path);
    TetMesh m;
    m.vertices = std::move(d.vertices);
    m.tets = std::move(d.tets);
    m.intensity = std::move(d.intensity);
    if (m.intensity.size() == 0) m.intensity = VecX::Zero(m.vertex_count());
    m.validate();
    return m;
}

void write_volume(const std::filesystem::path& raw_path, const Volume3& vol) {
    vol.validate();
    std::string bytes;
    bytes.reserve(static_cast<size_t>(vol.voxels.size()) * sizeof(double));
    append_doubles(bytes, vol.voxels.data(), static_cast<size_t>(vol.voxels.size()));
    atomic_write_file(raw_path, bytes);

    json header;
    header["dims"] = {vol.dims[0], vol.dims[1], vol.dims[2]};
    header["spacing"] = {vol.spacing[0], vol.spacing[1], vol.spacing[2]};
    header["origin"] = {vol.origin[0], vol.origin[1], vol.origin[2]};
    std::filesystem::path sidecar = raw_path;
    sidecar.replace_extension(".json");
    atomic_write_file(sidecar, header.dump(2) + "\n");
}

Volume3 read_volume(const std::filesystem::path& raw_path) {
    std::filesystem::path sidecar = raw_path;
    sidecar.replace_extension(".json");
    const json header = json::parse(read_file(sidecar));
    Volume3 vol;
    for (int a = 0; a < 3; ++a) {
        vol.dims[a] = header.at("dims").at(a).get<Index>();
        vol.spacing[a] = header.at("spacing").at(a).get<double>();
        vol.origin[a] = header.at("origin").at(a).get<double>();
    }
    const std::string bytes = read_file(raw_path);
    if (bytes.size() != static_cast<size_t>(vol.voxel_count()) * sizeof(double))
        throw DataError("volume size does not match header: " + raw_path.string());
    vol.voxels.resize(vol.voxel_count());
    std::memcpy(vol.voxels.data(), bytes.data(), bytes.size());
    vol.validate();
    return vol;
}

namespace {

constexpr char kMagic[8] = {'D', 'M', 'F', 'C', 'G', 'P', 'M', '1'};

void append_section(std::string& out, json& manifest, const std::string& name, const MatX& m) {
    json sec;
    sec["name"] = name;
    sec["rows"] = m.rows();
    sec["cols"] = m.cols();
    sec["offset"] = out.size();
    manifest["sections"].push_back(sec);
    append_doubles(out, m.data(), static_cast<size_t>(m.size()));
}

MatX read_section(const std::string& blob, const json& sec) {
    const auto rows = sec.at("rows").get<Index>();
    const auto cols = sec.at("cols").get<Index>();
    const auto offset = sec.at("offset").get<size_t>();
    MatX m(rows, cols);
    const size_t bytes = static_cast<size_t>(m.size()) * sizeof(double);
    if (offset + bytes > blob.size()) throw DataError("model container: truncated section");
    std::memcpy(m.data(), blob.data() + offset, bytes);
    return m;
}

std::string mode_name(PoseMode m) {
    switch (m) {
        case PoseMode::Edr: return "edr";
        case PoseMode::Sr: return "sr";
        case PoseMode::Pdm: return "pdm";
    }
    throw DataError("unknown pose mode");
}

PoseMode mode_from_name(const std::string& s) {
    if (s == "edr") return PoseMode::Edr;
    if (s == "sr") return PoseMode::Sr;
    if (s == "pdm") return PoseMode::Pdm;
    throw DataError("unknown pose mode: " + s);
}

}  // namespace

void save_model(const std::filesystem::path& path, const DmfcGpm& model,
                const std::string& tool_version) {
    model.validate();
    json manifest;
    manifest["format"] = "dmfc-gpm";
    manifest["format_version"] = 1;
    manifest["tool_version"] = tool_version;
    manifest["pose_mode"] = mode_name(model.mode);
    manifest["class_weights"] = {model.weights.shape, model.weights.pose,
                                 model.weights.intensity};
    manifest["rank"] = model.rank();
    manifest["sections"] = json::array();

    std::string blob;
    manifest["objects"] = json::array();
    for (Index j = 0; j < model.reference->object_count(); ++j) {
        const auto& obj = model.reference->objects[j];
        json jo;
        jo["name"] = obj.name;
        jo["surface_vertices"] = obj.surface.vertex_count();
        jo["domain_size"] = obj.tetra.vertex_count();
        jo["triangles"] = json::array();
        for (const auto& t : obj.surface.triangles) jo["triangles"].push_back({t[0], t[1], t[2]});
        jo["tets"] = json::array();
        for (const auto& t : obj.tetra.tets) jo["tets"].push_back({t[0], t[1], t[2], t[3]});
        manifest["objects"].push_back(jo);
        const std::string prefix = "object" + std::to_string(j);
        append_section(blob, manifest, prefix + "/vertices", obj.tetra.vertices);
        append_section(blob, manifest, prefix + "/intensity", obj.tetra.intensity);
    }
    append_section(blob, manifest, "mean", model.mean);
    append_section(blob, manifest, "eigenvalues", model.eigenvalues);
    append_section(blob, manifest, "basis", model.basis);

    const std::string mtext = manifest.dump();
    std::string out(kMagic, sizeof(kMagic));
    const std::uint64_t mlen = mtext.size();
    out.append(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
    out += mtext;
    out += blob;
    atomic_write_file(path, out);
}

DmfcGpm load_model(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t) ||
        std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a dmfc model file: " + path.string());
    std::uint64_t mlen = 0;
    std::memcpy(&mlen, bytes.data() + sizeof(kMagic), sizeof(mlen));
    const size_t header = sizeof(kMagic) + sizeof(std::uint64_t);
    if (header + mlen > bytes.size()) throw DataError("model container: truncated manifest");
    const json manifest = json::parse(bytes.substr(header, mlen));
    const std::string blob = bytes.substr(header + mlen);

    auto section = [&](const std::string& name) -> MatX {
        for (const auto& sec : manifest.at("sections"))
            if (sec.at("name").get<std::string>() == name) return read_section(blob, sec);
        throw DataError("model container: missing section " + name);
    };

    auto ref = std::make_shared<MultiObjectReference>();
    Index j = 0;
    for (const auto& jo : manifest.at("objects")) {
        MultiObjectReference::Object obj;
        obj.name = jo.at("name").get<std::string>();
        const std::string prefix = "object" + std::to_string(j);
        obj.tetra.vertices = section(prefix + "/vertices");
        obj.tetra.intensity = section(prefix + "/intensity").col(0);
        for (const auto& t : jo.at("tets"))
            obj.tetra.tets.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>(),
                                      t.at(3).get<int>()});
        const Index ns = jo.at("surface_vertices").get<Index>();
        obj.surface.vertices = obj.tetra.vertices.leftCols(ns);
        for (const auto& t : jo.at("triangles"))
            obj.surface.triangles.push_back(
                {t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
        ref->objects.push_back(std::move(obj));
        ++j;
    }

    DmfcGpm model;
    model.reference = ref;
    model.mode = mode_from_name(manifest.at("pose_mode").get<std::string>());
    model.weights.shape = manifest.at("class_weights").at(0).get<double>();
    model.weights.pose = manifest.at("class_weights").at(1).get<double>();
    model.weights.intensity = manifest.at("class_weights").at(2).get<double>();
    model.mean = section("mean").col(0);
    model.eigenvalues = section("eigenvalues").col(0);
    model.basis = section("basis");
    model.validate();
    return model;
}

}  // namespace dmfc
