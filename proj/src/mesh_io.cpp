// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/mesh_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace msplat {

namespace {

std::string lowercase_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext;
}

// First integer of an OBJ face corner like "3", "3/1" or "3//2".
// OBJ indices are 1-based; negatives count from the end.
std::int64_t parse_obj_index(const std::string& token) {
    const auto slash = token.find('/');
    const std::string head = slash == std::string::npos ? token : token.substr(0, slash);
    return std::stoll(head);
}

} // namespace

TriMesh load_mesh(const std::string& path) {
    const std::string ext = lowercase_ext(path);
    if (ext == "obj") return load_obj(path);
    if (ext == "ply") return load_ply(path);
    throw DataError("unsupported mesh format for '" + path + "' (expected .obj or .ply)");
}

TriMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open mesh file '" + path + "'");
    TriMesh mesh;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "v") {
            Vec3 v;
            if (!(ss >> v[0] >> v[1] >> v[2])) {
                throw DataError("malformed vertex line in '" + path + "': " + line);
            }
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<std::uint32_t> corners;
            std::string token;
            while (ss >> token) {
                std::int64_t idx = parse_obj_index(token);
                if (idx < 0) idx = static_cast<std::int64_t>(mesh.vertices.size()) + idx + 1;
                if (idx < 1 || idx > static_cast<std::int64_t>(mesh.vertices.size())) {
                    throw DataError("face index out of range in '" + path + "': " + line);
                }
                corners.push_back(static_cast<std::uint32_t>(idx - 1));
            }
            if (corners.size() < 3) {
                throw DataError("face with fewer than 3 corners in '" + path + "'");
            }
            // Fan-triangulate polygons.
            for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
                mesh.faces.push_back({corners[0], corners[k], corners[k + 1]});
            }
        }
    }
    mesh.validate();
    return mesh;
}

namespace {

struct PlyProperty {
    std::string type;
    std::string name;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

std::size_t scalar_size(const std::string& type) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float" ||
        type == "float32")
        return 4;
    if (type == "double" || type == "float64" || type == "int64" || type == "uint64") return 8;
    throw DataError("unknown PLY scalar type '" + type + "'");
}

double read_binary_scalar(std::istream& in, const std::string& type) {
    unsigned char buf[8];
    const std::size_t size = scalar_size(type);
    in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(size));
    if (!in) throw DataError("unexpected end of PLY payload");
    if (type == "float" || type == "float32") {
        float f;
        std::memcpy(&f, buf, 4);
        return static_cast<double>(f);
    }
    if (type == "double" || type == "float64") {
        double d;
        std::memcpy(&d, buf, 8);
        return d;
    }
    // Integer types, little-endian.
    std::uint64_t raw = 0;
    for (std::size_t b = 0; b < size; ++b) raw |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
    const bool is_signed = type[0] == 'c' || type[0] == 's' || (type[0] == 'i');
    if (is_signed) {
        // Sign-extend.
        const std::uint64_t sign_bit = 1ULL << (8 * size - 1);
        if (raw & sign_bit) raw |= ~((sign_bit << 1) - 1);
        return static_cast<double>(static_cast<std::int64_t>(raw));
    }
    return static_cast<double>(raw);
}

} // namespace

TriMesh load_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open mesh file '" + path + "'");

    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
        throw DataError("'" + path + "' is not a PLY file");
    }
    std::string format;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "comment" || tag == "obj_info") continue;
        if (tag == "format") {
            ss >> format;
        } else if (tag == "element") {
            PlyElement el;
            ss >> el.name >> el.count;
            elements.push_back(el);
        } else if (tag == "property") {
            if (elements.empty()) throw DataError("PLY property before element in '" + path + "'");
            PlyProperty prop;
            std::string first;
            ss >> first;
            if (first == "list") {
                prop.is_list = true;
                ss >> prop.count_type >> prop.type >> prop.name;
            } else {
                prop.type = first;
                ss >> prop.name;
            }
            elements.back().properties.push_back(prop);
        } else if (tag == "end_header") {
            break;
        }
    }
    if (format != "ascii" && format != "binary_little_endian") {
        throw DataError("unsupported PLY format '" + format + "' in '" + path + "'");
    }
    const bool binary = format == "binary_little_endian";

    TriMesh mesh;
    for (const PlyElement& el : elements) {
        for (std::size_t i = 0; i < el.count; ++i) {
            Vec3 v = Vec3::Zero();
            std::vector<std::uint32_t> corners;
            for (const PlyProperty& prop : el.properties) {
                if (prop.is_list) {
                    std::size_t count;
                    if (binary) {
                        count = static_cast<std::size_t>(read_binary_scalar(in, prop.count_type));
                    } else {
                        in >> count;
                    }
                    std::vector<double> values(count);
                    for (std::size_t k = 0; k < count; ++k) {
                        if (binary) {
                            values[k] = read_binary_scalar(in, prop.type);
                        } else {
                            in >> values[k];
                        }
                    }
                    if (el.name == "face" && (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
                        corners.resize(count);
                        for (std::size_t k = 0; k < count; ++k) {
                            corners[k] = static_cast<std::uint32_t>(values[k]);
                        }
                    }
                } else {
                    double value;
                    if (binary) {
                        value = read_binary_scalar(in, prop.type);
                    } else {
                        in >> value;
                    }
                    if (el.name == "vertex") {
                        if (prop.name == "x") v[0] = value;
                        if (prop.name == "y") v[1] = value;
                        if (prop.name == "z") v[2] = value;
                    }
                }
            }
            if (!in) throw DataError("truncated PLY payload in '" + path + "'");
            if (el.name == "vertex") mesh.vertices.push_back(v);
            if (el.name == "face") {
                if (corners.size() < 3) throw DataError("PLY face with fewer than 3 corners");
                for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
                    mesh.faces.push_back({corners[0], corners[k], corners[k + 1]});
                }
            }
        }
    }
    mesh.validate();
    return mesh;
}

void save_ply(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write mesh file '" + path + "'");
    out << "ply\nformat binary_little_endian 1.0\n";
    out << "element vertex " << mesh.vertices.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    out << "element face " << mesh.faces.size() << "\n";
    out << "property list uchar uint vertex_indices\n";
    out << "end_header\n";
    for (const Vec3& v : mesh.vertices) {
        double xyz[3] = {v[0], v[1], v[2]};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
    for (const auto& tri : mesh.faces) {
        const unsigned char count = 3;
        out.write(reinterpret_cast<const char*>(&count), 1);
        std::uint32_t idx[3] = {tri[0], tri[1], tri[2]};
        out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
    }
    if (!out) throw DataError("failed while writing '" + path + "'");
}

RigidTransform load_rigid_transform(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open transform file '" + path + "'");
    Mat4 m;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            if (!(in >> m(r, c))) {
                throw DataError("transform file '" + path + "' does not contain 16 numbers");
            }
        }
    }
    return RigidTransform::from_matrix(m);
}

void save_rigid_transform(const RigidTransform& t, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write transform file '" + path + "'");
    const Mat4 m = t.to_matrix();
    out.precision(17);
    for (int r = 0; r < 4; ++r) {
        out << m(r, 0) << " " << m(r, 1) << " " << m(r, 2) << " " << m(r, 3) << "\n";
    }
}

} // namespace msplat
