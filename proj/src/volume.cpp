// Copyright Contributors to the MeshSplat Project
// SPDX-License-Identifier: Apache-2.0

#include "msplat/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace msplat {

void GridGeometry::validate() const {
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
        throw DataError("volume grid dimensions must be at least 1");
    }
    if (spacing.minCoeff() <= 0.0) throw DataError("volume grid spacing must be positive");
    const double residual = (direction.transpose() * direction - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (residual > 1e-6) throw DataError("volume grid direction matrix is not orthonormal");
}

bool GridGeometry::matches(const GridGeometry& other) const {
    return dims == other.dims && (spacing - other.spacing).cwiseAbs().maxCoeff() == 0.0 &&
           (origin - other.origin).cwiseAbs().maxCoeff() == 0.0 &&
           (direction - other.direction).cwiseAbs().maxCoeff() == 0.0;
}

float VolumeGrid::min_value() const {
    return values.empty() ? 0.0f : *std::min_element(values.begin(), values.end());
}

float VolumeGrid::max_value() const {
    return values.empty() ? 0.0f : *std::max_element(values.begin(), values.end());
}

namespace {

struct NrrdHeader {
    std::string type;
    int dimension = 0;
    std::vector<std::size_t> sizes;
    std::vector<std::string> space_directions; // raw "(a,b,c)" or "none" tokens
    Vec3 space_origin = Vec3::Zero();
    bool has_origin = false;
    std::string encoding;
    std::string endian;
    std::string data_file;
};

Vec3 parse_triple(const std::string& token) {
    Vec3 v;
    std::string cleaned = token;
    for (char& c : cleaned) {
        if (c == '(' || c == ')' || c == ',') c = ' ';
    }
    std::istringstream ss(cleaned);
    if (!(ss >> v[0] >> v[1] >> v[2])) throw DataError("malformed NRRD vector '" + token + "'");
    return v;
}

// Splits "(..) (..) (..)" or "none (..) (..) (..)" into tokens.
std::vector<std::string> split_direction_tokens(const std::string& value) {
    std::vector<std::string> tokens;
    std::size_t pos = 0;
    while (pos < value.size()) {
        while (pos < value.size() && std::isspace(static_cast<unsigned char>(value[pos]))) ++pos;
        if (pos >= value.size()) break;
        if (value[pos] == '(') {
            const auto close = value.find(')', pos);
            if (close == std::string::npos) throw DataError("unbalanced parenthesis in NRRD header");
            tokens.push_back(value.substr(pos, close - pos + 1));
            pos = close + 1;
        } else {
            const auto end = value.find_first_of(" \t", pos);
            tokens.push_back(value.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
            if (end == std::string::npos) break;
            pos = end;
        }
    }
    return tokens;
}

NrrdHeader read_nrrd_header(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("NRRD", 0) != 0) {
        throw DataError("'" + path + "' is not an NRRD file");
    }
    NrrdHeader h;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) break; // header/data separator
        if (line[0] == '#') continue;
        const auto colon = line.find(": ");
        if (colon == std::string::npos) {
            // "key:=value" comments and malformed lines are ignored.
            continue;
        }
        const std::string key = line.substr(0, colon);
        const std::string value = line.substr(colon + 2);
        if (key == "type") {
            h.type = value;
        } else if (key == "dimension") {
            h.dimension = std::stoi(value);
        } else if (key == "sizes") {
            std::istringstream ss(value);
            std::size_t s;
            while (ss >> s) h.sizes.push_back(s);
        } else if (key == "space directions") {
            h.space_directions = split_direction_tokens(value);
        } else if (key == "space origin") {
            h.space_origin = parse_triple(value);
            h.has_origin = true;
        } else if (key == "encoding") {
            h.encoding = value;
        } else if (key == "endian") {
            h.endian = value;
        } else if (key == "data file") {
            h.data_file = value;
        }
        // "space", "kinds", "content" etc. carry no geometry we use.
    }
    if (h.type.empty() || h.dimension == 0 || h.sizes.empty()) {
        throw DataError("NRRD header in '" + path + "' is missing type, dimension or sizes");
    }
    if (h.sizes.size() != static_cast<std::size_t>(h.dimension)) {
        throw DataError("NRRD header in '" + path + "': sizes do not match dimension");
    }
    if (h.encoding != "raw") {
        throw DataError("NRRD '" + path + "': only raw encoding is supported");
    }
    return h;
}

std::size_t nrrd_type_size(const std::string& type) {
    if (type == "uchar" || type == "unsigned char" || type == "uint8" || type == "int8" ||
        type == "char")
        return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float")
        return 4;
    if (type == "double" || type == "int64" || type == "uint64") return 8;
    throw DataError("unsupported NRRD type '" + type + "'");
}

double decode_scalar(const unsigned char* p, const std::string& type) {
    if (type == "float") {
        float f;
        std::memcpy(&f, p, 4);
        return f;
    }
    if (type == "double") {
        double d;
        std::memcpy(&d, p, 8);
        return d;
    }
    if (type == "uchar" || type == "unsigned char" || type == "uint8") return *p;
    if (type == "char" || type == "int8") return static_cast<signed char>(*p);
    if (type == "short" || type == "int16") {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    if (type == "ushort" || type == "uint16") {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    if (type == "int" || type == "int32") {
        std::int32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    if (type == "uint" || type == "uint32") {
        std::uint32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    throw DataError("unsupported NRRD type '" + type + "'");
}

std::vector<unsigned char> read_payload(std::istream& attached, const NrrdHeader& h,
                                        const std::string& path, std::size_t expected_bytes) {
    std::vector<unsigned char> bytes;
    if (h.data_file.empty()) {
        bytes.assign((std::istreambuf_iterator<char>(attached)), std::istreambuf_iterator<char>());
    } else {
        const auto dir = std::filesystem::path(path).parent_path();
        const auto data_path = dir / h.data_file;
        std::ifstream data(data_path, std::ios::binary);
        if (!data) throw DataError("cannot open NRRD data file '" + data_path.string() + "'");
        bytes.assign((std::istreambuf_iterator<char>(data)), std::istreambuf_iterator<char>());
    }
    if (bytes.size() < expected_bytes) {
        throw DataError("NRRD payload of '" + path + "' is truncated");
    }
    if (nrrd_type_size(h.type) > 1 && !h.endian.empty() && h.endian != "little") {
        throw DataError("NRRD '" + path + "': only little-endian payloads are supported");
    }
    return bytes;
}

GridGeometry geometry_from_header(const NrrdHeader& h, int first_domain_axis,
                                  const std::string& path) {
    GridGeometry geom;
    for (int a = 0; a < 3; ++a) {
        geom.dims[a] = static_cast<int>(h.sizes[static_cast<std::size_t>(first_domain_axis + a)]);
    }
    if (h.space_directions.empty()) {
        throw DataError("NRRD '" + path + "' is missing space directions");
    }
    // Skip any leading "none" (non-spatial) axes.
    std::vector<Vec3> cols;
    for (const std::string& token : h.space_directions) {
        if (token == "none") continue;
        cols.push_back(parse_triple(token));
    }
    if (cols.size() != 3) throw DataError("NRRD '" + path + "' must have 3 spatial directions");
    for (int a = 0; a < 3; ++a) {
        geom.spacing[a] = cols[a].norm();
        if (geom.spacing[a] <= 0.0) throw DataError("NRRD '" + path + "' has a zero space direction");
        geom.direction.col(a) = cols[a] / geom.spacing[a];
    }
    geom.origin = h.space_origin;
    geom.validate();
    return geom;
}

void write_nrrd(const GridGeometry& geom, const float* data, std::size_t count, bool vector_field,
                const std::string& path) {
    const std::filesystem::path p(path);
    const std::string ext = p.extension().string();
    const bool detached = ext == ".nhdr";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write NRRD '" + path + "'");
    out << "NRRD0004\n";
    out << "type: float\n";
    out << "dimension: " << (vector_field ? 4 : 3) << "\n";
    out << "space dimension: 3\n";
    out << "sizes: ";
    if (vector_field) out << "3 ";
    out << geom.dims[0] << " " << geom.dims[1] << " " << geom.dims[2] << "\n";
    out << "space directions: ";
    if (vector_field) out << "none ";
    out.precision(17);
    for (int a = 0; a < 3; ++a) {
        const Vec3 col = geom.direction.col(a) * geom.spacing[a];
        out << "(" << col[0] << "," << col[1] << "," << col[2] << ")" << (a < 2 ? " " : "\n");
    }
    out << "kinds: " << (vector_field ? "vector domain domain domain" : "domain domain domain")
        << "\n";
    out << "endian: little\n";
    out << "encoding: raw\n";
    out << "space origin: (" << geom.origin[0] << "," << geom.origin[1] << "," << geom.origin[2]
        << ")\n";
    if (detached) {
        const std::string raw_name = p.stem().string() + ".raw";
        out << "data file: " << raw_name << "\n";
        out.close();
        std::ofstream raw(p.parent_path() / raw_name, std::ios::binary);
        if (!raw) throw DataError("cannot write NRRD payload next to '" + path + "'");
        raw.write(reinterpret_cast<const char*>(data),
                  static_cast<std::streamsize>(count * sizeof(float)));
        if (!raw) throw DataError("failed while writing NRRD payload for '" + path + "'");
    } else {
        out << "\n";
        out.write(reinterpret_cast<const char*>(data),
                  static_cast<std::streamsize>(count * sizeof(float)));
        if (!out) throw DataError("failed while writing '" + path + "'");
    }
}

} // namespace

VolumeGrid load_volume_nrrd(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open NRRD '" + path + "'");
    const NrrdHeader h = read_nrrd_header(in, path);
    if (h.dimension != 3) {
        throw DataError("NRRD '" + path + "' must be a 3-D scalar volume");
    }
    VolumeGrid volume;
    volume.geom = geometry_from_header(h, 0, path);
    const std::size_t n = volume.geom.voxel_count();
    const std::size_t type_size = nrrd_type_size(h.type);
    const std::vector<unsigned char> bytes = read_payload(in, h, path, n * type_size);
    volume.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        volume.values[i] = static_cast<float>(decode_scalar(bytes.data() + i * type_size, h.type));
    }
    return volume;
}

void save_volume_nrrd(const VolumeGrid& volume, const std::string& path) {
    volume.geom.validate();
    if (volume.values.size() != volume.geom.voxel_count()) {
        throw DataError("volume value count does not match its geometry");
    }
    write_nrrd(volume.geom, volume.values.data(), volume.values.size(), false, path);
}

DisplacementGrid load_displacement_nrrd(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open NRRD '" + path + "'");
    const NrrdHeader h = read_nrrd_header(in, path);
    if (h.dimension != 4 || h.sizes[0] != 3) {
        throw DataError("NRRD '" + path + "' must be a 4-D field with 3 components");
    }
    if (h.type != "float") {
        throw DataError("displacement NRRD '" + path + "' must be float");
    }
    DisplacementGrid grid;
    grid.geom = geometry_from_header(h, 1, path);
    const std::size_t n = grid.geom.voxel_count();
    const std::vector<unsigned char> bytes = read_payload(in, h, path, n * 3 * sizeof(float));
    grid.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        float xyz[3];
        std::memcpy(xyz, bytes.data() + i * 3 * sizeof(float), sizeof(xyz));
        grid.values[i] = Vec3(xyz[0], xyz[1], xyz[2]);
    }
    return grid;
}

void save_displacement_nrrd(const DisplacementGrid& grid, const std::string& path) {
    grid.geom.validate();
    if (grid.values.size() != grid.geom.voxel_count()) {
        throw DataError("displacement value count does not match its geometry");
    }
    std::vector<float> flat(grid.values.size() * 3);
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        for (int c = 0; c < 3; ++c) flat[3 * i + c] = static_cast<float>(grid.values[i][c]);
    }
    write_nrrd(grid.geom, flat.data(), flat.size(), true, path);
}

} // namespace msplat
