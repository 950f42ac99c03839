#include "petseg/nifti.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include "gzip.hpp"

namespace petseg {

namespace {

// NIfTI-1 header, published 348-byte layout.
#pragma pack(push, 1)
struct Nifti1Header {
    std::int32_t sizeof_hdr;    //   0
    char data_type[10];         //   4
    char db_name[18];           //  14
    std::int32_t extents;       //  32
    std::int16_t session_error; //  36
    char regular;               //  38
    char dim_info;              //  39
    std::int16_t dim[8];        //  40
    float intent_p1;            //  56
    float intent_p2;            //  60
    float intent_p3;            //  64
    std::int16_t intent_code;   //  68
    std::int16_t datatype;      //  70
    std::int16_t bitpix;        //  72
    std::int16_t slice_start;   //  74
    float pixdim[8];            //  76
    float vox_offset;           // 108
    float scl_slope;            // 112
    float scl_inter;            // 116
    std::int16_t slice_end;     // 120
    char slice_code;            // 122
    char xyzt_units;            // 123
    float cal_max;              // 124
    float cal_min;              // 128
    float slice_duration;       // 132
    float toffset;              // 136
    std::int32_t glmax;         // 140
    std::int32_t glmin;         // 144
    char descrip[80];           // 148
    char aux_file[24];          // 228
    std::int16_t qform_code;    // 252
    std::int16_t sform_code;    // 254
    float quatern_b;            // 256
    float quatern_c;            // 260
    float quatern_d;            // 264
    float qoffset_x;            // 268
    float qoffset_y;            // 272
    float qoffset_z;            // 276
    float srow_x[4];            // 280
    float srow_y[4];            // 296
    float srow_z[4];            // 312
    char intent_name[16];       // 328
    char magic[4];              // 344
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

void swap_bytes(void* p, std::size_t width) {
    auto* b = static_cast<std::uint8_t*>(p);
    for (std::size_t i = 0, j = width - 1; i < j; ++i, --j)
        std::swap(b[i], b[j]);
}

void swap_header(Nifti1Header& h) {
    swap_bytes(&h.sizeof_hdr, 4);
    swap_bytes(&h.extents, 4);
    swap_bytes(&h.session_error, 2);
    for (auto& v : h.dim) swap_bytes(&v, 2);
    swap_bytes(&h.intent_p1, 4);
    swap_bytes(&h.intent_p2, 4);
    swap_bytes(&h.intent_p3, 4);
    swap_bytes(&h.intent_code, 2);
    swap_bytes(&h.datatype, 2);
    swap_bytes(&h.bitpix, 2);
    swap_bytes(&h.slice_start, 2);
    for (auto& v : h.pixdim) swap_bytes(&v, 4);
    swap_bytes(&h.vox_offset, 4);
    swap_bytes(&h.scl_slope, 4);
    swap_bytes(&h.scl_inter, 4);
    swap_bytes(&h.slice_end, 2);
    swap_bytes(&h.cal_max, 4);
    swap_bytes(&h.cal_min, 4);
    swap_bytes(&h.slice_duration, 4);
    swap_bytes(&h.toffset, 4);
    swap_bytes(&h.glmax, 4);
    swap_bytes(&h.glmin, 4);
    swap_bytes(&h.qform_code, 2);
    swap_bytes(&h.sform_code, 2);
    swap_bytes(&h.quatern_b, 4);
    swap_bytes(&h.quatern_c, 4);
    swap_bytes(&h.quatern_d, 4);
    swap_bytes(&h.qoffset_x, 4);
    swap_bytes(&h.qoffset_y, 4);
    swap_bytes(&h.qoffset_z, 4);
    for (auto& v : h.srow_x) swap_bytes(&v, 4);
    for (auto& v : h.srow_y) swap_bytes(&v, 4);
    for (auto& v : h.srow_z) swap_bytes(&v, 4);
}

int bitpix_of(NiftiDtype d) {
    switch (d) {
        case NiftiDtype::uint8: return 8;
        case NiftiDtype::int16: return 16;
        case NiftiDtype::int32: return 32;
        case NiftiDtype::float32: return 32;
        case NiftiDtype::float64: return 64;
    }
    throw UnsupportedDtypeError("unknown dtype");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open file: " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size))
        throw IoError("cannot read file: " + path.string());
    return bytes;
}

// Geometry from a quaternion-coded qform, per the published standard.
Geometry geometry_from_qform(const Nifti1Header& h, const Index3& dims) {
    const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
    double a2 = 1.0 - (b * b + c * c + d * d);
    const double a = a2 > 0.0 ? std::sqrt(a2) : 0.0;
    const double qfac = (h.pixdim[0] < 0.0f) ? -1.0 : 1.0;

    Mat3 rot{{{a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
              {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
              {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c}}};
    for (int r = 0; r < 3; ++r) rot[r][2] *= qfac;

    Geometry g;
    g.dims = dims;
    for (int axis = 0; axis < 3; ++axis) {
        double s = h.pixdim[axis + 1];
        g.spacing[axis] = (std::isfinite(s) && s > 0.0) ? s : 1.0;
    }
    g.origin = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
    g.direction = rot;
    return g;
}

Geometry geometry_from_sform(const Nifti1Header& h, const Index3& dims) {
    const float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
    Geometry g;
    g.dims = dims;
    for (int col = 0; col < 3; ++col) {
        double norm = 0.0;
        for (int r = 0; r < 3; ++r) norm += double(rows[r][col]) * double(rows[r][col]);
        norm = std::sqrt(norm);
        if (!(norm > 0.0) || !std::isfinite(norm))
            throw ValidationError("sform affine has a degenerate column");
        g.spacing[col] = norm;
        for (int r = 0; r < 3; ++r) g.direction[r][col] = rows[r][col] / norm;
    }
    g.origin = {rows[0][3], rows[1][3], rows[2][3]};
    return g;
}

Geometry geometry_from_pixdim(const Nifti1Header& h, const Index3& dims) {
    Geometry g;
    g.dims = dims;
    for (int axis = 0; axis < 3; ++axis) {
        double s = h.pixdim[axis + 1];
        g.spacing[axis] = (std::isfinite(s) && s > 0.0) ? s : 1.0;
    }
    return g;
}

template <typename T>
void decode_values(const std::uint8_t* payload, std::int64_t n, bool swapped,
                   double slope, double inter, std::vector<double>& out) {
    out.resize(static_cast<std::size_t>(n));
    for (std::int64_t v = 0; v < n; ++v) {
        T raw;
        std::memcpy(&raw, payload + v * sizeof(T), sizeof(T));
        if (swapped && sizeof(T) > 1) swap_bytes(&raw, sizeof(T));
        out[static_cast<std::size_t>(v)] = slope * static_cast<double>(raw) + inter;
    }
}

template <typename T>
void encode_values(const std::vector<double>& values, std::vector<std::uint8_t>& out) {
    out.resize(values.size() * sizeof(T));
    for (std::size_t v = 0; v < values.size(); ++v) {
        const T raw = static_cast<T>(values[v]);
        std::memcpy(out.data() + v * sizeof(T), &raw, sizeof(T));
    }
}

void check_integral_range(const std::vector<double>& values, double lo, double hi, const char* dtype) {
    for (double v : values) {
        if (v < lo || v > hi)
            throw RangeError(std::string("value out of range for ") + dtype);
        if (v != std::floor(v))
            throw RangeError(std::string("non-integer value cannot be written as ") + dtype);
    }
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    const bool gz = path.extension() == ".gz";
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open file for writing: " + path.string());
    if (gz) {
        auto compressed = detail::gzip_compress(bytes);
        out.write(reinterpret_cast<const char*>(compressed.data()),
                  static_cast<std::streamsize>(compressed.size()));
    } else {
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    if (!out)
        throw IoError("write failed: " + path.string());
}

void write_nifti_impl(const Geometry& geom, const std::vector<double>& values,
                      const std::filesystem::path& path, NiftiDtype dtype) {
    geom.validate();
    for (double v : values)
        if (!std::isfinite(v))
            throw ValidationError("refusing to write non-finite voxel values");

    switch (dtype) {
        case NiftiDtype::uint8: check_integral_range(values, 0, 255, "uint8"); break;
        case NiftiDtype::int16: check_integral_range(values, -32768, 32767, "int16"); break;
        case NiftiDtype::int32: check_integral_range(values, -2147483648.0, 2147483647.0, "int32"); break;
        case NiftiDtype::float32:
            for (double v : values)
                if (std::fabs(v) > double(std::numeric_limits<float>::max()))
                    throw RangeError("value exceeds float32 range");
            break;
        case NiftiDtype::float64: break;
    }

    Nifti1Header h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    for (int axis = 0; axis < 3; ++axis) h.dim[axis + 1] = static_cast<std::int16_t>(geom.dims[axis]);
    for (int axis = 3; axis < 7; ++axis) h.dim[axis + 1] = 1;
    h.datatype = static_cast<std::int16_t>(dtype);
    h.bitpix = static_cast<std::int16_t>(bitpix_of(dtype));
    h.pixdim[0] = 1.0f;
    for (int axis = 0; axis < 3; ++axis) h.pixdim[axis + 1] = static_cast<float>(geom.spacing[axis]);
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.qform_code = 0;
    h.sform_code = 1;
    for (int col = 0; col < 3; ++col) {
        h.srow_x[col] = static_cast<float>(geom.direction[0][col] * geom.spacing[col]);
        h.srow_y[col] = static_cast<float>(geom.direction[1][col] * geom.spacing[col]);
        h.srow_z[col] = static_cast<float>(geom.direction[2][col] * geom.spacing[col]);
    }
    h.srow_x[3] = static_cast<float>(geom.origin[0]);
    h.srow_y[3] = static_cast<float>(geom.origin[1]);
    h.srow_z[3] = static_cast<float>(geom.origin[2]);
    std::memcpy(h.magic, "n+1", 4);

    std::vector<std::uint8_t> payload;
    switch (dtype) {
        case NiftiDtype::uint8: encode_values<std::uint8_t>(values, payload); break;
        case NiftiDtype::int16: encode_values<std::int16_t>(values, payload); break;
        case NiftiDtype::int32: encode_values<std::int32_t>(values, payload); break;
        case NiftiDtype::float32: encode_values<float>(values, payload); break;
        case NiftiDtype::float64: encode_values<double>(values, payload); break;
    }

    std::vector<std::uint8_t> bytes(352, 0);
    std::memcpy(bytes.data(), &h, sizeof(h));
    bytes.insert(bytes.end(), payload.begin(), payload.end());
    write_bytes(path, bytes);
}

} // namespace

const char* to_string(GeometrySource s) {
    switch (s) {
        case GeometrySource::sform: return "sform";
        case GeometrySource::qform: return "qform";
        case GeometrySource::pixdim: return "pixdim";
    }
    return "?";
}

const char* to_string(NiftiDtype d) {
    switch (d) {
        case NiftiDtype::uint8: return "uint8";
        case NiftiDtype::int16: return "int16";
        case NiftiDtype::int32: return "int32";
        case NiftiDtype::float32: return "float32";
        case NiftiDtype::float64: return "float64";
    }
    return "?";
}

NiftiReadResult read_nifti(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw IoError("file does not exist: " + path.string());

    auto bytes = read_file(path);
    bool gzipped = detail::looks_gzipped(bytes);
    if (gzipped)
        bytes = detail::gzip_decompress(bytes);

    if (bytes.size() < sizeof(Nifti1Header))
        throw TruncationError("file shorter than the 348-byte NIfTI-1 header");

    Nifti1Header h{};
    std::memcpy(&h, bytes.data(), sizeof(h));

    if (std::memcmp(h.magic, "n+1", 4) != 0)
        throw FormatError("missing NIfTI-1 magic \"n+1\\0\" (two-file ni1 and other formats unsupported)");

    bool swapped = false;
    if (h.sizeof_hdr != 348) {
        swap_header(h);
        swapped = true;
        if (h.sizeof_hdr != 348)
            throw FormatError("sizeof_hdr is not 348 in either byte order");
    }

    // squeeze trailing singleton dims; anything else is not a 3D volume
    int ndim = h.dim[0];
    if (ndim < 1 || ndim > 7)
        throw FormatError("dim[0] out of range 1..7");
    while (ndim > 3 && h.dim[ndim] == 1) --ndim;
    if (ndim != 3)
        throw DimensionalityError("not a 3D volume after squeezing trailing singleton dims");

    Index3 dims;
    for (int axis = 0; axis < 3; ++axis) {
        if (h.dim[axis + 1] < 1)
            throw FormatError("non-positive dimension in header");
        dims[axis] = h.dim[axis + 1];
    }

    NiftiDtype dtype;
    switch (h.datatype) {
        case 2: dtype = NiftiDtype::uint8; break;
        case 4: dtype = NiftiDtype::int16; break;
        case 8: dtype = NiftiDtype::int32; break;
        case 16: dtype = NiftiDtype::float32; break;
        case 64: dtype = NiftiDtype::float64; break;
        default:
            throw UnsupportedDtypeError("unsupported datatype code " + std::to_string(h.datatype));
    }

    Geometry geom;
    GeometrySource source;
    if (h.sform_code > 0) {
        geom = geometry_from_sform(h, dims);
        source = GeometrySource::sform;
    } else if (h.qform_code > 0) {
        geom = geometry_from_qform(h, dims);
        source = GeometrySource::qform;
    } else {
        geom = geometry_from_pixdim(h, dims);
        source = GeometrySource::pixdim;
    }
    geom.validate();

    if (!std::isfinite(h.vox_offset) || h.vox_offset < 348.0f)
        throw FormatError("invalid vox_offset");
    const auto offset = static_cast<std::size_t>(h.vox_offset);
    const std::int64_t n = geom.voxel_count();
    const std::size_t need = offset + static_cast<std::size_t>(n) * (bitpix_of(dtype) / 8);
    if (bytes.size() < need)
        throw TruncationError("voxel payload truncated");

    const double slope = (h.scl_slope != 0.0f) ? double(h.scl_slope) : 1.0;
    const double inter = (h.scl_slope != 0.0f) ? double(h.scl_inter) : 0.0;

    std::vector<double> values;
    const std::uint8_t* payload = bytes.data() + offset;
    switch (dtype) {
        case NiftiDtype::uint8: decode_values<std::uint8_t>(payload, n, swapped, slope, inter, values); break;
        case NiftiDtype::int16: decode_values<std::int16_t>(payload, n, swapped, slope, inter, values); break;
        case NiftiDtype::int32: decode_values<std::int32_t>(payload, n, swapped, slope, inter, values); break;
        case NiftiDtype::float32: decode_values<float>(payload, n, swapped, slope, inter, values); break;
        case NiftiDtype::float64: decode_values<double>(payload, n, swapped, slope, inter, values); break;
    }

    NiftiReadResult result{Volume3D(geom, std::move(values)), dtype, source, gzipped};
    return result;
}

Volume3D read_volume(const std::filesystem::path& path) {
    return read_nifti(path).volume;
}

LabelMap read_label_map(const std::filesystem::path& path) {
    auto r = read_nifti(path);
    std::vector<std::uint8_t> labels(r.volume.data.size());
    for (std::size_t v = 0; v < labels.size(); ++v) {
        const double x = r.volume.data[v];
        if (x != std::floor(x) || x < 0.0 || x > 255.0)
            throw ValidationError("label file contains values outside integer range [0, 255]");
        labels[v] = static_cast<std::uint8_t>(x);
    }
    return LabelMap(r.volume.geometry, std::move(labels));
}

void write_nifti(const Volume3D& volume, const std::filesystem::path& path, NiftiDtype dtype) {
    volume.validate();
    write_nifti_impl(volume.geometry, volume.data, path, dtype);
}

void write_nifti(const LabelMap& labels, const std::filesystem::path& path) {
    labels.validate();
    std::vector<double> values(labels.labels.begin(), labels.labels.end());
    write_nifti_impl(labels.geometry, values, path, NiftiDtype::uint8);
}

} // namespace petseg
