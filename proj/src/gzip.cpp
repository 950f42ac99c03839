#include "gzip.hpp"

#include <zlib.h>

#include "petseg/errors.hpp"

namespace petseg::detail {

bool looks_gzipped(const std::vector<std::uint8_t>& bytes) {
    return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gzip_decompress(const std::vector<std::uint8_t>& bytes) {
    z_stream zs{};
    // 15 window bits + 32: auto-detect gzip/zlib wrapper
    if (inflateInit2(&zs, 15 + 32) != Z_OK)
        throw IoError("inflateInit2 failed");

    std::vector<std::uint8_t> out;
    out.reserve(bytes.size() * 4);
    std::uint8_t buffer[1 << 16];

    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());

    int rc = Z_OK;
    do {
        zs.next_out = buffer;
        zs.avail_out = sizeof(buffer);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            if (rc == Z_BUF_ERROR && zs.avail_in == 0)
                throw TruncationError("gzip stream ended prematurely");
            throw FormatError("corrupt gzip stream");
        }
        out.insert(out.end(), buffer, buffer + (sizeof(buffer) - zs.avail_out));
    } while (rc != Z_STREAM_END);

    inflateEnd(&zs);
    return out;
}

std::vector<std::uint8_t> gzip_compress(const std::vector<std::uint8_t>& bytes) {
    z_stream zs{};
    // 15 window bits + 16: gzip wrapper. With no gz_header set, zlib writes
    // MTIME=0, which keeps outputs byte-identical across reruns.
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("deflateInit2 failed");

    std::vector<std::uint8_t> out;
    out.reserve(bytes.size() / 2 + 64);
    std::uint8_t buffer[1 << 16];

    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());

    int rc = Z_OK;
    do {
        zs.next_out = buffer;
        zs.avail_out = sizeof(buffer);
        rc = deflate(&zs, Z_FINISH);
        if (rc == Z_STREAM_ERROR) {
            deflateEnd(&zs);
            throw IoError("deflate failed");
        }
        out.insert(out.end(), buffer, buffer + (sizeof(buffer) - zs.avail_out));
    } while (rc != Z_STREAM_END);

    deflateEnd(&zs);
    return out;
}

} // namespace petseg::detail
