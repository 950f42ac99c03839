#ifndef PETSEG_SRC_GZIP_HPP
#define PETSEG_SRC_GZIP_HPP

#include <cstdint>
#include <vector>

namespace petseg::detail {

bool looks_gzipped(const std::vector<std::uint8_t>& bytes);

// Decompresses gzip or zlib streams.
std::vector<std::uint8_t> gzip_decompress(const std::vector<std::uint8_t>& bytes);

// Emits a gzip stream with MTIME fixed to zero so identical input always
// yields identical bytes.
std::vector<std::uint8_t> gzip_compress(const std::vector<std::uint8_t>& bytes);

} // namespace petseg::detail

#endif
