#include "bci/binary_io.hpp"

#include <boost/crc.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace bci::io {

std::uint64_t crc64(std::span<const std::uint8_t> data) {
    boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
    crc.process_bytes(data.data(), data.size());
    return crc.checksum();
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::SourceUnavailable, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> data) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) raise(ErrorKind::InvalidArgument, "cannot write " + tmp);
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size()));
        if (!out) raise(ErrorKind::InvalidArgument, "short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace bci::io
