#include "vfp/detail/binary_io.hpp"

#include <cstdio>

namespace vfp::detail {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) raise(ErrorCode::FileNotFound, "cannot open " + path);
    std::fseek(f, 0, SEEK_END);
    long size = std::ftell(f);
    if (size < 0) {
        std::fclose(f);
        raise(ErrorCode::FileNotFound, "cannot stat " + path);
    }
    std::fseek(f, 0, SEEK_SET);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    std::size_t got = size ? std::fread(buf.data(), 1, buf.size(), f) : 0;
    std::fclose(f);
    if (got != buf.size()) raise(ErrorCode::FileNotFound, "short read on " + path);
    return buf;
}

void write_file(const std::string& path, const void* data, std::size_t size) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) raise(ErrorCode::WriteFailed, "cannot open " + path + " for writing");
    std::size_t put = size ? std::fwrite(data, 1, size, f) : 0;
    int rc = std::fclose(f);
    if (put != size || rc != 0) raise(ErrorCode::WriteFailed, "short write on " + path);
}

}  // namespace vfp::detail
