#include "atnf/binio.hpp"

#include <fstream>

namespace atnf::io {

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path);
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<uint8_t> buf(static_cast<size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(buf.data()), size))
        throw IoError("failed reading " + path);
    return buf;
}

void write_file(const std::string& path, std::span<const uint8_t> data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace atnf::io
