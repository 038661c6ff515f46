#include "maniloc/fnv.hpp"

#include <fstream>
#include <vector>

#include "maniloc/errors.hpp"

namespace maniloc {

std::uint64_t fnv64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RuntimeFailure("cannot open for digest: " + path);
    Fnv64 digest;
    std::vector<char> buffer(1 << 20);
    while (in) {
        in.read(buffer.data(), std::streamsize(buffer.size()));
        digest.update(buffer.data(), std::size_t(in.gcount()));
    }
    return digest.digest();
}

}  // namespace maniloc
