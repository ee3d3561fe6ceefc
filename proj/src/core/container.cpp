#include "atomread/core/container.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace atomread {

namespace {
constexpr char kMagic[8] = {'A', 'R', 'C', 'T', 'N', 'R', '0', '1'};

void write_u64(std::ofstream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in)
        throw std::runtime_error("container truncated");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}
}  // namespace

void Container::add_blob(const std::string& name, const std::vector<double>& values) {
    std::vector<float> f(values.size());
    for (size_t i = 0; i < values.size(); ++i)
        f[i] = static_cast<float>(values[i]);
    blobs.emplace_back(name, std::move(f));
}

const std::vector<float>& Container::blob(const std::string& name) const {
    for (const auto& [n, b] : blobs)
        if (n == name)
            return b;
    throw std::runtime_error("container missing blob: " + name);
}

std::vector<double> Container::blob_as_double(const std::string& name) const {
    const auto& f = blob(name);
    return std::vector<double>(f.begin(), f.end());
}

void save_container(const Container& c, const std::string& path) {
    nlohmann::json manifest = c.manifest;
    manifest["blobs"] = nlohmann::json::array();
    for (const auto& [name, data] : c.blobs)
        manifest["blobs"].push_back({{"name", name}, {"count", data.size()}});

    const std::string m = manifest.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write container: " + path);
    out.write(kMagic, 8);
    write_u64(out, m.size());
    out.write(m.data(), static_cast<std::streamsize>(m.size()));
    for (const auto& [name, data] : c.blobs)
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out)
        throw std::runtime_error("write failed: " + path);
}

Container load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open container: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("bad container magic: " + path);

    uint64_t mlen = read_u64(in);
    std::string m(mlen, '\0');
    in.read(m.data(), static_cast<std::streamsize>(mlen));
    if (!in)
        throw std::runtime_error("container truncated: " + path);

    Container c;
    c.manifest = nlohmann::json::parse(m);
    for (const auto& entry : c.manifest.at("blobs")) {
        const std::string name = entry.at("name");
        const size_t count = entry.at("count");
        std::vector<float> data(count);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        if (!in)
            throw std::runtime_error("container blob truncated: " + name);
        c.blobs.emplace_back(name, std::move(data));
    }
    return c;
}

}  // namespace atomread
