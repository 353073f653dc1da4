#include "viewgrid/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace viewgrid {

namespace {

constexpr char kMagic[4] = {'V', 'G', 'R', 'D'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    write_u64(os, v);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& is) {
    std::uint64_t v = read_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, (std::uint32_t)params.size());
    for (const Parameter* p : params) {
        write_u32(os, (std::uint32_t)p->name.size());
        os.write(p->name.data(), (std::streamsize)p->name.size());
        write_u32(os, (std::uint32_t)p->value.rank());
        for (std::size_t d : p->value.shape()) write_u64(os, d);
        const double* v = p->value.data();
        for (std::size_t i = 0; i < p->value.size(); ++i) write_f64(os, v[i]);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

void load_checkpoint(const std::string& path, std::vector<Parameter*>& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint32_t version = read_u32(is);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    std::uint32_t count = read_u32(is);
    if (count != params.size())
        throw std::runtime_error("checkpoint: has " + std::to_string(count) +
                                 " tensors, model expects " + std::to_string(params.size()));

    std::unordered_map<std::string, Parameter*> by_name;
    for (Parameter* p : params) by_name[p->name] = p;

    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("checkpoint: truncated file");
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint: unknown tensor '" + name + "'");
        Parameter* p = it->second;

        std::uint32_t rank = read_u32(is);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = (std::size_t)read_u64(is);
        if (shape != p->value.shape())
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
        double* v = p->value.data();
        for (std::size_t k = 0; k < p->value.size(); ++k) v[k] = read_f64(is);
        by_name.erase(it);
    }
    if (!by_name.empty())
        throw std::runtime_error("checkpoint: missing tensor '" +
                                 by_name.begin()->first + "'");
}

}  // namespace viewgrid
