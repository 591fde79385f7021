#include "gaitma/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gaitma/errors.hpp"
#include "gaitma/tape.hpp"

namespace gaitma {

namespace {

// The build targets little-endian hosts; serialization is plain memcpy of the
// native representation.
static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

void put_u32(std::ofstream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ofstream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (in.gcount() != 4) throw FormatError(path + ": truncated checkpoint");
    return v;
}

std::uint64_t get_u64(std::ifstream& in, const std::string& path) {
    std::uint64_t v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (in.gcount() != 8) throw FormatError(path + ": truncated checkpoint");
    return v;
}

constexpr char kMagic[4] = {'G', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : entries)
        if (n == name) return &t;
    return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, ckpt.iteration);
    put_u64(out, ckpt.config_fingerprint);
    put_u32(out, static_cast<std::uint32_t>(ckpt.entries.size()));
    for (const auto& [name, tensor] : ckpt.entries) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
        for (int d = 0; d < tensor.rank(); ++d) put_u32(out, static_cast<std::uint32_t>(tensor.dim(d)));
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.size() * static_cast<std::int64_t>(sizeof(double))));
    }
    put_u32(out, static_cast<std::uint32_t>(ckpt.rng_state.size()));
    out.write(ckpt.rng_state.data(), static_cast<std::streamsize>(ckpt.rng_state.size()));
    if (!out) throw IoError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path + ": not a checkpoint file");
    std::uint32_t version = get_u32(in, path);
    if (version != kVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    ckpt.iteration = get_u64(in, path);
    ckpt.config_fingerprint = get_u64(in, path);
    std::uint32_t count = get_u32(in, path);
    ckpt.entries.reserve(count);
    for (std::uint32_t e = 0; e < count; ++e) {
        std::uint32_t name_len = get_u32(in, path);
        if (name_len > 4096) throw FormatError(path + ": implausible entry name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (in.gcount() != static_cast<std::streamsize>(name_len))
            throw FormatError(path + ": truncated checkpoint");
        std::uint32_t rank = get_u32(in, path);
        if (rank < 1 || rank > 8) throw FormatError(path + ": implausible tensor rank");
        std::vector<int> dims(rank);
        std::int64_t size = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            std::uint32_t extent = get_u32(in, path);
            if (extent == 0 || extent > (1u << 28)) throw FormatError(path + ": implausible tensor extent");
            dims[d] = static_cast<int>(extent);
            size *= extent;
        }
        Tensor t(dims);
        in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(size * 8));
        if (in.gcount() != static_cast<std::streamsize>(size * 8))
            throw FormatError(path + ": truncated checkpoint");
        ckpt.entries.emplace_back(std::move(name), std::move(t));
    }
    std::uint32_t rng_len = get_u32(in, path);
    ckpt.rng_state.resize(rng_len);
    in.read(ckpt.rng_state.data(), rng_len);
    if (in.gcount() != static_cast<std::streamsize>(rng_len)) throw FormatError(path + ": truncated checkpoint");
    return ckpt;
}

void load_parameters(const Checkpoint& ckpt, ParameterStore& store) {
    for (const auto& p : store.all()) {
        const Tensor* t = ckpt.find(p->name);
        if (t == nullptr) throw FormatError("checkpoint misses parameter " + p->name);
        if (t->dims() != p->value.dims()) throw FormatError("checkpoint dims mismatch for " + p->name);
        p->value = *t;
    }
}

}  // namespace gaitma
